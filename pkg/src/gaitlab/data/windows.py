"""Sliding windows, normalization statistics, channel masking, CV splits.

A window is the model's unit of work: [C, L] float32 with the polar phase
state at its last sample as the target. Rows 21-23 carry the true phase
series during pre-training ("truth"), zeros during fine-tuning and
inference ("zeros"), or are absent entirely for the IMU-only pre-training
variant ("none").
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numerics.rng import RngStream
from ..phase import encode_polar_series
from .recording import Recording
from .schema import N_IMU, N_TOTAL, TERRAINS

PHASE_ROW_MODES = ("truth", "zeros", "none")


@dataclass
class NormStats:
    """Per-IMU-channel z-score statistics fitted on the training split only."""

    mean: np.ndarray   # [21]
    std: np.ndarray    # [21], floored at 1e-8

    def to_json(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "NormStats":
        return cls(np.asarray(d["mean"], dtype=np.float64),
                   np.asarray(d["std"], dtype=np.float64))


def fit_norm_stats(recordings: list[Recording]) -> NormStats:
    if not recordings:
        raise ValueError("cannot fit normalization on an empty training split")
    total = sum(r.n_samples for r in recordings)
    mean = np.zeros(N_IMU)
    for r in recordings:
        mean += r.channels.astype(np.float64).sum(axis=1)
    mean /= total
    var = np.zeros(N_IMU)
    for r in recordings:
        var += ((r.channels.astype(np.float64) - mean[:, None]) ** 2).sum(axis=1)
    var /= total
    return NormStats(mean=mean, std=np.maximum(np.sqrt(var), 1e-8))


def apply_norm(channels: np.ndarray, stats: NormStats) -> np.ndarray:
    """Z-score the 21 IMU rows; phase rows (if present) pass through."""
    out = np.array(channels, dtype=np.float32, copy=True)
    mean = stats.mean.astype(np.float32)[:, None]
    std = stats.std.astype(np.float32)[:, None]
    out[:N_IMU] = (out[:N_IMU] - mean) / std
    return out


@dataclass
class Window:
    x: np.ndarray          # [C, L] float32
    target: np.ndarray     # [3] float64 polar phase state at the last sample
    subject_id: str
    terrain_tag: str
    end_sample: int


def window_count(n_samples: int, window_len: int, stride: int) -> int:
    if n_samples < window_len:
        raise ValueError(f"recording of {n_samples} samples shorter than window {window_len}")
    if stride < 1:
        raise ValueError("window stride must be >= 1")
    return (n_samples - window_len) // stride + 1


def build_windows(rec: Recording, window_len: int, stride: int = 1,
                  phase_rows: str = "zeros", stats: NormStats | None = None) -> list[Window]:
    """Materialize sliding windows over one recording.

    Window i covers samples [i*stride, i*stride + L) and is labelled with
    the phase state at its last sample. IMU rows are normalized when
    ``stats`` is given; phase rows are never normalized.
    """
    if phase_rows not in PHASE_ROW_MODES:
        raise ValueError(f"phase_rows must be one of {PHASE_ROW_MODES}")
    count = window_count(rec.n_samples, window_len, stride)
    chan = apply_norm(rec.channels, stats) if stats is not None else rec.channels.astype(np.float32)
    polar = encode_polar_series(rec.phase, rec.rate)          # [T, 3]
    tags = window_terrain_tags(rec, window_len, stride)
    n_rows = N_IMU if phase_rows == "none" else N_TOTAL

    out = []
    for i in range(count):
        start = i * stride
        end = start + window_len
        x = np.zeros((n_rows, window_len), dtype=np.float32)
        x[:N_IMU] = chan[:, start:end]
        if phase_rows == "truth":
            x[N_IMU:] = polar[start:end].T.astype(np.float32)
        out.append(Window(
            x=x,
            target=polar[end - 1].copy(),
            subject_id=rec.subject_id,
            terrain_tag=tags[i],
            end_sample=end - 1,
        ))
    return out


def stack_windows(windows: list[Window]) -> tuple[np.ndarray, np.ndarray]:
    """Batch a window list into (X [N, C, L] float32, Y [N, 3] float32)."""
    x = np.stack([w.x for w in windows]).astype(np.float32)
    y = np.stack([w.target for w in windows]).astype(np.float32)
    return x, y


# ---------------------------------------------------------------------------
# terrain tags
# ---------------------------------------------------------------------------

def window_terrain_tags(rec: Recording, window_len: int, stride: int = 1) -> list[str]:
    """Stable/transition tag per window.

    A window is a transition iff its samples span more than one terrain
    label or its last sample lies within one stride length of a terrain
    change; otherwise it is "stable:<terrain>". Transition tags name the
    surrounding pair, e.g. "transition:LW>SA".
    """
    count = window_count(rec.n_samples, window_len, stride)
    terr = rec.terrain
    changes = np.nonzero(np.diff(terr) != 0)[0] + 1   # first sample of the new terrain
    stride_len = rec.stride_lengths()[rec.stride_of_sample()]

    tags = []
    for i in range(count):
        start = i * stride
        end_ = start + window_len - 1
        inside = changes[(changes > start) & (changes <= end_)]
        near = None
        if inside.size:
            near = inside[-1]
        elif changes.size:
            dist = np.abs(changes - end_)
            j = int(np.argmin(dist))
            if dist[j] <= stride_len[end_]:
                near = changes[j]
        if near is None:
            tags.append(f"stable:{TERRAINS[terr[end_]]}")
        else:
            frm = TERRAINS[terr[near - 1]]
            to = TERRAINS[terr[near]]
            tags.append(f"transition:{frm}>{to}")
    return tags


# ---------------------------------------------------------------------------
# channel masking
# ---------------------------------------------------------------------------

@dataclass
class MaskSpec:
    """Which parts of a window were zeroed for masked reconstruction."""

    channels: np.ndarray                       # sorted masked channel indices
    blocks: np.ndarray | None = None           # [(channel, block)] rows for 2-D masking
    block_len: int | None = None


def masked_channel_count(n_channels: int, mask_ratio: float) -> int:
    """round(C * M_R) with a minimum of one channel."""
    if not 0.0 < mask_ratio < 1.0:
        raise ValueError(f"mask ratio must be in (0, 1), got {mask_ratio}")
    return max(1, int(np.floor(n_channels * mask_ratio + 0.5)))


def apply_channel_mask(x: np.ndarray, mask_ratio: float, rng: RngStream) -> tuple[np.ndarray, MaskSpec]:
    """Zero round(C*M_R) whole channels chosen uniformly without replacement."""
    c = x.shape[0]
    k = masked_channel_count(c, mask_ratio)
    chosen = np.sort(rng.choice(c, k))
    out = x.copy()
    out[chosen] = 0
    return out, MaskSpec(channels=chosen)


def apply_2d_mask(x: np.ndarray, mask_ratio: float, block_len: int,
                  rng: RngStream) -> tuple[np.ndarray, MaskSpec]:
    """Zero (channel, time-block) cells instead of whole channels."""
    c, length = x.shape
    if block_len < 1 or length % block_len != 0:
        raise ValueError(f"block length {block_len} must divide window length {length}")
    n_blocks = length // block_len
    total = c * n_blocks
    k = max(1, int(np.floor(total * mask_ratio + 0.5)))
    flat = np.sort(rng.choice(total, k))
    rows = flat // n_blocks
    cols = flat % n_blocks
    out = x.copy()
    for r, b in zip(rows, cols):
        out[r, b * block_len:(b + 1) * block_len] = 0
    return out, MaskSpec(channels=np.unique(rows), blocks=np.stack([rows, cols], axis=1),
                         block_len=block_len)


def batch_channel_masks(n_items: int, n_channels: int, mask_ratio: float,
                        rng: RngStream) -> np.ndarray:
    """Independent per-sample masks as a boolean [N, C] array (True = masked)."""
    k = masked_channel_count(n_channels, mask_ratio)
    mask = np.zeros((n_items, n_channels), dtype=bool)
    for i in range(n_items):
        mask[i, rng.choice(n_channels, k)] = True
    return mask


def batch_block_masks(n_items: int, n_channels: int, window_len: int, block_len: int,
                      mask_ratio: float, rng: RngStream) -> np.ndarray:
    """Independent per-sample block masks as boolean [N, C, n_blocks]."""
    if window_len % block_len != 0:
        raise ValueError(f"block length {block_len} must divide window length {window_len}")
    n_blocks = window_len // block_len
    total = n_channels * n_blocks
    k = max(1, int(np.floor(total * mask_ratio + 0.5)))
    mask = np.zeros((n_items, total), dtype=bool)
    for i in range(n_items):
        mask[i, rng.choice(total, k)] = True
    return mask.reshape(n_items, n_channels, n_blocks)


# ---------------------------------------------------------------------------
# cross-validation splits
# ---------------------------------------------------------------------------

@dataclass
class Fold:
    train: list[str]
    val: list[str]
    test: list[str]


def loocv_splits(subject_ids: list[str], n_folds: int = 5) -> list[Fold]:
    """Deterministic subject-level rotation into (train, val, test) folds.

    Subjects are partitioned into ``n_folds`` near-even test groups in
    input order; fold i tests group i, validates on the first subject of
    the next group, and trains on the rest. Every subject appears in a
    test set exactly once. With 10 subjects this gives the 7/1/2 split.
    """
    n = len(subject_ids)
    if n < n_folds:
        raise ValueError(f"need at least {n_folds} subjects, got {n}")
    if len(set(subject_ids)) != n:
        raise ValueError("duplicate subject ids")
    base, extra = divmod(n, n_folds)
    groups = []
    pos = 0
    for i in range(n_folds):
        size = base + (1 if i < extra else 0)
        groups.append(list(subject_ids[pos:pos + size]))
        pos += size
    folds = []
    for i in range(n_folds):
        test = groups[i]
        val = [groups[(i + 1) % n_folds][0]]
        held = set(test) | set(val)
        train = [s for s in subject_ids if s not in held]
        folds.append(Fold(train=train, val=val, test=test))
    return folds
