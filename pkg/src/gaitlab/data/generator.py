"""Synthetic multi-terrain gait synthesis with exact phase labels.

The generator is a parametric stand-in for real walking data: per-terrain
sagittal angle curves are truncated Fourier series in gait phase,
theta(phi) = a0 + sum_k a_k sin(2*pi*k*phi + psi_k), sampled stride by
stride. The right thigh runs half a cycle out of phase with the left.
Gyro pitch-axis rows are the analytic time derivative of the pitch rows;
accelerometer rows are gravity projected through the pitch angle plus a
lever-arm term in the angular derivatives; white Gaussian noise is added
per channel group. Biomechanical fidelity is explicitly not a goal - the
point is a controllable signal family whose phase labels are exact.

All parameters live in a JSON-serializable GeneratorConfig so datasets
are reproducible from (config, subject, seed) alone.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..numerics.rng import RngStream
from .recording import Recording, exact_phase_labels
from .schema import (
    ACC_LONG_ROWS,
    ACC_VERT_ROWS,
    GYRO_PITCH_ROWS,
    N_IMU,
    PITCH_ROWS,
    SAMPLE_RATE,
    TERRAINS,
)

GRAVITY = 9.81

# Fourier coefficients in degrees: [a0, a1, a2, a3] and phase offsets
# psi_1..3 in degrees. Values are hand-tuned to be mutually distinct per
# terrain (stairs exaggerated, slopes offset) rather than anthropometric.
DEFAULT_TEMPLATES = {
    "LW":  {"thigh":  [8.0, 22.0, 7.0, 2.0],  "thigh_psi":  [85.0, 260.0, 50.0],
            "pelvis": [4.0, 2.5, 1.0, 0.4],   "pelvis_psi": [10.0, 120.0, 200.0]},
    "SA":  {"thigh":  [18.0, 28.0, 9.0, 3.0], "thigh_psi":  [95.0, 280.0, 70.0],
            "pelvis": [10.0, 3.0, 1.2, 0.5],  "pelvis_psi": [20.0, 140.0, 220.0]},
    "SD":  {"thigh":  [10.0, 24.0, 10.0, 4.0], "thigh_psi": [70.0, 240.0, 30.0],
            "pelvis": [2.0, 2.0, 0.8, 0.3],   "pelvis_psi": [0.0, 100.0, 180.0]},
    "SLA": {"thigh":  [12.0, 24.0, 7.5, 2.2], "thigh_psi":  [90.0, 265.0, 55.0],
            "pelvis": [8.0, 2.8, 1.1, 0.4],   "pelvis_psi": [15.0, 130.0, 210.0]},
    "SLD": {"thigh":  [5.0, 20.0, 8.0, 3.0],  "thigh_psi":  [78.0, 250.0, 40.0],
            "pelvis": [0.0, 2.2, 0.9, 0.35],  "pelvis_psi": [5.0, 110.0, 190.0]},
}


@dataclass
class GeneratorConfig:
    version: int = 1
    duration_s: float = 30.0
    stride_len_range: tuple[int, int] = (80, 120)
    dwell_strides: tuple[int, int] = (3, 6)
    noise_std: dict = field(default_factory=lambda: {"acc": 0.08, "gyr": 0.03, "pitch": 0.01})
    subject_amp_range: tuple[float, float] = (0.85, 1.15)
    subject_offset_deg: float = 3.0
    lever_arm_m: dict = field(default_factory=lambda: {"thigh": 0.12, "pelvis": 0.05})
    templates_deg: dict = field(default_factory=lambda: json.loads(json.dumps(DEFAULT_TEMPLATES)))

    def validate(self) -> "GeneratorConfig":
        lo, hi = self.stride_len_range
        if lo < 20 or hi < lo:
            raise ValueError(f"invalid stride length range {self.stride_len_range}")
        if self.dwell_strides[0] < 3 or self.dwell_strides[1] < self.dwell_strides[0]:
            raise ValueError("terrain dwell must be at least 3 strides")
        if any(v < 0 for v in self.noise_std.values()):
            raise ValueError("noise std must be >= 0")
        missing = [t for t in TERRAINS if t not in self.templates_deg]
        if missing:
            raise ValueError(f"templates missing for terrains {missing}")
        return self

    def to_json(self) -> dict:
        d = asdict(self)
        d["stride_len_range"] = list(self.stride_len_range)
        d["dwell_strides"] = list(self.dwell_strides)
        d["subject_amp_range"] = list(self.subject_amp_range)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "GeneratorConfig":
        d = dict(d)
        for key in ("stride_len_range", "dwell_strides", "subject_amp_range"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d).validate()


def _fourier(coeffs, psi_deg, phi, amp_scale=1.0, offset=0.0):
    """theta(phi) and its first two derivatives wrt phi, in degrees."""
    a0 = coeffs[0] + offset
    theta = np.full_like(phi, a0)
    dtheta = np.zeros_like(phi)
    d2theta = np.zeros_like(phi)
    for k, (a, psi) in enumerate(zip(coeffs[1:], psi_deg), start=1):
        w = 2.0 * np.pi * k
        arg = w * phi + np.deg2rad(psi)
        theta += amp_scale * a * np.sin(arg)
        dtheta += amp_scale * a * w * np.cos(arg)
        d2theta -= amp_scale * a * w * w * np.sin(arg)
    return theta, dtheta, d2theta


def terrain_angle_curve(cfg: GeneratorConfig, terrain: str, segment: str,
                        phi: np.ndarray) -> np.ndarray:
    """Nominal angle-vs-phase curve in degrees (no subject scaling/noise)."""
    tpl = cfg.templates_deg[terrain]
    theta, _, _ = _fourier(tpl[segment], tpl[f"{segment}_psi"], np.asarray(phi, dtype=np.float64))
    return theta


def synthesize_recording(cfg: GeneratorConfig, subject_id: str, seed: int) -> Recording:
    """Deterministically synthesize one subject's recording."""
    cfg.validate()
    rng = RngStream(seed).spawn("gen", subject_id)
    fs = SAMPLE_RATE

    amp = rng.uniform(*cfg.subject_amp_range)
    offset = rng.uniform(-cfg.subject_offset_deg, cfg.subject_offset_deg)

    # terrain random walk in whole strides, with minimum dwell
    target = int(round(cfg.duration_s * fs))
    stride_lens: list[int] = []
    stride_terrain: list[int] = []
    total = 0
    terrain = int(rng.integers(0, len(TERRAINS)))
    while total < target:
        dwell = int(rng.integers(cfg.dwell_strides[0], cfg.dwell_strides[1] + 1))
        for _ in range(dwell):
            length = int(rng.integers(cfg.stride_len_range[0], cfg.stride_len_range[1] + 1))
            stride_lens.append(length)
            stride_terrain.append(terrain)
            total += length
        step = int(rng.integers(1, len(TERRAINS)))      # never stay in place
        terrain = (terrain + step) % len(TERRAINS)

    n = total
    stride_starts = np.concatenate([[0], np.cumsum(stride_lens)[:-1]]).astype(np.int64)
    phase, rate = exact_phase_labels(stride_starts, n)
    terrain_per_sample = np.repeat(np.asarray(stride_terrain, dtype=np.int8), stride_lens)

    channels = np.zeros((N_IMU, n))
    segments = {"L": ("thigh", 0.0), "R": ("thigh", 0.5), "P": ("pelvis", 0.0)}
    for start, length, terr in zip(stride_starts, stride_lens, stride_terrain):
        sl = slice(start, start + length)
        phi = phase[sl]
        dphi_dt = fs / length                           # cycles per second
        tpl = cfg.templates_deg[TERRAINS[terr]]
        for site, (seg, shift) in segments.items():
            phi_s = (phi + shift) % 1.0
            th, dth, d2th = _fourier(tpl[seg], tpl[f"{seg}_psi"], phi_s, amp, offset)
            th_r = np.deg2rad(th)
            om = np.deg2rad(dth) * dphi_dt              # rad/s
            al = np.deg2rad(d2th) * dphi_dt ** 2        # rad/s^2
            lever = cfg.lever_arm_m[seg]
            channels[PITCH_ROWS[site], sl] = th_r
            channels[GYRO_PITCH_ROWS[site], sl] = om
            channels[ACC_LONG_ROWS[site], sl] = GRAVITY * np.sin(th_r) + lever * al
            channels[ACC_VERT_ROWS[site], sl] = GRAVITY * np.cos(th_r) + lever * om ** 2

    noise = cfg.noise_std
    if any(noise.get(k, 0.0) > 0 for k in ("acc", "gyr", "pitch")):
        group_std = np.empty(N_IMU)
        for i, name in enumerate(_channel_groups()):
            group_std[i] = noise.get(name, 0.0)
        channels += rng.normal(size=(N_IMU, n)) * group_std[:, None]

    return Recording(
        subject_id=subject_id,
        channels=channels.astype(np.float32),
        terrain=terrain_per_sample,
        stride_starts=stride_starts,
        phase=phase,
        rate=rate,
    ).validate()


def _channel_groups():
    """Noise group name per IMU row, in schema order."""
    groups = []
    for _ in ("L", "R", "P"):
        groups.extend(["acc", "acc", "acc", "gyr", "gyr", "gyr", "pitch"])
    return groups
