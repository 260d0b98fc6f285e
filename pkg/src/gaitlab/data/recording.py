"""The Recording container: one subject's continuous multi-terrain walk."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..phase import MIN_STRIDE_SAMPLES, stride_phase_labels
from .schema import N_IMU, SAMPLE_RATE, TERRAINS


@dataclass
class Recording:
    """100 Hz multi-channel time series with exact stride/phase annotation.

    channels: [21, T] float32 IMU rows in schema order.
    terrain:  [T] int8 codes into TERRAINS.
    stride_starts: sorted sample indices of stride onsets; first is 0 and
        the final stride runs to T. All strides are >= 20 samples.
    phase / rate: [T] float64 ground-truth labels, exactly reproducible
        from stride_starts via stride_phase_labels.
    """

    subject_id: str
    channels: np.ndarray
    terrain: np.ndarray
    stride_starts: np.ndarray
    phase: np.ndarray
    rate: np.ndarray
    sample_rate: int = SAMPLE_RATE

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]

    def stride_lengths(self) -> np.ndarray:
        bounds = np.append(self.stride_starts, self.n_samples)
        return np.diff(bounds)

    def stride_of_sample(self) -> np.ndarray:
        """[T] index of the stride containing each sample."""
        return np.searchsorted(self.stride_starts, np.arange(self.n_samples), side="right") - 1

    def validate(self) -> "Recording":
        t = self.n_samples
        if self.channels.shape[0] != N_IMU:
            raise ValueError(f"expected {N_IMU} IMU rows, got {self.channels.shape[0]}")
        for name, arr in (("terrain", self.terrain), ("phase", self.phase), ("rate", self.rate)):
            if arr.shape != (t,):
                raise ValueError(f"{name} length {arr.shape} != {t} samples")
        if self.stride_starts[0] != 0 or np.any(np.diff(self.stride_starts) <= 0):
            raise ValueError("stride starts must begin at 0 and strictly increase")
        lengths = self.stride_lengths()
        if lengths.min() < MIN_STRIDE_SAMPLES:
            raise ValueError(f"stride of {lengths.min()} samples is below the "
                             f"{MIN_STRIDE_SAMPLES}-sample minimum")
        if self.terrain.min() < 0 or self.terrain.max() >= len(TERRAINS):
            raise ValueError("terrain codes out of range")
        exp_phase, exp_rate = exact_phase_labels(self.stride_starts, t)
        if not (np.array_equal(exp_phase, self.phase) and np.array_equal(exp_rate, self.rate)):
            raise ValueError("phase labels inconsistent with stride boundaries")
        return self


def exact_phase_labels(stride_starts: np.ndarray, n_samples: int) -> tuple[np.ndarray, np.ndarray]:
    """Ground-truth (phase, rate) arrays implied by stride boundaries."""
    phases = np.empty(n_samples)
    rates = np.empty(n_samples)
    bounds = np.append(np.asarray(stride_starts, dtype=np.int64), n_samples)
    for s, e in zip(bounds[:-1], bounds[1:]):
        p, r = stride_phase_labels(int(e - s))
        phases[s:e] = p
        rates[s:e] = r
    return phases, rates
