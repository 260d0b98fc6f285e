"""Gait phase state, the polar 3-vector codec, and wrap-aware error metrics.

Phase is a fraction of the gait cycle in the half-open interval [0, 1)
(percent at external interfaces); phase rate is the per-sample increment,
the reciprocal of stride length in samples at 100 Hz. The polar encoding
[cos 2*pi*phase, sin 2*pi*phase, rate] removes the 100% -> 0% wrap
discontinuity so a regressor can be trained on it directly.

Error metrics use the minimum arc distance on the circle; the evaluator
also reports the naive (unwrapped) variant for transparency since scoring
across the wrap is convention-dependent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_STRIDE_SAMPLES = 20
RATE_MIN = 1e-4          # decode clamp: strides between 0.2 s and 100 s
RATE_MAX = 1.0 / MIN_STRIDE_SAMPLES


@dataclass(frozen=True)
class PhaseState:
    """Position within the gait cycle and its per-sample rate of advance."""

    phase: float
    rate: float

    def __post_init__(self):
        if not 0.0 <= self.phase < 1.0:
            raise ValueError(f"phase must be in [0, 1), got {self.phase}")
        if not 0.0 < self.rate <= RATE_MAX:
            raise ValueError(f"rate must be in (0, {RATE_MAX}], got {self.rate}")


def stride_phase_labels(stride_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact per-sample (phase, rate) labels for one stride of L samples.

    Sample n gets phase n/L and rate 1/L; the last sample is (L-1)/L, so
    1.0 never appears and phase resets to 0 at the next stride start.
    """
    if stride_len < MIN_STRIDE_SAMPLES:
        raise ValueError(f"stride of {stride_len} samples is below the "
                         f"{MIN_STRIDE_SAMPLES}-sample minimum")
    phases = np.arange(stride_len, dtype=np.float64) / stride_len
    rates = np.full(stride_len, 1.0 / stride_len)
    return phases, rates


def encode_polar(state: PhaseState) -> np.ndarray:
    """[cos 2*pi*phase, sin 2*pi*phase, rate] for one state."""
    a = 2.0 * math.pi * state.phase
    return np.array([math.cos(a), math.sin(a), state.rate])


def encode_polar_series(phases: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """Vectorized encoding: [N] phases + [N] rates -> [N, 3]."""
    a = 2.0 * np.pi * np.asarray(phases, dtype=np.float64)
    return np.stack([np.cos(a), np.sin(a), np.asarray(rates, dtype=np.float64)], axis=-1)


def decode_polar(g: np.ndarray) -> PhaseState:
    """Invert the polar encoding, robust to non-unit-norm model outputs.

    Phase comes from atan2 (scale invariant); rate is clamped into
    [RATE_MIN, RATE_MAX] to protect downstream consumers from degenerate
    regressor outputs.
    """
    g = np.asarray(g, dtype=np.float64)
    if g[0] == 0.0 and g[1] == 0.0:
        raise ValueError("cannot decode phase from a zero cos/sin pair")
    phase = math.atan2(g[1], g[0]) / (2.0 * math.pi) % 1.0
    rate = min(max(float(g[2]), RATE_MIN), RATE_MAX)
    return PhaseState(phase, rate)


def decode_polar_series(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized decode: [N, 3] -> ([N] phases, [N] clamped rates)."""
    g = np.asarray(g, dtype=np.float64)
    if np.any((g[:, 0] == 0.0) & (g[:, 1] == 0.0)):
        raise ValueError("cannot decode phase from a zero cos/sin pair")
    phases = np.arctan2(g[:, 1], g[:, 0]) / (2.0 * np.pi) % 1.0
    rates = np.clip(g[:, 2], RATE_MIN, RATE_MAX)
    return phases, rates


def circular_error(a, b):
    """Minimum arc distance between phases on the unit cycle, in [0, 0.5]."""
    d = np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))
    out = np.minimum(d, 1.0 - d)
    return float(out) if out.ndim == 0 else out


def phase_rmse(pred_phases, true_phases) -> float:
    """Wrap-aware phase RMSE in percent of the gait cycle."""
    pred = np.asarray(pred_phases, dtype=np.float64)
    true = np.asarray(true_phases, dtype=np.float64)
    if pred.shape != true.shape:
        raise ValueError("phase sequences differ in length")
    if pred.size == 0:
        raise ValueError("cannot score empty sequences")
    err = circular_error(pred, true)
    return float(np.sqrt(np.mean(err * err)) * 100.0)


def phase_rmse_naive(pred_phases, true_phases) -> float:
    """Phase RMSE in percent without wrap handling (for reporting only)."""
    pred = np.asarray(pred_phases, dtype=np.float64)
    true = np.asarray(true_phases, dtype=np.float64)
    if pred.size == 0:
        raise ValueError("cannot score empty sequences")
    return float(np.sqrt(np.mean((pred - true) ** 2)) * 100.0)


def rate_mae(pred_rates, true_rates) -> float:
    """Mean absolute phase-rate error in percent per sample."""
    pred = np.asarray(pred_rates, dtype=np.float64)
    true = np.asarray(true_rates, dtype=np.float64)
    if pred.shape != true.shape:
        raise ValueError("rate sequences differ in length")
    if pred.size == 0:
        raise ValueError("cannot score empty sequences")
    return float(np.mean(np.abs(pred - true)) * 100.0)
