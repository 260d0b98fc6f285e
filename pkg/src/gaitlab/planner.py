"""Real-time trajectory planning loop.

Per 100 Hz sample: decode the estimator's polar output to (phase, rate),
check for a gait event (phase wrap), swap the active terrain template at
events, propagate the phase one sample ahead, and interpolate the target
joint angle from the active template. The loop is strictly streaming -
output at sample n depends only on inputs up to n - and each step's
wall-clock latency is recorded against the 10 ms deadline.

Raw event rule: an event fires when the decoded phase is exactly 0, or
when it wraps from above 97% to below 3%. A 20-sample refractory window
(0.2 s, well under any plausible stride) suppresses double fires on noisy
estimates near the wrap.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .phase import PhaseState, RATE_MAX, decode_polar

TEMPLATE_KNOTS = 101          # phase grid 0.00, 0.01, ..., 1.00
REFRACTORY_SAMPLES = 20
DEADLINE_MS = 10.0
INIT_EVENTS = 2               # events observed before targets are emitted


class PlannerNotReady(RuntimeError):
    """step() was called before the initial strides were observed."""


@dataclass
class TrajectoryTemplate:
    """Terrain-specific joint angle curve sampled on the 101-knot phase grid."""

    terrain: str
    knots: np.ndarray

    def __post_init__(self):
        self.knots = np.asarray(self.knots, dtype=np.float64)
        if self.knots.shape != (TEMPLATE_KNOTS,):
            raise ValueError(f"template needs {TEMPLATE_KNOTS} knots, got {self.knots.shape}")
        if not np.all(np.isfinite(self.knots)):
            raise ValueError("template contains non-finite values")
        if self.knots[0] != self.knots[-1]:
            raise ValueError("template endpoints must match (periodic curve)")
        if np.max(np.abs(self.knots)) > 90.0:
            raise ValueError("template angles exceed +/-90 degrees")

    @classmethod
    def from_function(cls, terrain: str, f) -> "TrajectoryTemplate":
        phi = np.linspace(0.0, 1.0, TEMPLATE_KNOTS)
        knots = np.asarray([f(p % 1.0) for p in phi], dtype=np.float64)
        knots[-1] = knots[0]
        return cls(terrain, knots)


def load_templates(path) -> dict[str, TrajectoryTemplate]:
    with Path(path).open() as fh:
        raw = json.load(fh)
    return {name: TrajectoryTemplate(name, np.asarray(vals)) for name, vals in raw.items()}


def save_templates(templates: dict[str, TrajectoryTemplate], path) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        json.dump({name: t.knots.tolist() for name, t in sorted(templates.items())}, fh, indent=1)
        fh.write("\n")
    return path


def detect_gait_event(prev_phase: float | None, curr_phase: float) -> bool:
    """Raw wrap rule, no refractory: exact zero, or >97% followed by <3%."""
    if curr_phase == 0.0:
        return True
    if prev_phase is None:
        return False
    return prev_phase > 0.97 and curr_phase < 0.03


def propagate_phase(state: PhaseState) -> float:
    """Next-sample phase prediction: (phase + rate) mod 1, rate pre-clamped."""
    return (state.phase + min(state.rate, RATE_MAX)) % 1.0


def target_angle(template: TrajectoryTemplate, phase: float) -> float:
    """Linear interpolation between the surrounding knots, periodic in phase."""
    if not 0.0 <= phase < 1.0:
        raise ValueError(f"phase must be in [0, 1), got {phase}")
    pos = phase * (TEMPLATE_KNOTS - 1)
    lo = int(math.floor(pos))
    frac = pos - lo
    hi = lo + 1          # knots[100] == knots[0] keeps the wrap continuous
    k = template.knots
    return float(k[lo] + frac * (k[hi] - k[lo]))


@dataclass
class PlanStep:
    phase: float
    rate: float
    event: bool
    target_deg: float | None
    latency_ms: float


@dataclass
class PlannerState:
    """Streaming planner over one gait stream."""

    templates: dict[str, TrajectoryTemplate]
    deadline_ms: float = DEADLINE_MS
    refractory: int = REFRACTORY_SAMPLES
    samples_seen: int = 0
    events: list[int] = field(default_factory=list)
    active: TrajectoryTemplate | None = None
    _prev_phase: float | None = None

    @property
    def initialized(self) -> bool:
        return len(self.events) >= INIT_EVENTS and self.active is not None

    def feed(self, g: np.ndarray, terrain: str) -> PlanStep:
        """Consume one estimator output; target is None until two events
        (the initial strides) have been observed."""
        t0 = time.perf_counter()
        state = decode_polar(g)
        event = detect_gait_event(self._prev_phase, state.phase)
        if event and self.events and self.samples_seen - self.events[-1] < self.refractory:
            event = False
        if event:
            self.events.append(self.samples_seen)
            tpl = self.templates.get(terrain)
            if tpl is None:
                raise KeyError(f"no trajectory template for terrain {terrain!r}")
            self.active = tpl
        target = None
        if self.initialized:
            target = target_angle(self.active, propagate_phase(state))
        self._prev_phase = state.phase
        self.samples_seen += 1
        return PlanStep(phase=state.phase, rate=state.rate, event=event,
                        target_deg=target,
                        latency_ms=(time.perf_counter() - t0) * 1e3)

    def step(self, g: np.ndarray, terrain: str) -> PlanStep:
        """Like feed(), but requires the planner to be initialized."""
        if not self.initialized:
            raise PlannerNotReady(
                f"planner needs {INIT_EVENTS} observed gait events before stepping")
        return self.feed(g, terrain)


def templates_from_generator(gen_cfg) -> dict[str, TrajectoryTemplate]:
    """Thigh trajectory templates matching the synthetic generator's
    nominal terrain curves (unit amplitude, zero subject offset)."""
    from .data.generator import terrain_angle_curve
    from .data.schema import TERRAINS

    out = {}
    for terrain in TERRAINS:
        out[terrain] = TrajectoryTemplate.from_function(
            terrain, lambda p, t=terrain: float(terrain_angle_curve(gen_cfg, t, "thigh",
                                                                    np.asarray([p]))[0]))
    return out


# ---------------------------------------------------------------------------
# tracking metrics
# ---------------------------------------------------------------------------

def track_metrics(planned, measured) -> dict:
    """Tracking RMSE in degrees and the Pearson correlation coefficient."""
    planned = np.asarray(planned, dtype=np.float64)
    measured = np.asarray(measured, dtype=np.float64)
    if planned.shape != measured.shape:
        raise ValueError("planned and measured sequences differ in length")
    if planned.size < 2:
        raise ValueError("need at least 2 samples")
    if np.std(measured) == 0.0:
        raise ValueError("PCC undefined for a constant measured sequence")
    if np.std(planned) == 0.0:
        raise ValueError("PCC undefined for a constant planned sequence")
    rmse = float(np.sqrt(np.mean((planned - measured) ** 2)))
    pc = (planned - planned.mean()) / planned.std()
    mc = (measured - measured.mean()) / measured.std()
    pcc = float(np.mean(pc * mc))
    return {"rmse_deg": rmse, "pcc": pcc}


# ---------------------------------------------------------------------------
# latency benchmark
# ---------------------------------------------------------------------------

@dataclass
class LatencyReport:
    median_ms: float
    p99_ms: float
    deadline_misses: int
    n_samples: int
    deadline_ms: float = DEADLINE_MS

    def to_json(self) -> dict:
        return dict(self.__dict__)


def latency_bench(model, norm_stats, rec, templates: dict[str, TrajectoryTemplate],
                  n_samples: int = 1000, warmup: int = 100,
                  deadline_ms: float = DEADLINE_MS) -> LatencyReport:
    """End-to-end per-sample latency: window assembly + forward + decode + plan.

    Streams the given recording through a ring buffer one sample at a
    time on the monotonic clock; the first ``warmup`` timed samples are
    discarded.
    """
    from .data.schema import N_IMU, TERRAINS
    from .data.windows import apply_norm

    lb = model.cfg.window_len
    c = model.cfg.n_channels
    need = warmup + n_samples + lb
    if rec.n_samples < need:
        raise ValueError(f"recording too short: {rec.n_samples} < {need} samples")
    chan = apply_norm(rec.channels, norm_stats)
    planner = PlannerState(templates, deadline_ms=deadline_ms)
    window = np.zeros((1, c, lb), dtype=np.float32)
    window[0, :N_IMU] = chan[:, :lb]

    lat = []
    for i in range(warmup + n_samples):
        n = lb + i
        t0 = time.perf_counter()
        window[0, :N_IMU, :-1] = window[0, :N_IMU, 1:]
        window[0, :N_IMU, -1] = chan[:, n]
        g = model.forward(window, training=False)[0]
        planner.feed(g, TERRAINS[rec.terrain[n]])
        lat.append((time.perf_counter() - t0) * 1e3)
    timed = np.asarray(lat[warmup:])
    return LatencyReport(
        median_ms=float(np.median(timed)),
        p99_ms=float(np.percentile(timed, 99)),
        deadline_misses=int(np.sum(timed > deadline_ms)),
        n_samples=n_samples,
        deadline_ms=deadline_ms,
    )
