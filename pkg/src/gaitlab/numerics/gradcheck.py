"""Central finite-difference gradient checking.

The checker perturbs tensor entries one at a time with step ``h`` and
compares the numeric gradient against the analytic one using a norm-based
relative error, ||a - n|| / max(||a|| + ||n||, tiny), which is robust to
individual near-zero components. Run models in float64 when checking.
"""
from __future__ import annotations

import numpy as np

from .rng import RngStream


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    denom = max(np.linalg.norm(a) + np.linalg.norm(n), 1e-12)
    return float(np.linalg.norm(a - n) / denom)


def numeric_gradient(f, x: np.ndarray, h: float = 1e-5,
                     indices=None) -> np.ndarray:
    """Central differences of scalar f wrt x, at all or selected flat indices."""
    x = np.asarray(x)
    indices = list(range(x.size)) if indices is None else list(indices)
    g = np.zeros(len(indices))
    for out_i, i in enumerate(indices):
        multi = np.unravel_index(i, x.shape)
        orig = x[multi]
        x[multi] = orig + h
        fp = f()
        x[multi] = orig - h
        fm = f()
        x[multi] = orig
        g[out_i] = (fp - fm) / (2.0 * h)
    return g


def check_gradient(f, x: np.ndarray, analytic: np.ndarray, h: float = 1e-5,
                   max_entries: int | None = None, seed: int = 0) -> float:
    """Relative error between analytic grad of f wrt x and finite differences.

    ``f`` is a zero-argument callable returning the scalar loss for the
    current contents of ``x`` (which is perturbed in place). When
    ``max_entries`` is set, a deterministic random subset of entries is
    checked instead of every one.
    """
    analytic = np.asarray(analytic)
    if analytic.shape != x.shape:
        raise ValueError("analytic gradient shape does not match input")
    n = x.size
    if max_entries is not None and n > max_entries:
        idx = sorted(RngStream(seed).spawn("gradcheck", n).choice(n, max_entries).tolist())
    else:
        idx = list(range(n))
    numeric = numeric_gradient(f, x, h, idx)
    return relative_error(analytic.reshape(-1)[idx], numeric)
