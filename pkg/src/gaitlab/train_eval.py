"""Fine-tuning, held-out-subject evaluation, and paired significance tests.

Evaluation is strictly causal: the estimate at sample n comes from the
window ending at n (stride 1), decoded back to (phase, rate) and scored
with wrap-aware phase RMSE and rate MAE, grouped by subject and terrain
tag. Metrics are aggregated per-subject-then-mean (matching subject-wise
significance testing); pooled-over-samples values are reported alongside.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data.recording import Recording
from .data.windows import (
    NormStats,
    apply_norm,
    build_windows,
    fit_norm_stats,
    loocv_splits,
    stack_windows,
    window_terrain_tags,
)
from .fitting import FitConfig, FitResult, fit
from .model.checkpoint import save_checkpoint
from .model.config import TctstConfig
from .model.patchtst import PatchTstModel
from .model.tctst import TctstModel
from .numerics import ops
from .numerics.rng import RngStream
from .phase import decode_polar_series, phase_rmse, phase_rmse_naive, rate_mae
from .pretrain import PretrainConfig, pretrain_run, transfer_weights


# ---------------------------------------------------------------------------
# fine-tuning
# ---------------------------------------------------------------------------

@dataclass
class FinetuneResult:
    model: TctstModel
    norm_stats: NormStats
    fit: FitResult
    checkpoint_dir: Path | None


def finetune(model, train_recs: list[Recording], val_recs: list[Recording],
             fit_cfg: FitConfig, seed: int, window_stride: int = 1,
             stats: NormStats | None = None, out_dir=None) -> FinetuneResult:
    """Train the estimator on zero-padded-phase windows with the MSE loss."""
    if stats is None:
        stats = fit_norm_stats(train_recs)
    mode = "zeros" if model.cfg.n_channels > 21 else "none"

    def windows_of(recs):
        xs, ys = [], []
        for rec in recs:
            ws = build_windows(rec, model.cfg.window_len, window_stride, mode, stats)
            x, y = stack_windows(ws)
            xs.append(x)
            ys.append(y)
        return np.concatenate(xs), np.concatenate(ys)

    x_train, y_train = windows_of(train_recs)
    x_val, y_val = windows_of(val_recs)

    def train_batch(idx):
        pred = model.forward(x_train[idx], training=True)
        loss, diff = ops.mse_forward(pred, y_train[idx].astype(pred.dtype))
        model.backward(ops.mse_backward(diff))
        return loss

    def val_loss():
        total = 0.0
        n = x_val.shape[0]
        for start in range(0, n, fit_cfg.batch_size):
            sl = slice(start, min(start + fit_cfg.batch_size, n))
            pred = model.forward(x_val[sl], training=False)
            loss, _ = ops.mse_forward(pred, y_val[sl].astype(pred.dtype))
            total += loss * (sl.stop - sl.start)
        return total / n

    log_path = Path(out_dir) / "train_log.jsonl" if out_dir else None
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    result = fit(model, x_train.shape[0], train_batch, val_loss, fit_cfg,
                 RngStream(seed).spawn("finetune", "shuffle"), log_path)

    ckpt_dir = None
    if out_dir:
        ckpt_dir = save_checkpoint(Path(out_dir) / "checkpoint", model, stats,
                                   extra={"best_epoch": result.best_epoch,
                                          "best_val": result.best_val})
    return FinetuneResult(model=model, norm_stats=stats, fit=result, checkpoint_dir=ckpt_dir)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def predict_recording(model, rec: Recording, stats: NormStats,
                      batch_size: int = 256) -> np.ndarray:
    """Causal per-sample estimates: [T - L + 1, 3] for windows ending at
    samples L-1 .. T-1. Phase rows, when the model expects them, are zero."""
    lb = model.cfg.window_len
    c = model.cfg.n_channels
    chan = apply_norm(rec.channels, stats)
    view = np.lib.stride_tricks.sliding_window_view(chan, lb, axis=1)  # [21, N, L]
    n = view.shape[1]
    outs = []
    for start in range(0, n, batch_size):
        stop = min(start + batch_size, n)
        batch = np.zeros((stop - start, c, lb), dtype=np.float32)
        batch[:, :21] = view[:, start:stop].transpose(1, 0, 2)
        outs.append(model.forward(batch, training=False))
    return np.concatenate(outs).astype(np.float64)


def _group_metrics(pred_phase, pred_rate, true_phase, true_rate) -> dict:
    return {
        "phase_rmse": phase_rmse(pred_phase, true_phase),
        "phase_rmse_naive": phase_rmse_naive(pred_phase, true_phase),
        "rate_mae": rate_mae(pred_rate, true_rate),
        "n": int(len(pred_phase)),
    }


@dataclass
class RunResult:
    """Per-subject, per-terrain-tag metrics plus pooled aggregates."""

    per_subject: dict = field(default_factory=dict)   # subject -> tag -> metrics
    subject_mean: dict = field(default_factory=dict)  # tag -> metrics averaged over subjects
    pooled: dict = field(default_factory=dict)        # tag -> metrics over pooled samples
    config_fingerprint: str = ""
    seed: int = 0

    def to_json(self) -> dict:
        return {
            "per_subject": self.per_subject,
            "subject_mean": self.subject_mean,
            "pooled": self.pooled,
            "config_fingerprint": self.config_fingerprint,
            "seed": self.seed,
        }

    def subject_values(self, tag: str, metric: str = "phase_rmse") -> np.ndarray:
        """Per-subject metric values for one tag, in subject order."""
        return np.array([self.per_subject[s][tag][metric]
                         for s in sorted(self.per_subject)
                         if tag in self.per_subject[s]])


ROLLUPS = ("stable", "transition", "all")


def evaluate(model, test_recs: list[Recording], stats: NormStats,
             seed: int = 0, fingerprint: str = "") -> RunResult:
    """Score a model on held-out recordings, grouped by subject and terrain."""
    lb = model.cfg.window_len
    result = RunResult(seed=seed, config_fingerprint=fingerprint)
    pooled: dict[str, list] = {}

    for rec in test_recs:
        if rec.n_samples < lb:
            raise ValueError(f"recording {rec.subject_id} shorter than window {lb}")
        g = predict_recording(model, rec, stats)
        pred_phase, pred_rate = decode_polar_series(g)
        true_phase = rec.phase[lb - 1:]
        true_rate = rec.rate[lb - 1:]
        tags = np.asarray(window_terrain_tags(rec, lb, 1))

        groups: dict[str, np.ndarray] = {}
        for tag in sorted(set(tags.tolist())):
            groups[tag] = tags == tag
        groups["stable"] = np.char.startswith(tags, "stable")
        groups["transition"] = ~groups["stable"]
        groups["all"] = np.ones(len(tags), dtype=bool)

        per_tag = {}
        for tag, sel in groups.items():
            if not np.any(sel):
                continue
            per_tag[tag] = _group_metrics(pred_phase[sel], pred_rate[sel],
                                          true_phase[sel], true_rate[sel])
            pooled.setdefault(tag, []).append(
                (pred_phase[sel], pred_rate[sel], true_phase[sel], true_rate[sel]))
        result.per_subject[rec.subject_id] = per_tag

    for tag, parts in pooled.items():
        pp, pr, tp, tr = (np.concatenate([p[i] for p in parts]) for i in range(4))
        result.pooled[tag] = _group_metrics(pp, pr, tp, tr)

    subjects = sorted(result.per_subject)
    tags = sorted({t for s in subjects for t in result.per_subject[s]})
    for tag in tags:
        vals = [result.per_subject[s][tag] for s in subjects if tag in result.per_subject[s]]
        result.subject_mean[tag] = {
            "phase_rmse": float(np.mean([v["phase_rmse"] for v in vals])),
            "phase_rmse_std": float(np.std([v["phase_rmse"] for v in vals])),
            "phase_rmse_naive": float(np.mean([v["phase_rmse_naive"] for v in vals])),
            "rate_mae": float(np.mean([v["rate_mae"] for v in vals])),
            "rate_mae_std": float(np.std([v["rate_mae"] for v in vals])),
            "n_subjects": len(vals),
        }
    return result


# ---------------------------------------------------------------------------
# paired t-test with quadrature p-values
# ---------------------------------------------------------------------------

@dataclass
class TTestReport:
    mean_diff: float
    t_stat: float
    df: int
    p_value: float

    @property
    def stars(self) -> str:
        if self.p_value < 0.001:
            return "***"
        if self.p_value < 0.01:
            return "**"
        if self.p_value < 0.05:
            return "*"
        return "ns"


def _adaptive_simpson(f, a: float, b: float, tol: float) -> float:
    """Classic adaptive Simpson quadrature with Richardson correction."""

    def recurse(a, b, fa, fb, fm, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return (recurse(a, m, fa, fm, flm, left, tol / 2.0, depth - 1)
                + recurse(m, b, fm, fb, frm, right, tol / 2.0, depth - 1))

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return recurse(a, b, fa, fb, fm, whole, tol, 60)


def student_t_sf(t: float, df: int, tol: float = 1e-8) -> float:
    """P(T >= t) for Student's t by quadrature of the density.

    The tail integral is transformed with x = sqrt(df) * tan(theta), which
    maps it to a bounded smooth integrand proportional to cos^(df-1) on
    [atan(t/sqrt(df)), pi/2]; adaptive Simpson then resolves it to ``tol``.
    """
    if df < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if t < 0:
        return 1.0 - student_t_sf(-t, df, tol)
    coeff = math.exp(math.lgamma((df + 1) / 2.0) - math.lgamma(df / 2.0))
    coeff /= math.sqrt(df * math.pi)
    theta0 = math.atan(t / math.sqrt(df))
    integral = _adaptive_simpson(lambda th: math.cos(th) ** (df - 1),
                                 theta0, math.pi / 2.0, tol)
    return coeff * math.sqrt(df) * integral


def paired_t_test(a, b) -> TTestReport:
    """Two-sided paired t-test; p-value by adaptive quadrature (abs tol 1e-8)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("paired samples differ in length")
    n = a.size
    if n < 3:
        raise ValueError(f"need at least 3 pairs, got {n}")
    d = a - b
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        raise ValueError("zero variance in paired differences")
    t = float(np.mean(d) / (sd / math.sqrt(n)))
    p = min(1.0, 2.0 * student_t_sf(abs(t), n - 1))
    return TTestReport(mean_diff=float(np.mean(d)), t_stat=t, df=n - 1, p_value=p)


# ---------------------------------------------------------------------------
# experiment matrix
# ---------------------------------------------------------------------------

ALGORITHMS = ("tctst_pretrained", "tctst_scratch", "tctst_mlp", "tctst_patch", "patchtst")


def _fresh_model(algorithm: str, cfg: TctstConfig, seed: int):
    from dataclasses import replace

    if algorithm == "patchtst":
        return PatchTstModel(replace(cfg, embedding="tcn"), seed)
    if algorithm == "tctst_mlp":
        return TctstModel(replace(cfg, embedding="mlp"), seed)
    if algorithm == "tctst_patch":
        return TctstModel(replace(cfg, embedding="patch"), seed)
    return TctstModel(replace(cfg, embedding="tcn"), seed)


@dataclass
class MatrixEntry:
    algorithm: str
    window_len: int
    seed: int
    fold: int
    result: RunResult


def run_matrix(recordings: list[Recording], algorithms, window_lens, seeds,
               cfg: TctstConfig, pre_cfg: PretrainConfig,
               pre_fit: FitConfig, ft_fit: FitConfig,
               window_stride: int = 1, folds=(0,), out_dir=None) -> list[MatrixEntry]:
    """Run every (algorithm, window length, seed, fold) cell.

    Pretrained and from-scratch variants inside one cell share the fold
    assignment, normalization statistics, and evaluation data, so their
    difference isolates the initialization. Results and a subject-paired
    significance grid are written as CSV when ``out_dir`` is given.
    """
    from dataclasses import replace

    unknown = set(algorithms) - set(ALGORITHMS)
    if unknown:
        raise ValueError(f"unknown algorithms {sorted(unknown)}")
    by_subject = {r.subject_id: r for r in recordings}
    fold_defs = loocv_splits([r.subject_id for r in recordings])

    entries: list[MatrixEntry] = []
    for lb in window_lens:
        lb_cfg = replace(cfg, window_len=lb)
        for seed in seeds:
            for fold_idx in folds:
                fold = fold_defs[fold_idx]
                train = [by_subject[s] for s in fold.train]
                val = [by_subject[s] for s in fold.val]
                test = [by_subject[s] for s in fold.test]
                stats = fit_norm_stats(train)

                pretrained_src = None
                if "tctst_pretrained" in algorithms:
                    pre = pretrain_run(train, val, lb_cfg, pre_cfg, pre_fit, seed)
                    pretrained_src = pre.model

                for algorithm in algorithms:
                    model = _fresh_model(algorithm, lb_cfg, seed)
                    if algorithm == "tctst_pretrained":
                        transfer_weights(pretrained_src, model)
                    ft = finetune(model, train, val, ft_fit, seed,
                                  window_stride=window_stride, stats=stats)
                    res = evaluate(ft.model, test, stats, seed=seed,
                                   fingerprint=f"{algorithm}_{lb}_{seed}_f{fold_idx}")
                    entries.append(MatrixEntry(algorithm, lb, seed, fold_idx, res))

    if out_dir is not None:
        write_matrix_tables(entries, out_dir)
    return entries


def write_matrix_tables(entries: list[MatrixEntry], out_dir) -> None:
    """results.csv (per cell per subject), summary.csv, significance.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    with (out_dir / "results.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["algorithm", "window_len", "seed", "fold", "subject",
                    "stable_rmse", "stable_mae", "transition_rmse", "transition_mae",
                    "all_rmse", "all_mae"])
        for e in entries:
            for subject in sorted(e.result.per_subject):
                tags = e.result.per_subject[subject]
                row = [e.algorithm, e.window_len, e.seed, e.fold, subject]
                for tag in ROLLUPS:
                    m = tags.get(tag)
                    row.extend(["" if m is None else f"{m['phase_rmse']:.6f}",
                                "" if m is None else f"{m['rate_mae']:.6f}"])
                w.writerow(row)

    cells: dict[tuple[str, int], dict[str, list]] = {}
    for e in entries:
        cell = cells.setdefault((e.algorithm, e.window_len), {})
        for subject in e.result.per_subject:
            m = e.result.per_subject[subject].get("all")
            if m:
                cell.setdefault(subject, []).append((m["phase_rmse"], m["rate_mae"]))

    with (out_dir / "summary.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["algorithm", "window_len", "phase_rmse_mean", "phase_rmse_std",
                    "rate_mae_mean", "rate_mae_std", "n_subjects"])
        for (algorithm, lb), per_subj in sorted(cells.items()):
            rmses = [np.mean([v[0] for v in vals]) for vals in per_subj.values()]
            maes = [np.mean([v[1] for v in vals]) for vals in per_subj.values()]
            w.writerow([algorithm, lb, f"{np.mean(rmses):.6f}", f"{np.std(rmses):.6f}",
                        f"{np.mean(maes):.6f}", f"{np.std(maes):.6f}", len(per_subj)])

    ref = "tctst_pretrained"
    with (out_dir / "significance.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["window_len", "baseline", "metric", "t", "df", "p", "stars"])
        lbs = sorted({lb for (_, lb) in cells})
        for lb in lbs:
            if (ref, lb) not in cells:
                continue
            ref_cell = cells[(ref, lb)]
            for (algorithm, lb2), cell in sorted(cells.items()):
                if lb2 != lb or algorithm == ref:
                    continue
                shared = sorted(set(ref_cell) & set(cell))
                if len(shared) < 3:
                    continue
                for mi, metric in ((0, "phase_rmse"), (1, "rate_mae")):
                    a = [float(np.mean([v[mi] for v in cell[s]])) for s in shared]
                    b = [float(np.mean([v[mi] for v in ref_cell[s]])) for s in shared]
                    try:
                        rep = paired_t_test(a, b)
                    except ValueError:
                        continue
                    w.writerow([lb, algorithm, metric, f"{rep.t_stat:.6f}", rep.df,
                                f"{rep.p_value:.6g}", rep.stars])
