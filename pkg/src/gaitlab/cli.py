"""Command-line entry point.

Subcommands cover the whole pipeline: ``gen`` (synthesize a dataset),
``pretrain`` (masked-reconstruction pre-training on a fold), ``finetune``
(supervised training, warm-started or from scratch), ``eval`` (held-out
metrics), ``plan`` (streaming trajectory planning over CSV rows on
stdin), and ``bench`` (per-sample latency against the 10 ms deadline).
Every subcommand writes its merged configuration to ``config.json`` in
the output directory, so any artifact can be reproduced from the config
plus the inputs it names. Subcommands never mutate their inputs.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .data.csvio import HEADER
from .data.dataset import generate_dataset, load_dataset
from .data.generator import GeneratorConfig
from .data.schema import IMU_CHANNELS, N_IMU, SAMPLE_RATE
from .data.windows import apply_norm, fit_norm_stats, loocv_splits
from .model.checkpoint import load_checkpoint
from .model.tctst import TctstModel
from .phase import encode_polar_series
from .planner import (
    DEADLINE_MS,
    PlannerState,
    latency_bench,
    load_templates,
    save_templates,
    templates_from_generator,
)
from .pretrain import adapt_model_config, pretrain_run, transfer_weights
from .profiles import get_profile
from .train_eval import evaluate, finetune

VARIANT_FLAGS = {
    "proposed": {},
    "wdl": {"no_decoder": True},
    "fvr": {"feature_recon": True},
    "nclm": {"mask_2d": True},
    "wpsv": {"no_phase_rows": True},
}


def _write_config(out_dir: Path, command: str, payload: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "config.json").open("w") as fh:
        json.dump({"command": command, **payload}, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _profile(args):
    profile = get_profile(args.profile)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            overrides = json.load(fh)
        profile = replace(
            profile,
            model=replace(profile.model, **overrides.get("model", {})),
            pretrain=replace(profile.pretrain, **overrides.get("pretrain", {})),
            pretrain_fit=replace(profile.pretrain_fit, **overrides.get("pretrain_fit", {})),
            finetune_fit=replace(profile.finetune_fit, **overrides.get("finetune_fit", {})),
            finetune_stride=overrides.get("finetune_stride", profile.finetune_stride),
        )
    return profile.with_window(args.lb)


def _fold_recordings(data_dir, fold_idx: int):
    recordings, manifest = load_dataset(data_dir)
    by_id = {r.subject_id: r for r in recordings}
    folds = loocv_splits(manifest["subjects"])
    if not 0 <= fold_idx < len(folds):
        raise ValueError(f"fold must be in [0, {len(folds)}), got {fold_idx}")
    fold = folds[fold_idx]
    pick = lambda ids: [by_id[s] for s in ids]
    return pick(fold.train), pick(fold.val), pick(fold.test), manifest


def cmd_gen(args) -> int:
    out = Path(args.out)
    if args.generator_config:
        with open(args.generator_config) as fh:
            cfg = GeneratorConfig.from_json(json.load(fh))
    else:
        cfg = GeneratorConfig()
    if args.seconds is not None:
        cfg = replace(cfg, duration_s=float(args.seconds))
    cfg.validate()
    recordings = generate_dataset(out, args.subjects, cfg, args.seed)
    save_templates(templates_from_generator(cfg), out / "templates.json")
    _write_config(out, "gen", {
        "subjects": args.subjects,
        "seed": args.seed,
        "generator_config": cfg.to_json(),
    })
    print(f"wrote {len(recordings)} recordings to {out}")
    return 0


def cmd_pretrain(args) -> int:
    profile = _profile(args)
    pre_cfg = replace(profile.pretrain, **VARIANT_FLAGS[args.variant])
    train, val, _, _ = _fold_recordings(args.data, args.fold)
    out = Path(args.out)
    _write_config(out, "pretrain", {
        "data": str(args.data), "fold": args.fold, "seed": args.seed,
        "variant": args.variant, "profile": profile.to_json(),
    })
    result = pretrain_run(train, val, profile.model, pre_cfg, profile.pretrain_fit,
                          args.seed, out)
    best = result.fit
    print(f"pre-trained ({pre_cfg.variant}): best val loss {best.best_val:.6f} "
          f"at epoch {best.best_epoch} ({best.epochs_run} epochs run)")
    print(f"checkpoint: {result.checkpoint_dir}")
    return 0


def cmd_finetune(args) -> int:
    profile = _profile(args)
    train, val, _, _ = _fold_recordings(args.data, args.fold)
    out = Path(args.out)
    cfg = profile.model
    stats = fit_norm_stats(train)
    if args.from_pretrained:
        pre_model, pre_stats, manifest = load_checkpoint(args.from_pretrained)
        cfg = adapt_model_config(cfg, pre_model.pre_cfg)
        if pre_model.cfg.to_json() != cfg.to_json():
            raise ValueError("pre-trained checkpoint architecture does not match the "
                             "requested profile/window; adjust --profile/--lb")
        model = TctstModel(cfg, args.seed)
        transfer_weights(pre_model, model)
        if pre_stats is not None:
            stats = pre_stats        # share the pre-training normalization
    else:
        model = TctstModel(cfg, args.seed)
    _write_config(out, "finetune", {
        "data": str(args.data), "fold": args.fold, "seed": args.seed,
        "from_pretrained": str(args.from_pretrained) if args.from_pretrained else None,
        "profile": profile.to_json(),
    })
    result = finetune(model, train, val, profile.finetune_fit, args.seed,
                      window_stride=profile.finetune_stride, stats=stats, out_dir=out)
    best = result.fit
    print(f"fine-tuned: best val loss {best.best_val:.6f} at epoch {best.best_epoch} "
          f"({best.epochs_run} epochs run)")
    print(f"checkpoint: {result.checkpoint_dir}")
    return 0


def cmd_eval(args) -> int:
    model, stats, _ = load_checkpoint(args.ckpt)
    if stats is None:
        raise ValueError("checkpoint carries no normalization statistics")
    _, _, test, _ = _fold_recordings(args.data, args.fold)
    out = Path(args.out)
    _write_config(out, "eval", {
        "data": str(args.data), "ckpt": str(args.ckpt), "fold": args.fold,
        "seed": args.seed,
    })
    result = evaluate(model, test, stats, seed=args.seed,
                      fingerprint=f"eval_f{args.fold}")
    with (out / "metrics.json").open("w") as fh:
        json.dump(result.to_json(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    with (out / "metrics.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject", "tag", "phase_rmse_pct", "phase_rmse_naive_pct",
                    "rate_mae_pct", "n_samples"])
        for subject in sorted(result.per_subject):
            for tag in sorted(result.per_subject[subject]):
                m = result.per_subject[subject][tag]
                w.writerow([subject, tag, f"{m['phase_rmse']:.6f}",
                            f"{m['phase_rmse_naive']:.6f}", f"{m['rate_mae']:.6f}", m["n"]])
    for tag in ("stable", "transition"):
        if tag in result.subject_mean:
            m = result.subject_mean[tag]
            print(f"{tag}: phase RMSE {m['phase_rmse']:.3f} +/- {m['phase_rmse_std']:.3f} %, "
                  f"rate MAE {m['rate_mae']:.4f} +/- {m['rate_mae_std']:.4f} %")
    print(f"metrics: {out / 'metrics.json'}")
    return 0


def cmd_plan(args) -> int:
    templates = load_templates(args.templates)
    model = stats = None
    if not args.oracle:
        if not args.ckpt:
            raise ValueError("plan needs --ckpt unless --oracle is given")
        model, stats, _ = load_checkpoint(args.ckpt)
        if stats is None:
            raise ValueError("checkpoint carries no normalization statistics")
    planner = PlannerState(templates)
    reader = csv.reader(args.input)
    header = next(reader, None)
    if header is None or tuple(header) != HEADER:
        raise ValueError("stdin does not carry the recording CSV header")
    chan_cols = [header.index(c) for c in IMU_CHANNELS]
    out = csv.writer(args.output)
    out.writerow(["t", "phase_pct", "rate_pct", "event", "target_deg", "latency_ms"])

    window = None
    filled = 0
    period = 1.0 / SAMPLE_RATE
    next_tick = time.perf_counter()
    for row in reader:
        if args.paced:
            now = time.perf_counter()
            if now < next_tick:
                time.sleep(next_tick - now)
            next_tick += period
        t = int(row[0])
        terrain = row[2]
        if args.oracle:
            g = encode_polar_series(np.asarray([float(row[4]) / 100.0]),
                                    np.asarray([float(row[5]) / 100.0]))[0]
        else:
            lb = model.cfg.window_len
            if window is None:
                window = np.zeros((1, model.cfg.n_channels, lb), dtype=np.float32)
            sample = np.asarray([float(row[i]) for i in chan_cols], dtype=np.float32)
            sample = apply_norm(sample[:, None], stats)[:, 0]
            window[0, :N_IMU, :-1] = window[0, :N_IMU, 1:]
            window[0, :N_IMU, -1] = sample
            filled += 1
            if filled < lb:
                out.writerow([t, "nan", "nan", 0, "nan", "nan"])
                continue
            g = model.forward(window, training=False)[0]
        step = planner.feed(g, terrain)
        out.writerow([
            t,
            f"{step.phase * 100.0:.4f}",
            f"{step.rate * 100.0:.4f}",
            int(step.event),
            "nan" if step.target_deg is None else f"{step.target_deg:.4f}",
            f"{step.latency_ms:.4f}",
        ])
    return 0


def cmd_bench(args) -> int:
    profile = _profile(args)
    gen_cfg = GeneratorConfig(duration_s=(args.samples + 1100 + profile.model.window_len) / 100.0
                              + 3.0)
    from .data.generator import synthesize_recording

    rec = synthesize_recording(gen_cfg, "BENCH", args.seed)
    if args.ckpt:
        model, stats, _ = load_checkpoint(args.ckpt)
        if stats is None:
            stats = fit_norm_stats([rec])
    else:
        model = TctstModel(profile.model, args.seed)
        stats = fit_norm_stats([rec])
    templates = templates_from_generator(gen_cfg)
    report = latency_bench(model, stats, rec, templates, n_samples=args.samples,
                           deadline_ms=DEADLINE_MS)
    blob = report.to_json()
    print(json.dumps(blob, indent=1, sort_keys=True))
    if args.out:
        out = Path(args.out)
        _write_config(out, "bench", {"seed": args.seed, "samples": args.samples,
                                     "ckpt": str(args.ckpt) if args.ckpt else None,
                                     "profile": profile.to_json()})
        with (out / "latency.json").open("w") as fh:
            json.dump(blob, fh, indent=1, sort_keys=True)
            fh.write("\n")
    return 0


def _add_common(p, out_required=True):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profile", default="desk", help="hyperparameter scale: desk or paper")
    p.add_argument("--lb", type=int, default=None, choices=(50, 100, 150, 200),
                   help="look-back window length override")
    p.add_argument("--config", default=None, help="JSON file overriding profile fields")
    if out_required:
        p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaitlab",
                                     description="gait phase estimation laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="synthesize a multi-subject dataset")
    p.add_argument("--subjects", type=int, default=10)
    p.add_argument("--seconds", type=float, default=None, help="target duration per subject")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--generator-config", default=None, help="generator config JSON")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("pretrain", help="masked-reconstruction pre-training")
    p.add_argument("--data", required=True)
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--variant", default="proposed", choices=sorted(VARIANT_FLAGS))
    _add_common(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("finetune", help="supervised training of the estimator")
    p.add_argument("--data", required=True)
    p.add_argument("--fold", type=int, default=0)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--from-pretrained", default=None, metavar="CKPT")
    group.add_argument("--from-scratch", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("eval", help="held-out-subject evaluation")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plan", help="stream planning over CSV rows from stdin")
    p.add_argument("--templates", required=True)
    p.add_argument("--ckpt", default=None)
    p.add_argument("--oracle", action="store_true",
                   help="use the ground-truth phase columns instead of a model")
    p.add_argument("--paced", action="store_true", help="pace input at 100 Hz")
    p.set_defaults(func=cmd_plan, input=sys.stdin, output=sys.stdout)

    p = sub.add_parser("bench", help="per-sample latency benchmark")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--ckpt", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profile", default="desk")
    p.add_argument("--lb", type=int, default=None, choices=(50, 100, 150, 200))
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError, RuntimeError) as exc:
        print(f"gaitlab {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
