"""Bit-exact model checkpoints.

A checkpoint is a directory holding ``manifest.json`` (format version,
model kind and config, seed, parameter names/shapes/dtype/byte offsets,
normalization statistics) and ``weights.bin`` (little-endian float32
values concatenated in manifest order). Save/load round-trips float32
models bit-exactly; no timestamps or environment data are recorded, so
reruns of a deterministic pipeline produce identical bytes.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..data.windows import NormStats

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(directory, model, norm_stats: NormStats | None = None,
                    extra: dict | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    params = model.parameters()
    entries = []
    offset = 0
    blobs = []
    for p in params:
        raw = np.ascontiguousarray(p.value, dtype="<f4").tobytes()
        entries.append({
            "name": p.name,
            "shape": list(p.value.shape),
            "dtype": "float32",
            "offset": offset,
        })
        offset += len(raw)
        blobs.append(raw)
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "config": _model_config(model),
        "seed": model.seed,
        "params": entries,
        "norm_stats": norm_stats.to_json() if norm_stats is not None else None,
    }
    if extra:
        manifest["extra"] = extra
    (directory / "weights.bin").write_bytes(b"".join(blobs))
    with (directory / "manifest.json").open("w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return directory


def _model_config(model) -> dict:
    if model.kind == "pretrain":
        return {"model": model.cfg.to_json(), "pretrain": model.pre_cfg.to_json()}
    return model.cfg.to_json()


def _build_model(kind: str, config: dict, seed: int):
    from .config import TctstConfig

    if kind == "tctst":
        from .tctst import TctstModel

        return TctstModel(TctstConfig.from_json(config), seed)
    if kind == "patchtst":
        from .patchtst import PatchTstModel

        return PatchTstModel(TctstConfig.from_json(config), seed)
    if kind == "pretrain":
        from ..pretrain import PretrainConfig, PretrainModel

        return PretrainModel(TctstConfig.from_json(config["model"]),
                             PretrainConfig.from_json(config["pretrain"]), seed)
    raise CheckpointError(f"unknown model kind {kind!r}")


def load_manifest(directory) -> dict:
    path = Path(directory) / "manifest.json"
    if not path.exists():
        raise CheckpointError(f"no manifest.json under {directory}")
    with path.open() as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format {manifest.get('format_version')}")
    return manifest


def load_checkpoint(directory):
    """Rebuild (model, norm_stats, manifest) from a checkpoint directory."""
    directory = Path(directory)
    manifest = load_manifest(directory)
    model = _build_model(manifest["kind"], manifest["config"], manifest["seed"])
    raw = (directory / "weights.bin").read_bytes()
    by_name = {p.name: p for p in model.parameters()}
    if len(by_name) != len(manifest["params"]):
        raise CheckpointError("parameter count mismatch between manifest and architecture")
    for entry in manifest["params"]:
        p = by_name.get(entry["name"])
        if p is None:
            raise CheckpointError(f"parameter {entry['name']} not in architecture")
        shape = tuple(entry["shape"])
        if shape != p.value.shape:
            raise CheckpointError(f"shape mismatch for {entry['name']}: "
                                  f"{shape} vs {p.value.shape}")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        flat = np.frombuffer(raw, dtype="<f4", count=count, offset=entry["offset"])
        p.value[...] = flat.reshape(shape).astype(p.value.dtype)
    stats = manifest.get("norm_stats")
    norm_stats = NormStats.from_json(stats) if stats else None
    return model, norm_stats, manifest
