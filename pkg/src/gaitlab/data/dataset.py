"""Dataset directories: per-subject CSVs plus a manifest."""
from __future__ import annotations

import json
from pathlib import Path

from .csvio import export_csv, import_csv
from .generator import GeneratorConfig, synthesize_recording
from .recording import Recording

MANIFEST_NAME = "manifest.json"


def generate_dataset(out_dir, n_subjects: int, cfg: GeneratorConfig, seed: int) -> list[Recording]:
    """Synthesize and write n_subjects recordings plus the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    recordings = []
    files = {}
    for i in range(n_subjects):
        subject = f"S{i:02d}"
        rec = synthesize_recording(cfg, subject, seed)
        export_csv(rec, out_dir / f"{subject}.csv")
        files[subject] = f"{subject}.csv"
        recordings.append(rec)
    manifest = {
        "subjects": [r.subject_id for r in recordings],
        "files": files,
        "seed": seed,
        "generator_config": cfg.to_json(),
    }
    with (out_dir / MANIFEST_NAME).open("w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return recordings


def load_dataset(data_dir) -> tuple[list[Recording], dict]:
    """Import every recording named by the manifest, in manifest order."""
    data_dir = Path(data_dir)
    path = data_dir / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"no {MANIFEST_NAME} under {data_dir}")
    with path.open() as fh:
        manifest = json.load(fh)
    recordings = [import_csv(data_dir / manifest["files"][s]) for s in manifest["subjects"]]
    return recordings, manifest
