"""CSV codec for recordings.

Format: UTF-8, '.' decimal, header
``t,subject,terrain,stride_id,phase_pct,rate_pct`` followed by the 21
channel columns in schema order (L_accx ... P_pitch), one row per sample
at 100 Hz. ``t`` is the integer sample index. Channel values are written
with 9 significant digits, which round-trips float32 exactly; phase
labels are re-derived from stride boundaries on import and only checked
against the stored columns.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .recording import Recording, exact_phase_labels
from .schema import IMU_CHANNELS, TERRAIN_INDEX, TERRAINS

HEADER = ("t", "subject", "terrain", "stride_id", "phase_pct", "rate_pct") + IMU_CHANNELS
PHASE_TOLERANCE = 1e-6  # fraction-of-cycle mismatch allowed between file and exact labels


class CsvFormatError(ValueError):
    pass


def export_csv(rec: Recording, path) -> Path:
    path = Path(path)
    stride_ids = rec.stride_of_sample()
    chan = rec.channels.astype(np.float32)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HEADER)
        for n in range(rec.n_samples):
            row = [
                n,
                rec.subject_id,
                TERRAINS[rec.terrain[n]],
                int(stride_ids[n]),
                format(rec.phase[n] * 100.0, ".10g"),
                format(rec.rate[n] * 100.0, ".10g"),
            ]
            row.extend(format(v, ".9g") for v in chan[:, n])
            writer.writerow(row)
    return path


def import_csv(path) -> Recording:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        if tuple(header) != HEADER:
            missing = [c for c in HEADER if c not in header]
            if missing:
                raise CsvFormatError(f"{path}: missing column(s) {', '.join(missing)}")
            raise CsvFormatError(f"{path}: unexpected column order")
        rows = list(reader)
    if not rows:
        raise CsvFormatError(f"{path}: no samples")

    n = len(rows)
    subject = rows[0][1]
    terrain = np.empty(n, dtype=np.int8)
    stride_ids = np.empty(n, dtype=np.int64)
    phase_pct = np.empty(n)
    rate_pct = np.empty(n)
    channels = np.empty((len(IMU_CHANNELS), n), dtype=np.float32)
    for i, row in enumerate(rows):
        if len(row) != len(HEADER):
            raise CsvFormatError(f"{path}: row {i} has {len(row)} fields, expected {len(HEADER)}")
        if int(row[0]) != i:
            raise CsvFormatError(f"{path}: sample index {row[0]} at row {i} is not consecutive")
        if row[1] != subject:
            raise CsvFormatError(f"{path}: multiple subject ids in one file")
        if row[2] not in TERRAIN_INDEX:
            raise CsvFormatError(f"{path}: unknown terrain {row[2]!r} at row {i}")
        terrain[i] = TERRAIN_INDEX[row[2]]
        stride_ids[i] = int(row[3])
        phase_pct[i] = float(row[4])
        rate_pct[i] = float(row[5])
        channels[:, i] = [np.float32(v) for v in row[6:]]

    jumps = np.diff(stride_ids)
    if stride_ids[0] != 0 or np.any((jumps != 0) & (jumps != 1)):
        raise CsvFormatError(f"{path}: stride ids must start at 0 and increase by one")
    stride_starts = np.concatenate([[0], np.nonzero(jumps == 1)[0] + 1]).astype(np.int64)

    try:
        exact_phase, exact_rate = exact_phase_labels(stride_starts, n)
    except ValueError as exc:
        raise CsvFormatError(f"{path}: {exc}") from None
    if np.max(np.abs(exact_phase - phase_pct / 100.0)) > PHASE_TOLERANCE:
        raise CsvFormatError(f"{path}: phase column inconsistent with stride boundaries")
    if np.max(np.abs(exact_rate - rate_pct / 100.0)) > PHASE_TOLERANCE:
        raise CsvFormatError(f"{path}: rate column inconsistent with stride boundaries")

    rec = Recording(
        subject_id=subject,
        channels=channels,
        terrain=terrain,
        stride_starts=stride_starts,
        phase=exact_phase,
        rate=exact_rate,
    )
    try:
        return rec.validate()
    except ValueError as exc:
        raise CsvFormatError(f"{path}: {exc}") from None
