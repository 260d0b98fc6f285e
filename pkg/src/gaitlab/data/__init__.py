"""Channel schema, synthetic gait generation, CSV ingestion, and windowing."""
from .csvio import CsvFormatError, export_csv, import_csv
from .generator import DEFAULT_TEMPLATES, GeneratorConfig, synthesize_recording, terrain_angle_curve
from .recording import Recording, exact_phase_labels
from .schema import (
    ALL_CHANNELS,
    IMU_CHANNELS,
    N_IMU,
    N_PHASE,
    N_TOTAL,
    PHASE_CHANNELS,
    SAMPLE_RATE,
    TERRAINS,
)
from .windows import (
    Fold,
    MaskSpec,
    NormStats,
    Window,
    apply_2d_mask,
    apply_channel_mask,
    apply_norm,
    batch_block_masks,
    batch_channel_masks,
    build_windows,
    fit_norm_stats,
    loocv_splits,
    masked_channel_count,
    stack_windows,
    window_count,
    window_terrain_tags,
)

__all__ = [
    "ALL_CHANNELS",
    "CsvFormatError",
    "DEFAULT_TEMPLATES",
    "Fold",
    "GeneratorConfig",
    "IMU_CHANNELS",
    "MaskSpec",
    "N_IMU",
    "N_PHASE",
    "N_TOTAL",
    "NormStats",
    "PHASE_CHANNELS",
    "Recording",
    "SAMPLE_RATE",
    "TERRAINS",
    "Window",
    "apply_2d_mask",
    "apply_channel_mask",
    "apply_norm",
    "batch_block_masks",
    "batch_channel_masks",
    "build_windows",
    "exact_phase_labels",
    "export_csv",
    "fit_norm_stats",
    "import_csv",
    "loocv_splits",
    "masked_channel_count",
    "stack_windows",
    "synthesize_recording",
    "terrain_angle_curve",
    "window_count",
    "window_terrain_tags",
]
