"""Fixed channel layout and terrain vocabulary.

21 IMU channels: for each sensor site L (left thigh), R (right thigh),
P (pelvis) in that order, the seven quantities accx, accy, accz (m/s^2),
gyrx, gyry, gyrz (rad/s), pitch (rad). Rows 21-23 carry the polar phase
channels (cos, sin, rate) appended for pre-training and zero-padded
otherwise. This ordering is the contract for CSV files, window tensors,
and normalization statistics.
"""
from __future__ import annotations

SENSOR_SITES = ("L", "R", "P")
SENSOR_QUANTITIES = ("accx", "accy", "accz", "gyrx", "gyry", "gyrz", "pitch")

IMU_CHANNELS = tuple(f"{site}_{q}" for site in SENSOR_SITES for q in SENSOR_QUANTITIES)
PHASE_CHANNELS = ("phase_cos", "phase_sin", "phase_rate")
ALL_CHANNELS = IMU_CHANNELS + PHASE_CHANNELS

N_IMU = len(IMU_CHANNELS)          # 21
N_PHASE = len(PHASE_CHANNELS)      # 3
N_TOTAL = N_IMU + N_PHASE          # 24

TERRAINS = ("LW", "SA", "SD", "SLA", "SLD")
TERRAIN_INDEX = {name: i for i, name in enumerate(TERRAINS)}

SAMPLE_RATE = 100  # Hz


def site_channel(site: str, quantity: str) -> int:
    """Row index of a sensor quantity, e.g. ('P', 'pitch') -> 20."""
    return IMU_CHANNELS.index(f"{site}_{quantity}")


# sagittal-plane rows used by the synthetic generator
PITCH_ROWS = {s: site_channel(s, "pitch") for s in SENSOR_SITES}
GYRO_PITCH_ROWS = {s: site_channel(s, "gyry") for s in SENSOR_SITES}
ACC_LONG_ROWS = {s: site_channel(s, "accx") for s in SENSOR_SITES}
ACC_VERT_ROWS = {s: site_channel(s, "accz") for s in SENSOR_SITES}
