"""Gait phase estimation laboratory.

A channel-token transformer estimates the polar gait phase state
[cos 2*pi*phase, sin 2*pi*phase, rate] from 21-channel IMU windows;
masked-channel reconstruction pre-training treats phase and IMU rows as
joint observations of locomotion; a streaming planner turns estimates
into terrain-template joint-angle targets under a 10 ms deadline.
Everything runs end-to-end on synthetic multi-terrain gait data with
exact phase labels.
"""

__version__ = "0.1.0"
