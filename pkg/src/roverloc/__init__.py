"""UWB-anchor rover localization and mission simulation.

Planar localization stack for a rover that deploys its own ultra-wideband
anchor constellation: SDS-TWR ranging simulation, trilateration, UWB/odometry
frame alignment, dead-reckoning odometry with source switching, and a
move-and-wait mission state machine, all driven by a deterministic seeded
world simulator.
"""

from roverloc.geometry import Point2, Pose2, FrameTransform, FrameId

__all__ = ["Point2", "Pose2", "FrameTransform", "FrameId"]
__version__ = "0.1.0"
