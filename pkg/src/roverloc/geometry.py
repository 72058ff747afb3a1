"""Planar geometric primitives: points, poses, and rigid 2D frame transforms.

Everything in the stack is 2D. Angles are radians, normalized to (-pi, pi].
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Point2",
    "Pose2",
    "FrameTransform",
    "FrameId",
    "wrap_angle",
    "apply_transform",
    "compose",
    "invert",
]


def wrap_angle(theta: float) -> float:
    """Normalize an angle into (-pi, pi]."""
    wrapped = math.remainder(theta, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


class FrameId(enum.Enum):
    """Coordinate frame labels used at module boundaries."""

    UWB = "uwb"
    ODOM = "odom"
    WORLD = "world"


@dataclass(frozen=True)
class Point2:
    """A planar position in meters."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates ({self.x}, {self.y})")

    def __add__(self, other: "Point2") -> "Point2":
        return Point2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Point2") -> "Point2":
        return Point2(self.x - other.x, self.y - other.y)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def distance_to(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @staticmethod
    def from_array(a) -> "Point2":
        return Point2(float(a[0]), float(a[1]))


@dataclass(frozen=True)
class Pose2:
    """Planar pose: position plus heading in (-pi, pi]."""

    position: Point2
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @staticmethod
    def identity() -> "Pose2":
        return Pose2(Point2(0.0, 0.0), 0.0)


@dataclass(frozen=True)
class FrameTransform:
    """Rigid 2D transform p' = R(rotation) @ p + translation.

    Maps coordinates of one frame into another (no scale: both frames are
    metric).
    """

    rotation: float
    translation: Point2

    def __post_init__(self):
        object.__setattr__(self, "rotation", wrap_angle(self.rotation))

    @staticmethod
    def identity() -> "FrameTransform":
        return FrameTransform(0.0, Point2(0.0, 0.0))

    def rotation_matrix(self) -> np.ndarray:
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return np.array([[c, -s], [s, c]])


def apply_transform(t: FrameTransform, p: Point2) -> Point2:
    """Map point p through the rigid transform t."""
    c, s = math.cos(t.rotation), math.sin(t.rotation)
    return Point2(
        c * p.x - s * p.y + t.translation.x,
        s * p.x + c * p.y + t.translation.y,
    )


def apply_transform_pose(t: FrameTransform, pose: Pose2) -> Pose2:
    """Map a pose through t: position transformed, heading rotated."""
    return Pose2(apply_transform(t, pose.position), pose.heading + t.rotation)


def compose(a: FrameTransform, b: FrameTransform) -> FrameTransform:
    """Transform equivalent to applying b first, then a."""
    return FrameTransform(a.rotation + b.rotation, apply_transform(a, b.translation))


def invert(t: FrameTransform) -> FrameTransform:
    """Inverse transform: compose(t, invert(t)) is the identity."""
    c, s = math.cos(t.rotation), math.sin(t.rotation)
    # R^-1 @ (p - translation): inverse translation is -R^T t
    return FrameTransform(
        -t.rotation,
        Point2(
            -(c * t.translation.x + s * t.translation.y),
            -(-s * t.translation.x + c * t.translation.y),
        ),
    )
