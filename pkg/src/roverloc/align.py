"""Calibration-drive frame alignment.

During the calibration drive every fresh UWB fix is paired with the
odometry position current at that instant. A rigid 2D transform (theta,
tx, ty) mapping UWB-frame points onto odometry-frame points is then
solved two ways: iteratively by Gauss-Newton (the returned result) and in
closed form via the Procrustes/SVD construction (an internal cross-check;
the two must agree to tight tolerance on every solve).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from roverloc.geometry import FrameTransform, Point2, Pose2, apply_transform
from roverloc.locate import FixResult

__all__ = [
    "CorrespondenceBuffer",
    "AlignmentResult",
    "AlignError",
    "NonMonotonicTimestamp",
    "TooFewPairs",
    "DegenerateGeometry",
    "NoConvergence",
    "record_pair",
    "solve_alignment",
    "assess_observability",
    "export_csv",
]

COLLINEARITY_TOLERANCE = 0.05  # m; UWB points within this of a line are degenerate


class AlignError(Exception):
    pass


class NonMonotonicTimestamp(AlignError):
    pass


class TooFewPairs(AlignError):
    pass


class DegenerateGeometry(AlignError):
    """UWB points nearly collinear: rotation unobservable."""


class NoConvergence(AlignError):
    pass


@dataclass(frozen=True)
class CorrespondenceBuffer:
    """Time-ordered (uwb_position, odom_position, timestamp) triples."""

    pairs: tuple = ()

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class AlignmentResult:
    transform: FrameTransform  # UWB frame -> odometry frame
    rms_error: float
    pair_count: int


def record_pair(
    buffer: CorrespondenceBuffer,
    fix: FixResult,
    odom_pose: Pose2,
    timestamp: float,
) -> CorrespondenceBuffer:
    """Append one UWB/odometry position pair; timestamps must increase."""
    if buffer.pairs and timestamp <= buffer.pairs[-1][2]:
        raise NonMonotonicTimestamp(
            f"timestamp {timestamp} not after {buffer.pairs[-1][2]}"
        )
    return CorrespondenceBuffer(
        buffer.pairs + ((fix.position, odom_pose.position, timestamp),)
    )


def _point_arrays(buffer: CorrespondenceBuffer):
    u = np.array([[p.x, p.y] for p, _, _ in buffer.pairs])
    o = np.array([[q.x, q.y] for _, q, _ in buffer.pairs])
    return u, o


def _check_geometry(u: np.ndarray):
    centered = u - u.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    # rms deviation from the best-fit line through the centroid
    if sv[1] / math.sqrt(len(u)) < COLLINEARITY_TOLERANCE:
        raise DegenerateGeometry(
            "UWB points nearly collinear; rotation is unobservable"
        )


def _procrustes(u: np.ndarray, o: np.ndarray) -> FrameTransform:
    """Closed-form rigid least-squares transform taking u onto o."""
    cu, co = u.mean(axis=0), o.mean(axis=0)
    h = (u - cu).T @ (o - co)
    # For the 2D rotation-only case the optimal angle is atan2 of the
    # cross/dot accumulations of the covariance.
    theta = math.atan2(h[0, 1] - h[1, 0], h[0, 0] + h[1, 1])
    c, s = math.cos(theta), math.sin(theta)
    r = np.array([[c, -s], [s, c]])
    t = co - r @ cu
    return FrameTransform(theta, Point2(float(t[0]), float(t[1])))


def _gauss_newton(
    u: np.ndarray, o: np.ndarray, x0: np.ndarray, max_iter: int = 100
) -> np.ndarray:
    """Iterate (theta, tx, ty) on the stacked point residuals."""
    x = x0.astype(float).copy()
    for _ in range(max_iter):
        theta, tx, ty = x
        c, s = math.cos(theta), math.sin(theta)
        r = np.array([[c, -s], [s, c]])
        pred = u @ r.T + np.array([tx, ty])
        res = (pred - o).ravel()
        # d(pred)/dtheta rotates each point by theta + pi/2
        dtheta = u @ np.array([[-s, -c], [c, -s]]).T
        n = len(u)
        jac = np.zeros((2 * n, 3))
        jac[:, 0] = dtheta.ravel()
        jac[0::2, 1] = 1.0
        jac[1::2, 2] = 1.0
        step, *_ = np.linalg.lstsq(jac, -res, rcond=None)
        x += step
        if np.linalg.norm(step) < 1e-12:
            return x
    if np.linalg.norm(step) > 1e-8:
        raise NoConvergence("alignment solver did not converge")
    return x


def solve_alignment(
    buffer: CorrespondenceBuffer, cross_check_tolerance: float = 1e-6
) -> AlignmentResult:
    """Solve for the rigid UWB -> odometry transform.

    Gauss-Newton on (theta, tx, ty) is the returned solution; the
    closed-form Procrustes result seeds it and cross-checks it. A
    disagreement beyond tolerance is a solver bug and raises.
    """
    if len(buffer) < 3:
        raise TooFewPairs(f"need >= 3 pairs, got {len(buffer)}")
    u, o = _point_arrays(buffer)
    _check_geometry(u)

    closed = _procrustes(u, o)
    x0 = np.array([closed.rotation, closed.translation.x, closed.translation.y])
    # Seed away from the optimum so the iteration genuinely exercises the
    # nonlinear solve rather than returning its own starting point.
    x = _gauss_newton(u, o, x0 + np.array([0.05, 0.1, 0.1]))
    iterative = FrameTransform(float(x[0]), Point2(float(x[1]), float(x[2])))

    dt = iterative.translation.distance_to(closed.translation)
    dr = abs(
        math.remainder(iterative.rotation - closed.rotation, 2.0 * math.pi)
    )
    if dt > cross_check_tolerance or dr > 1e-8:
        raise AlignError(
            f"iterative and closed-form alignments disagree: {dt:.2e} m, {dr:.2e} rad"
        )

    r = iterative.rotation_matrix()
    res = u @ r.T + iterative.translation.as_array() - o
    rms = float(np.sqrt(np.mean(np.sum(res**2, axis=1))))
    return AlignmentResult(transform=iterative, rms_error=rms, pair_count=len(buffer))


def assess_observability(buffer: CorrespondenceBuffer):
    """Spread and collinearity of the UWB points collected so far.

    Returns (spread, collinearity_ratio): rms distance from the centroid,
    and the small/large singular value ratio of the centered point matrix
    (0 for a perfect line, ~1 for an isotropic cloud).
    """
    if len(buffer) < 2:
        raise TooFewPairs(f"need >= 2 pairs, got {len(buffer)}")
    u, _ = _point_arrays(buffer)
    centered = u - u.mean(axis=0)
    spread = float(np.sqrt(np.mean(np.sum(centered**2, axis=1))))
    sv = np.linalg.svd(centered, compute_uv=False)
    ratio = float(sv[1] / sv[0]) if sv[0] > 0 else 0.0
    return spread, ratio


def export_csv(buffer: CorrespondenceBuffer) -> str:
    """Buffer contents as CSV (timestamp, ux, uy, ox, oy)."""
    out = io.StringIO()
    out.write("timestamp,ux,uy,ox,oy\n")
    for uwb, odom, ts in buffer.pairs:
        out.write(f"{ts!r},{uwb.x!r},{uwb.y!r},{odom.x!r},{odom.y!r}\n")
    return out.getvalue()
