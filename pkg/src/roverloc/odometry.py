"""Dead-reckoning pose estimation from simulated visual and wheel odometry.

Visual odometry is the primary source: low drift, but it drops out.
During dropouts the estimator switches to wheel odometry, which slips on
loose ground and therefore overestimates distance. The pose is continuous
across switches; only an explicit pose reset jumps it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from roverloc.geometry import Point2, Pose2, wrap_angle

__all__ = [
    "OdometrySource",
    "OdometryState",
    "WheelOdomParams",
    "VisualOdomParams",
    "OdometryError",
    "NonPositiveDt",
    "VisualUnavailable",
    "integrate_wheel",
    "integrate_visual",
    "update_health",
    "apply_pose_reset",
]


class OdometryError(Exception):
    pass


class NonPositiveDt(OdometryError):
    pass


class VisualUnavailable(OdometryError):
    pass


class OdometrySource(enum.Enum):
    VISUAL = "visual"
    WHEEL = "wheel"


@dataclass(frozen=True)
class WheelOdomParams:
    """Slip and heading noise of the skid-steered wheel odometry.

    Slip is the fraction of wheel travel not converted into ground travel,
    so the wheels report true_distance / (1 - slip): an overestimate.
    """

    slip_factor_mean: float = 0.08
    slip_factor_sigma: float = 0.05
    heading_noise_sigma: float = 0.01  # rad per sqrt(meter traveled)

    def __post_init__(self):
        if self.slip_factor_sigma < 0 or self.heading_noise_sigma < 0:
            raise ValueError("sigmas must be >= 0")
        if not 0.0 <= self.slip_factor_mean <= 0.5:
            raise ValueError("slip_factor_mean must be in [0, 0.5]")


@dataclass(frozen=True)
class VisualOdomParams:
    """Drift and availability of the visual odometry source."""

    drift_sigma: float = 0.01  # m per sqrt(meter traveled), per axis
    # heading drift must stay orders of magnitude below position drift:
    # heading error integrates into cross-track error with distance cubed,
    # and the T265-class sensor's orientation is far better than its
    # translation
    heading_drift_sigma: float = 5e-5  # rad per sqrt(meter traveled)
    dropout_rate: float = 0.2  # onsets per minute (Poisson)
    dropout_duration: float = 10.0  # s

    def __post_init__(self):
        if min(self.drift_sigma, self.heading_drift_sigma, self.dropout_rate,
               self.dropout_duration) < 0:
            raise ValueError("visual odometry parameters must be >= 0")


@dataclass(frozen=True)
class OdometryState:
    """Estimated pose in the odometry frame plus source bookkeeping."""

    pose: Pose2
    active_source: OdometrySource = OdometrySource.VISUAL
    visual_healthy: bool = True
    last_update: float = 0.0
    dropout_until: float = -math.inf

    @staticmethod
    def initial() -> "OdometryState":
        return OdometryState(pose=Pose2.identity())


def _advance_unicycle(pose: Pose2, linear: float, angular: float, dt: float) -> Pose2:
    """Exact unicycle step: arc motion for nonzero angular rate."""
    th = pose.heading
    if abs(angular) < 1e-12:
        dx = linear * dt * math.cos(th)
        dy = linear * dt * math.sin(th)
    else:
        r = linear / angular
        dx = r * (math.sin(th + angular * dt) - math.sin(th))
        dy = -r * (math.cos(th + angular * dt) - math.cos(th))
    return Pose2(
        Point2(pose.position.x + dx, pose.position.y + dy),
        th + angular * dt,
    )


def integrate_wheel(
    state: OdometryState,
    commanded,
    dt: float,
    params: WheelOdomParams,
    true_motion,
    rng: np.random.Generator,
) -> OdometryState:
    """Advance the pose by what the wheels report for this step.

    true_motion is the (linear, angular) ground motion actually executed;
    the wheels report linear speed inflated by slip and a heading
    perturbed by noise growing with sqrt(distance).
    """
    if dt <= 0:
        raise NonPositiveDt(f"dt={dt}")
    true_linear, true_angular = true_motion
    slip = float(np.clip(rng.normal(params.slip_factor_mean, params.slip_factor_sigma), 0.0, 0.9)) \
        if params.slip_factor_sigma > 0 else float(np.clip(params.slip_factor_mean, 0.0, 0.9))
    reported_linear = true_linear / (1.0 - slip)
    step_dist = abs(reported_linear) * dt
    heading_noise = rng.normal(0.0, params.heading_noise_sigma * math.sqrt(step_dist)) \
        if params.heading_noise_sigma > 0 and step_dist > 0 else 0.0
    pose = _advance_unicycle(state.pose, reported_linear, true_angular, dt)
    pose = Pose2(pose.position, pose.heading + heading_noise)
    return replace(state, pose=pose)


def integrate_visual(
    state: OdometryState,
    true_delta,
    params: VisualOdomParams,
    rng: np.random.Generator,
) -> OdometryState:
    """Advance the pose by a visual-odometry measurement of true_delta.

    true_delta = (dx, dy, dheading) in the rover body frame at the start
    of the step. Noise is a random walk: per-axis sigma scales with
    sqrt(step distance).
    """
    if not state.visual_healthy:
        raise VisualUnavailable("visual odometry is in dropout")
    dx, dy, dth = true_delta
    step_dist = math.hypot(dx, dy)
    if params.drift_sigma > 0 and step_dist > 0:
        s = params.drift_sigma * math.sqrt(step_dist)
        dx += rng.normal(0.0, s)
        dy += rng.normal(0.0, s)
        dth += rng.normal(0.0, params.heading_drift_sigma * math.sqrt(step_dist))
    th = state.pose.heading
    c, s_ = math.cos(th), math.sin(th)
    pose = Pose2(
        Point2(
            state.pose.position.x + c * dx - s_ * dy,
            state.pose.position.y + s_ * dx + c * dy,
        ),
        th + dth,
    )
    return replace(state, pose=pose)


def update_health(
    state: OdometryState,
    now: float,
    params: VisualOdomParams,
    rng: np.random.Generator,
    force_dropout: bool = False,
) -> OdometryState:
    """Advance the visual-health state machine to time `now`.

    Dropout onsets arrive as a Poisson process at dropout_rate per minute,
    sampled over the elapsed interval; each dropout lasts
    dropout_duration. The active source always mirrors health; the pose is
    untouched (continuity across switches).
    """
    elapsed = max(0.0, now - state.last_update)
    dropout_until = state.dropout_until
    if force_dropout:
        dropout_until = now + params.dropout_duration
    elif state.visual_healthy and params.dropout_rate > 0 and elapsed > 0:
        p_onset = 1.0 - math.exp(-params.dropout_rate / 60.0 * elapsed)
        if rng.random() < p_onset:
            dropout_until = now + params.dropout_duration
    healthy = now >= dropout_until
    return replace(
        state,
        visual_healthy=healthy,
        active_source=OdometrySource.VISUAL if healthy else OdometrySource.WHEEL,
        dropout_until=dropout_until,
        last_update=now,
    )


def apply_pose_reset(state: OdometryState, uwb_position_in_odom: Point2) -> OdometryState:
    """Overwrite the position with a UWB-derived one; heading is kept.

    A single tag measures position only, so heading continues from
    odometry.
    """
    return replace(
        state,
        pose=Pose2(uwb_position_in_odom, state.pose.heading),
    )
