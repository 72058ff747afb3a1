"""Deterministic world simulator.

Owns the ground truth: the true rover pose, the true anchor positions,
simulation time, per-node clocks, and all randomness (one seed, split
into named substreams so enabling one noise source never perturbs
another's sequence). Estimators never feed back into the world.

The UWB frame is defined by the deployed constellation: the origin anchor
sits at (0, 0) and the first launched anchor fixes the +x direction,
modeling a post-landing survey.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from roverloc.geometry import (
    FrameTransform,
    Point2,
    Pose2,
    apply_transform,
    invert,
    wrap_angle,
)
from roverloc.odometry import VisualOdomParams, WheelOdomParams
from roverloc.ranging import (
    SPEED_OF_LIGHT,
    ClockModel,
    RangeNoiseModel,
    RangeQuality,
    measure_range,
    sds_twr_tof,
    simulate_exchange,
)

__all__ = [
    "LaunchSpec",
    "DeploymentPlan",
    "ScenarioConfig",
    "World",
    "SimError",
    "AlreadyDeployed",
    "NotDeployed",
    "OutOfArena",
    "InvalidDt",
]

ORIGIN_ANCHOR_ID = "A0"


class SimError(Exception):
    pass


class AlreadyDeployed(SimError):
    pass


class NotDeployed(SimError):
    pass


class OutOfArena(SimError):
    pass


class InvalidDt(SimError):
    pass


@dataclass(frozen=True)
class LaunchSpec:
    """One rocket launch: bearing relative to rover heading, nominal range,
    and landing scatter."""

    bearing: float
    nominal_range: float = 15.0
    scatter_sigma_range: float = 1.5
    scatter_sigma_bearing: float = 0.1

    def __post_init__(self):
        if self.nominal_range <= 0:
            raise ValueError("nominal_range must be > 0")


@dataclass(frozen=True)
class DeploymentPlan:
    """Origin-anchor drop plus a list of rocket launches (max 5 anchors)."""

    origin_drop: tuple = (-0.3, 0.0)  # body-frame offset of the dropped anchor
    launches: tuple = (
        LaunchSpec(bearing=math.pi / 4),
        LaunchSpec(bearing=-math.pi / 4),
    )

    def __post_init__(self):
        object.__setattr__(self, "launches", tuple(self.launches))
        if 1 + len(self.launches) > 5:
            raise ValueError("at most 5 anchors can be deployed")


def default_demo_plan() -> DeploymentPlan:
    """Demo constellation: dropped origin anchor plus 4 outward launches."""
    return DeploymentPlan(
        launches=tuple(
            LaunchSpec(bearing=b)
            for b in (math.pi / 4, -math.pi / 4, 3 * math.pi / 4, -3 * math.pi / 4)
        )
    )


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a run needs to be reproducible from the seed alone."""

    seed: int = 0
    arena: tuple = (-30.0, 30.0, -30.0, 30.0)  # xmin, xmax, ymin, ymax
    start_pose: tuple = (0.0, 0.0, 0.0)  # x, y, heading in the world frame
    plan: DeploymentPlan = field(default_factory=default_demo_plan)
    range_noise: RangeNoiseModel = field(default_factory=RangeNoiseModel)
    wheel_params: WheelOdomParams = field(default_factory=WheelOdomParams)
    visual_params: VisualOdomParams = field(default_factory=VisualOdomParams)
    ranging_rate: float = 5.0  # rounds per second
    visual_rate: float = 30.0  # Hz
    wheel_rate: float = 50.0  # Hz
    max_linear: float = 1.0  # m/s
    max_angular: float = 1.0  # rad/s
    waypoint_tolerance: float = 0.3  # m
    dt: float = 0.02  # s
    max_clock_drift: float = 20e-6
    reply_delay_bounds: tuple = (0.2e-3, 1.0e-3)  # s

    def arena_contains(self, p: Point2) -> bool:
        xmin, xmax, ymin, ymax = self.arena
        return xmin <= p.x <= xmax and ymin <= p.y <= ymax


def _advance_unicycle(pose: Pose2, linear: float, angular: float, dt: float) -> Pose2:
    th = pose.heading
    if abs(angular) < 1e-12:
        dx = linear * dt * math.cos(th)
        dy = linear * dt * math.sin(th)
    else:
        r = linear / angular
        dx = r * (math.sin(th + angular * dt) - math.sin(th))
        dy = -r * (math.cos(th + angular * dt) - math.cos(th))
    return Pose2(Point2(pose.position.x + dx, pose.position.y + dy), th + angular * dt)


class World:
    """Ground-truth state, stepped by exactly one owner.

    Events are appended to an internal log as plain JSON-friendly dicts;
    the owner drains them with `drain_events`.
    """

    def __init__(self, config: ScenarioConfig):
        self.config = config
        x, y, th = config.start_pose
        self.true_pose = Pose2(Point2(x, y), th)
        self.sim_time = 0.0
        self.anchors: dict = {}  # id -> true Point2 (world frame)
        self.deployed = False
        self.world_from_uwb: FrameTransform | None = None
        self.clocks: dict = {}  # node id -> ClockModel ("tag" plus anchors)

        ss = np.random.SeedSequence(config.seed)
        children = ss.spawn(5)
        self.rng_deploy = np.random.default_rng(children[0])
        self.rng_ranging = np.random.default_rng(children[1])
        self.rng_wheel = np.random.default_rng(children[2])
        self.rng_visual = np.random.default_rng(children[3])
        rng_clocks = np.random.default_rng(children[4])
        d = config.max_clock_drift
        self.clocks["tag"] = ClockModel(
            offset=float(rng_clocks.uniform(0, 1)),
            drift=float(rng_clocks.uniform(-d, d)),
        )
        for i in range(5):
            self.clocks[f"A{i}"] = ClockModel(
                offset=float(rng_clocks.uniform(0, 1)),
                drift=float(rng_clocks.uniform(-d, d)),
            )

        self._events: list = []
        self._next_ranging = 0.0
        self._next_visual = 0.0
        self._next_wheel = 0.0
        self._last_visual_pose = self.true_pose

    # -- events ---------------------------------------------------------

    def emit(self, event_type: str, **payload):
        self._events.append({"t": round(self.sim_time, 9), "type": event_type, **payload})

    def drain_events(self) -> list:
        out, self._events = self._events, []
        return out

    # -- deployment -----------------------------------------------------

    def deploy_anchors(self) -> None:
        """Drop the origin anchor and fire the launchers.

        Defines the UWB frame from the landed constellation and emits one
        `deploy` event with the anchor map in UWB coordinates.
        """
        if self.deployed:
            raise AlreadyDeployed("anchors already deployed")
        plan = self.config.plan
        pose = self.true_pose
        c, s = math.cos(pose.heading), math.sin(pose.heading)
        ox, oy = plan.origin_drop
        origin = Point2(
            pose.position.x + c * ox - s * oy,
            pose.position.y + s * ox + c * oy,
        )
        positions = {ORIGIN_ANCHOR_ID: origin}
        for i, launch in enumerate(plan.launches, start=1):
            rng_range = launch.nominal_range + float(
                self.rng_deploy.normal(0.0, launch.scatter_sigma_range)
            ) if launch.scatter_sigma_range > 0 else launch.nominal_range
            bearing = pose.heading + launch.bearing + (
                float(self.rng_deploy.normal(0.0, launch.scatter_sigma_bearing))
                if launch.scatter_sigma_bearing > 0 else 0.0
            )
            landing = Point2(
                pose.position.x + rng_range * math.cos(bearing),
                pose.position.y + rng_range * math.sin(bearing),
            )
            positions[f"A{i}"] = landing
        for a_id, p in positions.items():
            if not self.config.arena_contains(p):
                raise OutOfArena(f"anchor {a_id} landed outside the arena at ({p.x:.1f}, {p.y:.1f})")

        # UWB frame: origin anchor at (0,0); first launched anchor on +x.
        first = positions["A1"] if "A1" in positions else None
        if first is None:
            raise SimError("deployment plan needs at least one launch to fix the frame")
        axis = math.atan2(first.y - origin.y, first.x - origin.x)
        self.world_from_uwb = FrameTransform(axis, origin)
        self.anchors = positions
        self.deployed = True
        uwb = self.anchors_in_uwb_frame()
        self.emit(
            "deploy",
            anchors={a: [p.x, p.y] for a, p in uwb.items()},
        )

    def anchors_in_uwb_frame(self) -> dict:
        """True anchor positions expressed in the UWB frame (the survey)."""
        if not self.deployed:
            raise NotDeployed("no anchors deployed")
        t = invert(self.world_from_uwb)
        return {a: apply_transform(t, p) for a, p in self.anchors.items()}

    # -- stepping -------------------------------------------------------

    def step(self, command) -> None:
        """Advance the world by one fixed step under a drive command.

        Emits `wheel_tick`, `visual_tick`, and `ranging_round` events at
        their configured rates.
        """
        cfg = self.config
        dt = cfg.dt
        if not 0.0 < dt <= 0.1:
            raise InvalidDt(f"dt={dt} outside (0, 0.1]")
        linear = min(max(float(command[0]), -cfg.max_linear), cfg.max_linear)
        angular = min(max(float(command[1]), -cfg.max_angular), cfg.max_angular)

        self.true_pose = _advance_unicycle(self.true_pose, linear, angular, dt)
        self.sim_time += dt

        eps = 1e-9
        if self.sim_time + eps >= self._next_wheel:
            self._next_wheel += 1.0 / cfg.wheel_rate
            self.emit("wheel_tick", linear=linear, angular=angular, dt=dt)
        if self.sim_time + eps >= self._next_visual:
            self._next_visual += 1.0 / cfg.visual_rate
            prev = self._last_visual_pose
            cth, sth = math.cos(prev.heading), math.sin(prev.heading)
            wx = self.true_pose.position.x - prev.position.x
            wy = self.true_pose.position.y - prev.position.y
            self.emit(
                "visual_tick",
                dx=cth * wx + sth * wy,
                dy=-sth * wx + cth * wy,
                dheading=wrap_angle(self.true_pose.heading - prev.heading),
            )
            self._last_visual_pose = self.true_pose
        if self.deployed and self.sim_time + eps >= self._next_ranging:
            self._next_ranging += 1.0 / cfg.ranging_rate
            self._ranging_round()

    def _ranging_round(self) -> None:
        """Poll every anchor once: SDS-TWR exchange plus link noise."""
        cfg = self.config
        lo, hi = cfg.reply_delay_bounds
        measurements = []
        for a_id in sorted(self.anchors):
            true_d = self.true_pose.position.distance_to(self.anchors[a_id])
            exchange = simulate_exchange(
                true_d,
                self.clocks["tag"],
                self.clocks[a_id],
                reply_delay_tag=float(self.rng_ranging.uniform(lo, hi)),
                reply_delay_anchor=float(self.rng_ranging.uniform(lo, hi)),
            )
            twr_distance = sds_twr_tof(exchange) * SPEED_OF_LIGHT
            m = measure_range(
                twr_distance,
                cfg.range_noise,
                self.rng_ranging,
                anchor_id=a_id,
                timestamp=self.sim_time,
            )
            measurements.append(m)
        self.emit(
            "ranging_round",
            measurements=[
                {
                    "anchor_id": m.anchor_id,
                    "distance": round(m.distance, 9),
                    "quality": m.quality.value,
                }
                for m in measurements
            ],
        )

    def true_ranges(self) -> list:
        """Euclidean distances from the true pose to each deployed anchor."""
        if not self.deployed:
            raise NotDeployed("no anchors deployed")
        return [
            (a_id, self.true_pose.position.distance_to(p))
            for a_id, p in sorted(self.anchors.items())
        ]
