"""Move-and-wait mission state machine.

Phases: Idle -> Deploying -> CalibrationDrive -> AwaitWaypoint;
AwaitWaypoint -> Driving -> AwaitResetDecision -> AwaitWaypoint; any
phase may fall to Faulted. The operator (scripted or live) supplies
waypoints and decides at each stop whether to overwrite the odometry
position with the UWB fix.

Simulation time only advances while the mission is executing (deploying,
calibrating, driving); it is frozen while awaiting an operator decision,
so identical command sequences always produce identical event logs no
matter how they are delivered.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from roverloc import align as align_mod
from roverloc import locate as locate_mod
from roverloc import odometry as odom_mod
from roverloc.geometry import (
    FrameTransform,
    Point2,
    Pose2,
    apply_transform,
    compose,
    invert,
    wrap_angle,
)
from roverloc.ranging import RangeMeasurement, RangeQuality
from roverloc.sim import OutOfArena, ScenarioConfig, World

__all__ = [
    "MissionPhase",
    "Mission",
    "MissionError",
    "WrongPhase",
    "TargetOutOfBounds",
    "NoFixAvailable",
    "CalibrationFailed",
    "MissionFaulted",
    "default_calibration_script",
]

FIX_STALENESS_WINDOW = 2.0  # s
MEASUREMENT_WINDOW = 0.5  # s; freshness window feeding the trilateration
MIN_CALIBRATION_COLLINEARITY = 0.1
HEADING_DEADBAND = 0.1  # rad; below this the controller drives forward
DRIVE_TIMEOUT = 600.0  # s per waypoint before faulting


class MissionError(Exception):
    pass


class WrongPhase(MissionError):
    pass


class TargetOutOfBounds(MissionError):
    pass


class NoFixAvailable(MissionError):
    pass


class CalibrationFailed(MissionError):
    pass


class MissionFaulted(MissionError):
    pass


class MissionPhase(enum.Enum):
    IDLE = "idle"
    DEPLOYING = "deploying"
    CALIBRATION_DRIVE = "calibration_drive"
    AWAIT_WAYPOINT = "await_waypoint"
    DRIVING = "driving"
    AWAIT_RESET_DECISION = "await_reset_decision"
    FAULTED = "faulted"


LEGAL_TRANSITIONS = {
    (MissionPhase.IDLE, MissionPhase.DEPLOYING),
    (MissionPhase.DEPLOYING, MissionPhase.CALIBRATION_DRIVE),
    (MissionPhase.CALIBRATION_DRIVE, MissionPhase.AWAIT_WAYPOINT),
    (MissionPhase.AWAIT_WAYPOINT, MissionPhase.DRIVING),
    (MissionPhase.DRIVING, MissionPhase.AWAIT_RESET_DECISION),
    (MissionPhase.AWAIT_RESET_DECISION, MissionPhase.AWAIT_WAYPOINT),
}


def default_calibration_script():
    """L-shaped drive: two 8 m legs joined by a 90-degree turn in place."""
    return [(1.0, 0.0, 8.0), (0.0, math.pi / 4, 2.0), (1.0, 0.0, 8.0)]


@dataclass
class _ForcedDropout:
    at_time: float
    fired: bool = False


class Mission:
    """Owns the world and the full estimation stack for one mission."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.world = World(config)
        self.phase = MissionPhase.IDLE
        self.odom = odom_mod.OdometryState.initial()
        self.anchor_map: locate_mod.AnchorMap | None = None
        self.alignment: align_mod.AlignmentResult | None = None
        self.latest_fix: locate_mod.FixResult | None = None
        self.target: Point2 | None = None
        self.discrepancy: float | None = None
        self.calibration_buffer = align_mod.CorrespondenceBuffer()
        self.events: list = []
        self._recent_measurements: list = []
        self._forced_dropouts: list = []
        self._step_hook = None  # called after every _step (pacing/broadcast)
        # The odometry frame is anchored at the start pose: operator-side
        # knowledge used only for waypoint bounds checks and truth logging.
        x, y, th = config.start_pose
        self.world_from_odom = FrameTransform(th, Point2(x, y))
        self._transition(self.phase, initial=True)

    # -- bookkeeping ------------------------------------------------------

    def _transition(self, phase: MissionPhase, cause: str = "", initial: bool = False):
        if not initial:
            legal = (self.phase, phase) in LEGAL_TRANSITIONS or phase is MissionPhase.FAULTED
            if not legal:
                raise WrongPhase(f"illegal transition {self.phase.value} -> {phase.value}")
        self.phase = phase
        record = {
            "t": round(self.world.sim_time, 9),
            "type": "phase",
            "phase": phase.value,
        }
        if cause:
            record["cause"] = cause
        self.events.append(record)

    def _require_phase(self, *phases: MissionPhase):
        if self.phase not in phases:
            raise WrongPhase(
                f"command not allowed in phase {self.phase.value}"
            )

    def force_visual_dropout(self, at_time: float):
        """Schedule a deterministic visual dropout (test and demo hook)."""
        self._forced_dropouts.append(_ForcedDropout(at_time))

    def odom_pose_in_world(self) -> Pose2:
        p = apply_transform(self.world_from_odom, self.odom.pose.position)
        return Pose2(p, self.odom.pose.heading + self.world_from_odom.rotation)

    def true_alignment(self) -> FrameTransform:
        """Ground-truth UWB -> odometry transform (for logging and tests)."""
        return compose(invert(self.world_from_odom), self.world.world_from_uwb)

    # -- stepping ---------------------------------------------------------

    def _step(self, command, calibrating: bool = False):
        world = self.world
        force = False
        for fd in self._forced_dropouts:
            if not fd.fired and world.sim_time + world.config.dt >= fd.at_time:
                fd.fired = True
                force = True
        world.step(command)
        self.odom = odom_mod.update_health(
            self.odom,
            world.sim_time,
            self.config.visual_params,
            world.rng_visual,
            force_dropout=force,
        )
        for event in world.drain_events():
            etype = event["type"]
            self.events.append(event)
            if etype == "wheel_tick":
                if self.odom.active_source is odom_mod.OdometrySource.WHEEL:
                    self.odom = odom_mod.integrate_wheel(
                        self.odom,
                        (event["linear"], event["angular"]),
                        event["dt"],
                        self.config.wheel_params,
                        (event["linear"], event["angular"]),
                        world.rng_wheel,
                    )
            elif etype == "visual_tick":
                if self.odom.active_source is odom_mod.OdometrySource.VISUAL:
                    self.odom = odom_mod.integrate_visual(
                        self.odom,
                        (event["dx"], event["dy"], event["dheading"]),
                        self.config.visual_params,
                        world.rng_visual,
                    )
            elif etype == "ranging_round":
                self._handle_ranging_round(event, calibrating)
        if self._step_hook is not None:
            self._step_hook(self)

    def _handle_ranging_round(self, event, calibrating: bool):
        # the round's own (rounded) timestamp, not the raw accumulator:
        # rounding may land the event a hair ahead of sim_time
        now = event["t"]
        for m in event["measurements"]:
            self._recent_measurements.append(
                RangeMeasurement(
                    anchor_id=m["anchor_id"],
                    distance=m["distance"],
                    timestamp=event["t"],
                    quality=RangeQuality(m["quality"]),
                )
            )
        cutoff = now - MEASUREMENT_WINDOW
        self._recent_measurements = [
            m for m in self._recent_measurements if m.timestamp >= cutoff
        ]
        if self.anchor_map is None:
            return
        usable = locate_mod.select_measurements(
            self._recent_measurements, MEASUREMENT_WINDOW, now
        )
        if len(usable) < 3:
            return
        try:
            guess = self.latest_fix.position if self.latest_fix else None
            fix = locate_mod.trilaterate(self.anchor_map, usable, initial_guess=guess)
        except locate_mod.LocateError:
            return
        self.latest_fix = fix
        fix_world = apply_transform(self.world.world_from_uwb, fix.position)
        record = {
            "t": round(now, 9),
            "type": "fix",
            "x": fix.position.x,
            "y": fix.position.y,
            "residual_rms": fix.residual_rms,
            "gdop": fix.gdop,
            "n_anchors": len(fix.used_anchor_ids),
            "true_error": self.world.true_pose.position.distance_to(fix_world),
        }
        if self.alignment is not None:
            est_world = apply_transform(
                self.world_from_odom,
                apply_transform(self.alignment.transform, fix.position),
            )
            record["alignment_map_error"] = est_world.distance_to(fix_world)
        self.events.append(record)
        self._sample_truth()
        if calibrating:
            self.calibration_buffer = align_mod.record_pair(
                self.calibration_buffer, fix, self.odom.pose, now
            )

    def _sample_truth(self):
        """Ground-truth comparison record at fix rate, for summaries."""
        true_p = self.world.true_pose.position
        est_world = self.odom_pose_in_world().position
        record = {
            "t": round(self.world.sim_time, 9),
            "type": "truth_sample",
            "true_x": true_p.x,
            "true_y": true_p.y,
            "odom_x": self.odom.pose.position.x,
            "odom_y": self.odom.pose.position.y,
            "est_error": true_p.distance_to(est_world),
            "source": self.odom.active_source.value,
        }
        if self.latest_fix is not None:
            record["fix_x"] = self.latest_fix.position.x
            record["fix_y"] = self.latest_fix.position.y
        self.events.append(record)

    # -- operator commands --------------------------------------------------

    def command_deploy(self):
        """Drop and launch the anchors, then enter the calibration phase."""
        self._require_phase(MissionPhase.IDLE)
        self._transition(MissionPhase.DEPLOYING)
        try:
            self.world.deploy_anchors()
        except OutOfArena as exc:
            self._transition(MissionPhase.FAULTED, cause=str(exc))
            raise MissionFaulted(str(exc)) from exc
        self.events.extend(self.world.drain_events())
        uwb = self.world.anchors_in_uwb_frame()
        self.anchor_map = locate_mod.AnchorMap(sorted(uwb.items()))
        self._transition(MissionPhase.CALIBRATION_DRIVE)

    def run_calibration_drive(self, script=None):
        """Execute the calibration drive and solve the frame alignment.

        The script is a list of (linear, angular, duration) segments. On
        degenerate geometry the mission stays in CalibrationDrive so the
        operator can retry with an extended script.
        """
        self._require_phase(MissionPhase.CALIBRATION_DRIVE)
        script = script if script is not None else default_calibration_script()
        dt = self.config.dt
        for linear, angular, duration in script:
            for _ in range(round(duration / dt)):
                self._step((linear, angular), calibrating=True)
        try:
            if len(self.calibration_buffer) >= 2:
                _, collinearity = align_mod.assess_observability(self.calibration_buffer)
                if collinearity <= MIN_CALIBRATION_COLLINEARITY:
                    raise align_mod.DegenerateGeometry(
                        f"calibration drive too collinear ({collinearity:.3f})"
                    )
            result = align_mod.solve_alignment(self.calibration_buffer)
        except align_mod.AlignError as exc:
            self.events.append(
                {
                    "t": round(self.world.sim_time, 9),
                    "type": "calibration_failed",
                    "cause": str(exc),
                }
            )
            raise CalibrationFailed(str(exc)) from exc
        self.alignment = result
        true_t = self.true_alignment()
        self.events.append(
            {
                "t": round(self.world.sim_time, 9),
                "type": "alignment",
                "rotation": result.transform.rotation,
                "tx": result.transform.translation.x,
                "ty": result.transform.translation.y,
                "rms_error": result.rms_error,
                "pair_count": result.pair_count,
                "true_rotation_error": abs(
                    wrap_angle(result.transform.rotation - true_t.rotation)
                ),
                "true_translation_error": result.transform.translation.distance_to(
                    true_t.translation
                ),
            }
        )
        self._transition(MissionPhase.AWAIT_WAYPOINT)

    def set_waypoint(self, target: Point2):
        """Drive to a target given in the odometry frame, then stop and
        present the odometry/UWB discrepancy for the reset decision."""
        self._require_phase(MissionPhase.AWAIT_WAYPOINT)
        target_world = apply_transform(self.world_from_odom, target)
        if not self.config.arena_contains(target_world):
            raise TargetOutOfBounds(
                f"target ({target.x:.1f}, {target.y:.1f}) outside the arena"
            )
        self.target = target
        self._transition(MissionPhase.DRIVING)
        self.events.append(
            {
                "t": round(self.world.sim_time, 9),
                "type": "waypoint",
                "x": target.x,
                "y": target.y,
            }
        )
        deadline = self.world.sim_time + DRIVE_TIMEOUT
        while True:
            pos = self.odom.pose.position
            dist = pos.distance_to(target)
            if dist < self.config.waypoint_tolerance:
                break
            if self.world.sim_time > deadline:
                self._transition(MissionPhase.FAULTED, cause="drive timeout")
                raise MissionFaulted("drive timeout")
            bearing = math.atan2(target.y - pos.y, target.x - pos.x)
            heading_error = wrap_angle(bearing - self.odom.pose.heading)
            if abs(heading_error) > HEADING_DEADBAND:
                command = (0.0, 2.0 * heading_error)
            else:
                command = (min(self.config.max_linear, dist), 1.5 * heading_error)
            self._step(command)
        self.target = None
        self.discrepancy = self._compute_discrepancy()
        self._transition(MissionPhase.AWAIT_RESET_DECISION)
        self.events.append(
            {
                "t": round(self.world.sim_time, 9),
                "type": "arrival",
                "odom_x": self.odom.pose.position.x,
                "odom_y": self.odom.pose.position.y,
                "discrepancy": self.discrepancy,
                "true_error": self.world.true_pose.position.distance_to(
                    self.odom_pose_in_world().position
                ),
            }
        )

    def _compute_discrepancy(self) -> float | None:
        if self.latest_fix is None or self.alignment is None:
            return None
        if self.world.sim_time - self.latest_fix.timestamp > FIX_STALENESS_WINDOW:
            return None
        fix_odom = apply_transform(self.alignment.transform, self.latest_fix.position)
        return self.odom.pose.position.distance_to(fix_odom)

    def command_pose_reset(self):
        """Overwrite the odometry position with the aligned UWB fix."""
        self._require_phase(MissionPhase.AWAIT_RESET_DECISION)
        if self.latest_fix is None or self.alignment is None:
            raise NoFixAvailable("no fix or alignment available")
        if self.world.sim_time - self.latest_fix.timestamp > FIX_STALENESS_WINDOW:
            raise NoFixAvailable(
                f"latest fix is {self.world.sim_time - self.latest_fix.timestamp:.1f} s old"
            )
        fix_odom = apply_transform(self.alignment.transform, self.latest_fix.position)
        prior = self.odom.pose
        self.odom = odom_mod.apply_pose_reset(self.odom, fix_odom)
        self.events.append(
            {
                "t": round(self.world.sim_time, 9),
                "type": "reset",
                "prior_x": prior.position.x,
                "prior_y": prior.position.y,
                "new_x": fix_odom.x,
                "new_y": fix_odom.y,
                "true_error_after": self.world.true_pose.position.distance_to(
                    self.odom_pose_in_world().position
                ),
            }
        )
        self.discrepancy = self._compute_discrepancy()
        self._transition(MissionPhase.AWAIT_WAYPOINT)

    def skip_reset(self):
        """Keep the odometry pose and return to waypoint selection."""
        self._require_phase(MissionPhase.AWAIT_RESET_DECISION)
        self.events.append({"t": round(self.world.sim_time, 9), "type": "skip_reset"})
        self._transition(MissionPhase.AWAIT_WAYPOINT)

    # -- introspection ------------------------------------------------------

    def snapshot(self) -> dict:
        """JSON-friendly state view for the operator console."""
        anchors_odom = {}
        if self.anchor_map is not None and self.alignment is not None:
            for a_id, p in self.anchor_map.anchors:
                q = apply_transform(self.alignment.transform, p)
                anchors_odom[a_id] = [q.x, q.y]
        fix_odom = None
        if self.latest_fix is not None and self.alignment is not None:
            q = apply_transform(self.alignment.transform, self.latest_fix.position)
            fix_odom = [q.x, q.y]
        return {
            "sim_time": round(self.world.sim_time, 9),
            "phase": self.phase.value,
            "odom": {
                "x": self.odom.pose.position.x,
                "y": self.odom.pose.position.y,
                "heading": self.odom.pose.heading,
                "source": self.odom.active_source.value,
            },
            "anchors_odom": anchors_odom,
            "fix_odom": fix_odom,
            "discrepancy": self.discrepancy,
            "target": [self.target.x, self.target.y] if self.target else None,
            "arena": list(self.config.arena),
            "commands": {
                "deploy": self.phase is MissionPhase.IDLE,
                "calibrate": self.phase is MissionPhase.CALIBRATION_DRIVE,
                "set_waypoint": self.phase is MissionPhase.AWAIT_WAYPOINT,
                "reset": (
                    self.phase is MissionPhase.AWAIT_RESET_DECISION
                    and self.discrepancy is not None
                ),
                "skip_reset": self.phase is MissionPhase.AWAIT_RESET_DECISION,
            },
        }
