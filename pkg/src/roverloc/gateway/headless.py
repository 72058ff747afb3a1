"""Scripted mission execution: the command script plays the operator."""

from __future__ import annotations

from roverloc.gateway.config import scenario_to_dict
from roverloc.gateway.session import session_record
from roverloc.geometry import Point2
from roverloc.mission import Mission
from roverloc.sim import ScenarioConfig

__all__ = ["execute_script", "run_headless"]


def execute_script(config: ScenarioConfig, script: list) -> Mission:
    """Apply each scripted operator command to a fresh mission."""
    mission = Mission(config)
    for item in script:
        cmd = item["cmd"]
        if cmd == "deploy":
            mission.command_deploy()
        elif cmd == "calibrate":
            mission.run_calibration_drive(
                [tuple(seg) for seg in item["script"]] if "script" in item else None
            )
        elif cmd == "waypoint":
            mission.set_waypoint(Point2(float(item["x"]), float(item["y"])))
        elif cmd == "reset":
            mission.command_pose_reset()
        elif cmd == "skip":
            mission.skip_reset()
        elif cmd == "force_dropout":
            mission.force_visual_dropout(float(item["at"]))
    return mission


def run_headless(config: ScenarioConfig, script: list) -> dict:
    """Run a scripted mission and package the result as a session record."""
    mission = execute_script(config, script)
    return session_record(scenario_to_dict(config), script, mission.events)
