"""Scenario and operator-script files.

Scenarios are YAML with nested sections; every key is validated and
errors name the offending key. Operator scripts are YAML lists of
commands consumed in order by the scripted operator.
"""

from __future__ import annotations

import math

import yaml

from roverloc.odometry import VisualOdomParams, WheelOdomParams
from roverloc.ranging import RangeNoiseModel
from roverloc.sim import DeploymentPlan, LaunchSpec, ScenarioConfig

__all__ = [
    "ConfigInvalid",
    "ScriptInvalid",
    "load_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "load_script",
    "script_from_list",
]


class ConfigInvalid(Exception):
    pass


class ScriptInvalid(Exception):
    pass


def _number(data, key, default, lo=None, hi=None):
    value = data.get(key, default)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigInvalid(f"{key}: expected a number, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigInvalid(f"{key}: {value} below minimum {lo}")
    if hi is not None and value > hi:
        raise ConfigInvalid(f"{key}: {value} above maximum {hi}")
    return float(value)


def _check_keys(data, allowed, prefix=""):
    for key in data:
        if key not in allowed:
            raise ConfigInvalid(f"{prefix}{key}: unknown key")


def scenario_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigInvalid("scenario: expected a mapping at the top level")
    _check_keys(
        data,
        {
            "seed", "arena", "start_pose", "dt", "ranging_rate", "visual_rate",
            "wheel_rate", "max_linear", "max_angular", "waypoint_tolerance",
            "range_noise", "wheel", "visual", "deployment", "max_clock_drift",
        },
    )
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigInvalid(f"seed: expected a non-negative integer, got {seed!r}")

    arena = data.get("arena", [-30.0, 30.0, -30.0, 30.0])
    if (not isinstance(arena, list) or len(arena) != 4
            or not all(isinstance(v, (int, float)) for v in arena)):
        raise ConfigInvalid(f"arena: expected [xmin, xmax, ymin, ymax], got {arena!r}")
    if arena[0] >= arena[1] or arena[2] >= arena[3]:
        raise ConfigInvalid(f"arena: empty extent {arena!r}")

    start = data.get("start_pose", [0.0, 0.0, 0.0])
    if not isinstance(start, list) or len(start) != 3:
        raise ConfigInvalid(f"start_pose: expected [x, y, heading], got {start!r}")

    noise_data = data.get("range_noise", {}) or {}
    _check_keys(noise_data, {"bias", "sigma", "dropout_probability"}, "range_noise.")
    try:
        range_noise = RangeNoiseModel(
            bias=_number(noise_data, "bias", 0.50),
            sigma=_number(noise_data, "sigma", 0.10, lo=0),
            dropout_probability=_number(
                noise_data, "dropout_probability", 0.02, lo=0, hi=1
            ),
        )
    except ValueError as exc:
        raise ConfigInvalid(f"range_noise: {exc}") from exc

    wheel_data = data.get("wheel", {}) or {}
    _check_keys(
        wheel_data,
        {"slip_factor_mean", "slip_factor_sigma", "heading_noise_sigma"},
        "wheel.",
    )
    try:
        wheel = WheelOdomParams(
            slip_factor_mean=_number(wheel_data, "slip_factor_mean", 0.08, lo=0, hi=0.5),
            slip_factor_sigma=_number(wheel_data, "slip_factor_sigma", 0.05, lo=0),
            heading_noise_sigma=_number(wheel_data, "heading_noise_sigma", 0.01, lo=0),
        )
    except ValueError as exc:
        raise ConfigInvalid(f"wheel: {exc}") from exc

    visual_data = data.get("visual", {}) or {}
    _check_keys(
        visual_data, {"drift_sigma", "dropout_rate", "dropout_duration"}, "visual."
    )
    try:
        visual = VisualOdomParams(
            drift_sigma=_number(visual_data, "drift_sigma", 0.01, lo=0),
            dropout_rate=_number(visual_data, "dropout_rate", 0.2, lo=0),
            dropout_duration=_number(visual_data, "dropout_duration", 10.0, lo=0),
        )
    except ValueError as exc:
        raise ConfigInvalid(f"visual: {exc}") from exc

    deploy_data = data.get("deployment", {}) or {}
    _check_keys(deploy_data, {"origin_drop", "launches"}, "deployment.")
    origin_drop = deploy_data.get("origin_drop", [-0.3, 0.0])
    if not isinstance(origin_drop, list) or len(origin_drop) != 2:
        raise ConfigInvalid(
            f"deployment.origin_drop: expected [x, y], got {origin_drop!r}"
        )
    launches = []
    default_launches = [
        {"bearing_deg": 45}, {"bearing_deg": -45},
        {"bearing_deg": 135}, {"bearing_deg": -135},
    ]
    for i, item in enumerate(deploy_data.get("launches", default_launches)):
        if not isinstance(item, dict):
            raise ConfigInvalid(f"deployment.launches[{i}]: expected a mapping")
        _check_keys(
            item,
            {"bearing_deg", "range", "scatter_range", "scatter_bearing"},
            f"deployment.launches[{i}].",
        )
        try:
            launches.append(
                LaunchSpec(
                    bearing=math.radians(_number(item, "bearing_deg", 0.0)),
                    nominal_range=_number(item, "range", 15.0, lo=1e-6),
                    scatter_sigma_range=_number(item, "scatter_range", 1.5, lo=0),
                    scatter_sigma_bearing=_number(item, "scatter_bearing", 0.1, lo=0),
                )
            )
        except ValueError as exc:
            raise ConfigInvalid(f"deployment.launches[{i}]: {exc}") from exc
    if not launches:
        raise ConfigInvalid("deployment.launches: at least one launch is required")
    try:
        plan = DeploymentPlan(
            origin_drop=(float(origin_drop[0]), float(origin_drop[1])),
            launches=tuple(launches),
        )
    except ValueError as exc:
        raise ConfigInvalid(f"deployment: {exc}") from exc

    return ScenarioConfig(
        seed=seed,
        arena=tuple(float(v) for v in arena),
        start_pose=tuple(float(v) for v in start),
        plan=plan,
        range_noise=range_noise,
        wheel_params=wheel,
        visual_params=visual,
        ranging_rate=_number(data, "ranging_rate", 5.0, lo=1e-6),
        visual_rate=_number(data, "visual_rate", 30.0, lo=1e-6),
        wheel_rate=_number(data, "wheel_rate", 50.0, lo=1e-6),
        max_linear=_number(data, "max_linear", 1.0, lo=1e-6),
        max_angular=_number(data, "max_angular", 1.0, lo=1e-6),
        waypoint_tolerance=_number(data, "waypoint_tolerance", 0.3, lo=1e-6),
        dt=_number(data, "dt", 0.02, lo=1e-6, hi=0.1),
        max_clock_drift=_number(data, "max_clock_drift", 20e-6, lo=0, hi=100e-6),
    )


def scenario_to_dict(config: ScenarioConfig) -> dict:
    """Round-trippable plain-dict form (stored in session records)."""
    return {
        "seed": config.seed,
        "arena": list(config.arena),
        "start_pose": list(config.start_pose),
        "dt": config.dt,
        "ranging_rate": config.ranging_rate,
        "visual_rate": config.visual_rate,
        "wheel_rate": config.wheel_rate,
        "max_linear": config.max_linear,
        "max_angular": config.max_angular,
        "waypoint_tolerance": config.waypoint_tolerance,
        "max_clock_drift": config.max_clock_drift,
        "range_noise": {
            "bias": config.range_noise.bias,
            "sigma": config.range_noise.sigma,
            "dropout_probability": config.range_noise.dropout_probability,
        },
        "wheel": {
            "slip_factor_mean": config.wheel_params.slip_factor_mean,
            "slip_factor_sigma": config.wheel_params.slip_factor_sigma,
            "heading_noise_sigma": config.wheel_params.heading_noise_sigma,
        },
        "visual": {
            "drift_sigma": config.visual_params.drift_sigma,
            "dropout_rate": config.visual_params.dropout_rate,
            "dropout_duration": config.visual_params.dropout_duration,
        },
        "deployment": {
            "origin_drop": list(config.plan.origin_drop),
            "launches": [
                {
                    "bearing_deg": math.degrees(launch.bearing),
                    "range": launch.nominal_range,
                    "scatter_range": launch.scatter_sigma_range,
                    "scatter_bearing": launch.scatter_sigma_bearing,
                }
                for launch in config.plan.launches
            ],
        },
    }


def load_scenario(path) -> ScenarioConfig:
    try:
        with open(path) as handle:
            data = yaml.safe_load(handle)
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"scenario file is not valid YAML: {exc}") from exc
    return scenario_from_dict(data or {})


VALID_COMMANDS = {"deploy", "calibrate", "waypoint", "reset", "skip", "force_dropout"}


def script_from_list(items) -> list:
    """Validate an operator command script (list of command dicts)."""
    if not isinstance(items, list):
        raise ScriptInvalid("script: expected a list of commands")
    script = []
    for i, item in enumerate(items):
        if not isinstance(item, dict) or "cmd" not in item:
            raise ScriptInvalid(f"script[{i}]: expected a mapping with a 'cmd' key")
        cmd = item["cmd"]
        if cmd not in VALID_COMMANDS:
            raise ScriptInvalid(f"script[{i}].cmd: unknown command {cmd!r}")
        if cmd == "waypoint":
            if not all(isinstance(item.get(k), (int, float)) for k in ("x", "y")):
                raise ScriptInvalid(f"script[{i}]: waypoint needs numeric x and y")
        if cmd == "force_dropout":
            if not isinstance(item.get("at"), (int, float)):
                raise ScriptInvalid(f"script[{i}]: force_dropout needs a numeric 'at'")
        if cmd == "calibrate" and "script" in item:
            segs = item["script"]
            ok = isinstance(segs, list) and all(
                isinstance(s, list) and len(s) == 3
                and all(isinstance(v, (int, float)) for v in s)
                for s in segs
            )
            if not ok:
                raise ScriptInvalid(
                    f"script[{i}].script: expected [[linear, angular, duration], ...]"
                )
        script.append(item)
    return script


def load_script(path) -> list:
    try:
        with open(path) as handle:
            data = yaml.safe_load(handle)
    except yaml.YAMLError as exc:
        raise ScriptInvalid(f"script file is not valid YAML: {exc}") from exc
    return script_from_list(data or [])
