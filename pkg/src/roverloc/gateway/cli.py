"""Command line entry points: run, serve, replay, plot-summary."""

from __future__ import annotations

import argparse
import csv
import json
import sys

from roverloc.gateway import config as config_mod
from roverloc.gateway import headless, session as session_mod
from roverloc.gateway.server import BindFailed, OperatorServer

__all__ = ["main"]


def _load_scenario(args):
    config = config_mod.load_scenario(args.scenario)
    if args.seed is not None:
        from dataclasses import replace
        config = replace(config, seed=args.seed)
    return config


def _cmd_run(args) -> int:
    config = _load_scenario(args)
    script = config_mod.load_script(args.script)
    record = headless.run_headless(config, script)
    if args.out:
        session_mod.write_session(record, args.out)
    metrics = record["metrics"]
    print(json.dumps(metrics, sort_keys=True, indent=2))
    return 0


def _cmd_serve(args) -> int:
    config = _load_scenario(args)
    host, _, port = args.bind.rpartition(":")
    server = OperatorServer(
        config,
        host=host or "127.0.0.1",
        port=int(port),
        realtime_factor=args.realtime_factor,
    )
    server.start()
    print(f"operator protocol on ws://{server.host}:{server.port}", flush=True)
    try:
        server._acceptor.join()
    except KeyboardInterrupt:
        server.stop()
    return 0


def _cmd_replay(args) -> int:
    record = session_mod.read_session(args.session)
    config = config_mod.scenario_from_dict(record["scenario"])
    script = config_mod.script_from_list(record["script"])
    mission = headless.execute_script(config, script)
    session_mod.assert_logs_equal(record["events"], mission.events)
    print("replay ok: event logs identical")
    return 0


def _cmd_plot_summary(args) -> int:
    record = session_mod.read_session(args.session)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.writer(out)
    writer.writerow([
        "sim_time", "true_x", "true_y", "odom_x", "odom_y",
        "fix_x", "fix_y", "discrepancy",
    ])
    discrepancy_at = {
        e["t"]: e["discrepancy"] for e in record["events"] if e["type"] == "arrival"
    }
    for e in record["events"]:
        if e["type"] != "truth_sample":
            continue
        writer.writerow([
            e["t"], e["true_x"], e["true_y"], e["odom_x"], e["odom_y"],
            e.get("fix_x", ""), e.get("fix_y", ""),
            discrepancy_at.get(e["t"], ""),
        ])
    if args.out:
        out.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roverloc",
        description="UWB-anchor rover localization mission simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a scripted headless mission")
    run.add_argument("--scenario", required=True)
    run.add_argument("--script", required=True)
    run.add_argument("--out", help="session record output path")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.set_defaults(func=_cmd_run)

    serve = sub.add_parser("serve", help="host the operator protocol")
    serve.add_argument("--scenario", required=True)
    serve.add_argument("--bind", default="127.0.0.1:8765", help="host:port")
    serve.add_argument("--realtime-factor", type=float, default=1.0,
                       help="sim seconds per wall second; 0 = unpaced")
    serve.add_argument("--seed", type=int, help="override the scenario seed")
    serve.set_defaults(func=_cmd_serve)

    replay = sub.add_parser("replay", help="re-execute a session and verify")
    replay.add_argument("--session", required=True)
    replay.set_defaults(func=_cmd_replay)

    plot = sub.add_parser("plot-summary",
                          help="ground truth vs estimates as CSV")
    plot.add_argument("--session", required=True)
    plot.add_argument("--out", help="CSV output path (default stdout)")
    plot.set_defaults(func=_cmd_plot_summary)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (config_mod.ConfigInvalid, config_mod.ScriptInvalid,
            session_mod.SessionCorrupt, session_mod.ReplayDivergence,
            BindFailed) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        return 0  # stdout consumer went away (e.g. piped into head)


if __name__ == "__main__":
    sys.exit(main())
