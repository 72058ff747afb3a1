"""Session records: config snapshot + event log + summary metrics.

Files are JSON with a schema version and a SHA-256 content checksum, so
corruption and incompatible versions fail loudly. A recorded session can
be re-executed from its config and command script; any event-log
difference is a determinism bug and is reported as divergence.
"""

from __future__ import annotations

import hashlib
import json

__all__ = [
    "SCHEMA_VERSION",
    "SessionCorrupt",
    "ReplayDivergence",
    "event_log_lines",
    "session_record",
    "write_session",
    "read_session",
    "summarize",
]

SCHEMA_VERSION = 1


class SessionCorrupt(Exception):
    pass


class ReplayDivergence(Exception):
    pass


def event_log_lines(events: list) -> str:
    """Canonical newline-delimited serialization of an event log."""
    return "".join(json.dumps(e, sort_keys=True) + "\n" for e in events)


def _checksum(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def summarize(events: list) -> dict:
    """Summary metrics computed from an event log."""
    fix_errors = [e["true_error"] for e in events if e["type"] == "fix"]
    discrepancies = [
        e["discrepancy"] for e in events
        if e["type"] == "arrival" and e.get("discrepancy") is not None
    ]
    resets = sum(1 for e in events if e["type"] == "reset")
    arrivals = [e for e in events if e["type"] == "arrival"]
    return {
        "fix_count": len(fix_errors),
        "mean_fix_error": sum(fix_errors) / len(fix_errors) if fix_errors else None,
        "max_fix_error": max(fix_errors) if fix_errors else None,
        "reset_count": resets,
        "waypoint_count": len(arrivals),
        "per_waypoint_discrepancy": discrepancies,
        "terminal_true_error": arrivals[-1]["true_error"] if arrivals else None,
    }


def session_record(scenario_dict: dict, script: list, events: list) -> dict:
    body = {
        "schema_version": SCHEMA_VERSION,
        "scenario": scenario_dict,
        "script": script,
        "events": events,
        "metrics": summarize(events),
    }
    body["checksum"] = _checksum({k: v for k, v in body.items() if k != "checksum"})
    return body


def write_session(record: dict, path) -> None:
    with open(path, "w") as handle:
        json.dump(record, handle, sort_keys=True)
        handle.write("\n")


def read_session(path) -> dict:
    try:
        with open(path) as handle:
            record = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise SessionCorrupt(f"unreadable session file: {exc}") from exc
    if not isinstance(record, dict) or "schema_version" not in record:
        raise SessionCorrupt("not a session record (missing schema_version)")
    if record["schema_version"] != SCHEMA_VERSION:
        raise SessionCorrupt(
            f"session schema version {record['schema_version']} "
            f"not supported (expected {SCHEMA_VERSION})"
        )
    expected = record.get("checksum")
    actual = _checksum({k: v for k, v in record.items() if k != "checksum"})
    if expected != actual:
        raise SessionCorrupt("checksum mismatch: session file is corrupt")
    return record


def assert_logs_equal(original: list, replayed: list) -> None:
    """Raise ReplayDivergence with a diagnostic at the first differing event."""
    if original == replayed:
        return
    for i, (a, b) in enumerate(zip(original, replayed)):
        if a != b:
            raise ReplayDivergence(
                f"event {i} diverged:\n  recorded: {json.dumps(a, sort_keys=True)}"
                f"\n  replayed: {json.dumps(b, sort_keys=True)}"
            )
    raise ReplayDivergence(
        f"event count diverged: recorded {len(original)}, replayed {len(replayed)}"
    )
