import json

import pytest
import yaml
from websockets.sync.client import connect

from roverloc.gateway import headless
from roverloc.gateway.cli import main as cli_main
from roverloc.gateway.config import (
    ConfigInvalid,
    ScriptInvalid,
    load_scenario,
    load_script,
    scenario_from_dict,
    scenario_to_dict,
    script_from_list,
)
from roverloc.gateway.server import OperatorServer, PROTOCOL_VERSION
from roverloc.gateway.session import (
    SCHEMA_VERSION,
    ReplayDivergence,
    SessionCorrupt,
    assert_logs_equal,
    event_log_lines,
    read_session,
    session_record,
    write_session,
)
from roverloc.sim import ScenarioConfig

SHORT_SCRIPT = [
    {"cmd": "deploy"},
    {"cmd": "calibrate"},
    {"cmd": "waypoint", "x": 5.0, "y": 2.0},
    {"cmd": "reset"},
    {"cmd": "waypoint", "x": 1.0, "y": 1.0},
    {"cmd": "skip"},
]


class TestScenarioConfigParsing:
    def test_empty_dict_gives_defaults(self):
        config = scenario_from_dict({})
        assert config == ScenarioConfig()

    def test_roundtrip(self):
        config = ScenarioConfig(seed=42, dt=0.05, max_linear=0.8)
        assert scenario_from_dict(scenario_to_dict(config)) == config

    def test_unknown_key_named(self):
        with pytest.raises(ConfigInvalid, match="velocity"):
            scenario_from_dict({"velocity": 3})

    def test_nested_unknown_key_named(self):
        with pytest.raises(ConfigInvalid, match="range_noise.spread"):
            scenario_from_dict({"range_noise": {"spread": 1}})

    def test_bad_number_named(self):
        with pytest.raises(ConfigInvalid, match="dt"):
            scenario_from_dict({"dt": "fast"})
        with pytest.raises(ConfigInvalid, match="dt"):
            scenario_from_dict({"dt": 0.5})

    def test_bad_seed(self):
        with pytest.raises(ConfigInvalid, match="seed"):
            scenario_from_dict({"seed": -1})
        with pytest.raises(ConfigInvalid, match="seed"):
            scenario_from_dict({"seed": 1.5})

    def test_bad_arena(self):
        with pytest.raises(ConfigInvalid, match="arena"):
            scenario_from_dict({"arena": [5, -5, -5, 5]})

    def test_bad_launch_named_with_index(self):
        with pytest.raises(ConfigInvalid, match=r"launches\[1\]"):
            scenario_from_dict({
                "deployment": {"launches": [{"bearing_deg": 45},
                                            {"bearing_deg": 90, "spin": 1}]}
            })

    def test_load_scenario_yaml(self, tmp_path):
        path = tmp_path / "s.yaml"
        path.write_text(yaml.safe_dump({"seed": 3, "range_noise": {"bias": 0.2}}))
        config = load_scenario(path)
        assert config.seed == 3
        assert config.range_noise.bias == 0.2

    def test_load_scenario_bad_yaml(self, tmp_path):
        path = tmp_path / "s.yaml"
        path.write_text("seed: [unclosed")
        with pytest.raises(ConfigInvalid):
            load_scenario(path)


class TestScriptParsing:
    def test_valid_script(self):
        assert script_from_list(SHORT_SCRIPT) == SHORT_SCRIPT

    def test_not_a_list(self):
        with pytest.raises(ScriptInvalid):
            script_from_list({"cmd": "deploy"})

    def test_unknown_command_named(self):
        with pytest.raises(ScriptInvalid, match=r"script\[0\]"):
            script_from_list([{"cmd": "launch"}])

    def test_waypoint_needs_coordinates(self):
        with pytest.raises(ScriptInvalid, match="waypoint"):
            script_from_list([{"cmd": "waypoint", "x": 1.0}])

    def test_force_dropout_needs_time(self):
        with pytest.raises(ScriptInvalid, match="force_dropout"):
            script_from_list([{"cmd": "force_dropout"}])

    def test_calibrate_segments_checked(self):
        with pytest.raises(ScriptInvalid, match=r"script\[0\].script"):
            script_from_list([{"cmd": "calibrate", "script": [[1.0, 0.0]]}])

    def test_load_script_yaml(self, tmp_path):
        path = tmp_path / "ops.yaml"
        path.write_text(yaml.safe_dump(SHORT_SCRIPT))
        assert load_script(path) == SHORT_SCRIPT


class TestHeadlessDeterminism:
    def test_identical_logs_same_seed(self):
        logs = [
            event_log_lines(headless.run_headless(
                ScenarioConfig(seed=5), SHORT_SCRIPT)["events"])
            for _ in range(2)
        ]
        assert logs[0] == logs[1]

    def test_different_seed_differs(self):
        a = headless.run_headless(ScenarioConfig(seed=5), SHORT_SCRIPT)
        b = headless.run_headless(ScenarioConfig(seed=6), SHORT_SCRIPT)
        assert a["events"] != b["events"]

    def test_metrics_populated(self):
        record = headless.run_headless(ScenarioConfig(seed=5), SHORT_SCRIPT)
        m = record["metrics"]
        assert m["waypoint_count"] == 2
        assert m["reset_count"] == 1
        assert m["fix_count"] > 0
        assert m["mean_fix_error"] < 1.0


@pytest.fixture(scope="module")
def record():
    return headless.run_headless(ScenarioConfig(seed=2), SHORT_SCRIPT)


class TestSessionRecords:
    def test_write_read_roundtrip(self, record, tmp_path):
        path = tmp_path / "session.json"
        write_session(record, path)
        assert read_session(path) == record

    def test_flipped_byte_detected(self, record, tmp_path):
        path = tmp_path / "session.json"
        write_session(record, path)
        raw = path.read_text()
        # corrupt one digit inside the payload, keeping valid JSON
        idx = raw.index('"events"') + 40
        while not raw[idx].isdigit():
            idx += 1
        ch = raw[idx]
        raw = raw[:idx] + ("1" if ch != "1" else "2") + raw[idx + 1:]
        path.write_text(raw)
        with pytest.raises(SessionCorrupt, match="checksum"):
            read_session(path)

    def test_unsupported_schema_version(self, record, tmp_path):
        path = tmp_path / "session.json"
        bad = dict(record, schema_version=SCHEMA_VERSION + 1)
        write_session(bad, path)
        with pytest.raises(SessionCorrupt, match="schema version"):
            read_session(path)

    def test_not_a_record(self, tmp_path):
        path = tmp_path / "session.json"
        path.write_text("[1, 2, 3]\n")
        with pytest.raises(SessionCorrupt):
            read_session(path)

    def test_truncated_file(self, record, tmp_path):
        path = tmp_path / "session.json"
        write_session(record, path)
        path.write_text(path.read_text()[:100])
        with pytest.raises(SessionCorrupt):
            read_session(path)


class TestReplay:
    def test_replay_matches(self):
        record = headless.run_headless(ScenarioConfig(seed=8), SHORT_SCRIPT)
        config = scenario_from_dict(record["scenario"])
        mission = headless.execute_script(config, record["script"])
        assert_logs_equal(record["events"], mission.events)

    def test_divergence_reports_first_difference(self):
        events = headless.run_headless(ScenarioConfig(seed=8),
                                       [{"cmd": "deploy"}])["events"]
        mutated = [dict(e) for e in events]
        mutated[3]["t"] = 99.0
        with pytest.raises(ReplayDivergence, match="event 3"):
            assert_logs_equal(events, mutated)

    def test_count_divergence(self):
        events = headless.run_headless(ScenarioConfig(seed=8),
                                       [{"cmd": "deploy"}])["events"]
        with pytest.raises(ReplayDivergence, match="count"):
            assert_logs_equal(events, events[:-1])


class TestCli:
    @pytest.fixture()
    def files(self, tmp_path):
        scenario = tmp_path / "scenario.yaml"
        scenario.write_text(yaml.safe_dump({"seed": 4}))
        script = tmp_path / "ops.yaml"
        script.write_text(yaml.safe_dump(SHORT_SCRIPT))
        return scenario, script, tmp_path / "session.json"

    def test_run_then_replay(self, files, capsys):
        scenario, script, out = files
        assert cli_main(["run", "--scenario", str(scenario),
                         "--script", str(script), "--out", str(out)]) == 0
        metrics = json.loads(capsys.readouterr().out)
        assert metrics["waypoint_count"] == 2
        assert cli_main(["replay", "--session", str(out)]) == 0
        assert "replay ok" in capsys.readouterr().out

    def test_seed_override(self, files, capsys):
        scenario, script, out = files
        cli_main(["run", "--scenario", str(scenario), "--script", str(script),
                  "--seed", "9", "--out", str(out)])
        capsys.readouterr()
        assert read_session(out)["scenario"]["seed"] == 9

    def test_plot_summary_csv(self, files, tmp_path, capsys):
        scenario, script, out = files
        cli_main(["run", "--scenario", str(scenario),
                  "--script", str(script), "--out", str(out)])
        csv_path = tmp_path / "summary.csv"
        assert cli_main(["plot-summary", "--session", str(out),
                         "--out", str(csv_path)]) == 0
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == ("sim_time,true_x,true_y,odom_x,odom_y,"
                            "fix_x,fix_y,discrepancy")
        assert len(lines) > 10

    def test_invalid_scenario_exit_code(self, tmp_path, capsys):
        scenario = tmp_path / "bad.yaml"
        scenario.write_text(yaml.safe_dump({"dt": -1}))
        script = tmp_path / "ops.yaml"
        script.write_text(yaml.safe_dump([{"cmd": "deploy"}]))
        assert cli_main(["run", "--scenario", str(scenario),
                         "--script", str(script)]) == 1
        assert "error" in capsys.readouterr().err

    def test_corrupt_session_exit_code(self, tmp_path, capsys):
        path = tmp_path / "session.json"
        path.write_text("{}")
        assert cli_main(["replay", "--session", str(path)]) == 1
        assert "error" in capsys.readouterr().err


def recv_json(ws, timeout=20.0):
    return json.loads(ws.recv(timeout=timeout))


def drain_until(ws, predicate, timeout=60.0):
    """Collect frames until one satisfies predicate; return all collected."""
    frames = []
    while True:
        frame = recv_json(ws, timeout=timeout)
        frames.append(frame)
        if predicate(frame):
            return frames


def phase_is(name):
    return lambda f: (f["type"] == "state_snapshot"
                      and f["snapshot"]["phase"] == name)


@pytest.fixture()
def server():
    srv = OperatorServer(ScenarioConfig(seed=12), port=0, realtime_factor=0.0)
    srv.start()
    yield srv
    srv.stop()


class TestOperatorServer:
    def test_hello_and_snapshot(self, server):
        with connect(f"ws://127.0.0.1:{server.port}") as ws:
            hello = recv_json(ws)
            assert hello["type"] == "hello"
            assert hello["protocol_version"] == PROTOCOL_VERSION
            snap = recv_json(ws)
            assert snap["type"] == "state_snapshot"
            assert snap["snapshot"]["phase"] == "idle"
            assert snap["snapshot"]["commands"]["deploy"] is True

    def test_wrong_phase_command_rejected(self, server):
        with connect(f"ws://127.0.0.1:{server.port}") as ws:
            recv_json(ws)  # hello
            recv_json(ws)  # snapshot
            ws.send(json.dumps({"type": "set_waypoint", "x": 1.0, "y": 1.0}))
            frames = drain_until(ws, lambda f: f["type"] == "error")
            assert frames[-1]["error"] == "WrongPhase"

    def test_unknown_frame_rejected(self, server):
        with connect(f"ws://127.0.0.1:{server.port}") as ws:
            recv_json(ws)
            recv_json(ws)
            ws.send("not json")
            frames = drain_until(ws, lambda f: f["type"] == "error")
            assert frames[-1]["error"] == "BadFrame"
            ws.send(json.dumps({"type": "self_destruct"}))
            frames = drain_until(ws, lambda f: f["type"] == "error")
            assert frames[-1]["error"] == "UnknownCommand"

    def test_second_client_refused(self, server):
        with connect(f"ws://127.0.0.1:{server.port}") as ws:
            recv_json(ws)
            with connect(f"ws://127.0.0.1:{server.port}") as ws2:
                frame = recv_json(ws2)
                assert frame["type"] == "error"
                assert frame["error"] == "Busy"
            # first connection still works after the refusal
            ws.send(json.dumps({"type": "command_deploy"}))
            drain_until(ws, phase_is("calibration_drive"))

    def test_served_session_matches_headless(self, server):
        with connect(f"ws://127.0.0.1:{server.port}") as ws:
            recv_json(ws)
            ws.send(json.dumps({"type": "command_deploy"}))
            drain_until(ws, phase_is("calibration_drive"))
            ws.send(json.dumps({"type": "command_calibrate"}))
            drain_until(ws, phase_is("await_waypoint"))
            ws.send(json.dumps({"type": "set_waypoint", "x": 5.0, "y": 2.0}))
            drain_until(ws, phase_is("await_reset_decision"))
            ws.send(json.dumps({"type": "command_reset"}))
            drain_until(ws, phase_is("await_waypoint"))
            ws.send(json.dumps({"type": "set_waypoint", "x": 1.0, "y": 1.0}))
            drain_until(ws, phase_is("await_reset_decision"))
            ws.send(json.dumps({"type": "skip_reset"}))
            drain_until(ws, phase_is("await_waypoint"))
        reference = headless.execute_script(ScenarioConfig(seed=12), SHORT_SCRIPT)
        assert_logs_equal(reference.events, server.mission.events)

    def test_streamed_events_complete_and_ordered(self, server):
        with connect(f"ws://127.0.0.1:{server.port}") as ws:
            recv_json(ws)
            ws.send(json.dumps({"type": "command_deploy"}))
            frames = drain_until(ws, phase_is("calibration_drive"))
            ws.send(json.dumps({"type": "command_calibrate"}))
            frames += drain_until(ws, phase_is("await_waypoint"))
        streamed = [f["event"] for f in frames if f["type"] == "event"]
        assert streamed == server.mission.events[:len(streamed)]
        assert len(server.mission.events) - len(streamed) <= 1

    def test_pause_resume(self, server):
        with connect(f"ws://127.0.0.1:{server.port}") as ws:
            recv_json(ws)
            ws.send(json.dumps({"type": "pause"}))
            ws.send(json.dumps({"type": "command_deploy"}))
            import time as _time
            _time.sleep(0.3)
            t_paused = server.mission.world.sim_time
            ws.send(json.dumps({"type": "resume"}))
            drain_until(ws, phase_is("calibration_drive"))
        assert t_paused == pytest.approx(0.0, abs=server.config.dt)
