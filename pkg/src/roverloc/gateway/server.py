"""Operator protocol server.

JSON text frames over a WebSocket, so a browser console connects
natively. One operator session at a time; a second connection is
refused. The simulation runs only while executing a command, paced by a
real-time factor, and pauses at the next step boundary when the operator
disconnects, resuming on reconnect.

Messages
    server -> client: hello, state_snapshot, event, error
    client -> server: command_deploy, command_calibrate, set_waypoint,
                      command_reset, skip_reset, pause, resume
"""

from __future__ import annotations

import json
import queue
import threading
import time

from websockets.sync.server import serve as ws_serve

from roverloc.gateway.config import ScriptInvalid, script_from_list
from roverloc.geometry import Point2
from roverloc.mission import Mission, MissionError
from roverloc.sim import ScenarioConfig

__all__ = ["OperatorServer", "BindFailed", "PROTOCOL_VERSION"]

PROTOCOL_VERSION = 1
SNAPSHOT_INTERVAL = 0.1  # sim seconds between state_snapshot frames


class BindFailed(Exception):
    pass


class OperatorServer:
    """Hosts one mission behind the operator protocol."""

    def __init__(self, config: ScenarioConfig, host="127.0.0.1", port=8765,
                 realtime_factor: float = 0.0):
        self.config = config
        self.host = host
        self.port = port
        self.realtime_factor = realtime_factor
        self.mission = Mission(config)
        self._commands: queue.Queue = queue.Queue()
        self._client = None
        self._client_lock = threading.Lock()
        self._running = threading.Event()  # cleared = paused
        self._stopping = threading.Event()
        self._sent_events = 0
        self._next_snapshot = 0.0
        self._server = None
        self._worker = None

    # -- lifecycle ------------------------------------------------------

    def start(self):
        try:
            self._server = ws_serve(self._handle_client, self.host, self.port)
        except OSError as exc:
            raise BindFailed(f"cannot bind {self.host}:{self.port}: {exc}") from exc
        self.port = self._server.socket.getsockname()[1]
        self._worker = threading.Thread(target=self._command_loop, daemon=True)
        self._worker.start()
        self._acceptor = threading.Thread(
            target=self._server.serve_forever, daemon=True
        )
        self._acceptor.start()

    def serve_forever(self):
        self.start()
        self._acceptor.join()

    def stop(self):
        self._stopping.set()
        self._running.set()
        if self._server is not None:
            self._server.shutdown()

    # -- connection handling --------------------------------------------

    def _handle_client(self, websocket):
        with self._client_lock:
            if self._client is not None:
                websocket.send(json.dumps({
                    "type": "error", "error": "Busy",
                    "message": "another operator session is active",
                }))
                websocket.close()
                return
            self._client = websocket
        try:
            websocket.send(json.dumps({
                "type": "hello",
                "protocol_version": PROTOCOL_VERSION,
                "arena": list(self.config.arena),
            }))
            self._send_snapshot()
            self._running.set()
            for raw in websocket:
                self._handle_frame(websocket, raw)
        except Exception:
            pass
        finally:
            self._running.clear()  # pause at the next step boundary
            with self._client_lock:
                self._client = None

    def _handle_frame(self, websocket, raw):
        try:
            msg = json.loads(raw)
            msg_type = msg["type"]
        except (json.JSONDecodeError, TypeError, KeyError):
            self._send({"type": "error", "error": "BadFrame",
                        "message": "frames must be JSON objects with a 'type'"})
            return
        if msg_type == "pause":
            self._running.clear()
        elif msg_type == "resume":
            self._running.set()
        elif msg_type in {"command_deploy", "command_calibrate", "set_waypoint",
                          "command_reset", "skip_reset"}:
            self._commands.put(msg)
        else:
            self._send({"type": "error", "error": "UnknownCommand",
                        "message": f"unknown message type {msg_type!r}"})

    # -- command execution ----------------------------------------------

    def _command_loop(self):
        self.mission._step_hook = self._on_step
        while not self._stopping.is_set():
            try:
                msg = self._commands.get(timeout=0.1)
            except queue.Empty:
                continue
            try:
                self._execute(msg)
            except MissionError as exc:
                self._send({"type": "error", "error": type(exc).__name__,
                            "message": str(exc)})
            except ScriptInvalid as exc:
                self._send({"type": "error", "error": "ScriptInvalid",
                            "message": str(exc)})
            self._flush_events()
            self._send_snapshot()

    def _execute(self, msg):
        mission = self.mission
        msg_type = msg["type"]
        if msg_type == "command_deploy":
            mission.command_deploy()
        elif msg_type == "command_calibrate":
            script = None
            if msg.get("script") is not None:
                segs = msg["script"]
                script_from_list([{"cmd": "calibrate", "script": segs}])
                script = [tuple(s) for s in segs]
            mission.run_calibration_drive(script)
        elif msg_type == "set_waypoint":
            mission.set_waypoint(Point2(float(msg["x"]), float(msg["y"])))
        elif msg_type == "command_reset":
            mission.command_pose_reset()
        elif msg_type == "skip_reset":
            mission.skip_reset()

    # -- pacing and broadcast -------------------------------------------

    def _on_step(self, mission: Mission):
        """Called by the mission after every simulation step."""
        while not self._running.is_set():
            if self._stopping.is_set():
                return
            self._running.wait(0.05)
        if self.realtime_factor > 0:
            time.sleep(self.config.dt / self.realtime_factor)
        self._flush_events()
        if mission.world.sim_time + 1e-9 >= self._next_snapshot:
            self._next_snapshot = mission.world.sim_time + SNAPSHOT_INTERVAL
            self._send_snapshot()

    def _flush_events(self):
        events = self.mission.events
        while self._sent_events < len(events):
            self._send({"type": "event", "event": events[self._sent_events]})
            self._sent_events += 1

    def _send_snapshot(self):
        self._send({"type": "state_snapshot", "snapshot": self.mission.snapshot()})

    def _send(self, frame: dict):
        with self._client_lock:
            client = self._client
        if client is None:
            return
        try:
            client.send(json.dumps(frame, sort_keys=True))
        except Exception:
            pass
