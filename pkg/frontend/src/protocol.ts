// Operator protocol: JSON text frames over one WebSocket.

export interface CommandsAllowed {
  deploy: boolean;
  calibrate: boolean;
  set_waypoint: boolean;
  reset: boolean;
  skip_reset: boolean;
}

export interface Snapshot {
  sim_time: number;
  phase: string;
  odom: { x: number; y: number; heading: number; source: string };
  anchors_odom: Record<string, [number, number]>;
  fix_odom: [number, number] | null;
  discrepancy: number | null;
  target: [number, number] | null;
  arena: [number, number, number, number];
  commands: CommandsAllowed;
}

export type MissionEvent = { type: string; t: number } & Record<string, unknown>;

export type ServerFrame =
  | { type: "hello"; protocol_version: number; arena: number[] }
  | { type: "state_snapshot"; snapshot: Snapshot }
  | { type: "event"; event: MissionEvent }
  | { type: "error"; error: string; message: string };

export type ClientFrame =
  | { type: "command_deploy" }
  | { type: "command_calibrate"; script?: [number, number, number][] }
  | { type: "set_waypoint"; x: number; y: number }
  | { type: "command_reset" }
  | { type: "skip_reset" }
  | { type: "pause" }
  | { type: "resume" };

// Minimal socket surface shared by the browser WebSocket and the "ws"
// package, so the client is testable outside a browser.
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev: unknown) => void) | null;
  onopen: ((ev: unknown) => void) | null;
}

export class ProtocolClient {
  onFrame: ((frame: ServerFrame) => void) | null = null;
  onClose: (() => void) | null = null;

  constructor(private socket: SocketLike) {
    socket.onmessage = (ev) => {
      const frame = JSON.parse(String(ev.data)) as ServerFrame;
      this.onFrame?.(frame);
    };
    socket.onclose = () => this.onClose?.();
  }

  send(frame: ClientFrame): void {
    this.socket.send(JSON.stringify(frame));
  }

  deploy(): void {
    this.send({ type: "command_deploy" });
  }

  calibrate(script?: [number, number, number][]): void {
    this.send(script ? { type: "command_calibrate", script } : { type: "command_calibrate" });
  }

  setWaypoint(x: number, y: number): void {
    this.send({ type: "set_waypoint", x, y });
  }

  reset(): void {
    this.send({ type: "command_reset" });
  }

  skipReset(): void {
    this.send({ type: "skip_reset" });
  }

  close(): void {
    this.socket.close();
  }
}
