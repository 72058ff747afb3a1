// Console state, rebuilt purely from the gateway message log.
//
// The console holds no mission truth of its own: every displayed value
// comes from the latest snapshot or the event stream, so feeding the
// same frames into a fresh viewmodel reproduces the same state.

import type { MissionEvent, ServerFrame, Snapshot } from "./protocol.js";
import { inArena, ViewTransform, type ScreenPoint } from "./view.js";

export const STALE_MS = 2000;

export type ClickPlan =
  | { kind: "send"; x: number; y: number }
  | { kind: "toast"; message: string }
  | { kind: "ignore" };

export class ConsoleViewModel {
  snapshot: Snapshot | null = null;
  events: MissionEvent[] = [];
  errors: { error: string; message: string }[] = [];
  protocolVersion: number | null = null;
  toast: string | null = null;
  showTruth = false; // training aid, hidden by default
  private lastFrameAtMs: number | null = null;

  apply(frame: ServerFrame, nowMs: number): void {
    this.lastFrameAtMs = nowMs;
    switch (frame.type) {
      case "hello":
        this.protocolVersion = frame.protocol_version;
        break;
      case "state_snapshot":
        this.snapshot = frame.snapshot;
        break;
      case "event":
        this.events.push(frame.event);
        break;
      case "error":
        this.errors.push({ error: frame.error, message: frame.message });
        this.toast = `${frame.error}: ${frame.message}`;
        break;
    }
  }

  connectionLost(nowMs: number): boolean {
    if (this.lastFrameAtMs === null) return false; // not yet connected
    return nowMs - this.lastFrameAtMs > STALE_MS;
  }

  can(command: keyof Snapshot["commands"]): boolean {
    return this.snapshot?.commands[command] ?? false;
  }

  // Latest ground-truth sample from the event stream, for the overlay.
  latestTruth(): { x: number; y: number } | null {
    for (let i = this.events.length - 1; i >= 0; i--) {
      const e = this.events[i];
      if (e.type === "truth_sample") {
        return { x: e.true_x as number, y: e.true_y as number };
      }
    }
    return null;
  }

  discrepancyText(): string {
    const d = this.snapshot?.discrepancy;
    return d == null ? "-" : `${d.toFixed(2)} m`;
  }

  // Convert a map click into a waypoint command, or explain why not.
  planClick(screen: ScreenPoint, view: ViewTransform): ClickPlan {
    if (!this.snapshot || !this.can("set_waypoint")) return { kind: "ignore" };
    const world = view.screenToWorld(screen);
    if (!inArena(world, this.snapshot.arena)) {
      return { kind: "toast", message: "waypoint outside the arena" };
    }
    return { kind: "send", x: world.x, y: world.y };
  }
}
