// Canvas drawing. Everything here is read-only over the viewmodel.

import type { ConsoleViewModel } from "./viewmodel.js";
import type { ViewTransform } from "./view.js";

const COLORS = {
  background: "#10141a",
  grid: "#1e2630",
  arena: "#3a4656",
  anchor: "#e0a837",
  rover: "#4fc3f7",
  fix: "#81c784",
  target: "#ef5350",
  truth: "#ba68c8",
  text: "#c8d2dc",
  banner: "#b71c1c",
};

function circle(ctx: CanvasRenderingContext2D, x: number, y: number, r: number, color: string): void {
  ctx.beginPath();
  ctx.arc(x, y, r, 0, 2 * Math.PI);
  ctx.fillStyle = color;
  ctx.fill();
}

export function render(
  ctx: CanvasRenderingContext2D,
  vm: ConsoleViewModel,
  view: ViewTransform,
  nowMs: number,
): void {
  const { width, height } = ctx.canvas;
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, width, height);

  const snap = vm.snapshot;
  if (snap) {
    // arena bounds
    const [xmin, xmax, ymin, ymax] = snap.arena;
    const a = view.worldToScreen({ x: xmin, y: ymax });
    const b = view.worldToScreen({ x: xmax, y: ymin });
    ctx.strokeStyle = COLORS.arena;
    ctx.lineWidth = 1.5;
    ctx.strokeRect(a.x, a.y, b.x - a.x, b.y - a.y);

    // anchors
    ctx.font = "11px sans-serif";
    for (const [id, [x, y]] of Object.entries(snap.anchors_odom)) {
      const p = view.worldToScreen({ x, y });
      circle(ctx, p.x, p.y, 5, COLORS.anchor);
      ctx.fillStyle = COLORS.text;
      ctx.fillText(id, p.x + 7, p.y + 4);
    }

    // target waypoint
    if (snap.target) {
      const p = view.worldToScreen({ x: snap.target[0], y: snap.target[1] });
      ctx.strokeStyle = COLORS.target;
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(p.x - 6, p.y - 6);
      ctx.lineTo(p.x + 6, p.y + 6);
      ctx.moveTo(p.x - 6, p.y + 6);
      ctx.lineTo(p.x + 6, p.y - 6);
      ctx.stroke();
    }

    // latest UWB fix, plus the discrepancy vector to the rover estimate
    const rover = view.worldToScreen({ x: snap.odom.x, y: snap.odom.y });
    if (snap.fix_odom) {
      const f = view.worldToScreen({ x: snap.fix_odom[0], y: snap.fix_odom[1] });
      circle(ctx, f.x, f.y, 4, COLORS.fix);
      if (snap.discrepancy != null) {
        ctx.strokeStyle = COLORS.fix;
        ctx.setLineDash([4, 4]);
        ctx.beginPath();
        ctx.moveTo(f.x, f.y);
        ctx.lineTo(rover.x, rover.y);
        ctx.stroke();
        ctx.setLineDash([]);
      }
    }

    // rover estimate with heading tick
    circle(ctx, rover.x, rover.y, 6, COLORS.rover);
    ctx.strokeStyle = COLORS.rover;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(rover.x, rover.y);
    ctx.lineTo(
      rover.x + 14 * Math.cos(snap.odom.heading),
      rover.y - 14 * Math.sin(snap.odom.heading),
    );
    ctx.stroke();

    // ground-truth overlay (training aid)
    if (vm.showTruth) {
      const truth = vm.latestTruth();
      if (truth) {
        const p = view.worldToScreen(truth);
        circle(ctx, p.x, p.y, 4, COLORS.truth);
      }
    }

    // status line
    ctx.fillStyle = COLORS.text;
    ctx.font = "13px sans-serif";
    ctx.fillText(
      `t=${snap.sim_time.toFixed(1)}s  phase=${snap.phase}  source=${snap.odom.source}` +
        `  discrepancy=${vm.discrepancyText()}`,
      10,
      height - 10,
    );
  }

  if (vm.toast) {
    ctx.fillStyle = COLORS.text;
    ctx.font = "13px sans-serif";
    ctx.fillText(vm.toast, 10, 40);
  }

  if (vm.connectionLost(nowMs)) {
    ctx.fillStyle = COLORS.banner;
    ctx.fillRect(0, 0, width, 24);
    ctx.fillStyle = "#fff";
    ctx.font = "bold 13px sans-serif";
    ctx.fillText("connection lost", 10, 16);
  }
}
