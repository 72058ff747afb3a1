// Metric map view: world meters <-> screen pixels, north up.
//
// Screen y grows downward, world y grows upward, so the y axis flips.
// Zoom is anchored at the cursor: the world point under the pointer
// stays put while the scale changes.

export interface ScreenPoint {
  x: number;
  y: number;
}

export interface WorldPoint {
  x: number;
  y: number;
}

export class ViewTransform {
  scale = 10; // pixels per meter
  offsetX = 0; // screen position of world origin
  offsetY = 0;

  worldToScreen(p: WorldPoint): ScreenPoint {
    return {
      x: this.offsetX + p.x * this.scale,
      y: this.offsetY - p.y * this.scale,
    };
  }

  screenToWorld(p: ScreenPoint): WorldPoint {
    return {
      x: (p.x - this.offsetX) / this.scale,
      y: (this.offsetY - p.y) / this.scale,
    };
  }

  panBy(dx: number, dy: number): void {
    this.offsetX += dx;
    this.offsetY += dy;
  }

  zoomAt(cursor: ScreenPoint, factor: number): void {
    const anchor = this.screenToWorld(cursor);
    this.scale *= factor;
    const moved = this.worldToScreen(anchor);
    this.panBy(cursor.x - moved.x, cursor.y - moved.y);
  }

  // Fit the arena into the canvas with a margin, centered.
  fitArena(arena: [number, number, number, number], width: number, height: number, margin = 20): void {
    const [xmin, xmax, ymin, ymax] = arena;
    this.scale = Math.min(
      (width - 2 * margin) / (xmax - xmin),
      (height - 2 * margin) / (ymax - ymin),
    );
    const cx = (xmin + xmax) / 2;
    const cy = (ymin + ymax) / 2;
    this.offsetX = width / 2 - cx * this.scale;
    this.offsetY = height / 2 + cy * this.scale;
  }
}

export function inArena(p: WorldPoint, arena: [number, number, number, number]): boolean {
  const [xmin, xmax, ymin, ymax] = arena;
  return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
}
