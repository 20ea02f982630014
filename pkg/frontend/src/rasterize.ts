/** Deterministic disk-brush rasterization of strokes into labelled pixel runs.
 *
 * Strokes are painted in order onto a dense label grid, so a later stroke
 * overrides any earlier one on overlap, and runs are read back row-major.
 * A pixel is covered when its centre lies within `radius` of the stroke's
 * polyline; radius 0 therefore covers exactly the pixels the polyline
 * passes through.
 */
import type { SeedRun, Stroke } from "./types.js";

const UNKNOWN = 0;
const FG = 1;
const BG = 2;

function distanceToSegment(px: number, py: number,
                           ax: number, ay: number,
                           bx: number, by: number): number {
  const dx = bx - ax;
  const dy = by - ay;
  const len2 = dx * dx + dy * dy;
  let t = len2 === 0 ? 0 : ((px - ax) * dx + (py - ay) * dy) / len2;
  t = Math.max(0, Math.min(1, t));
  return Math.hypot(px - (ax + t * dx), py - (ay + t * dy));
}

function paintSegment(grid: Uint8Array, width: number, height: number,
                      value: number, radius: number,
                      ax: number, ay: number, bx: number, by: number): void {
  const r0 = Math.max(0, Math.floor(Math.min(ay, by) - radius));
  const r1 = Math.min(height - 1, Math.ceil(Math.max(ay, by) + radius));
  const c0 = Math.max(0, Math.floor(Math.min(ax, bx) - radius));
  const c1 = Math.min(width - 1, Math.ceil(Math.max(ax, bx) + radius));
  for (let row = r0; row <= r1; row++) {
    for (let col = c0; col <= c1; col++) {
      if (distanceToSegment(col, row, ax, ay, bx, by) <= radius) {
        grid[row * width + col] = value;
      }
    }
  }
}

export function paintStrokes(strokes: readonly Stroke[],
                             width: number, height: number): Uint8Array {
  const grid = new Uint8Array(width * height);
  for (const stroke of strokes) {
    if (stroke.points.length === 0) continue;
    const value = stroke.label === "fg" ? FG : BG;
    const pts = stroke.points;
    if (pts.length === 1) {
      paintSegment(grid, width, height, value, stroke.radius,
                   pts[0].x, pts[0].y, pts[0].x, pts[0].y);
    }
    for (let i = 0; i + 1 < pts.length; i++) {
      paintSegment(grid, width, height, value, stroke.radius,
                   pts[i].x, pts[i].y, pts[i + 1].x, pts[i + 1].y);
    }
  }
  return grid;
}

export function gridToRuns(grid: Uint8Array, width: number, height: number): SeedRun[] {
  const runs: SeedRun[] = [];
  for (let row = 0; row < height; row++) {
    let col = 0;
    while (col < width) {
      const value = grid[row * width + col];
      if (value === UNKNOWN) {
        col++;
        continue;
      }
      let end = col + 1;
      while (end < width && grid[row * width + end] === value) end++;
      runs.push({ label: value === FG ? "fg" : "bg", row, col, length: end - col });
      col = end;
    }
  }
  return runs;
}

export function rasterizeStrokes(strokes: readonly Stroke[],
                                 width: number, height: number): SeedRun[] {
  return gridToRuns(paintStrokes(strokes, width, height), width, height);
}

export function seedCounts(strokes: readonly Stroke[],
                           width: number, height: number): { fg: number; bg: number } {
  const grid = paintStrokes(strokes, width, height);
  let fg = 0;
  let bg = 0;
  for (const value of grid) {
    if (value === FG) fg++;
    else if (value === BG) bg++;
  }
  return { fg, bg };
}

/** True when the rasterized strokes contain at least one pixel of each class. */
export function hasBothSeedClasses(strokes: readonly Stroke[],
                                   width: number, height: number): boolean {
  const counts = seedCounts(strokes, width, height);
  return counts.fg > 0 && counts.bg > 0;
}
