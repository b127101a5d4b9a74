// Rolling moisture chart: observed zone averages as solid lines, the AI
// forecast as a dashed overlay. Scaling math is kept pure for tests; only
// render() touches the canvas.

import type { PotSeries } from "./store.js";

export interface ChartBounds {
  tsMin: number;
  tsMax: number;
  valueMin: number;
  valueMax: number;
}

export interface Point {
  x: number;
  y: number;
}

const POT_COLORS = ["#2e7d32", "#1565c0", "#b05c10"];
const PAD = 0.05; // vertical headroom fraction

export function computeBounds(series: PotSeries[]): ChartBounds | null {
  let tsMin = Infinity;
  let tsMax = -Infinity;
  let valueMin = Infinity;
  let valueMax = -Infinity;
  for (const s of series) {
    for (const p of [...s.observed, ...s.forecast]) {
      tsMin = Math.min(tsMin, p.ts);
      tsMax = Math.max(tsMax, p.ts);
      valueMin = Math.min(valueMin, p.value);
      valueMax = Math.max(valueMax, p.value);
    }
  }
  if (!Number.isFinite(tsMin) || tsMax === tsMin) return null;
  if (valueMax === valueMin) {
    valueMin -= 1;
    valueMax += 1;
  }
  const headroom = (valueMax - valueMin) * PAD;
  return { tsMin, tsMax, valueMin: valueMin - headroom, valueMax: valueMax + headroom };
}

export function project(
  points: { ts: number; value: number }[],
  bounds: ChartBounds,
  width: number,
  height: number,
): Point[] {
  const spanTs = bounds.tsMax - bounds.tsMin;
  const spanV = bounds.valueMax - bounds.valueMin;
  return points.map((p) => ({
    x: ((p.ts - bounds.tsMin) / spanTs) * width,
    // higher counts = drier soil; keep dry at the top of the chart
    y: height - ((p.value - bounds.valueMin) / spanV) * height,
  }));
}

export class MoistureChart {
  constructor(private readonly canvas: HTMLCanvasElement) {}

  render(series: PotSeries[], thresholds: number[]): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    const bounds = computeBounds(series);
    if (!bounds) return;

    for (const [pot, threshold] of thresholds.entries()) {
      if (threshold < bounds.valueMin || threshold > bounds.valueMax) continue;
      const [{ y }] = project([{ ts: bounds.tsMin, value: threshold }], bounds, width, height);
      ctx.strokeStyle = `${POT_COLORS[pot]}55`;
      ctx.setLineDash([2, 6]);
      ctx.beginPath();
      ctx.moveTo(0, y);
      ctx.lineTo(width, y);
      ctx.stroke();
    }

    series.forEach((s, pot) => {
      ctx.strokeStyle = POT_COLORS[pot];
      ctx.lineWidth = 1.5;
      ctx.setLineDash([]);
      this.path(ctx, project(s.observed, bounds, width, height));
      ctx.setLineDash([5, 4]);
      this.path(ctx, project(s.forecast, bounds, width, height));
    });
    ctx.setLineDash([]);
  }

  private path(ctx: CanvasRenderingContext2D, points: Point[]): void {
    if (points.length < 2) return;
    ctx.beginPath();
    ctx.moveTo(points[0].x, points[0].y);
    for (const p of points.slice(1)) ctx.lineTo(p.x, p.y);
    ctx.stroke();
  }
}
