/**
 * Loss-history plot: the four training-loss series against iteration.
 *
 * Point layout is a pure function of the history so tests can assert on
 * geometry; drawing is a thin canvas pass over those points.
 */

import type { LossRow } from "./api.js";

export const SERIES: Array<{ key: keyof Omit<LossRow, "iteration">; color: string; label: string }> = [
  { key: "total", color: "#d62728", label: "total" },
  { key: "mismatch", color: "#1f77b4", label: "mismatch" },
  { key: "penalty_lo", color: "#2ca02c", label: "penalty_lo" },
  { key: "penalty_hi", color: "#9467bd", label: "penalty_hi" },
];

export interface PlotLayout {
  width: number;
  height: number;
  pad: number;
  logScale: boolean;
  series: Record<string, Array<[number, number]>>;
}

/**
 * Map history rows to canvas polylines. Uses a log value axis when every
 * finite value is positive, linear otherwise; null values break the line.
 */
export function layoutLossPlot(history: LossRow[], width: number, height: number, pad = 28): PlotLayout {
  const values: number[] = [];
  for (const row of history) {
    for (const { key } of SERIES) {
      const v = row[key];
      if (v !== null && Number.isFinite(v)) values.push(v);
    }
  }
  const logScale = values.length > 0 && values.every((v) => v > 0);
  const toAxis = (v: number) => (logScale ? Math.log10(v) : v);
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    const a = toAxis(v);
    if (a < lo) lo = a;
    if (a > hi) hi = a;
  }
  if (!(hi > lo)) {
    hi = lo + 1;
    lo = lo - 1;
  }
  const nIter = Math.max(1, history.length - 1);
  const innerW = width - 2 * pad;
  const innerH = height - 2 * pad;
  const series: Record<string, Array<[number, number]>> = {};
  for (const { key } of SERIES) {
    const pts: Array<[number, number]> = [];
    history.forEach((row, i) => {
      const v = row[key];
      if (v === null || !Number.isFinite(v)) return;
      const x = pad + (innerW * i) / nIter;
      const y = pad + innerH * (1 - (toAxis(v) - lo) / (hi - lo));
      pts.push([x, y]);
    });
    series[key] = pts;
  }
  return { width, height, pad, logScale, series };
}

export function drawLossPlot(ctx: CanvasRenderingContext2D, history: LossRow[], width: number, height: number): PlotLayout {
  const layout = layoutLossPlot(history, width, height);
  ctx.clearRect(0, 0, width, height);
  ctx.strokeStyle = "#888";
  ctx.lineWidth = 1;
  ctx.strokeRect(layout.pad, layout.pad, width - 2 * layout.pad, height - 2 * layout.pad);
  ctx.font = "10px sans-serif";
  SERIES.forEach(({ key, color, label }, idx) => {
    const pts = layout.series[key];
    ctx.strokeStyle = color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    pts.forEach(([x, y], i) => {
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
    ctx.fillStyle = color;
    ctx.fillText(label, layout.pad + 4 + idx * 64, layout.pad - 6);
  });
  return layout;
}
