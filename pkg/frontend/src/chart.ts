/**
 * Chart geometry for graph-series panels, pure data in -> draw lists out
 * (the canvas painting lives in the viewer layer). Gaps in the samples
 * break line segments and leave empty bar slots — they are never zeros.
 */

export type Sample = [number, number | null];

export interface ChartBounds {
  width: number;
  height: number;
  pad: number;
}

export interface LineChart {
  kind: "line";
  segments: { x: number; y: number }[][]; // one polyline per gap-free run
  min: number;
  max: number;
}

export interface BarChart {
  kind: "bar";
  bars: { x: number; y: number; w: number; h: number }[];
  min: number;
  max: number;
}

export interface PieChart {
  kind: "pie";
  // share of the window's max held by the latest value, as a single arc
  fraction: number;
  startRad: number;
  endRad: number;
}

export function valueRange(samples: Sample[]): { min: number; max: number } | null {
  let min = Infinity;
  let max = -Infinity;
  for (const [, v] of samples) {
    if (v === null) continue;
    if (v < min) min = v;
    if (v > max) max = v;
  }
  if (min === Infinity) return null;
  if (min === max) {
    min -= 0.5;
    max += 0.5;
  }
  return { min, max };
}

export function lineChart(samples: Sample[], bounds: ChartBounds): LineChart {
  const range = valueRange(samples);
  const segments: { x: number; y: number }[][] = [];
  if (!range || samples.length === 0) {
    return { kind: "line", segments, min: 0, max: 1 };
  }
  const f0 = samples[0][0];
  const f1 = samples[samples.length - 1][0];
  const span = Math.max(1, f1 - f0);
  const innerW = bounds.width - 2 * bounds.pad;
  const innerH = bounds.height - 2 * bounds.pad;
  let run: { x: number; y: number }[] = [];
  for (const [frame, v] of samples) {
    if (v === null) {
      if (run.length) segments.push(run);
      run = [];
      continue;
    }
    run.push({
      x: bounds.pad + ((frame - f0) / span) * innerW,
      y: bounds.pad + (1 - (v - range.min) / (range.max - range.min)) * innerH,
    });
  }
  if (run.length) segments.push(run);
  return { kind: "line", segments, min: range.min, max: range.max };
}

export function barChart(samples: Sample[], bounds: ChartBounds): BarChart {
  const range = valueRange(samples);
  const bars: BarChart["bars"] = [];
  if (!range || samples.length === 0) {
    return { kind: "bar", bars, min: 0, max: 1 };
  }
  const innerW = bounds.width - 2 * bounds.pad;
  const innerH = bounds.height - 2 * bounds.pad;
  const slot = innerW / samples.length;
  const base = Math.min(Math.max(0, range.min), range.max);
  samples.forEach(([, v], i) => {
    if (v === null) return; // gap: no bar, not a zero bar
    const yTop = bounds.pad + (1 - (Math.max(v, base) - range.min) / (range.max - range.min)) * innerH;
    const yBase = bounds.pad + (1 - (base - range.min) / (range.max - range.min)) * innerH;
    bars.push({
      x: bounds.pad + i * slot + slot * 0.125,
      y: Math.min(yTop, yBase),
      w: slot * 0.75,
      h: Math.abs(yBase - yTop),
    });
  });
  return { kind: "bar", bars, min: range.min, max: range.max };
}

export function pieChart(samples: Sample[]): PieChart {
  const range = valueRange(samples);
  let latest: number | null = null;
  for (let i = samples.length - 1; i >= 0; i--) {
    if (samples[i][1] !== null) {
      latest = samples[i][1];
      break;
    }
  }
  let fraction = 0;
  if (range && latest !== null && range.max > 0) {
    fraction = Math.min(1, Math.max(0, latest / range.max));
  }
  const start = -Math.PI / 2;
  return { kind: "pie", fraction, startRad: start, endRad: start + fraction * 2 * Math.PI };
}
