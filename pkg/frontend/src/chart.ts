/**
 * Pure geometry for the SVG charts.
 *
 * Everything here turns payload numbers into pixel coordinates, path
 * strings, and bar rectangles. No DOM access, so the unit tests can
 * check positions exactly and the app layer stays a thin renderer.
 */

import type { Histogram, Label, QueryCard, SeriesSlice } from './api.js';

export interface Extent {
  min: number;
  max: number;
}

export const PAD = { top: 14, right: 48, bottom: 26, left: 56 };

/** Min and max of a series, widened a little so flat data still has height. */
export function extent(values: number[]): Extent {
  if (values.length === 0) {
    return { min: 0, max: 1 };
  }
  let min = values[0];
  let max = values[0];
  for (const v of values) {
    if (v < min) min = v;
    if (v > max) max = v;
  }
  if (min === max) {
    return { min: min - 0.5, max: max + 0.5 };
  }
  const margin = (max - min) * 0.05;
  return { min: min - margin, max: max + margin };
}

/** Linear map from a domain to a pixel range; a zero-span domain maps to the middle. */
export function linearScale(domain: Extent, rangeLo: number, rangeHi: number): (v: number) => number {
  const span = domain.max - domain.min;
  if (span === 0) {
    const mid = (rangeLo + rangeHi) / 2;
    return () => mid;
  }
  const k = (rangeHi - rangeLo) / span;
  return (v: number) => rangeLo + (v - domain.min) * k;
}

/** SVG path through the points, coordinates rounded to 0.01 px. */
export function linePath(xs: number[], ys: number[]): string {
  const n = Math.min(xs.length, ys.length);
  if (n === 0) {
    return '';
  }
  const parts: string[] = [];
  for (let i = 0; i < n; i++) {
    const cmd = i === 0 ? 'M' : 'L';
    parts.push(`${cmd}${xs[i].toFixed(2)},${ys[i].toFixed(2)}`);
  }
  return parts.join(' ');
}

/**
 * Pick at most maxPoints representative indices, keeping each bucket's
 * min and max so spikes survive the thinning. Returns ascending indices.
 */
export function downsample(values: number[], maxPoints: number): number[] {
  if (values.length <= maxPoints) {
    return values.map((_, i) => i);
  }
  const buckets = Math.max(1, Math.floor(maxPoints / 2));
  const per = values.length / buckets;
  const keep: number[] = [];
  for (let b = 0; b < buckets; b++) {
    const lo = Math.floor(b * per);
    const hi = Math.min(values.length, Math.max(lo + 1, Math.floor((b + 1) * per)));
    let iMin = lo;
    let iMax = lo;
    for (let i = lo + 1; i < hi; i++) {
      if (values[i] < values[iMin]) iMin = i;
      if (values[i] > values[iMax]) iMax = i;
    }
    keep.push(Math.min(iMin, iMax));
    if (iMax !== iMin) {
      keep.push(Math.max(iMin, iMax));
    }
  }
  return keep;
}

/** Group sorted indices into inclusive runs of consecutive values. */
export function groupRuns(indices: number[]): Array<{ start: number; end: number }> {
  const runs: Array<{ start: number; end: number }> = [];
  for (const index of indices) {
    const last = runs[runs.length - 1];
    if (last && index === last.end + 1) {
      last.end = index;
    } else {
      runs.push({ start: index, end: index });
    }
  }
  return runs;
}

export interface Marker {
  index: number;
  x: number;
  y: number;
}

export interface LabeledMarker extends Marker {
  label: Label;
}

export interface Band {
  x: number;
  width: number;
}

export interface Tick {
  at: number;
  label: string;
}

export interface SeriesGeometry {
  width: number;
  height: number;
  valuePath: string;
  scorePath: string;
  offsetY: number;
  queried: Marker[];
  labeled: LabeledMarker[];
  syntheticBands: Band[];
  valueTicks: Tick[];
  scoreTicks: Tick[];
  indexTicks: Tick[];
  /** Pixel x for a series index, for hit testing and cursors. */
  xAt: (index: number) => number;
  /** Series index nearest a pixel x, clamped to the slice. */
  indexAt: (x: number) => number;
}

const MAX_PATH_POINTS = 2000;

/**
 * Lay out one window of the series: raw values against the left axis,
 * anomaly scores against a fixed [0, 1] right axis, the decision offset
 * as a horizontal rule on the score scale, plus markers for queried and
 * labeled points and shaded bands over injected points.
 */
export function seriesGeometry(slice: SeriesSlice, width: number, height: number): SeriesGeometry {
  const plotLo = PAD.left;
  const plotHi = width - PAD.right;
  const count = slice.values.length;
  const indexDomain = { min: slice.from, max: Math.max(slice.from + 1, slice.to - 1) };
  const x = linearScale(indexDomain, plotLo, plotHi);
  const yValue = linearScale(extent(slice.values), height - PAD.bottom, PAD.top);
  const yScore = linearScale({ min: 0, max: 1 }, height - PAD.bottom, PAD.top);

  const keep = downsample(slice.values, MAX_PATH_POINTS);
  const xsKept = keep.map((i) => x(slice.from + i));
  const valuePath = linePath(xsKept, keep.map((i) => yValue(slice.values[i])));
  const scoreKeep = downsample(slice.scores, MAX_PATH_POINTS);
  const scorePath = linePath(
    scoreKeep.map((i) => x(slice.from + i)),
    scoreKeep.map((i) => yScore(slice.scores[i])),
  );

  const inWindow = (index: number) => index >= slice.from && index < slice.to;
  const queried = slice.queried.filter(inWindow).map((index) => ({
    index,
    x: x(index),
    y: yValue(slice.values[index - slice.from]),
  }));
  const labeled = slice.labels.filter((l) => inWindow(l.index)).map((l) => ({
    index: l.index,
    label: l.label,
    x: x(l.index),
    y: yValue(slice.values[l.index - slice.from]),
  }));
  const syntheticBands = groupRuns(slice.synthetic.filter(inWindow)).map((run) => ({
    x: x(run.start),
    width: Math.max(1, x(run.end) - x(run.start)),
  }));

  const valueDomain = extent(slice.values);
  const valueTicks: Tick[] = [0, 0.5, 1].map((t) => {
    const v = valueDomain.min + t * (valueDomain.max - valueDomain.min);
    return { at: yValue(v), label: v.toPrecision(3) };
  });
  const scoreTicks: Tick[] = [0, 0.5, 1].map((s) => ({ at: yScore(s), label: s.toFixed(1) }));
  const tickCount = Math.min(6, Math.max(2, count));
  const indexTicks: Tick[] = [];
  for (let t = 0; t < tickCount; t++) {
    const index = slice.from + Math.round((t / (tickCount - 1)) * (slice.to - 1 - slice.from));
    indexTicks.push({ at: x(index), label: String(index) });
  }

  return {
    width,
    height,
    valuePath,
    scorePath,
    offsetY: yScore(slice.delta),
    queried,
    labeled,
    syntheticBands,
    valueTicks,
    scoreTicks,
    indexTicks,
    xAt: x,
    indexAt: (px: number) => {
      const span = plotHi - plotLo;
      const frac = span === 0 ? 0 : (px - plotLo) / span;
      const index = Math.round(indexDomain.min + frac * (indexDomain.max - indexDomain.min));
      return Math.min(slice.to - 1, Math.max(slice.from, index));
    },
  };
}

export interface SparklineGeometry {
  valuePath: string;
  scorePath: string;
  offsetY: number;
  pointX: number;
  pointY: number;
  pointScoreY: number;
}

/**
 * Small context chart for one query card: values, score overlay, the
 * offset rule, and the queried point itself highlighted on both curves.
 */
export function sparkline(card: QueryCard, delta: number, width: number, height: number): SparklineGeometry {
  const ctx = card.context;
  const pad = 4;
  const domain = { min: ctx.start, max: Math.max(ctx.start + 1, ctx.start + ctx.values.length - 1) };
  const x = linearScale(domain, pad, width - pad);
  const yValue = linearScale(extent(ctx.values), height - pad, pad);
  const yScore = linearScale({ min: 0, max: 1 }, height - pad, pad);
  const xs = ctx.values.map((_, i) => x(ctx.start + i));
  const at = card.index - ctx.start;
  return {
    valuePath: linePath(xs, ctx.values.map((v) => yValue(v))),
    scorePath: linePath(xs, ctx.scores.map((s) => yScore(s))),
    offsetY: yScore(delta),
    pointX: x(card.index),
    pointY: yValue(ctx.values[at]),
    pointScoreY: yScore(ctx.scores[at]),
  };
}

export interface Bar {
  x: number;
  y: number;
  w: number;
  h: number;
}

/** Bars for a score histogram over its edge span, scaled to the tallest bin. */
export function histogramBars(hist: Histogram, width: number, height: number): Bar[] {
  const bins = hist.counts.length;
  if (bins === 0) {
    return [];
  }
  const lo = hist.edges[0];
  const hi = hist.edges[hist.edges.length - 1];
  const x = linearScale({ min: lo, max: hi }, 0, width);
  const peak = Math.max(1, ...hist.counts);
  return hist.counts.map((count, i) => {
    const x0 = x(hist.edges[i]);
    const x1 = x(hist.edges[i + 1]);
    const h = (count / peak) * height;
    return { x: x0, y: height - h, w: Math.max(0.5, x1 - x0 - 0.5), h };
  });
}

/** Pixel x of the offset rule on a histogram of the same width. */
export function histogramOffsetX(hist: Histogram, delta: number, width: number): number {
  const lo = hist.edges[0] ?? 0;
  const hi = hist.edges[hist.edges.length - 1] ?? 1;
  return linearScale({ min: lo, max: hi }, 0, width)(delta);
}
