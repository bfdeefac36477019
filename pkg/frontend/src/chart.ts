/** SVG line-chart geometry as pure functions; no DOM and no data math. */

export interface Viewport {
  width: number;
  height: number;
  padLeft: number;
  padRight: number;
  padTop: number;
  padBottom: number;
}

export const DEFAULT_VIEWPORT: Viewport = {
  width: 860,
  height: 420,
  padLeft: 64,
  padRight: 16,
  padTop: 12,
  padBottom: 32,
};

export interface Scale {
  x: (day: number) => number;
  y: (value: number) => number;
  xDomain: [number, number];
  yDomain: [number, number];
  view: Viewport;
}

/** Maps [0, tMax] x [0, vMax] onto the padded viewport, y growing upward. */
export function makeScale(tMax: number, vMax: number, view: Viewport = DEFAULT_VIEWPORT): Scale {
  const x0 = view.padLeft;
  const x1 = view.width - view.padRight;
  const y0 = view.height - view.padBottom;
  const y1 = view.padTop;
  const xSpan = tMax > 0 ? tMax : 1;
  const ySpan = vMax > 0 ? vMax : 1;
  return {
    x: (day) => x0 + (day / xSpan) * (x1 - x0),
    y: (value) => y0 + (value / ySpan) * (y1 - y0),
    xDomain: [0, tMax],
    yDomain: [0, vMax],
    view,
  };
}

/** "M x,y L x,y ..." polyline for one series on the scale's grid. */
export function seriesPath(t: number[], values: number[], scale: Scale): string {
  if (t.length !== values.length) {
    throw new Error(`series has ${values.length} points on a ${t.length}-day grid`);
  }
  return t
    .map((day, k) => {
      const v = values[k] as number;
      return `${k === 0 ? "M" : "L"}${round2(scale.x(day))},${round2(scale.y(v))}`;
    })
    .join(" ");
}

/**
 * X pixel of the breach marker, straight from the service's breach field.
 * Null (no breach) yields no marker; the day is never recomputed here.
 */
export function breachMarkerX(breachDay: number | null, scale: Scale): number | null {
  if (breachDay === null) {
    return null;
  }
  return round2(scale.x(breachDay));
}

/** Y pixel of the horizontal threshold line. */
export function thresholdLineY(level: number, scale: Scale): number {
  return round2(scale.y(level));
}

/** Rounded tick positions covering [0, max], endpoints included. */
export function ticks(max: number, count = 5): number[] {
  if (!(max > 0)) {
    return [0];
  }
  const rawStep = max / count;
  const mag = 10 ** Math.floor(Math.log10(rawStep));
  const step = [1, 2, 2.5, 5, 10].map((m) => m * mag).find((s) => s >= rawStep) ?? rawStep;
  const out: number[] = [];
  for (let v = 0; v < max; v += step) {
    out.push(round2(v));
  }
  out.push(round2(max));
  return out;
}

function round2(v: number): number {
  return Math.round(v * 100) / 100;
}
