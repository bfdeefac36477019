import { describe, expect, it } from "vitest";

import {
  DEFAULT_VIEWPORT,
  breachMarkerX,
  makeScale,
  seriesPath,
  thresholdLineY,
  ticks,
} from "../src/chart.js";

describe("makeScale", () => {
  it("maps the domain corners onto the padded viewport", () => {
    const s = makeScale(89, 1000);
    expect(s.x(0)).toBe(DEFAULT_VIEWPORT.padLeft);
    expect(s.x(89)).toBe(DEFAULT_VIEWPORT.width - DEFAULT_VIEWPORT.padRight);
    expect(s.y(0)).toBe(DEFAULT_VIEWPORT.height - DEFAULT_VIEWPORT.padBottom);
    expect(s.y(1000)).toBe(DEFAULT_VIEWPORT.padTop);
  });

  it("survives empty domains without dividing by zero", () => {
    const s = makeScale(0, 0);
    expect(Number.isFinite(s.x(0))).toBe(true);
    expect(Number.isFinite(s.y(0))).toBe(true);
  });
});

describe("seriesPath", () => {
  it("emits one M segment and n-1 L segments", () => {
    const s = makeScale(4, 10);
    const d = seriesPath([0, 1, 2, 3, 4], [0, 5, 10, 5, 0], s);
    expect(d.startsWith("M")).toBe(true);
    expect(d.match(/L/g)).toHaveLength(4);
  });

  it("draws a flat series at a constant height", () => {
    const s = makeScale(3, 10);
    const d = seriesPath([0, 1, 2, 3], [0, 0, 0, 0], s);
    const ys = [...d.matchAll(/[ML][\d.]+,([\d.]+)/g)].map((m) => Number(m[1]));
    expect(new Set(ys).size).toBe(1);
    expect(ys[0]).toBe(s.y(0));
  });

  it("rejects mismatched grids", () => {
    const s = makeScale(2, 1);
    expect(() => seriesPath([0, 1, 2], [1], s)).toThrow(/3-day grid/);
  });
});

describe("breach marker", () => {
  // pixel position derived by hand from the viewport numbers
  const px = (day: number, tMax: number) =>
    DEFAULT_VIEWPORT.padLeft +
    (day / tMax) *
      (DEFAULT_VIEWPORT.width - DEFAULT_VIEWPORT.padRight - DEFAULT_VIEWPORT.padLeft);

  it("places the marker exactly at the service's breach field", () => {
    // ten varied scenarios: early/late/fractional breaches and no-breach runs
    const cases: Array<{ breach: number | null; horizon: number }> = [
      { breach: null, horizon: 89 },
      { breach: 0, horizon: 89 },
      { breach: 1, horizon: 89 },
      { breach: 3.5, horizon: 30 },
      { breach: 12, horizon: 60 },
      { breach: 21, horizon: 21 },
      { breach: 47.2, horizon: 89 },
      { breach: 60, horizon: 120 },
      { breach: 89, horizon: 89 },
      { breach: null, horizon: 10 },
    ];
    for (const { breach, horizon } of cases) {
      const scale = makeScale(horizon, 500);
      const x = breachMarkerX(breach, scale);
      if (breach === null) {
        expect(x).toBeNull();
      } else {
        expect(x).toBeCloseTo(px(breach, horizon), 2);
      }
    }
  });

  it("never rederives the day from the ICU series", () => {
    // the field says day 60 even though this ICU series crosses far earlier;
    // the marker must follow the field
    const scale = makeScale(89, 500);
    const x = breachMarkerX(60, scale);
    expect(x).toBeCloseTo(px(60, 89), 2);
  });
});

describe("threshold line and ticks", () => {
  it("maps the threshold level through the y scale", () => {
    const s = makeScale(10, 200);
    expect(thresholdLineY(150, s)).toBeCloseTo(s.y(150), 2);
  });

  it("covers [0, max] with rounded steps", () => {
    const t = ticks(89);
    expect(t[0]).toBe(0);
    expect(t[t.length - 1]).toBe(89);
    expect(t.length).toBeGreaterThanOrEqual(4);
    expect(ticks(0)).toEqual([0]);
  });
});
