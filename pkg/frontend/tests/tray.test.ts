import { describe, expect, it } from "vitest";

import { MAX_SLOTS, addScenario, exportScenario, removeScenario, trayRows } from "../src/tray.js";
import type { PinnedScenario } from "../src/tray.js";
import type { ScenarioRequest, SimulateResponse } from "../src/types.js";

function makePinned(label: string, breach: number | null, peakIs = 100): PinnedScenario {
  const request: ScenarioRequest = {
    schema_version: 1,
    model_id: "ms_default",
    horizon: 89,
    initial_state: null,
    contact: { kind: "step", kappa1: 0.8, kappa2: 0.3, t_ld: 49 },
    icu_coefficient: 0.05,
    icu_capacity: 150,
    threshold: 0.75,
  };
  const response = {
    schema_version: 1,
    model: { id: "ms_default", strategy: "ms", seed: 0, config_hash: "x", status: "budget" },
    request,
    t: [0, 1, 2],
    compartments: {
      S: [3, 2, 1], E: [0, 0, 0], Ins: [0, 0, 0],
      Is: [0, 9999, 0], Ia: [0, 0, 0], R: [0, 1, 2], D: [0, 0, 0],
    },
    icu: [0, 499.95, 0],
    threshold_level: 112.5,
    breach_day: breach,
    summary: {
      peak_Is: peakIs,
      peak_icu: peakIs * 0.05,
      final_D: 7,
      final_R: 2,
      breach_day: breach,
    },
  } as SimulateResponse;
  return { label, request, response };
}

describe("addScenario / removeScenario", () => {
  it("appends without mutating and stops at the slot limit", () => {
    const empty: PinnedScenario[] = [];
    let tray = addScenario(empty, makePinned("a", 5));
    expect(empty).toHaveLength(0);
    for (const label of ["b", "c", "d"]) {
      tray = addScenario(tray, makePinned(label, null));
    }
    expect(tray).toHaveLength(MAX_SLOTS);
    expect(() => addScenario(tray, makePinned("e", 1))).toThrow(/at most 4/);
  });

  it("removes exactly the named row", () => {
    const tray = [makePinned("a", 5), makePinned("b", 2), makePinned("c", null)];
    const left = removeScenario(tray, "b");
    expect(left.map((p) => p.label)).toEqual(["a", "c"]);
  });
});

describe("trayRows", () => {
  it("sorts by breach day with never-breached scenarios last", () => {
    const tray = [
      makePinned("late", 12),
      makePinned("never", null),
      makePinned("early", 3.5),
    ];
    expect(trayRows(tray).map((r) => r.label)).toEqual(["early", "late", "never"]);
  });

  it("keeps insertion order for equal breach days", () => {
    const tray = [makePinned("one", 4), makePinned("two", 4), makePinned("none", null)];
    expect(trayRows(tray).map((r) => r.label)).toEqual(["one", "two", "none"]);
  });

  it("copies values from the summary block, never from the arrays", () => {
    // trajectory arrays deliberately disagree with the summary; the table
    // must show the service's summary numbers untouched
    const rows = trayRows([makePinned("a", 1, 100)]);
    expect(rows[0]!.peakIs).toBe(100);
    expect(rows[0]!.peakIcu).toBe(5);
    expect(rows[0]!.finalD).toBe(7);
  });
});

describe("exportScenario", () => {
  it("round-trips to exactly the request that was sent", () => {
    const pinned = makePinned("a", 5);
    const text = exportScenario(pinned);
    expect(JSON.parse(text)).toEqual(pinned.request);
    expect(text).toBe(JSON.stringify(pinned.request, null, 2));
  });
});
