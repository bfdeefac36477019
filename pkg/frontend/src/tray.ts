/** Comparison tray: pinned scenarios and the side-by-side summary table. */

import type { ScenarioRequest, SimulateResponse } from "./types.js";

export const MAX_SLOTS = 4;

export interface PinnedScenario {
  label: string;
  /** Exactly the body that was POSTed; export returns this object. */
  request: ScenarioRequest;
  response: SimulateResponse;
}

export interface TrayRow {
  label: string;
  peakIs: number;
  peakIcu: number;
  finalD: number;
  breachDay: number | null;
}

export function addScenario(tray: PinnedScenario[], pinned: PinnedScenario): PinnedScenario[] {
  if (tray.length >= MAX_SLOTS) {
    throw new Error(`comparison tray holds at most ${MAX_SLOTS} scenarios`);
  }
  return [...tray, pinned];
}

export function removeScenario(tray: PinnedScenario[], label: string): PinnedScenario[] {
  return tray.filter((p) => p.label !== label);
}

/**
 * Table rows sorted by breach day, scenarios that never breach last.
 *
 * Every value is copied from the response's summary block; nothing is
 * recomputed from the trajectory arrays.
 */
export function trayRows(tray: PinnedScenario[]): TrayRow[] {
  const rows = tray.map((p) => ({
    label: p.label,
    peakIs: p.response.summary.peak_Is,
    peakIcu: p.response.summary.peak_icu,
    finalD: p.response.summary.final_D,
    breachDay: p.response.summary.breach_day,
  }));
  return rows.sort((a, b) => {
    if (a.breachDay === null && b.breachDay === null) return 0;
    if (a.breachDay === null) return 1;
    if (b.breachDay === null) return -1;
    return a.breachDay - b.breachDay;
  });
}

/** The pinned request as shareable JSON, byte-for-byte replayable via the CLI. */
export function exportScenario(pinned: PinnedScenario): string {
  return JSON.stringify(pinned.request, null, 2);
}
