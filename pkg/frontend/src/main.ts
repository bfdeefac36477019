/** DOM wiring for the what-if explorer; all logic lives in the pure modules. */

import { ServiceError, SlotRunner, fetchModels } from "./api.js";
import {
  DEFAULT_VIEWPORT,
  breachMarkerX,
  makeScale,
  seriesPath,
  thresholdLineY,
  ticks,
} from "./chart.js";
import { defaultForm, toRequest, validate, type ScenarioForm } from "./form.js";
import {
  MAX_SLOTS,
  addScenario,
  exportScenario,
  removeScenario,
  trayRows,
  type PinnedScenario,
} from "./tray.js";
import { COMPARTMENTS, type ScenarioRequest, type SimulateResponse } from "./types.js";

const BASE = ".."; // the app is mounted at /ui, the API at the origin root

const SERIES_COLORS: Record<string, string> = {
  S: "#4e79a7",
  E: "#f28e2b",
  Ins: "#59a14f",
  Is: "#e15759",
  Ia: "#edc949",
  R: "#76b7b2",
  D: "#555555",
  icu: "#b07aa1",
};
const PIN_DASHES = ["7 3", "2 2", "9 2 2 2", "1 3"];

const el = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
};

let preview: { request: ScenarioRequest; response: SimulateResponse } | null = null;
let tray: PinnedScenario[] = [];
let pinCounter = 0;
const runner = new SlotRunner(BASE);

function readForm(): ScenarioForm {
  const num = (id: string) => Number((el<HTMLInputElement>(id)).value);
  return {
    modelId: el<HTMLSelectElement>("model").value,
    contactMode: el<HTMLInputElement>("contact-step").checked ? "step" : "learned",
    kappa1: num("kappa1"),
    kappa2: num("kappa2"),
    tLd: num("t-ld"),
    horizon: num("horizon"),
    editInitialState: el<HTMLInputElement>("edit-init").checked,
    initialState: COMPARTMENTS.map((_, k) => num(`init-${k}`)),
    icuCoefficient: num("icu-coefficient"),
    icuCapacity: num("icu-capacity"),
    threshold: num("threshold"),
  };
}

function showFieldErrors(errors: Record<string, string>): void {
  for (const span of document.querySelectorAll<HTMLElement>("[data-err]")) {
    const key = span.dataset.err ?? "";
    span.textContent = errors[key] ?? "";
  }
  el<HTMLButtonElement>("run").disabled = Object.keys(errors).length > 0;
}

function setStatus(text: string, isError = false): void {
  const status = el("status");
  status.textContent = text;
  status.classList.toggle("error", isError);
}

function refreshControls(): void {
  const form = readForm();
  el("step-controls").classList.toggle("hidden", form.contactMode !== "step");
  el("init-editor").classList.toggle("hidden", !form.editInitialState);
  el("kappa1-out").textContent = form.kappa1.toFixed(2);
  el("kappa2-out").textContent = form.kappa2.toFixed(2);
  showFieldErrors(validate(form));
}

function svgSeries(t: number[], values: number[], color: string, dash = ""): string {
  const scale = currentScale();
  const d = seriesPath(t, values, scale);
  const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
  return `<path d="${d}" fill="none" stroke="${color}" stroke-width="1.6"${dashAttr}/>`;
}

function currentScale() {
  const docs = [preview?.response, ...tray.map((p) => p.response)].filter(
    (r): r is SimulateResponse => Boolean(r),
  );
  let tMax = 1;
  let vMax = 1;
  for (const doc of docs) {
    tMax = Math.max(tMax, doc.t[doc.t.length - 1] ?? 0);
    vMax = Math.max(vMax, doc.threshold_level, ...doc.icu);
    for (const name of COMPARTMENTS) {
      vMax = Math.max(vMax, ...doc.compartments[name]);
    }
  }
  return makeScale(tMax, vMax);
}

function renderChart(): void {
  const view = DEFAULT_VIEWPORT;
  const scale = currentScale();
  const parts: string[] = [];
  const legend: string[] = [];

  for (const day of ticks(scale.xDomain[1])) {
    const x = scale.x(day);
    parts.push(
      `<line x1="${x}" y1="${view.padTop}" x2="${x}" y2="${view.height - view.padBottom}" class="grid"/>`,
      `<text x="${x}" y="${view.height - 10}" class="tick">${day}</text>`,
    );
  }
  for (const v of ticks(scale.yDomain[1], 4)) {
    const y = scale.y(v);
    parts.push(
      `<line x1="${view.padLeft}" y1="${y}" x2="${view.width - view.padRight}" y2="${y}" class="grid"/>`,
      `<text x="4" y="${y + 4}" class="tick">${Math.round(v).toLocaleString()}</text>`,
    );
  }

  if (preview) {
    const doc = preview.response;
    for (const name of COMPARTMENTS) {
      const color = SERIES_COLORS[name] ?? "#000";
      parts.push(svgSeries(doc.t, doc.compartments[name], color));
      legend.push(`<span style="color:${color}">&#9644; ${name}</span>`);
    }
    parts.push(svgSeries(doc.t, doc.icu, SERIES_COLORS.icu ?? "#000", "4 2"));
    legend.push(`<span style="color:${SERIES_COLORS.icu}">&#9644; ICU proxy</span>`);

    const yLine = thresholdLineY(doc.threshold_level, scale);
    parts.push(
      `<line x1="${view.padLeft}" y1="${yLine}" x2="${view.width - view.padRight}" y2="${yLine}" class="threshold"/>`,
    );
    const xBreach = breachMarkerX(doc.breach_day, scale);
    if (xBreach !== null) {
      parts.push(
        `<line x1="${xBreach}" y1="${view.padTop}" x2="${xBreach}" y2="${view.height - view.padBottom}" class="breach"/>`,
        `<text x="${xBreach + 4}" y="${view.padTop + 12}" class="breach-label">breach day ${doc.breach_day}</text>`,
      );
    }
  }

  tray.forEach((pin, k) => {
    const dash = PIN_DASHES[k % PIN_DASHES.length];
    parts.push(svgSeries(pin.response.t, pin.response.icu, "#333", dash));
    const xBreach = breachMarkerX(pin.response.breach_day, scale);
    if (xBreach !== null) {
      parts.push(
        `<line x1="${xBreach}" y1="${view.padTop}" x2="${xBreach}" y2="${view.height - view.padBottom}" class="breach pinned"/>`,
      );
    }
    legend.push(`<span class="pin-key" style="border-color:#333">${pin.label} (ICU, dash ${k + 1})</span>`);
  });

  el("chart").innerHTML =
    `<svg viewBox="0 0 ${view.width} ${view.height}" role="img">${parts.join("")}</svg>`;
  el("legend").innerHTML = legend.join(" ");
}

function renderTray(): void {
  const rows = trayRows(tray);
  const cells = rows
    .map(
      (r) => `<tr>
        <td>${r.label}</td>
        <td>${r.peakIs.toFixed(1)}</td>
        <td>${r.peakIcu.toFixed(1)}</td>
        <td>${r.finalD.toFixed(1)}</td>
        <td>${r.breachDay === null ? "none" : r.breachDay}</td>
        <td>
          <button data-export="${r.label}">export</button>
          <button data-remove="${r.label}">remove</button>
        </td>
      </tr>`,
    )
    .join("");
  el("tray-body").innerHTML = cells;
  el<HTMLButtonElement>("pin").disabled = preview === null || tray.length >= MAX_SLOTS;
}

async function runScenario(): Promise<void> {
  const form = readForm();
  const errors = validate(form);
  showFieldErrors(errors);
  if (Object.keys(errors).length > 0) {
    return;
  }
  const request = toRequest(form);
  setStatus("running...");
  try {
    const response = await runner.run(request);
    if (response === null) {
      return; // superseded by a newer run
    }
    preview = { request, response };
    const bd = response.breach_day;
    setStatus(
      bd === null
        ? `no breach within ${form.horizon} days`
        : `ICU threshold breached on day ${bd}`,
    );
    renderChart();
    renderTray();
  } catch (err) {
    if (err instanceof ServiceError) {
      setStatus(err.message, true);
      const fieldErrors: Record<string, string> = {};
      for (const fe of err.fieldErrors) {
        fieldErrors[fe.field === "model_id" ? "modelId" : fe.field] = fe.message;
      }
      showFieldErrors(fieldErrors);
    } else {
      setStatus(String(err), true);
    }
  }
}

function pinScenario(): void {
  if (!preview) return;
  pinCounter += 1;
  try {
    tray = addScenario(tray, {
      label: `scenario ${pinCounter}`,
      request: preview.request,
      response: preview.response,
    });
  } catch (err) {
    setStatus(String(err), true);
    return;
  }
  renderChart();
  renderTray();
}

function downloadJson(name: string, text: string): void {
  const a = document.createElement("a");
  a.href = URL.createObjectURL(new Blob([text], { type: "application/json" }));
  a.download = name;
  a.click();
  URL.revokeObjectURL(a.href);
}

function onTrayClick(event: Event): void {
  const target = event.target as HTMLElement;
  const exportLabel = target.dataset.export;
  const removeLabel = target.dataset.remove;
  if (exportLabel) {
    const pin = tray.find((p) => p.label === exportLabel);
    if (pin) downloadJson(`${exportLabel.replaceAll(" ", "-")}.json`, exportScenario(pin));
  } else if (removeLabel) {
    tray = removeScenario(tray, removeLabel);
    renderChart();
    renderTray();
  }
}

async function boot(): Promise<void> {
  try {
    const models = await fetchModels(BASE);
    const select = el<HTMLSelectElement>("model");
    select.innerHTML = models
      .map((m) => `<option value="${m.id}">${m.id} (${m.strategy}, seed ${m.seed})</option>`)
      .join("");
    if (models.length === 0) {
      setStatus("the service lists no trained models", true);
    }
  } catch (err) {
    setStatus(`cannot reach the scenario service: ${err}`, true);
  }

  const defaults = defaultForm();
  el<HTMLInputElement>("kappa1").value = String(defaults.kappa1);
  el<HTMLInputElement>("kappa2").value = String(defaults.kappa2);
  el<HTMLInputElement>("t-ld").value = String(defaults.tLd);
  el<HTMLInputElement>("horizon").value = String(defaults.horizon);
  el<HTMLInputElement>("icu-coefficient").value = String(defaults.icuCoefficient);
  el<HTMLInputElement>("icu-capacity").value = String(defaults.icuCapacity);
  el<HTMLInputElement>("threshold").value = String(defaults.threshold);
  defaults.initialState.forEach((v, k) => {
    el<HTMLInputElement>(`init-${k}`).value = String(v);
  });

  el("scenario-form").addEventListener("input", refreshControls);
  el("run").addEventListener("click", runScenario);
  el("pin").addEventListener("click", pinScenario);
  el("tray").addEventListener("click", onTrayClick);
  refreshControls();
  renderChart();
  renderTray();
}

boot();
