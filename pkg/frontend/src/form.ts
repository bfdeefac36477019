/** Scenario form state and the client-side mirror of the request validation. */

import { SCHEMA_VERSION, type ScenarioRequest } from "./types.js";

export interface ScenarioForm {
  modelId: string;
  contactMode: "learned" | "step";
  kappa1: number;
  kappa2: number;
  tLd: number;
  horizon: number;
  editInitialState: boolean;
  initialState: number[];
  icuCoefficient: number;
  icuCapacity: number;
  threshold: number;
}

export function defaultForm(modelId = ""): ScenarioForm {
  return {
    modelId,
    contactMode: "learned",
    kappa1: 0.8,
    kappa2: 0.3,
    tLd: 49,
    horizon: 89,
    editInitialState: false,
    initialState: [99950, 50, 0, 0, 0, 0, 0],
    icuCoefficient: 0.05,
    icuCapacity: 150,
    threshold: 0.75,
  };
}

/**
 * Field-keyed error messages; an empty object means the form may submit.
 *
 * The rules repeat the service's own request validation so that a form
 * which passes here cannot be rejected with a 400.
 */
export function validate(form: ScenarioForm): Record<string, string> {
  const errors: Record<string, string> = {};
  if (!form.modelId) {
    errors.modelId = "pick a model";
  }
  if (!Number.isInteger(form.horizon) || form.horizon < 1) {
    errors.horizon = "horizon must be a whole number of days, at least 1";
  }
  if (form.contactMode === "step") {
    if (!inRange(form.kappa1, 0, 1)) {
      errors.kappa1 = "kappa1 must lie in [0, 1]";
    }
    if (!inRange(form.kappa2, 0, 1)) {
      errors.kappa2 = "kappa2 must lie in [0, 1]";
    }
    if (!(Number.isFinite(form.tLd) && form.tLd >= 0)) {
      errors.tLd = "lockdown day must be 0 or later";
    }
  }
  if (form.editInitialState) {
    if (form.initialState.length !== 7) {
      errors.initialState = "initial state needs all 7 compartments";
    } else if (!form.initialState.every((v) => Number.isFinite(v))) {
      errors.initialState = "initial state entries must be finite numbers";
    }
  }
  if (!(Number.isFinite(form.icuCoefficient) && form.icuCoefficient >= 0)) {
    errors.icuCoefficient = "ICU coefficient must be 0 or more";
  }
  if (!(Number.isFinite(form.icuCapacity) && form.icuCapacity > 0)) {
    errors.icuCapacity = "ICU capacity must be positive";
  }
  if (!(form.threshold > 0 && form.threshold <= 1)) {
    errors.threshold = "threshold must lie in (0, 1]";
  }
  return errors;
}

/** The exact request body for the current form; throws on an invalid form. */
export function toRequest(form: ScenarioForm): ScenarioRequest {
  const errors = validate(form);
  const bad = Object.keys(errors);
  if (bad.length > 0) {
    throw new Error(`invalid form: ${bad.join(", ")}`);
  }
  return {
    schema_version: SCHEMA_VERSION,
    model_id: form.modelId,
    horizon: form.horizon,
    initial_state: form.editInitialState ? [...form.initialState] : null,
    contact:
      form.contactMode === "step"
        ? { kind: "step", kappa1: form.kappa1, kappa2: form.kappa2, t_ld: form.tLd }
        : "learned",
    icu_coefficient: form.icuCoefficient,
    icu_capacity: form.icuCapacity,
    threshold: form.threshold,
  };
}

function inRange(v: number, lo: number, hi: number): boolean {
  return Number.isFinite(v) && v >= lo && v <= hi;
}
