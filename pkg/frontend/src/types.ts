/** JSON schemas of the scenario service, mirrored field for field. */

export const SCHEMA_VERSION = 1;

export const COMPARTMENTS = ["S", "E", "Ins", "Is", "Ia", "R", "D"] as const;
export type Compartment = (typeof COMPARTMENTS)[number];

export interface StepOverride {
  kind: "step";
  kappa1: number;
  kappa2: number;
  t_ld: number;
}

/** Body of POST /simulate; the export feature emits exactly this object. */
export interface ScenarioRequest {
  schema_version: number;
  model_id: string;
  horizon: number;
  initial_state: number[] | null;
  contact: "learned" | StepOverride;
  icu_coefficient: number;
  icu_capacity: number;
  threshold: number;
}

export interface ModelInfo {
  id: string;
  strategy: string;
  seed: number;
  config_hash: string;
  status: string;
}

export interface ScenarioSummary {
  peak_Is: number;
  peak_icu: number;
  final_D: number;
  final_R: number;
  breach_day: number | null;
}

export interface SimulateResponse {
  schema_version: number;
  model: ModelInfo;
  request: ScenarioRequest;
  t: number[];
  compartments: Record<Compartment, number[]>;
  icu: number[];
  threshold_level: number;
  breach_day: number | null;
  summary: ScenarioSummary;
}

export interface ModelListEntry {
  id: string;
  strategy: string;
  seed: number;
  config_hash: string;
  status: string;
  horizon: number;
  has_observer: boolean;
  metrics: { loss?: number; data?: number };
}
