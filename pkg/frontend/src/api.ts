/** Thin fetch layer over the scenario service, plus per-slot staleness control. */

import type { ModelListEntry, ScenarioRequest, SimulateResponse } from "./types.js";

export interface FieldError {
  field: string;
  message: string;
}

/** A non-2xx service reply, carrying any field-level detail verbatim. */
export class ServiceError extends Error {
  constructor(
    message: string,
    public status: number,
    public fieldErrors: FieldError[] = [],
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export async function fetchModels(
  base: string,
  fetchFn: FetchLike = fetch,
): Promise<ModelListEntry[]> {
  const res = await fetchFn(`${base}/models`);
  if (!res.ok) {
    throw await toServiceError(res);
  }
  return res.json();
}

export async function postScenario(
  base: string,
  request: ScenarioRequest,
  fetchFn: FetchLike = fetch,
): Promise<SimulateResponse> {
  const res = await fetchFn(`${base}/simulate`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(request),
  });
  if (!res.ok) {
    throw await toServiceError(res);
  }
  return res.json();
}

async function toServiceError(res: Response): Promise<ServiceError> {
  let message = `service replied ${res.status}`;
  let fields: FieldError[] = [];
  try {
    const doc = await res.json();
    if (Array.isArray(doc.detail)) {
      fields = doc.detail.filter(
        (d: unknown): d is FieldError =>
          typeof d === "object" && d !== null && "field" in d && "message" in d,
      );
      message = doc.error ?? message;
    } else if (typeof doc.detail === "string") {
      message = doc.detail;
    }
  } catch {
    // non-JSON body: keep the status-line message
  }
  return new ServiceError(message, res.status, fields);
}

/**
 * Issues requests for one comparison slot.
 *
 * Each call gets a fresh request id; a response (or failure) belonging to
 * anything but the newest id is discarded, so out-of-order replies can
 * never overwrite a newer scenario.
 */
export class SlotRunner {
  private latest = 0;

  constructor(
    private base: string,
    private fetchFn: FetchLike = fetch,
  ) {}

  /** Resolves with the response, or null when a newer run superseded this one. */
  async run(request: ScenarioRequest): Promise<SimulateResponse | null> {
    const id = ++this.latest;
    try {
      const response = await postScenario(this.base, request, this.fetchFn);
      return id === this.latest ? response : null;
    } catch (err) {
      if (id === this.latest) {
        throw err;
      }
      return null;
    }
  }
}
