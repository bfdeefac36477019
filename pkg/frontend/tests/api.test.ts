import { describe, expect, it } from "vitest";

import { ServiceError, SlotRunner, fetchModels, postScenario, type FetchLike } from "../src/api.js";
import type { ScenarioRequest } from "../src/types.js";

const REQUEST: ScenarioRequest = {
  schema_version: 1,
  model_id: "ms_default",
  horizon: 10,
  initial_state: null,
  contact: "learned",
  icu_coefficient: 0.05,
  icu_capacity: 150,
  threshold: 0.75,
};

function jsonResponse(doc: unknown, status = 200): Response {
  return new Response(JSON.stringify(doc), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function deferred<T>() {
  let resolve!: (value: T) => void;
  let reject!: (err: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

describe("postScenario", () => {
  it("POSTs the request as JSON and returns the parsed body", async () => {
    let seenUrl = "";
    let seenBody = "";
    const fetchFn: FetchLike = async (url, init) => {
      seenUrl = url;
      seenBody = String(init?.body);
      return jsonResponse({ breach_day: 4.0 });
    };
    const doc = await postScenario("http://svc", REQUEST, fetchFn);
    expect(seenUrl).toBe("http://svc/simulate");
    expect(JSON.parse(seenBody)).toEqual(REQUEST);
    expect(doc.breach_day).toBe(4.0);
  });

  it("surfaces field-level detail from a 400 reply", async () => {
    const fetchFn: FetchLike = async () =>
      jsonResponse(
        {
          schema_version: 1,
          error: "invalid request",
          detail: [{ field: "horizon", message: "must be at least 1" }],
        },
        400,
      );
    const err = await postScenario("", REQUEST, fetchFn).catch((e) => e);
    expect(err).toBeInstanceOf(ServiceError);
    expect(err.status).toBe(400);
    expect(err.fieldErrors).toEqual([{ field: "horizon", message: "must be at least 1" }]);
  });

  it("keeps a plain detail string as the message", async () => {
    const fetchFn: FetchLike = async () =>
      jsonResponse({ detail: "unknown model 'nope'" }, 404);
    const err = await postScenario("", REQUEST, fetchFn).catch((e) => e);
    expect(err.message).toBe("unknown model 'nope'");
    expect(err.fieldErrors).toEqual([]);
  });
});

describe("fetchModels", () => {
  it("returns the model list", async () => {
    const fetchFn: FetchLike = async (url) => {
      expect(url).toBe("/models");
      return jsonResponse([{ id: "a" }, { id: "b" }]);
    };
    const models = await fetchModels("", fetchFn);
    expect(models.map((m) => m.id)).toEqual(["a", "b"]);
  });
});

describe("SlotRunner", () => {
  it("discards a response that arrives after a newer run", async () => {
    const gates: Array<ReturnType<typeof deferred<Response>>> = [];
    const fetchFn: FetchLike = () => {
      const gate = deferred<Response>();
      gates.push(gate);
      return gate.promise;
    };
    const runner = new SlotRunner("", fetchFn);

    const first = runner.run(REQUEST);
    const second = runner.run({ ...REQUEST, horizon: 20 });
    // the newer reply lands first, then the stale one
    gates[1]!.resolve(jsonResponse({ breach_day: 20 }));
    gates[0]!.resolve(jsonResponse({ breach_day: 10 }));

    expect((await second)?.breach_day).toBe(20);
    expect(await first).toBeNull();
  });

  it("swallows failures of superseded runs but rethrows current ones", async () => {
    const gates: Array<ReturnType<typeof deferred<Response>>> = [];
    const fetchFn: FetchLike = () => {
      const gate = deferred<Response>();
      gates.push(gate);
      return gate.promise;
    };
    const runner = new SlotRunner("", fetchFn);

    const first = runner.run(REQUEST);
    const second = runner.run(REQUEST);
    gates[0]!.reject(new Error("connection reset"));
    gates[1]!.resolve(jsonResponse({ detail: "boom" }, 503));

    expect(await first).toBeNull();
    await expect(second).rejects.toThrow("boom");
  });
});
