"""
What-if questions against a trained surrogate
=============================================

Trains a small observer-stabilized surrogate, then answers planner-style
questions through the same request path the HTTP service and the CLI
replay command use: how do lockdown timing and strength move the ICU
breach day?

The last request is exported to demos/out/whatif_request.json; replay it
byte-identically with

    epikappa simulate --request demos/out/whatif_request.json --model demos/out/model.json
"""

import json
from pathlib import Path

from epikappa import OptimBudget, default_scenario, ensemble_data, fit
from epikappa.cli import build_problem
from epikappa.service import SimulateRequest, run_request

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

scenario = default_scenario()
ens = ensemble_data(scenario)
problem = build_problem(scenario, ens.t, ens.mean, {})
model = fit("pem", problem, OptimBudget(adam_steps=60, lbfgs_iters=0, seed=0))
model.save(out / "model.json")
print(f"model -> {out / 'model.json'}\n")

# sweep the lockdown day and strength through step-contact overrides
variants = [
    ("baseline lockdown", {"kind": "step", "kappa1": 0.8, "kappa2": 0.3, "t_ld": 49.0}),
    ("10 days earlier", {"kind": "step", "kappa1": 0.8, "kappa2": 0.3, "t_ld": 39.0}),
    ("stricter, same day", {"kind": "step", "kappa1": 0.8, "kappa2": 0.15, "t_ld": 49.0}),
    ("no lockdown at all", {"kind": "step", "kappa1": 0.8, "kappa2": 0.8, "t_ld": 0.0}),
]

print(f"{'scenario':>20} {'peak ICU':>9} {'breach day':>11} {'final deaths':>13}")
request = None
for label, contact in variants:
    request = SimulateRequest(model_id="whatif", contact=contact)
    doc = run_request(model, request)
    s = doc["summary"]
    breach = "none" if s["breach_day"] is None else f"{s['breach_day']:.0f}"
    print(f"{label:>20} {s['peak_icu']:>9.1f} {breach:>11} {s['final_D']:>13.1f}")

(out / "whatif_request.json").write_text(
    json.dumps(request.model_dump(mode="json"), indent=2)
)
print(f"\nlast request -> {out / 'whatif_request.json'}")
print("serve interactively:  epikappa serve --models demos/out --ui frontend/dist")
