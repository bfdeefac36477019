"""
From stochastic ensemble to trained surrogate
=============================================

Simulates the packaged two-phase lockdown scenario with the agent model,
trains a multiple-shooting surrogate on the ensemble mean, and writes the
training curve plus a forecast-versus-data figure into demos/out/.

Runs in well under a minute; raise the budget for a tighter fit.
"""

from pathlib import Path

import numpy as np

from epikappa import (
    STATE_NAMES,
    OptimBudget,
    default_scenario,
    ensemble_data,
    evaluation_trajectory,
    fit,
    normalized_mse,
    write_training_log,
)
from epikappa.cli import build_problem

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

# 1. a 100-realization ensemble of the default scenario (tau-leaping agent model)
scenario = default_scenario()
print(f"scenario {scenario.name!r}: N={scenario.params.N:.0f}, "
      f"{scenario.n_realizations} realizations over {scenario.horizon} days")
ens = ensemble_data(scenario)
lo, hi = ens.envelope(10, 90)

# 2. train on the ensemble mean; windows of 11 days keep the rollout stable
problem = build_problem(scenario, ens.t, ens.mean, {})
model = fit("ms", problem, OptimBudget(adam_steps=150, lbfgs_iters=0, seed=0))
print(f"trained: status={model.status}, final loss {model.metrics['loss']:.3e}")

write_training_log(out / "training_log.csv", model.history)
print(f"loss curve -> {out / 'training_log.csv'}")

# 3. how close is the stitched reconstruction to the data it trained on?
pred = evaluation_trajectory(model, problem)
mse = normalized_mse(pred, ens.mean, problem.n0)
print(f"normalized mse: overall {mse.overall:.2e}")
for name, value in zip(STATE_NAMES, mse.per_compartment):
    print(f"  {name:>3}: {value:.2e}")

# 4. a picture, when matplotlib is around
try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not installed, skipping the figure")
else:
    fig, ax = plt.subplots(figsize=(8, 4.5))
    k = 3  # symptomatic infectious
    ax.fill_between(ens.t, lo[:, k], hi[:, k], alpha=0.25, label="ensemble 10-90%")
    ax.plot(ens.t, ens.mean[:, k], lw=1.0, label="ensemble mean")
    ax.plot(ens.t, pred[:, k], "--", lw=1.4, label="surrogate")
    ax.axvline(scenario.contact["t_ld"], color="gray", lw=0.8)
    ax.set_xlabel("day")
    ax.set_ylabel("symptomatic infectious")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "fit_Is.png", dpi=120)
    print(f"figure -> {out / 'fit_Is.png'}")
