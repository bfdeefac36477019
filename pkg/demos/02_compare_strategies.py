"""
Four stabilization strategies at one equal budget
=================================================

Trains the plain neural rollout (ude) and its three stabilized variants
(ms, pem, mspem) on the same ensemble mean with the same optimizer budget
and one shared seed, then scores each reconstruction against the data.

A desk-scale preview of the full 10-seed comparison in the test suite:
expect the stabilized strategies to beat the plain rollout by a wide
margin. Takes a minute or two.
"""

import numpy as np

from epikappa import (
    OptimBudget,
    coverage,
    default_scenario,
    ensemble_data,
    evaluation_trajectory,
    fit,
    normalized_mse,
)
from epikappa.cli import build_problem

scenario = default_scenario()
ens = ensemble_data(scenario)
problem = build_problem(scenario, ens.t, ens.mean, {})
lo, hi = ens.envelope(10, 90)
budget = OptimBudget(adam_steps=120, lbfgs_iters=0, seed=7)

print(f"{'strategy':>8} {'loss':>10} {'mse':>10} {'coverage':>9} {'seconds':>8}")
for strategy in ("ude", "ms", "pem", "mspem"):
    model = fit(strategy, problem, budget)
    pred = evaluation_trajectory(model, problem)
    mse = normalized_mse(pred, ens.mean, problem.n0).overall
    cov = coverage(pred, lo, hi).mean
    print(
        f"{strategy:>8} {model.metrics['loss']:>10.2e} {mse:>10.2e} "
        f"{cov:>9.3f} {model.metrics['wall_clock']:>8.1f}"
    )

print()
print("mse = normalized mean squared error of the reconstruction against")
print("the ensemble mean; coverage = share of days inside the 10-90% band.")
