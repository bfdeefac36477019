"""Command-line pipeline: generate-data, train, evaluate, sweep, simulate, serve.

Every command writes into a run directory containing a ``manifest.json``
with the resolved configuration, seeds, package versions, and output list;
replaying the manifest's config and seed reproduces the run. Failures exit
nonzero after printing a one-line JSON error report to stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import os
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from .contact import StepContact
from .dataio import read_dataset, write_dataset
from .errors import EpikappaError
from .fitting import (
    EpochRecord,
    OptimBudget,
    TrainedModel,
    evaluation_trajectory,
    fit,
    fit_ensemble,
    model_vector,
    spawn_seeds,
    write_training_log,
)
from .losses import (
    ObservationSpec,
    ObserverSpec,
    ShootingConfig,
    TrainingProblem,
    loss_parts,
    variance_weights,
)
from .metrics import MetricsReport, coverage, normalized_mse, write_report_csv
from .scenario import (
    ScenarioConfig,
    breach_day,
    default_scenario,
    ensemble_data,
    icu_series,
)
from .service import SimulateRequest, build_app, render_response, run_request
from .solvers import SolveConfig, solve

STRATEGIES = ("ude", "ms", "pem", "mspem")
ENV_DATA_DIR = "EPIKAPPA_DATA_DIR"
ENV_UI_DIR = "EPIKAPPA_UI_DIR"
MANIFEST_VERSION = 1


def _package_version() -> str:
    try:
        return metadata.version("epikappa")
    except metadata.PackageNotFoundError:
        return "unknown"


def _run_dir(args, command: str) -> Path:
    if args.out:
        d = Path(args.out)
    else:
        d = Path(os.environ.get(ENV_DATA_DIR, "epikappa-runs")) / command
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_manifest(run_dir: Path, command: str, inputs: dict, seeds, outputs) -> None:
    doc = {
        "schema_version": MANIFEST_VERSION,
        "command": command,
        "created_unix": time.time(),
        "package_version": _package_version(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "inputs": inputs,
        "seeds": [int(s) for s in seeds],
        "outputs": [str(p) for p in outputs],
    }
    (run_dir / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True))


def _load_scenario(args) -> tuple[ScenarioConfig, dict]:
    """Scenario plus a manifest stub describing where it came from."""
    if getattr(args, "config", None):
        cfg = ScenarioConfig.load(args.config)
        src = {"config": str(args.config)}
    else:
        cfg = default_scenario()
        src = {"config": "packaged-default"}
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, master_seed=int(args.seed))
    src["scenario"] = cfg.to_json()
    return cfg, src


# ----------------------------------------------------------------------
# generate-data


def cmd_generate_data(args) -> int:
    cfg, inputs = _load_scenario(args)
    run_dir = _run_dir(args, "generate-data")
    ens = ensemble_data(cfg)
    data_dir = run_dir / "data"
    paths = write_dataset(data_dir, ens)
    cfg.save(run_dir / "scenario.json")
    _write_manifest(
        run_dir,
        "generate-data",
        inputs,
        seeds=[cfg.master_seed],
        outputs=[run_dir / "scenario.json", *paths],
    )
    print(
        f"wrote {ens.n_realizations} realizations + summary to {data_dir} "
        f"(N={cfg.params.N:g}, horizon={cfg.horizon})"
    )
    return 0


# ----------------------------------------------------------------------
# train


def _budget_from(doc: dict, seed_override) -> OptimBudget:
    known = {f.name for f in dataclasses.fields(OptimBudget)}
    unknown = set(doc) - known
    if unknown:
        raise EpikappaError(
            f"unknown budget field(s) {sorted(unknown)}; expected subset of {sorted(known)}"
        )
    budget = OptimBudget(**doc)
    if seed_override is not None:
        budget = dataclasses.replace(budget, seed=int(seed_override))
    return budget


def build_problem(
    scenario: ScenarioConfig, t, y, options: dict | None = None
) -> TrainingProblem:
    """Training problem over a daily series ``y`` (usually the ensemble mean)."""
    opts = dict(options or {})
    weights_mode = opts.pop("weights", "variance")
    normalized = bool(opts.pop("normalized", True))
    u0 = np.asarray(y[0], dtype=float)
    n0 = scenario.params.N - u0[6]
    if weights_mode == "variance":
        weights = variance_weights(np.asarray(y) / n0 if normalized else np.asarray(y))
    elif weights_mode == "unit":
        weights = np.ones(np.asarray(y).shape[1])
    else:
        raise EpikappaError(f"unknown weights mode {weights_mode!r}")
    shooting = ShootingConfig(
        group_size=int(opts.pop("group_size", 11)),
        lambda_ms=float(opts.pop("lambda_ms", 10.0)),
    )
    observer = ObserverSpec(
        lambda_gain=float(opts.pop("lambda_gain", 1e-3)),
        lambda_sparse=float(opts.pop("lambda_sparse", 0.0)),
    )
    kappa_max = float(opts.pop("kappa_max", 1.0))
    h = float(opts.pop("h", 0.25))
    theta_names = tuple(opts.pop("theta_names", ()))
    if opts:
        raise EpikappaError(f"unknown problem option(s) {sorted(opts)}")
    return TrainingProblem(
        params=scenario.params,
        t=np.asarray(t, dtype=float),
        y=np.asarray(y, dtype=float),
        u0=u0,
        obs=ObservationSpec(weights=weights, normalized=normalized),
        shooting=shooting,
        observer=observer,
        kappa_max=kappa_max,
        h=h,
        theta_names=theta_names,
    )


def cmd_train(args) -> int:
    doc = json.loads(Path(args.config).read_text()) if args.config else {}
    if "scenario" in doc:
        scenario = ScenarioConfig.from_json(doc["scenario"])
    elif "scenario_path" in doc:
        scenario = ScenarioConfig.load(doc["scenario_path"])
    else:
        scenario = default_scenario()
    strategy = args.strategy or doc.get("strategy") or "ude"
    if strategy not in STRATEGIES:
        raise EpikappaError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
    budget = _budget_from(doc.get("budget", {}), args.seed)

    run_dir = _run_dir(args, "train")
    if args.data:
        ens = read_dataset(args.data)
        data_source = str(args.data)
    else:
        ens = ensemble_data(scenario)
        data_source = f"simulated (master_seed={scenario.master_seed})"
    problem = build_problem(scenario, ens.t, ens.mean, doc.get("problem"))

    inputs = {
        "config": str(args.config) if args.config else "defaults",
        "resolved": {
            "strategy": strategy,
            "scenario": scenario.to_json(),
            "budget": dataclasses.asdict(budget),
            "problem": doc.get("problem", {}),
            "data": data_source,
        },
    }
    outputs = []
    if args.seeds and args.seeds > 1:
        seeds = spawn_seeds(budget.seed, args.seeds)
        summary = fit_ensemble(strategy, problem, budget, seeds=seeds)
        models_dir = run_dir / "models"
        models_dir.mkdir(exist_ok=True)
        for m in summary.models:
            p = models_dir / f"{strategy}_seed{m.seed}.json"
            m.save(p)
            outputs.append(p)
        ens_doc = {
            "strategy": strategy,
            "seeds": seeds,
            "failures": [{"seed": s, "reason": r} for s, r in summary.failures],
            "final_loss": {m.seed: m.metrics["loss"] for m in summary.models},
        }
        p = run_dir / "ensemble.json"
        p.write_text(json.dumps(ens_doc, indent=2))
        outputs.append(p)
        print(
            f"trained {len(summary.models)}/{len(seeds)} {strategy} fits "
            f"into {models_dir}"
        )
    else:
        seeds = [budget.seed]
        model = fit(strategy, problem, budget)
        model_path = run_dir / "model.json"
        model.save(model_path)
        log_path = run_dir / "training_log.csv"
        # last row = the accepted iterate (fit keeps the best point seen,
        # which is not always the last optimizer step)
        m = model.metrics
        final = EpochRecord(
            len(model.history) + 1,
            m["loss"], m["data"], m["continuity"], m["gain"],
            m["grad_norm"], m["wall_clock"],
        )
        write_training_log(log_path, model.history + [final])
        outputs += [model_path, log_path]
        print(
            f"{strategy} fit finished: loss {model.metrics['loss']:.6e} "
            f"(data {model.metrics['data']:.6e}) after {model.metrics['n_epochs']} epochs, "
            f"status {model.status}"
        )
    _write_manifest(run_dir, "train", inputs, seeds=seeds, outputs=outputs)
    return 0


# ----------------------------------------------------------------------
# evaluate


def cmd_evaluate(args) -> int:
    model = TrainedModel.load(args.model)
    ens = read_dataset(args.data)
    run_dir = _run_dir(args, "evaluate")

    n0 = model.n0
    grid_matches = (
        ens.t.size == model.n_obs
        and abs(float(ens.t[0]) - model.t0) < 1e-9
        and abs(float(ens.t[1] - ens.t[0]) - model.dt) < 1e-9
    )
    parts = None
    if grid_matches:
        problem = TrainingProblem(
            params=model.params,
            t=ens.t,
            y=ens.mean @ model.obs.H.T,
            u0=model.u0,
            obs=model.obs,
            shooting=model.shooting,
            observer=model.observer,
            kappa_max=model.kappa_max,
            h=model.h,
            theta_names=model.theta_names,
        )
        predicted = evaluation_trajectory(model, problem)
        parts = loss_parts(model.strategy, model_vector(model, problem), problem)
        mode = "reconstruction"
    else:
        predicted = model.daily_states(ens.t.size - 1)
        mode = "rollout"

    result = normalized_mse(predicted, ens.mean, n0)
    cov_lo_hi = {}
    for pair in ((10, 90), (25, 75)):
        if pair[0] in ens.quantiles and pair[1] in ens.quantiles:
            cov_lo_hi[pair] = coverage(predicted, *ens.envelope(*pair))
    report = MetricsReport(
        strategy=model.strategy,
        mse=result,
        coverage_10_90=cov_lo_hi.get((10, 90)),
        coverage_25_75=cov_lo_hi.get((25, 75)),
        continuity=None if parts is None else float(parts.continuity),
        latency=None,
        seeds=(model.seed,),
        config_hash=model.config_hash,
    )
    doc = {
        "mode": mode,
        "report": report.to_json(),
        "loss_parts": None
        if parts is None
        else {
            "total": float(parts.total),
            "data": float(parts.data),
            "continuity": float(parts.continuity),
            "gain": float(parts.gain),
        },
    }
    report_path = run_dir / "evaluation.json"
    report_path.write_text(json.dumps(doc, indent=2, sort_keys=True))
    csv_path = run_dir / "report.csv"
    write_report_csv(csv_path, [report])
    _write_manifest(
        run_dir,
        "evaluate",
        {"model": str(args.model), "data": str(args.data)},
        seeds=[model.seed],
        outputs=[report_path, csv_path],
    )
    if parts is not None:
        print(
            f"{model.strategy}: data term {parts.data:.9e}, "
            f"normalized MSE {result.overall:.6e}"
        )
    else:
        print(f"{model.strategy}: rollout normalized MSE {result.overall:.6e}")
    return 0


# ----------------------------------------------------------------------
# sweep


def cmd_sweep(args) -> int:
    cfg, inputs = _load_scenario(args)
    grid_doc = json.loads(Path(args.grid).read_text()) if args.grid else {}
    base = cfg.contact
    if base.get("kind") not in ("step", "smooth_step"):
        raise EpikappaError("sweep needs a step-family contact in the scenario")
    kappa2s = [float(v) for v in grid_doc.get("kappa2", [base["kappa2"]])]
    t_lds = [float(v) for v in grid_doc.get("t_ld", [base["t_ld"]])]
    horizons = [int(v) for v in grid_doc.get("horizon", [cfg.horizon])]
    inputs["grid"] = {"kappa2": kappa2s, "t_ld": t_lds, "horizon": horizons}

    run_dir = _run_dir(args, "sweep")
    level = cfg.icu_threshold * cfg.icu_capacity
    rows = []
    t_start = time.perf_counter()
    for k2, tld, hz in itertools.product(kappa2s, t_lds, horizons):
        contact = StepContact(float(base["kappa1"]), k2, tld)
        traj = solve(
            cfg.u0,
            (0.0, float(hz)),
            cfg.params,
            contact,
            SolveConfig(method="rk4", h=0.1),
        )
        icu = icu_series(traj.states, cfg.icu_coefficient)
        bd = breach_day(traj.t, icu, cfg.icu_capacity, cfg.icu_threshold)
        rows.append(
            {
                "kappa2": k2,
                "t_ld": tld,
                "horizon": hz,
                "peak_Is": float(traj.states[:, 3].max()),
                "peak_icu": float(icu.max()),
                "final_D": float(traj.states[-1, 6]),
                "breach": "true" if bd is not None else "false",
                "breach_day": "" if bd is None else bd,
            }
        )
    elapsed = time.perf_counter() - t_start

    sweep_path = run_dir / "sweep.csv"
    with open(sweep_path, "w", newline="") as fh:
        w = csv.DictWriter(
            fh,
            fieldnames=[
                "kappa2", "t_ld", "horizon", "peak_Is", "peak_icu",
                "final_D", "breach", "breach_day",
            ],
        )
        w.writeheader()
        w.writerows(rows)
    _write_manifest(
        run_dir,
        "sweep",
        inputs,
        seeds=[],
        outputs=[sweep_path],
    )
    print(
        f"swept {len(rows)} scenarios in {elapsed:.1f}s "
        f"(threshold {level:g} ICU); {sum(r['breach'] == 'true' for r in rows)} breach"
    )
    return 0


# ----------------------------------------------------------------------
# simulate (single-request replay, shared with the HTTP service)


def cmd_simulate(args) -> int:
    req_doc = json.loads(Path(args.request).read_text())
    req = SimulateRequest.model_validate(req_doc)
    model_path = Path(args.model) if args.model else None
    if model_path is None:
        models_dir = Path(args.models) if args.models else None
        if models_dir is None:
            raise EpikappaError("pass --model FILE or --models DIR")
        candidates = sorted(models_dir.glob(f"**/{req.model_id}.json"))
        if not candidates:
            raise EpikappaError(f"model {req.model_id!r} not found under {models_dir}")
        model_path = candidates[0]
    model = TrainedModel.load(model_path)
    doc = run_request(model, req)
    payload = render_response(doc)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_bytes(payload)
    sys.stdout.write(payload.decode("utf-8") + "\n")
    return 0


# ----------------------------------------------------------------------
# serve


def cmd_serve(args) -> int:
    import uvicorn

    models_dir = args.models or os.environ.get(ENV_DATA_DIR, "epikappa-runs")
    static_dir = args.ui or os.environ.get(ENV_UI_DIR)
    app = build_app(models_dir, static_dir=static_dir)
    n = len(app.state.store.models)
    print(f"serving {n} model(s) from {models_dir} on port {args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ----------------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epikappa",
        description="Stochastic-ensemble data, neural-contact training, and what-if serving.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-data", help="simulate a scenario ensemble to CSV")
    p.add_argument("--config", help="scenario JSON (packaged default when omitted)")
    p.add_argument("--out", help="run directory")
    p.add_argument("--seed", type=int, help="override the scenario master seed")
    p.set_defaults(func=cmd_generate_data)

    p = sub.add_parser("train", help="fit a surrogate to ensemble-mean data")
    p.add_argument("--config", help="training JSON (scenario/budget/problem blocks)")
    p.add_argument("--data", help="dataset directory from generate-data")
    p.add_argument("--out", help="run directory")
    p.add_argument("--seed", type=int, help="override the optimizer seed")
    p.add_argument("--seeds", type=int, default=1, help="train an N-seed ensemble")
    p.add_argument("--strategy", choices=STRATEGIES)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a trained model against a dataset")
    p.add_argument("--model", required=True, help="model JSON from train")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", help="run directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="grid of step-contact what-if solves")
    p.add_argument("--config", help="scenario JSON (packaged default when omitted)")
    p.add_argument("--grid", help="JSON with kappa2/t_ld/horizon lists")
    p.add_argument("--out", help="run directory")
    p.add_argument("--seed", type=int, help="override the scenario master seed")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="replay one scenario request like the service")
    p.add_argument("--request", required=True, help="SimulateRequest JSON")
    p.add_argument("--model", help="model JSON file")
    p.add_argument("--models", help="directory searched for <model_id>.json")
    p.add_argument("--out", help="write the response bytes here too")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="HTTP service over trained models")
    p.add_argument("--models", help="directory of model JSON files")
    p.add_argument("--ui", help="static UI directory to mount at /ui")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EpikappaError as exc:
        report = {"command": args.command, "error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(report), file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        report = {"command": args.command, "error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(report), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
