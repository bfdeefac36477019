"""Accuracy, calibration, and runtime metrics for fitted surrogates.

Everything here is a pure function of its inputs: trajectories come in as
(K, 7) daily arrays on a shared grid, reports go out as plain containers
that serialize to JSON or flat CSV. No module-level state, safe to call
concurrently.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import GridMismatchError
from .params import N_STATES, STATE_NAMES


class MseResult(NamedTuple):
    per_compartment: np.ndarray  # (7,) mean squared residual per compartment
    overall: float  # unweighted mean of per_compartment
    total: float  # sum of per_compartment; equals the training data term
    # when called with the same weights and normalization


class CoverageResult(NamedTuple):
    per_compartment: np.ndarray  # (7,) fraction of days inside the band
    mean: float


class LatencyStats(NamedTuple):
    median: float  # seconds per call
    p90: float
    samples: np.ndarray


def _as_grid(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[1] != N_STATES:
        raise GridMismatchError(f"{name} must be (K, {N_STATES}), got {a.shape}")
    return a


def mse(predicted, target, weights=None) -> MseResult:
    """Per-compartment and overall mean squared error on a shared day grid.

    ``weights`` (length 7) scale the residuals before squaring, so with the
    training weights and normalization applied to both inputs, ``total``
    reproduces the loss data term exactly.
    """
    predicted = _as_grid(predicted, "predicted")
    target = _as_grid(target, "target")
    if predicted.shape != target.shape:
        raise GridMismatchError(
            f"grids differ: predicted {predicted.shape} vs target {target.shape}"
        )
    r = predicted - target
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if w.shape != (N_STATES,):
            raise GridMismatchError(f"weights must be ({N_STATES},), got {w.shape}")
        r = r * w
    per = np.mean(r * r, axis=0)
    return MseResult(per, float(per.mean()), float(per.sum()))


def normalized_mse(predicted, target, n0: float, weights=None) -> MseResult:
    """`mse` on trajectories rescaled to living-population units (u / n0)."""
    if n0 <= 0:
        raise ValueError(f"n0 must be > 0, got {n0}")
    return mse(np.asarray(predicted) / n0, np.asarray(target) / n0, weights)


def coverage(predicted, lo, hi) -> CoverageResult:
    """Fraction of days each predicted compartment lies inside [lo, hi].

    ``lo`` and ``hi`` are per-day envelope trajectories (e.g. the 10% and
    90% ensemble quantiles). The envelope must be ordered everywhere.
    """
    predicted = _as_grid(predicted, "predicted")
    lo = _as_grid(lo, "lo")
    hi = _as_grid(hi, "hi")
    if not (predicted.shape == lo.shape == hi.shape):
        raise GridMismatchError(
            f"grids differ: predicted {predicted.shape}, lo {lo.shape}, hi {hi.shape}"
        )
    if np.any(lo > hi):
        k, j = np.argwhere(lo > hi)[0]
        raise ValueError(
            f"envelope inverted (lo > hi) at day index {k}, compartment {STATE_NAMES[j]}"
        )
    inside = (predicted >= lo) & (predicted <= hi)
    per = inside.mean(axis=0)
    return CoverageResult(per, float(per.mean()))


def compare_methods(
    results: Mapping[str, MseResult],
) -> dict[tuple[str, str], dict[str, float | None]]:
    """Relative per-compartment MSE changes, 100*(a - b)/b, for every ordered pair.

    Negative cells mean method ``a`` has the lower MSE. Cells where the
    baseline MSE is zero are reported as None rather than raising.
    """
    if len(results) < 2:
        raise ValueError("need at least two results to compare")
    names = list(results)
    table: dict[tuple[str, str], dict[str, float | None]] = {}
    for a in names:
        for b in names:
            if a == b:
                continue
            row: dict[str, float | None] = {}
            ra, rb = results[a], results[b]
            for j, comp in enumerate(STATE_NAMES):
                base = rb.per_compartment[j]
                row[comp] = (
                    None
                    if base == 0
                    else float(100.0 * (ra.per_compartment[j] - base) / base)
                )
            row["overall"] = (
                None
                if rb.overall == 0
                else float(100.0 * (ra.overall - rb.overall) / rb.overall)
            )
            table[(a, b)] = row
    return table


def latency_profile(
    solve: Callable[[], object], n_repeats: int, warmup: int = 3
) -> LatencyStats:
    """Median and p90 wall-clock seconds over repeated forward solves.

    ``warmup`` untimed calls run first so the measurement sees a warmed
    process (caches populated, allocator primed).
    """
    if n_repeats < 1:
        raise ValueError(f"n_repeats must be >= 1, got {n_repeats}")
    for _ in range(warmup):
        solve()
    samples = np.empty(n_repeats)
    for i in range(n_repeats):
        t0 = time.perf_counter()
        solve()
        samples[i] = time.perf_counter() - t0
    return LatencyStats(
        float(np.median(samples)), float(np.percentile(samples, 90)), samples
    )


@dataclass
class MetricsReport:
    """One strategy's evaluation bundle, tagged with its provenance."""

    strategy: str
    mse: MseResult
    coverage_10_90: CoverageResult | None = None
    coverage_25_75: CoverageResult | None = None
    continuity: float | None = None
    latency: LatencyStats | None = None
    seeds: tuple[int, ...] = ()
    config_hash: str = ""

    def to_json(self) -> dict:
        doc: dict = {
            "strategy": self.strategy,
            "mse": {
                "per_compartment": [float(x) for x in self.mse.per_compartment],
                "overall": self.mse.overall,
                "total": self.mse.total,
            },
            "continuity": self.continuity,
            "seeds": list(self.seeds),
            "config_hash": self.config_hash,
        }
        for key, cov in (
            ("coverage_10_90", self.coverage_10_90),
            ("coverage_25_75", self.coverage_25_75),
        ):
            doc[key] = (
                None
                if cov is None
                else {
                    "per_compartment": [float(x) for x in cov.per_compartment],
                    "mean": cov.mean,
                }
            )
        doc["latency"] = (
            None
            if self.latency is None
            else {"median": self.latency.median, "p90": self.latency.p90}
        )
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "MetricsReport":
        def cov(entry):
            if entry is None:
                return None
            per = np.asarray(entry["per_compartment"], dtype=float)
            return CoverageResult(per, float(entry["mean"]))

        m = doc["mse"]
        lat = doc.get("latency")
        return cls(
            strategy=doc["strategy"],
            mse=MseResult(
                np.asarray(m["per_compartment"], dtype=float),
                float(m["overall"]),
                float(m["total"]),
            ),
            coverage_10_90=cov(doc.get("coverage_10_90")),
            coverage_25_75=cov(doc.get("coverage_25_75")),
            continuity=doc.get("continuity"),
            latency=(
                None
                if lat is None
                else LatencyStats(float(lat["median"]), float(lat["p90"]), np.array([]))
            ),
            seeds=tuple(doc.get("seeds", ())),
            config_hash=doc.get("config_hash", ""),
        )


def write_report_csv(path, reports: Sequence[MetricsReport]) -> None:
    """Flat one-row-per-strategy summary table."""
    cols = (
        ["strategy", "mse_overall"]
        + [f"mse_{c}" for c in STATE_NAMES]
        + ["cov_10_90", "cov_25_75", "continuity", "latency_median_s", "latency_p90_s"]
        + ["seeds", "config_hash"]
    )
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in reports:
            row = {"strategy": r.strategy, "mse_overall": repr(r.mse.overall)}
            for j, c in enumerate(STATE_NAMES):
                row[f"mse_{c}"] = repr(float(r.mse.per_compartment[j]))
            row["cov_10_90"] = "" if r.coverage_10_90 is None else repr(r.coverage_10_90.mean)
            row["cov_25_75"] = "" if r.coverage_25_75 is None else repr(r.coverage_25_75.mean)
            row["continuity"] = "" if r.continuity is None else repr(r.continuity)
            row["latency_median_s"] = "" if r.latency is None else repr(r.latency.median)
            row["latency_p90_s"] = "" if r.latency is None else repr(r.latency.p90)
            row["seeds"] = ";".join(str(s) for s in r.seeds)
            row["config_hash"] = r.config_hash
            w.writerow(row)


def write_delta_csv(path, table: Mapping[tuple[str, str], Mapping[str, float | None]]) -> None:
    """One row per ordered method pair; empty cells mark undefined deltas."""
    cols = ["method_a", "method_b"] + list(STATE_NAMES) + ["overall"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for (a, b), row in table.items():
            out = {"method_a": a, "method_b": b}
            for c in list(STATE_NAMES) + ["overall"]:
                v = row[c]
                out[c] = "" if v is None else repr(float(v))
            w.writerow(out)


def write_loss_series(path, epochs, losses) -> None:
    """(epoch, loss) series for external loss-curve plotting."""
    epochs = np.asarray(epochs)
    losses = np.asarray(losses, dtype=float)
    if epochs.shape != losses.shape:
        raise GridMismatchError(
            f"epochs {epochs.shape} vs losses {losses.shape}"
        )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss"])
        for e, l in zip(epochs, losses):
            w.writerow([int(e), repr(float(l))])


def write_band_series(path, t, mean, std, truth=None) -> None:
    """Per-day mean with 1-sigma and 3-sigma bands, optionally with truth.

    Single wide file; columns carry the compartment name as a suffix
    (mean_S, lo1_S, hi1_S, lo3_S, hi3_S, truth_S, ...).
    """
    t = np.asarray(t, dtype=float)
    mean = _as_grid(mean, "mean")
    std = _as_grid(std, "std")
    if mean.shape[0] != t.shape[0] or std.shape != mean.shape:
        raise GridMismatchError("t, mean, std must share the day grid")
    if truth is not None:
        truth = _as_grid(truth, "truth")
        if truth.shape != mean.shape:
            raise GridMismatchError("truth must share the day grid")
    cols = ["day"]
    for c in STATE_NAMES:
        cols += [f"mean_{c}", f"lo1_{c}", f"hi1_{c}", f"lo3_{c}", f"hi3_{c}"]
        if truth is not None:
            cols.append(f"truth_{c}")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for k in range(t.shape[0]):
            row = [repr(float(t[k]))]
            for j in range(N_STATES):
                m, s = mean[k, j], std[k, j]
                row += [repr(float(m)), repr(float(m - s)), repr(float(m + s)),
                        repr(float(m - 3 * s)), repr(float(m + 3 * s))]
                if truth is not None:
                    row.append(repr(float(truth[k, j])))
            w.writerow(row)


def report_to_json_str(report: MetricsReport) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=True)
