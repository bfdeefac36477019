"""Wide-format CSV datasets: one file per realization plus a summary file.

Layout mirrors how ensemble runs land on disk: ``realization_000.csv`` ...
``realization_NNN.csv`` each hold one daily trajectory with columns
``day,S,E,Ins,Is,Ia,R,D``; ``summary.csv`` holds the per-day mean and
quantile envelopes with ``mean_`` / ``q10_`` / ``q25_`` ... prefixed
columns. Reads validate the physical invariants (column set, nondecreasing
D, mass balance) and name the offending row and column on failure.
"""

from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

from .abm import DEFAULT_QUANTILE_PAIRS, TrajectoryEnsemble, build_ensemble
from .errors import GridMismatchError, IngestionError
from .params import N_STATES, STATE_NAMES
from .simplex import project_feasible

TRAJECTORY_COLUMNS = ("day",) + STATE_NAMES
SUMMARY_NAME = "summary.csv"
# mass-balance slack before a row is rejected outright
MASS_RTOL = 0.005


def _fmt(x) -> str:
    # integers stay integers on disk; floats use the shortest round-trip repr
    xf = float(x)
    return str(int(xf)) if xf.is_integer() else repr(xf)


def write_trajectory(path, t, states) -> None:
    """One daily trajectory as a wide CSV, one row per day."""
    t = np.asarray(t, dtype=float)
    states = np.asarray(states)
    if states.ndim != 2 or states.shape != (t.shape[0], N_STATES):
        raise GridMismatchError(
            f"states must be ({t.shape[0]}, {N_STATES}), got {states.shape}"
        )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for k in range(t.shape[0]):
            w.writerow([_fmt(t[k])] + [_fmt(states[k, j]) for j in range(N_STATES)])


def _parse_rows(path, required: tuple[str, ...]):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        missing = [c for c in required if c not in header]
        if missing:
            raise IngestionError(f"{path}: missing column(s) {', '.join(missing)}")
        idx = {c: header.index(c) for c in header}
        rows = []
        for k, row in enumerate(reader):
            if not row:
                continue
            try:
                rows.append([float(row[idx[c]]) for c in required])
            except (ValueError, IndexError) as exc:
                raise IngestionError(f"{path}: row {k} unreadable: {exc}") from None
    if not rows:
        raise IngestionError(f"{path}: no data rows")
    return header, np.asarray(rows, dtype=float)


def read_trajectory(
    path,
    n_total: float | None = None,
    project: bool = False,
    mass_rtol: float = MASS_RTOL,
):
    """Read and validate one wide trajectory CSV.

    Returns (t, states). ``n_total`` fixes the expected population; when
    omitted it is inferred from the first row. Rows whose mass error
    exceeds ``mass_rtol * N`` are rejected unless ``project`` is set, in
    which case the living compartments are projected back onto the simplex
    of mass N - D (deaths are kept as recorded).
    """
    _, data = _parse_rows(path, TRAJECTORY_COLUMNS)
    t = data[:, 0]
    states = data[:, 1:]

    d = states[:, 6]
    drops = np.nonzero(np.diff(d) < 0)[0]
    if drops.size:
        k = int(drops[0])
        raise IngestionError(
            f"{path}: column D decreases between row {k} (day {_fmt(t[k])}) "
            f"and row {k + 1}: {_fmt(d[k])} -> {_fmt(d[k + 1])}"
        )

    N = float(n_total) if n_total is not None else float(states[0].sum())
    if N <= 0:
        raise IngestionError(f"{path}: nonpositive population {N}")
    err = np.abs(states.sum(axis=1) - N)
    bad = np.nonzero(err > mass_rtol * N)[0]
    if bad.size and not project:
        k = int(bad[0])
        raise IngestionError(
            f"{path}: row {k} (day {_fmt(t[k])}) mass {_fmt(states[k].sum())} "
            f"deviates from N={_fmt(N)} by more than {mass_rtol:.1%}"
        )
    if project:
        living_mass = N - d
        if np.any(living_mass <= 0):
            k = int(np.nonzero(living_mass <= 0)[0][0])
            raise IngestionError(
                f"{path}: row {k} column D ({_fmt(d[k])}) leaves no living mass"
            )
        states = states.copy()
        # per-row target mass, so project row by row
        for k in range(states.shape[0]):
            states[k, :6] = project_feasible(states[k, :6], living_mass[k])
    return t, states


def write_dataset(outdir, ensemble: TrajectoryEnsemble) -> list[Path]:
    """Write one CSV per realization plus the mean/quantile summary.

    Returns the written paths, summary last.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(ensemble.n_realizations - 1)))
    paths = []
    for i in range(ensemble.n_realizations):
        p = outdir / f"realization_{i:0{width}d}.csv"
        write_trajectory(p, ensemble.t, ensemble.realizations[i])
        paths.append(p)
    sp = outdir / SUMMARY_NAME
    write_summary(sp, ensemble)
    paths.append(sp)
    return paths


def write_summary(path, ensemble: TrajectoryEnsemble) -> None:
    percents = sorted(ensemble.quantiles)
    cols = ["day"] + [f"mean_{c}" for c in STATE_NAMES]
    for q in percents:
        cols += [f"q{q}_{c}" for c in STATE_NAMES]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for k in range(ensemble.t.shape[0]):
            row = [_fmt(ensemble.t[k])]
            row += [_fmt(ensemble.mean[k, j]) for j in range(N_STATES)]
            for q in percents:
                row += [_fmt(ensemble.quantiles[q][k, j]) for j in range(N_STATES)]
            w.writerow(row)


def read_summary(path):
    """Returns (t, mean, quantiles dict percent -> (K+1, 7))."""
    mean_cols = tuple(f"mean_{c}" for c in STATE_NAMES)
    with open(path, newline="") as fh:
        try:
            header = [h.strip() for h in next(csv.reader(fh))]
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
    percents = sorted(
        {int(m.group(1)) for h in header for m in [re.match(r"q(\d+)_S$", h)] if m}
    )
    for q in percents:
        missing = [f"q{q}_{c}" for c in STATE_NAMES if f"q{q}_{c}" not in header]
        if missing:
            raise IngestionError(f"{path}: missing column(s) {', '.join(missing)}")
    wanted = ("day",) + mean_cols + tuple(
        f"q{q}_{c}" for q in percents for c in STATE_NAMES
    )
    _, data = _parse_rows(path, wanted)
    t = data[:, 0]
    mean = data[:, 1 : 1 + N_STATES]
    quantiles = {}
    for i, q in enumerate(percents):
        lo = 1 + N_STATES * (i + 1)
        quantiles[q] = data[:, lo : lo + N_STATES]
    return t, mean, quantiles


def read_dataset(
    dirpath,
    n_total: float | None = None,
    project: bool = False,
    mass_rtol: float = MASS_RTOL,
) -> TrajectoryEnsemble:
    """Read a dataset directory back into a TrajectoryEnsemble.

    Realization files are validated individually. The summary file, when
    present, supplies the mean and quantile envelopes verbatim; otherwise
    they are recomputed with the default quantile pairs.
    """
    dirpath = Path(dirpath)
    files = sorted(dirpath.glob("realization_*.csv"))
    if len(files) < 2:
        raise IngestionError(f"{dirpath}: found {len(files)} realization files, need >= 2")
    grids, reals = [], []
    for p in files:
        t, s = read_trajectory(p, n_total=n_total, project=project, mass_rtol=mass_rtol)
        grids.append(t)
        reals.append(s)
    t0 = grids[0]
    for p, t in zip(files, grids):
        if t.shape != t0.shape or not np.array_equal(t, t0):
            raise GridMismatchError(f"{p}: day grid differs from {files[0]}")

    summary = dirpath / SUMMARY_NAME
    if not summary.exists():
        return build_ensemble(reals, t=t0, quantile_pairs=DEFAULT_QUANTILE_PAIRS)
    ts, mean, quantiles = read_summary(summary)
    if ts.shape != t0.shape or not np.array_equal(ts, t0):
        raise GridMismatchError(f"{summary}: day grid differs from realizations")
    stack = np.stack(reals)
    return TrajectoryEnsemble(t=t0, realizations=stack, mean=mean, quantiles=quantiles)
