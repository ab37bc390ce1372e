"""Replicated benchmark runs, named protocol presets, and summary tables.

Replication ``r`` of every cell draws its data from the Philox streams
keyed by ``(base seed, r, purpose)``.  Cells of a sweep therefore reuse the
same random inputs (common random numbers), and every CSV cell is a pure
function of the experiment spec and base seed.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from types import SimpleNamespace
from typing import Dict, List, Optional

import numpy as np

from .config import ExperimentSpec, spec_from_mapping
from .dataio import read_results_csv, read_sparse_text, write_results_csv
from .datagen import GenSpec, make_dataset
from .losses import LinearLoss, LogisticLoss, SparseCoef
from .metrics import EvalRecord, classification_accuracy, evaluate
from .solver import fit_fixed_step, fit_sdarl
from .tuning import fit_asdarl

_LIN = {"model": "linear", "design_kind": "ar1", "coef_kind": "unit_floor", "sigma1": 1.0}
_LOG = {"model": "logistic", "design_kind": "ar1", "coef_kind": "unit_floor"}
_T1 = {"model": "linear", "design_kind": "neighbor", "coef_kind": "logfloor", "sigma1": 1.0,
       "n": 800, "p": 5000, "K": 100, "R": 100, "methods": "sdarl,asdarl", "alpha": 50}
_T2 = {"model": "logistic", "design_kind": "neighbor", "coef_kind": "logfloor",
       "n": 300, "p": 5000, "K": 10, "R": 100, "methods": "sdarl,asdarl"}

PRESETS: Dict[str, dict] = {
    # linear, illustrative example and its sweeps
    "fig1": {**_LIN, "n": 500, "p": 1000, "K": 20, "rho": 0.2, "R": 100, "methods": "sdarl,fixed_step"},
    "fig2": {**_LIN, "n": 500, "p": 1000, "K": 5, "R": 100, "methods": "sdarl",
             "sweep_K": "5:5:50", "sweep_rho": "0.2,0.5,0.8"},
    "fig3": {**_LIN, "n": 50, "p": 1000, "K": 20, "R": 5, "rho": 0.2, "methods": "asdarl",
             "replications": 10, "sweep_n": "50:50:400"},
    "fig4": {**_LIN, "n": 100, "p": 200, "K": 10, "R": 100, "rho": 0.2, "methods": "asdarl",
             "replications": 10, "sweep_p": "200:100:1000"},
    "fig5": {**_LIN, "n": 200, "p": 500, "K": 10, "R": 10, "rho": 0.2, "methods": "asdarl",
             "replications": 10, "sweep_K": "10:10:70"},
    "fig6": {**_LIN, "n": 200, "p": 500, "K": 20, "R": 100, "methods": "asdarl",
             "replications": 10, "sweep_rho": "0.1:0.1:0.8"},
    "table1-rho02": {**_T1, "rho": 0.2},
    "table1-rho05": {**_T1, "rho": 0.5},
    "table1-rho08": {**_T1, "rho": 0.8},
    # logistic
    "fig7": {**_LOG, "n": 300, "p": 5000, "K": 10, "rho": 0.2, "R": 100, "methods": "sdarl,fixed_step"},
    "fig8": {**_LOG, "n": 300, "p": 5000, "K": 5, "R": 100, "methods": "sdarl",
             "sweep_K": "5:5:50", "sweep_rho": "0.2,0.5,0.8"},
    "fig9": {**_LOG, "n": 100, "p": 500, "K": 5, "R": 10, "rho": 0.2, "methods": "asdarl",
             "replications": 10, "sweep_n": "100:50:400"},
    "fig10": {**_LOG, "n": 200, "p": 200, "K": 5, "R": 10, "rho": 0.2, "methods": "asdarl",
              "replications": 10, "sweep_p": "200:100:800"},
    "fig11": {**_LOG, "n": 800, "p": 1000, "K": 5, "R": 10, "rho": 0.2, "methods": "asdarl",
              "replications": 10, "sweep_K": "5:5:35"},
    "fig12": {**_LOG, "n": 500, "p": 1000, "K": 10, "R": 10, "methods": "asdarl",
              "replications": 10, "sweep_rho": "0.1:0.1:0.8"},
    "table2-rho02": {**_T2, "rho": 0.2},
    "table2-rho05": {**_T2, "rho": 0.5},
    "table2-rho08": {**_T2, "rho": 0.8},
    # desk-scale versions used by the acceptance suite
    "desk-linear": {**_LIN, "n": 500, "p": 1000, "K": 20, "rho": 0.2, "R": 100,
                    "methods": "sdarl,fixed_step", "replications": 20},
    "desk-linear-iters": {**_LIN, "n": 500, "p": 1000, "K": 5, "R": 100, "methods": "sdarl",
                          "replications": 20, "sweep_K": "5:5:50", "sweep_rho": "0.2,0.5,0.8"},
    "desk-logistic": {**_LOG, "n": 300, "p": 2000, "K": 10, "rho": 0.2, "R": 100,
                      "methods": "sdarl,fixed_step", "replications": 20},
    "desk-logistic-iters": {**_LOG, "n": 300, "p": 1000, "K": 5, "R": 100, "methods": "sdarl",
                            "replications": 20, "sweep_K": "5:5:30", "sweep_rho": "0.2,0.5,0.8"},
    "desk-asdarl": {**_LIN, "n": 400, "p": 800, "K": 10, "R": 100, "rho": 0.2, "alpha": 1,
                    "methods": "asdarl", "replications": 20},
    "smoke": {**_LIN, "n": 100, "p": 200, "K": 5, "R": 10, "rho": 0.2,
              "methods": "sdarl,fixed_step,asdarl", "replications": 3},
}


def preset_mapping(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}")
    return {k: str(v) for k, v in PRESETS[name].items()}


def preset_spec(name: str, **overrides) -> ExperimentSpec:
    raw = preset_mapping(name)
    raw.update({k: str(v) for k, v in overrides.items() if v is not None})
    return spec_from_mapping(raw)


def run_method(method: str, L, spec: ExperimentSpec, T: int):
    """Fit one method; returns ``(fit_like, T_used)``."""
    if method == "sdarl":
        return fit_sdarl(L, spec.solver.with_T(T)), T
    if method == "fixed_step":
        return fit_fixed_step(L, spec.solver.with_T(T)), T
    if method == "asdarl":
        t0 = time.perf_counter()
        path = fit_asdarl(L, spec.tuning)
        best = path.best
        beta = best.fit.beta if best.fit is not None else SparseCoef.zeros(L.p)
        fit = SimpleNamespace(beta=beta, iterations=path.total_iterations,
                              wall_time=time.perf_counter() - t0, path=path,
                              termination=best.fit.termination if best.fit else "null_model")
        return fit, path.T_hat
    raise ValueError(f"unknown method {method!r}")


def run_replication(spec: ExperimentSpec, gen: GenSpec, rep: int, keep_fits: bool = False):
    """All methods on replication ``rep`` of one cell.  Failures become error rows."""
    T = spec.T_for(gen)
    records, fits = [], []
    try:
        ds = make_dataset(gen, rep)
        L = ds.loss()
    except Exception as exc:  # noqa: BLE001  recorded, never fatal for the batch
        for m in spec.methods:
            records.append(EvalRecord.failed(m, gen.seed, rep, gen.n, gen.p, gen.K, T, gen.rho, gen.R,
                                             f"datagen:{type(exc).__name__}"))
        return records, fits
    for m in spec.methods:
        try:
            fit, T_used = run_method(m, L, spec, T)
            rec = evaluate(m, fit, ds, gen.seed, rep, T_used)
            if not spec.timing:
                rec.time_s = 0.0
            records.append(rec)
            if keep_fits:
                fits.append((m, gen, rep, fit))
        except Exception as exc:  # noqa: BLE001
            records.append(EvalRecord.failed(m, gen.seed, rep, gen.n, gen.p, gen.K, T, gen.rho, gen.R,
                                             f"{m}:{type(exc).__name__}"))
    return records, fits


def _job(args):
    spec, gen, rep, keep = args
    return run_replication(spec, gen, rep, keep)


def run_real_data(spec: ExperimentSpec) -> List[EvalRecord]:
    data = read_sparse_text(spec.data)
    if data.binary:
        L = LogisticLoss(data.X, data.y, eligible=data.eligible)
    else:
        L = LinearLoss(data.X, data.y, intercept=False, eligible=data.eligible)
    T = spec.T_for(None, data.n)
    out = []
    nan = math.nan
    for m in spec.methods:
        fit, T_used = run_method(m, L, spec, T)
        car = classification_accuracy(data.X, data.y, fit.beta) if data.binary else None
        nsv = fit.beta.nnz(1e-10)
        out.append(EvalRecord(m, 0, 0, data.n, data.p, nsv, T_used, nan, nan, nan, nan, nan, nan,
                              car, int(fit.iterations), fit.wall_time if spec.timing else 0.0))
    return out


@dataclass
class BenchResult:
    records: List[EvalRecord]
    summary: List[dict]
    fits: list = field(default_factory=list)


def run_bench(spec: ExperimentSpec, workers: Optional[int] = None, keep_fits: bool = False,
              replications: Optional[int] = None) -> BenchResult:
    """Run every (cell, replication, method) combination of ``spec``."""
    if spec.gen is None:
        records = run_real_data(spec)
        return BenchResult(records, summarize(records))
    reps = spec.replications if replications is None else replications
    jobs = [(spec, gen, r, keep_fits) for gen in spec.cells() for r in range(reps)]
    workers = spec.workers if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        outs = [_job(j) for j in jobs]
    records = [r for recs, _ in outs for r in recs]
    fits = [f for _, fs in outs for f in fs]
    return BenchResult(records, summarize(records), fits)


def _mean_std(xs: List[float]):
    xs = [x for x in xs if x is not None and not math.isnan(x)]
    if not xs:
        return math.nan, math.nan
    mean = math.fsum(xs) / len(xs)
    if len(xs) < 2:
        return mean, 0.0
    var = math.fsum((x - mean) ** 2 for x in xs) / (len(xs) - 1)
    return mean, math.sqrt(var)


SUMMARY_KEYS = ("method", "n", "p", "K", "rho", "R")
SUMMARY_STATS = ("are", "pdr", "fdr", "cdr", "car", "iters", "time_s")


def summarize(records: List[EvalRecord]) -> List[dict]:
    """Means and sample standard deviations per (method, n, p, K, rho, R)."""
    groups: Dict[tuple, List[EvalRecord]] = {}
    for r in records:
        groups.setdefault(tuple(getattr(r, k) for k in SUMMARY_KEYS), []).append(r)
    rows = []
    for key, recs in groups.items():
        ok = [r for r in recs if r.ok]
        row = dict(zip(SUMMARY_KEYS, key))
        row["reps"] = len(recs)
        row["failures"] = len(recs) - len(ok)
        for stat in SUMMARY_STATS:
            mean, std = _mean_std([getattr(r, stat) for r in ok])
            row[f"{stat}_mean"] = mean
            row[f"{stat}_std"] = std
        rows.append(row)
    return rows


def _same_summary(a: List[dict], b: List[dict]) -> bool:
    if len(a) != len(b):
        return False
    for ra, rb in zip(a, b):
        for k in ra:
            x, y = ra[k], rb[k]
            if isinstance(x, float) and isinstance(y, float) and math.isnan(x) and math.isnan(y):
                continue
            if x != y:
                return False
    return True


def _write_table(rows: List[dict], path: Path) -> None:
    import csv

    if not rows:
        path.write_text("", encoding="utf-8")
        return
    cols = list(rows[0])
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([f"{row[c]:.17g}" if isinstance(row[c], float) else row[c] for c in cols])


def write_bench(result: BenchResult, spec: ExperimentSpec, outdir, preset: Optional[str] = None) -> Dict[str, Path]:
    """Write results.csv, summary.csv, per-sweep-key files and meta.json.

    The summary is recomputed from the CSV as written and must match the
    in-memory one exactly.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {"results": outdir / "results.csv", "summary": outdir / "summary.csv",
             "meta": outdir / "meta.json"}
    write_results_csv(result.records, paths["results"])
    again = summarize(read_results_csv(paths["results"]))
    if not _same_summary(again, result.summary):
        raise RuntimeError("summary does not recompute from the written results CSV")
    _write_table(result.summary, paths["summary"])
    for key, _ in spec.sweep:
        rows = sorted(result.summary, key=lambda r: (r["method"], r[key]))
        p = outdir / f"sweep_{key}.csv"
        _write_table(rows, p)
        paths[f"sweep_{key}"] = p
    meta = {"preset": preset, "config": spec.metadata(),
            "records": len(result.records),
            "failures": sum(1 for r in result.records if not r.ok),
            "notes": {"design_renormalized_after_mixing": True,
                      "time_s": "wall clock" if spec.timing else "disabled (deterministic output)"}}
    paths["meta"].write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n",
                             encoding="utf-8")
    return paths
