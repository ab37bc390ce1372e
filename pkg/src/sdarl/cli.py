"""Command line: ``sdarl {gen,fit,bench,tune,verify}``.

Settings are layered: built-in defaults, then a preset (bench only), then
``--config FILE``, then individual flags.  Every config key has a flag of
the same name (``--n 500 --rho 0.5``).

Exit codes: 0 success, 1 usage or invalid settings, 2 data error
(missing or malformed input), 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .config import SCHEMA, ConfigError, ExperimentSpec, parse_config_text, spec_from_mapping
from .dataio import DataFormatError, read_sparse_text, write_sparse_text
from .datagen import make_dataset
from .experiment import PRESETS, preset_mapping, run_bench, write_bench
from .linalg import DegenerateInputError
from .losses import LinearLoss, LogisticLoss
from .metrics import evaluate
from .solver import fit_fixed_step, fit_sdarl
from .tuning import fit_asdarl

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_schema_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("settings (same names as config keys)")
    for key in SCHEMA:
        g.add_argument(f"--{key}", dest=f"cfg_{key}", default=None, metavar="VALUE")
    p.add_argument("--config", help="flat key = value settings file")


def _settings(args, base: Optional[Dict[str, str]] = None) -> Dict[str, str]:
    raw: Dict[str, str] = dict(base or {})
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        raw.update(parse_config_text(path.read_text(encoding="utf-8"), str(path)))
    for key in SCHEMA:
        value = getattr(args, f"cfg_{key}")
        if value is not None:
            raw[key] = value
    return raw


def _real_loss(spec: ExperimentSpec):
    path = Path(spec.data)
    if not path.is_file():
        raise FileNotFoundError(f"data file not found: {path}")
    data = read_sparse_text(path)
    if data.binary:
        L = LogisticLoss(data.X, data.y, eligible=data.eligible)
    else:
        L = LinearLoss(data.X, data.y, intercept=False, eligible=data.eligible)
    return L, data


def _emit(obj, out: Optional[str]) -> None:
    text = json.dumps(obj, indent=2, default=_json_default) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _clean(x):
    """NaN and inf are not JSON; report them as strings."""
    if isinstance(x, float) and not np.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_clean(v) for v in x]
    return x


# subcommands ---------------------------------------------------------------

def cmd_gen(args) -> int:
    spec = spec_from_mapping(_settings(args))
    if spec.gen is None:
        raise ConfigError("gen needs generator settings, not a data file")
    ds = make_dataset(spec.gen, args.rep)
    out = Path(args.out)
    write_sparse_text(out, ds.X, ds.y)
    truth = {"config": spec.metadata(), "rep": args.rep,
             "support": ds.beta_star.support.tolist(), "values": ds.beta_star.values.tolist(),
             "train": None if ds.train is None else ds.train.tolist(),
             "test": None if ds.test is None else ds.test.tolist(), "meta": ds.meta}
    out.with_suffix(out.suffix + ".json").write_text(
        json.dumps(_clean(truth), indent=2, default=_json_default) + "\n", encoding="utf-8")
    print(f"wrote {out} ({ds.X.shape[0]} x {ds.X.shape[1]})")
    return EXIT_OK


def cmd_fit(args) -> int:
    spec = spec_from_mapping(_settings(args))
    method = args.method
    if spec.gen is None:
        L, data = _real_loss(spec)
        T = spec.T_for(None, L.n)
        info = {"data": data.metadata(), "T": T}
        ds = None
    else:
        ds = make_dataset(spec.gen, args.rep)
        L = ds.loss()
        T = spec.T_for(spec.gen)
        info = {"T": T, "rep": args.rep}
    fitter = fit_sdarl if method == "sdarl" else fit_fixed_step
    fit = fitter(L, spec.solver.with_T(T))
    out = {"config": spec.metadata(), **info, "fit": fit.to_dict()}
    if ds is not None:
        rec = evaluate(method, fit, ds, spec.base_seed, args.rep, T)
        out["metrics"] = {"are": rec.are, "pdr": rec.pdr, "fdr": rec.fdr, "cdr": rec.cdr, "car": rec.car}
    _emit(_clean(out), args.out)
    return EXIT_OK


def cmd_tune(args) -> int:
    spec = spec_from_mapping(_settings(args))
    if spec.gen is None:
        L, data = _real_loss(spec)
        info = {"data": data.metadata()}
        ds = None
    else:
        ds = make_dataset(spec.gen, args.rep)
        L = ds.loss()
        info = {"rep": args.rep}
    path = fit_asdarl(L, spec.tuning)
    best = path.best
    out = {"config": spec.metadata(), **info, "criterion": path.criterion, "Q": path.Q,
           "T_hat": path.T_hat, "total_iterations": path.total_iterations,
           "path": [{"T": e.T, "score": e.score,
                     "nnz": 0 if e.fit is None else e.fit.beta.nnz(1e-10),
                     "iterations": 0 if e.fit is None else e.fit.iterations,
                     "termination": "null_model" if e.fit is None else e.fit.termination}
                    for e in path.entries],
           "selected": {"support": [] if best.fit is None else best.fit.beta.support.tolist(),
                        "values": [] if best.fit is None else best.fit.beta.values.tolist()}}
    if ds is not None and best.fit is not None:
        rec = evaluate("asdarl", best.fit, ds, spec.base_seed, args.rep, path.T_hat)
        out["metrics"] = {"are": rec.are, "pdr": rec.pdr, "fdr": rec.fdr, "cdr": rec.cdr, "car": rec.car}
    _emit(_clean(out), args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    base = preset_mapping(args.preset) if args.preset else {}
    spec = spec_from_mapping(_settings(args, base))
    result = run_bench(spec)
    paths = write_bench(result, spec, args.out, preset=args.preset)
    failures = sum(1 for r in result.records if not r.ok)
    print(f"{len(result.records)} rows ({failures} failed) -> {paths['results']}")
    for row in result.summary:
        print("  " + ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}"
                               for k, v in row.items() if not k.startswith("time_s")))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_battery

    report = run_battery(corrupt_gradient=args.corrupt_gradient, quick=args.quick,
                         progress=lambda r: print(r.line(), flush=True))
    print("ALL PASS" if report.ok else "FAILED: " + ", ".join(report.failed))
    for r in report.results:
        if not r.ok:
            for msg in r.failures[:5]:
                print(f"  {r.name}: {msg}")
    return EXIT_OK if report.ok else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sdarl", description="Sparse regression by support detection with line search.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="write one synthetic dataset in sparse text format")
    _add_schema_flags(p)
    p.add_argument("--rep", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("fit", help="single fit with full trajectory dump (JSON)")
    _add_schema_flags(p)
    p.add_argument("--method", choices=("sdarl", "fixed_step"), default="sdarl")
    p.add_argument("--rep", type=int, default=0)
    p.add_argument("--out", help="JSON output path (default stdout)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("tune", help="adaptive sparsity sweep with HBIC or CV selection (JSON)")
    _add_schema_flags(p)
    p.add_argument("--rep", type=int, default=0)
    p.add_argument("--out", help="JSON output path (default stdout)")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("bench", help="replicated benchmark: results.csv, summary.csv, sweep files")
    _add_schema_flags(p)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="run the verification battery")
    p.add_argument("--quick", action="store_true", help="fewer trials per property")
    p.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, DataFormatError, DegenerateInputError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
