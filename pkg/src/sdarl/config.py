"""Experiment description and the flat ``key = value`` config format.

A config file holds one ``key = value`` pair per line; ``#`` starts a
comment.  Keys are listed in :data:`SCHEMA`.  Values are parsed with the
C locale conventions (``.`` as decimal point); booleans accept
``true/false/1/0/yes/no``; list values are comma separated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from .datagen import GenSpec
from .solver import SolverConfig
from .tuning import TuningConfig

METHODS = ("sdarl", "fixed_step", "asdarl")


class ConfigError(ValueError):
    pass


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_int(text):
    if text is None or str(text).strip().lower() in ("", "none", "auto"):
        return None
    return int(text)


def _list(text) -> List[str]:
    if isinstance(text, (list, tuple)):
        return [str(t) for t in text]
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _grid(text) -> List[float]:
    """Comma list or MATLAB-style ``start:step:stop`` range."""
    if isinstance(text, (list, tuple)):
        return [float(t) for t in text]
    out: List[float] = []
    for part in _list(text):
        if ":" in part:
            a, s, b = (float(x) for x in part.split(":"))
            k = int(math.floor((b - a) / s + 1e-9))
            out.extend(round(a + i * s, 12) for i in range(k + 1))
        else:
            out.append(float(part))
    return out


# key -> (parser, default); None default with required=True below
SCHEMA: Dict[str, tuple] = {
    # data generation
    "model": (str, None),
    "n": (int, None),
    "p": (int, None),
    "K": (int, None),
    "rho": (float, 0.2),
    "R": (float, 100.0),
    "sigma1": (float, 1.0),
    "design_kind": (str, "ar1"),
    "coef_kind": (str, "unit_floor"),
    "split": (float, 0.8),
    "intercept": (_bool, True),
    "seed": (int, 0),
    # real data instead of a generator
    "data": (str, None),
    "gamma": (float, 1.0),
    # solver
    "T": (_opt_int, None),
    "nu": (float, 0.9),
    "sigma": (float, 0.1),
    "max_outer": (int, 50),
    "m_max": (int, 200),
    # tuning
    "alpha": (int, 1),
    "Q": (_opt_int, None),
    "criterion": (str, "hbic"),
    "folds": (int, 10),
    # run
    "methods": (_list, ["sdarl"]),
    "replications": (int, 100),
    "sweep_K": (_grid, []),
    "sweep_rho": (_grid, []),
    "sweep_n": (_grid, []),
    "sweep_p": (_grid, []),
    "workers": (int, 1),
    "timing": (_bool, False),
}
REQUIRED_GEN = ("model", "n", "p", "K")


@dataclass(frozen=True)
class ExperimentSpec:
    gen: Optional[GenSpec]
    data: Optional[str] = None
    gamma: float = 1.0
    T: Optional[int] = None
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(1))
    tuning: TuningConfig = field(default_factory=TuningConfig)
    methods: tuple = ("sdarl",)
    replications: int = 100
    sweep: tuple = ()  # ((key, (values...)), ...)
    workers: int = 1
    timing: bool = False
    values: tuple = ()  # resolved (key, value) pairs, echoed into output metadata

    @property
    def base_seed(self) -> int:
        return self.gen.seed if self.gen is not None else 0

    def T_for(self, gen: Optional[GenSpec], n: Optional[int] = None) -> int:
        """Sparsity level: explicit ``T``, else ``K``, else ``gamma n / ln n``."""
        if self.T is not None:
            return self.T
        if gen is not None:
            return gen.K
        return max(1, int(self.gamma * n / math.log(n)))

    def cells(self):
        """Expand the sweep into ``GenSpec`` cells (a single cell when no sweep)."""
        if self.gen is None:
            return [None]
        cells = [self.gen]
        for key, values in self.sweep:
            cells = [replace(g, **{key: (int(v) if key in ("K", "n", "p") else float(v))})
                     for g in cells for v in values]
        return cells

    def metadata(self) -> dict:
        return dict(self.values)


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    raw: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        raw[key] = value
    return raw


def spec_from_mapping(raw: Mapping[str, Any]) -> ExperimentSpec:
    """Validate and type a key/value mapping into an :class:`ExperimentSpec`."""
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    vals: Dict[str, Any] = {}
    for key, (parse, default) in SCHEMA.items():
        if key in raw and raw[key] is not None:
            try:
                vals[key] = parse(raw[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key!r}: {raw[key]!r} ({exc})") from None
        else:
            vals[key] = default
    if vals["data"] is None:
        missing = [k for k in REQUIRED_GEN if vals[k] is None]
        if missing:
            raise ConfigError(f"missing required config keys: {', '.join(missing)}")
    bad = [m for m in vals["methods"] if m not in METHODS]
    if bad or not vals["methods"]:
        raise ConfigError(f"methods must be a nonempty subset of {METHODS}, got {vals['methods']}")
    if vals["replications"] < 1:
        raise ConfigError("replications must be at least 1")
    if vals["workers"] < 1:
        raise ConfigError("workers must be at least 1")
    try:
        gen = None
        if vals["data"] is None:
            gen = GenSpec(model=vals["model"], n=vals["n"], p=vals["p"], K=vals["K"],
                          rho=vals["rho"], R=vals["R"], sigma1=vals["sigma1"],
                          design_kind=vals["design_kind"], coef_kind=vals["coef_kind"],
                          split=vals["split"], intercept=vals["intercept"], seed=vals["seed"])
        T0 = vals["T"] if vals["T"] is not None else (gen.K if gen is not None else 1)
        solver = SolverConfig(T0, vals["nu"], vals["sigma"], vals["max_outer"], vals["m_max"])
        tuning = TuningConfig(alpha=vals["alpha"], Q=vals["Q"], criterion=vals["criterion"],
                              folds=vals["folds"], cv_seed=vals["seed"], solver=solver)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    sweep = tuple((k[len("sweep_"):], tuple(vals[k])) for k in ("sweep_n", "sweep_p", "sweep_K", "sweep_rho")
                  if vals[k])
    return ExperimentSpec(gen=gen, data=vals["data"], gamma=vals["gamma"], T=vals["T"],
                          solver=solver, tuning=tuning, methods=tuple(vals["methods"]),
                          replications=vals["replications"], sweep=sweep,
                          workers=vals["workers"], timing=vals["timing"],
                          values=tuple(sorted(vals.items(), key=lambda kv: kv[0])))


def read_config(path) -> ExperimentSpec:
    """Parse a flat config file into an :class:`ExperimentSpec`."""
    text = Path(path).read_text(encoding="utf-8")
    return spec_from_mapping(parse_config_text(text, str(path)))


def write_config(values: Mapping[str, Any], path) -> None:
    lines = []
    for key, value in values.items():
        if value is None or value == []:
            continue
        if isinstance(value, (list, tuple)):
            value = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
