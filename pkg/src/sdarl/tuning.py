"""Adaptive sparsity sweep: fit T = alpha, 2*alpha, ... and pick T by HBIC or CV."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .datagen import FOLDS, stream
from .losses import Loss, LinearLoss, LogisticLoss
from .metrics import ZERO_TOL
from .solver import FitResult, SolverConfig, fit_sdarl

CRITERIA = ("hbic", "cv")


def default_Q(n: int) -> int:
    return int(math.floor(n / math.log(n))) if n > 1 else 1


@dataclass(frozen=True)
class TuningConfig:
    alpha: int = 1
    Q: Optional[int] = None
    criterion: str = "hbic"
    folds: int = 10
    cv_seed: int = 0
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(1))

    def __post_init__(self):
        if int(self.alpha) != self.alpha or self.alpha < 1:
            raise ValueError("alpha must be a positive integer")
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}")
        if self.criterion == "cv" and self.folds < 2:
            raise ValueError("cross-validation needs at least 2 folds")
        if self.Q is not None and self.Q < 1:
            raise ValueError("Q must be positive")

    def resolve_Q(self, n: int) -> int:
        return default_Q(n) if self.Q is None else int(self.Q)


@dataclass
class PathEntry:
    T: int
    fit: Optional[FitResult]  # None for the all-zero head
    score: float

    @property
    def beta(self):
        return self.fit.beta if self.fit is not None else None


@dataclass
class SolutionPath:
    """Fits along the T grid.

    ``entries[0]`` is the all-zero model (``T = 0``); the sweep proper
    follows.  ``selected`` indexes the entry with the smallest score.
    """

    entries: List[PathEntry]
    selected: int
    criterion: str
    Q: int

    @property
    def sweep(self) -> List[PathEntry]:
        return self.entries[1:]

    @property
    def best(self) -> PathEntry:
        return self.entries[self.selected]

    @property
    def T_hat(self) -> int:
        return self.best.T

    @property
    def total_iterations(self) -> int:
        return sum(e.fit.iterations for e in self.sweep)


def count_nonzero(beta) -> int:
    vals = beta.values if hasattr(beta, "values") else np.asarray(beta)
    return int(np.count_nonzero(np.abs(vals) > ZERO_TOL))


def hbic_from_loss(kind: str, F: float, df: int, n: int, p: int) -> float:
    penalty = df * math.log(math.log(n)) * math.log(p)
    if kind == "linear":
        if F <= 0.0:
            return -math.inf
        return n * math.log(2.0 * F) + penalty
    return 2.0 * n * F + penalty


def hbic_score(L: Loss, fit: FitResult, n: Optional[int] = None, p: Optional[int] = None) -> float:
    """High-dimensional BIC of a fitted model.

    Linear: ``n log(2F) + df log(log n) log p``; logistic: ``2nF + df log(log n) log p``.
    A perfect linear fit scores ``-inf``.
    """
    n = L.n if n is None else n
    p = L.p if p is None else p
    return hbic_from_loss(L.kind, L.value(fit.beta.to_dense()), count_nonzero(fit.beta), n, p)


def fold_assignment(n: int, folds: int, seed: int) -> np.ndarray:
    """Shuffled round-robin fold labels in ``0..folds-1``."""
    if folds < 2 or n < folds:
        raise ValueError(f"need 2 <= folds <= n, got folds={folds}, n={n}")
    perm = stream(seed, 0, FOLDS).permutation(n)
    labels = np.empty(n, dtype=np.int64)
    labels[perm] = np.arange(n) % folds
    return labels


def heldout_loss(L: Loss, beta) -> float:
    b = beta.to_dense() if hasattr(beta, "to_dense") else np.asarray(beta)
    if isinstance(L, LinearLoss):
        return L.mean_squared_error(b)
    return L.value(b)


def cv_score(L: Loss, T: int, folds: int = 10, seed: int = 0,
             solver: Optional[SolverConfig] = None) -> float:
    """Mean held-out loss of SDARL at sparsity ``T`` over seeded folds.

    Held-out loss is the mean squared residual (linear) or the mean negative
    log-likelihood (logistic).  Logistic folds whose training part contains
    a single class are skipped.
    """
    cfg = (solver or SolverConfig(T)).with_T(T)
    labels = fold_assignment(L.n, folds, seed)
    scores = []
    for f in range(folds):
        test = np.flatnonzero(labels == f)
        train = np.flatnonzero(labels != f)
        Ltr = L.subset(train)
        if isinstance(L, LogisticLoss) and np.unique(Ltr.y).size < 2:
            warnings.warn(f"fold {f}: training rows contain a single class; skipped")
            continue
        fit = fit_sdarl(Ltr, cfg)
        scores.append(heldout_loss(L.subset(test), fit.beta))
    if not scores:
        raise ValueError("every cross-validation fold was skipped")
    return float(np.mean(scores))


def fit_asdarl(L: Loss, cfg: TuningConfig) -> SolutionPath:
    """Sweep ``T = alpha * k`` with warm starts until ``T > Q``; score and select."""
    Q = cfg.resolve_Q(L.n)
    p_max = L.p if L.eligible is None else int(np.count_nonzero(L.eligible))
    zero = np.zeros(L.p)
    if cfg.criterion == "hbic":
        head = hbic_from_loss(L.kind, L.value(zero), 0, L.n, L.p)
    else:
        head = _cv_null(L, cfg)
    entries = [PathEntry(0, None, head)]

    beta, d = None, None
    k = 1
    while True:
        T = cfg.alpha * k
        if T > p_max:
            break
        fit = fit_sdarl(L, cfg.solver.with_T(T), beta, d)
        if cfg.criterion == "hbic":
            score = hbic_score(L, fit)
        else:
            score = cv_score(L, T, cfg.folds, cfg.cv_seed, cfg.solver)
        entries.append(PathEntry(T, fit, score))
        beta, d = fit.beta, fit.d
        if T > Q:
            break
        k += 1
    scores = np.array([e.score for e in entries])
    return SolutionPath(entries, int(np.argmin(scores)), cfg.criterion, Q)


def _cv_null(L: Loss, cfg: TuningConfig) -> float:
    labels = fold_assignment(L.n, cfg.folds, cfg.cv_seed)
    zero = np.zeros(L.p)
    return float(np.mean([heldout_loss(L.subset(np.flatnonzero(labels == f)), zero)
                          for f in range(cfg.folds)]))
