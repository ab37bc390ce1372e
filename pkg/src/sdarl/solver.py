"""Support detection and root finding with a data-driven line search.

The outer loop alternates between

1. exact minimization of the loss restricted to the current active set,
2. a backtracking search over steps ``tau = nu**m`` that picks the next
   active set from the top-``T`` magnitudes of ``beta + tau * d``, where
   ``d`` is the negative gradient off the active set,

and stops when the active set repeats.  :func:`fit_fixed_step` is the same
loop with ``tau`` pinned to one.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .linalg import top_t_select
from .losses import Coef, Loss, SparseCoef, _dense

log = logging.getLogger(__name__)

CONVERGED = "converged"
CYCLE_DETECTED = "cycle_detected"
MAX_OUTER = "max_outer"
LINE_SEARCH_CAP = "line_search_cap"
TERMINATIONS = (CONVERGED, CYCLE_DETECTED, MAX_OUTER, LINE_SEARCH_CAP)


@dataclass(frozen=True)
class SolverConfig:
    T: int
    nu: float = 0.9
    sigma: float = 0.1
    max_outer: int = 50
    m_max: int = 200

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 1:
            raise ValueError(f"T must be a positive integer, got {self.T}")
        if not 0.0 < self.nu < 1.0:
            raise ValueError(f"nu must lie in (0, 1), got {self.nu}")
        if not 0.0 < self.sigma < 0.5:
            raise ValueError(f"sigma must lie in (0, 1/2), got {self.sigma}")
        if self.max_outer < 1 or self.m_max < 1:
            raise ValueError("max_outer and m_max must be at least 1")

    def with_T(self, T: int) -> "SolverConfig":
        return SolverConfig(int(T), self.nu, self.sigma, self.max_outer, self.m_max)


@dataclass
class LineSearchResult:
    tau: float
    active: np.ndarray
    m: int
    capped: bool
    lhs: float  # F(trial) - F(beta)
    rhs: float  # -sigma * tau * ||grad on entering coordinates||^2


@dataclass
class FitResult:
    """Output of one SDARL or fixed-step run.

    ``loss_trajectory[j]`` is the loss after the ``j``-th restricted solve;
    ``tau_history[j]``, ``m_history[j]`` and ``required_decrease[j]``
    describe the step taken right after it.  ``active_set_history`` starts
    with the initial active set, so it is one entry longer than the loss
    trajectory.
    """

    beta: SparseCoef
    active: np.ndarray
    d: np.ndarray
    tau: float
    threshold: float
    loss_trajectory: List[float] = field(default_factory=list)
    tau_history: List[float] = field(default_factory=list)
    m_history: List[int] = field(default_factory=list)
    required_decrease: List[float] = field(default_factory=list)
    active_set_history: List[np.ndarray] = field(default_factory=list)
    iterations: int = 0
    termination: str = MAX_OUTER
    separated: bool = False
    warnings: List[str] = field(default_factory=list)
    method: str = "sdarl"
    wall_time: float = 0.0

    @property
    def final_loss(self) -> float:
        return self.loss_trajectory[-1] if self.loss_trajectory else float("nan")

    @property
    def lam(self) -> float:
        """Penalty level implied by the final threshold and step."""
        return self.threshold ** 2 / (2.0 * self.tau)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "termination": self.termination,
            "iterations": self.iterations,
            "support": self.beta.support.tolist(),
            "values": self.beta.values.tolist(),
            "active": self.active.tolist(),
            "tau": self.tau,
            "threshold": self.threshold,
            "loss_trajectory": list(self.loss_trajectory),
            "tau_history": list(self.tau_history),
            "m_history": list(self.m_history),
            "active_set_sizes": [int(a.size) for a in self.active_set_history],
            "separated": self.separated,
            "warnings": list(self.warnings),
            "wall_time": self.wall_time,
        }


def hard_threshold(u, lam_tau: float) -> np.ndarray:
    """Hard-threshold ``u`` at ``sqrt(2 * lam_tau)``.

    Entries exactly at the threshold are kept.
    """
    if lam_tau < 0:
        raise ValueError("lam_tau must be nonnegative")
    u = np.asarray(u, dtype=float)
    thr = np.sqrt(2.0 * lam_tau)
    return np.where(np.abs(u) >= thr, u, 0.0)


def detect_active(beta, d, tau: float, T: int, eligible: Optional[np.ndarray] = None):
    """Active/inactive split from the top-``T`` entries of ``|beta + tau*d|``.

    Returns ``(A, I, threshold)`` with sorted index arrays.  Columns masked
    out by ``eligible`` never enter ``A``.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    u = np.asarray(beta, dtype=float) + tau * np.asarray(d, dtype=float)
    if eligible is None:
        sel = top_t_select(u, T)
        A = sel.indices
    else:
        pool = np.flatnonzero(eligible)
        if T > pool.size:
            raise ValueError(f"T={T} exceeds the {pool.size} eligible columns")
        sel = top_t_select(u[pool], T)
        A = pool[sel.indices]
    mask = np.ones(u.shape[0], dtype=bool)
    mask[A] = False
    return A, np.flatnonzero(mask), sel.threshold


def line_search(L: Loss, beta: np.ndarray, d: np.ndarray, A_prev: np.ndarray,
                cfg: SolverConfig) -> LineSearchResult:
    """Smallest ``m >= 0`` whose trial active set gives sufficient decrease.

    ``beta`` must be the restricted minimizer on ``A_prev`` and ``d`` the
    negative gradient at ``beta`` zeroed on ``A_prev``.  For each ``m`` the
    trial point is ``(beta + nu**m * d)`` restricted to its own top-``T``
    set ``A(m)``, accepted once

        F(trial) - F(beta) <= -sigma * nu**m * ||grad F(beta) on A(m) \\ A_prev||^2.
    """
    in_prev = np.zeros(L.p, dtype=bool)
    in_prev[A_prev] = True
    tau = 1.0
    for m in range(cfg.m_max + 1):
        A, _, _ = detect_active(beta, d, tau, cfg.T, L.eligible)
        entering = A[~in_prev[A]]
        leaving = np.setdiff1d(A_prev, A, assume_unique=True)
        step = np.zeros(L.p)
        step[entering] = tau * d[entering]
        step[leaving] = -beta[leaving]
        lhs = L.value_change(beta, step) if (entering.size or leaving.size) else 0.0
        rhs = -cfg.sigma * tau * float(d[entering] @ d[entering])
        if lhs <= rhs:
            return LineSearchResult(tau, A, m, False, lhs, rhs)
        if m == cfg.m_max:
            return LineSearchResult(tau, A, m, True, lhs, rhs)
        tau *= cfg.nu
    raise AssertionError("unreachable")


def _same(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and bool(np.all(a == b))


def _run(L: Loss, cfg: SolverConfig, beta0: Optional[Coef], d0, use_line_search: bool) -> FitResult:
    t0 = time.perf_counter()
    p = L.p
    if cfg.T > p:
        raise ValueError(f"T={cfg.T} exceeds p={p}")
    beta = np.zeros(p) if beta0 is None else _dense(beta0, p).copy()
    d = -L.gradient(beta) if d0 is None else np.asarray(d0, dtype=float).copy()
    tau = 1.0
    A, _, threshold = detect_active(beta, d, tau, cfg.T, L.eligible)

    res = FitResult(SparseCoef.zeros(p), A, d, tau, threshold,
                    method="sdarl" if use_line_search else "fixed_step")
    res.active_set_history.append(A)
    seen = {A.tobytes()}
    start = beta
    termination = MAX_OUTER
    for _ in range(cfg.max_outer):
        # restricted root finding on the current active set
        sub = L.minimize_restricted(A, start)
        beta = sub.beta
        if sub.separated and not res.separated:
            res.separated = True
            res.warnings.append("separated")
        d = -L.gradient(beta)
        d[A] = 0.0
        res.loss_trajectory.append(L.value(beta))
        res.iterations += 1

        # step size and next active set
        if use_line_search:
            ls = line_search(L, beta, d, A, cfg)
            tau, A_new, m = ls.tau, ls.active, ls.m
            res.required_decrease.append(-ls.rhs)
            capped = ls.capped
        else:
            tau, m, capped = 1.0, 0, False
            A_new, _, _ = detect_active(beta, d, tau, cfg.T, L.eligible)
            res.required_decrease.append(0.0)
        res.tau_history.append(tau)
        res.m_history.append(m)
        res.active_set_history.append(A_new)

        if _same(A_new, A):
            termination = CONVERGED
            break
        if capped:
            res.warnings.append("line_search_cap")
            termination = LINE_SEARCH_CAP
            break
        key = A_new.tobytes()
        if key in seen:
            termination = CYCLE_DETECTED
            break
        seen.add(key)
        start = beta.copy()
        start[A_new] += tau * d[A_new]
        A = A_new

    # threshold of the final shifted iterate, taken with the full gradient so
    # that kkt_residual(beta, tau, lam) reproduces it bit for bit
    res.beta = SparseCoef.from_dense(beta)
    if res.loss_trajectory:
        full = res.beta.to_dense()
        _, _, threshold = detect_active(full, -L.gradient(full), tau, cfg.T, L.eligible)
    res.active = A
    res.d = d
    res.tau = tau
    res.threshold = threshold
    res.termination = termination
    res.wall_time = time.perf_counter() - t0
    if termination != CONVERGED:
        log.debug("%s stopped with %s after %d iterations", res.method, termination, res.iterations)
    return res


def fit_sdarl(L: Loss, cfg: SolverConfig, beta0: Optional[Coef] = None, d0=None) -> FitResult:
    """Run the line-search solver at sparsity level ``cfg.T``.

    ``beta0``/``d0`` warm-start the primal and dual iterates; by default
    ``beta0 = 0`` and ``d0 = -grad F(beta0)``.
    """
    return _run(L, cfg, beta0, d0, use_line_search=True)


def fit_fixed_step(L: Loss, cfg: SolverConfig, beta0: Optional[Coef] = None, d0=None) -> FitResult:
    """Same loop as :func:`fit_sdarl` with the step pinned to ``tau = 1``."""
    return _run(L, cfg, beta0, d0, use_line_search=False)


def kkt_residual(L: Loss, beta: Coef, tau: float, lam: float) -> float:
    """Sup-norm distance of ``beta`` from its hard-thresholded gradient step.

    Zero exactly when ``(beta, -grad F(beta))`` is a fixed point of the
    hard-threshold map at penalty ``lam`` and step ``tau``.
    """
    if tau <= 0 or lam < 0:
        raise ValueError("need tau > 0 and lam >= 0")
    b = _dense(beta, L.p)
    d = -L.gradient(b)
    return float(np.abs(b - hard_threshold(b + tau * d, lam * tau)).max())
