"""Independent checks for small instances.

Exhaustive best-subset search, fixed-point certification of hard-threshold
KKT pairs, and central finite-difference gradients.  None of these share
code paths with the solver beyond loss evaluation and restricted solves.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .losses import Loss, _dense

KKT_TOL = 1e-8


class OracleBudgetError(ValueError):
    pass


@dataclass(frozen=True)
class OracleBudget:
    max_p: int = 14
    max_T: int = 4
    max_supports: int = 10_000

    def check(self, p: int, T: int) -> int:
        count = math.comb(p, T)
        if p > self.max_p or T > self.max_T or count > self.max_supports:
            raise OracleBudgetError(
                f"enumeration of C({p},{T})={count} supports exceeds budget "
                f"(p<={self.max_p}, T<={self.max_T}, supports<={self.max_supports})")
        return count


def brute_force_best_support(L: Loss, T: int, budget: OracleBudget = OracleBudget()):
    """Best loss over all supports of size exactly ``T``.

    Returns ``(A_best, beta_best, F_best, n_enumerated)``.
    """
    budget.check(L.p, T)
    pool = range(L.p) if L.eligible is None else np.flatnonzero(L.eligible).tolist()
    best: Tuple[Optional[np.ndarray], Optional[np.ndarray], float] = (None, None, math.inf)
    count = 0
    for A in itertools.combinations(pool, T):
        A = np.array(A)
        beta = L.minimize_restricted(A, gtol=1e-10).beta
        F = L.value(beta)
        count += 1
        if F < best[2]:
            best = (A, beta, F)
    return best[0], best[1], best[2], count


def finite_diff_gradient(L: Loss, beta, h: float = 1e-6) -> np.ndarray:
    """Central differences of ``L.value`` in every coordinate."""
    if h <= 0:
        raise ValueError("h must be positive")
    b = _dense(beta, L.p).astype(float)
    g = np.empty(L.p)
    for j in range(L.p):
        e = np.zeros(L.p)
        e[j] = h
        g[j] = (L.value(b + e) - L.value(b - e)) / (2.0 * h)
    return g


def lambda_interval(L: Loss, beta, tau: float):
    """Range of ``lam`` for which ``beta`` can be a hard-threshold fixed point.

    With ``u = beta + tau * d`` and ``d = -grad F(beta)``, the threshold
    ``sqrt(2 lam tau)`` must sit between the largest ``|u_i|`` off the
    support and the smallest ``|u_i|`` on it.  Returns ``(lo, hi)``; the
    interval is empty when ``lo > hi``.
    """
    b = _dense(beta, L.p)
    u = b + tau * (-L.gradient(b))
    on = b != 0
    off = ~on
    if L.eligible is not None:
        off &= L.eligible
    hi = (np.abs(u[on]).min() ** 2 if on.any() else math.inf) / (2.0 * tau)
    lo = (np.abs(u[off]).max() ** 2 if off.any() else 0.0) / (2.0 * tau)
    return float(lo), float(hi)


@dataclass
class KKTCertificate:
    passed: bool
    residual: float
    dual_residual: float
    lam: float
    interval: Tuple[float, float]
    lam_in_interval: bool


def certify_kkt(L: Loss, beta, tau: float, lam: float, d=None, tol: float = KKT_TOL) -> KKTCertificate:
    """Check ``beta = H(beta + tau d)`` and ``d = -grad F(beta)`` in sup-norm.

    When ``d`` is omitted it is taken as ``-grad F(beta)``, so only the
    primal line can fail.  Entries within ``tol`` of the threshold may take
    either branch of the operator.  ``lam`` must also fall in
    :func:`lambda_interval` up to a relative slack of ``tol``.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    b = _dense(beta, L.p)
    grad_d = -L.gradient(b)
    d = grad_d if d is None else np.asarray(d, dtype=float)
    dual_res = float(np.abs(d - grad_d).max())
    u = b + tau * d
    thr = math.sqrt(2.0 * lam * tau)
    kept = np.where(np.abs(u) >= thr, u, 0.0)
    if L.eligible is not None:
        kept[~L.eligible] = 0.0
    err = np.abs(b - kept)
    # the threshold map is set-valued at the boundary: either branch is admissible
    band = np.abs(np.abs(u) - thr) <= tol * max(1.0, thr)
    err[band] = np.minimum(np.abs(b[band]), np.abs(b[band] - u[band]))
    residual = float(err.max())
    lo, hi = lambda_interval(L, b, tau)
    slack = tol * max(1.0, abs(lam))
    inside = (lo - slack) <= lam <= (hi + slack)
    passed = residual <= tol and dual_res <= tol and inside
    return KKTCertificate(passed, residual, dual_res, float(lam), (lo, hi), inside)
