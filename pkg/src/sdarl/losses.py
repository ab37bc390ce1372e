"""Loss functions for sparse regression: least squares and logistic.

Both losses expose the same surface used by the solver:

* ``value(beta)`` and ``gradient(beta)`` on the full coefficient vector,
* ``value_change(beta, step)`` for line-search comparisons,
* ``minimize_restricted(A, start)`` which minimizes the loss over
  coefficient vectors supported on the index set ``A``.

Coefficients are accepted either as dense length-``p`` arrays or as
:class:`SparseCoef`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg as sla
from scipy.special import expit

from .linalg import as_design, solve_spd_min_norm

log = logging.getLogger(__name__)

NEWTON_GTOL = 1e-8
NEWTON_MAXITER = 100
SEPARATION_GTOL = 1e-4
SEPARATION_BETA = 30.0
NEWTON_JITTER = 1e-10


@dataclass(frozen=True)
class SparseCoef:
    """Length-``dim`` coefficient vector stored as ``(support, values)``."""

    dim: int
    support: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64)
        values = np.asarray(self.values, dtype=float)
        if support.shape != values.shape:
            raise ValueError("support and values must have equal length")
        if support.size and (np.any(np.diff(support) <= 0) or support[0] < 0 or support[-1] >= self.dim):
            raise ValueError("support must be strictly increasing and within [0, dim)")
        if not np.all(np.isfinite(values)):
            raise ValueError("coefficient values must be finite")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_dense(cls, beta) -> "SparseCoef":
        beta = np.asarray(beta, dtype=float)
        idx = np.flatnonzero(beta)
        return cls(beta.shape[0], idx, beta[idx])

    @classmethod
    def zeros(cls, dim: int) -> "SparseCoef":
        return cls(dim, np.empty(0, dtype=np.int64), np.empty(0))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.support] = self.values
        return out

    def nnz(self, tol: float = 0.0) -> int:
        return int(np.count_nonzero(np.abs(self.values) > tol))

    def active(self, tol: float = 0.0) -> np.ndarray:
        return self.support[np.abs(self.values) > tol]


Coef = Union[np.ndarray, SparseCoef]


def _dense(beta: Coef, p: int) -> np.ndarray:
    if isinstance(beta, SparseCoef):
        if beta.dim != p:
            raise ValueError(f"coefficient dimension {beta.dim} does not match p={p}")
        return beta.to_dense()
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (p,):
        raise ValueError(f"coefficient shape {beta.shape} does not match p={p}")
    return beta


@dataclass
class RestrictedFit:
    beta: np.ndarray  # dense, zero off the index set
    iterations: int = 0
    separated: bool = False
    grad_norm: float = 0.0


class Loss:
    """Shared plumbing; subclasses implement the model-specific pieces."""

    kind = "base"

    def __init__(self, X, y, eligible: Optional[np.ndarray] = None):
        self.X = as_design(X)
        self.y = np.asarray(y, dtype=float)
        if self.y.shape != (self.X.shape[0],):
            raise ValueError(f"response length {self.y.shape} does not match n={self.X.shape[0]}")
        if eligible is not None:
            eligible = np.asarray(eligible, dtype=bool)
            if eligible.shape != (self.X.shape[1],):
                raise ValueError("eligibility mask must have length p")
        self.eligible = eligible

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def linear_predictor(self, beta: np.ndarray) -> np.ndarray:
        idx = np.flatnonzero(beta)
        if idx.size == 0:
            return np.zeros(self.n)
        return self.X[:, idx] @ beta[idx]

    def loss_value(self, beta: Coef) -> float:
        return self.value(_dense(beta, self.p))

    def loss_gradient(self, beta: Coef) -> np.ndarray:
        return self.gradient(_dense(beta, self.p))

    def value_change(self, beta: np.ndarray, step: np.ndarray) -> float:
        """``F(beta + step) - F(beta)``."""
        return self.value(beta + step) - self.value(beta)

    def restricted_gradient(self, beta: np.ndarray, A) -> np.ndarray:
        A = np.asarray(A, dtype=np.int64)
        r = self._score_residual(self.linear_predictor(beta))
        return self.X[:, A].T @ r / self.n

    def gradient(self, beta: np.ndarray) -> np.ndarray:
        r = self._score_residual(self.linear_predictor(beta))
        return self.X.T @ r / self.n

    def subset(self, rows) -> "Loss":
        raise NotImplementedError

    def value(self, beta: np.ndarray) -> float:
        raise NotImplementedError

    def _score_residual(self, eta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def minimize_restricted(self, A, start: Optional[np.ndarray] = None, gtol=None) -> RestrictedFit:
        raise NotImplementedError


class LinearLoss(Loss):
    """``F(beta) = ||X beta + offset - y||^2 / (2n)``.

    ``intercept=True`` adds a fixed all-ones offset (not an estimated
    parameter).
    """

    kind = "linear"

    def __init__(self, X, y, intercept: bool = True, eligible=None):
        super().__init__(X, y, eligible)
        self.intercept = bool(intercept)
        self.target = self.y - 1.0 if self.intercept else self.y.copy()

    def subset(self, rows) -> "LinearLoss":
        rows = np.asarray(rows)
        return LinearLoss(self.X[rows], self.y[rows], self.intercept, self.eligible)

    def _score_residual(self, eta):
        return eta - self.target

    def value(self, beta: np.ndarray) -> float:
        r = self.linear_predictor(beta) - self.target
        return float(r @ r) / (2.0 * self.n)

    def value_change(self, beta, step):
        # expanded form avoids cancellation between two nearly equal losses
        r = self.linear_predictor(beta) - self.target
        xs = self.linear_predictor(step)
        return float(r @ xs + 0.5 * (xs @ xs)) / self.n

    def mean_squared_error(self, beta: Coef) -> float:
        r = self.linear_predictor(_dense(beta, self.p)) - self.target
        return float(r @ r) / self.n

    def minimize_restricted(self, A, start=None, gtol=None) -> RestrictedFit:
        A = np.asarray(A, dtype=np.int64)
        XA = self.X[:, A]
        coef = solve_spd_min_norm(XA.T @ XA, XA.T @ self.target)
        beta = np.zeros(self.p)
        beta[A] = coef
        g = XA.T @ (XA @ coef - self.target) / self.n
        return RestrictedFit(beta, 1, False, float(np.abs(g).max(initial=0.0)))


def log1pexp(z: np.ndarray) -> np.ndarray:
    """``log(1 + exp(z))`` without overflow."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z > 0
    out[pos] = z[pos] + np.log1p(np.exp(-z[pos]))
    out[~pos] = np.log1p(np.exp(z[~pos]))
    return out


class LogisticLoss(Loss):
    """Mean negative log-likelihood of a no-intercept logistic model."""

    kind = "logistic"

    def __init__(self, X, y, eligible=None):
        super().__init__(X, y, eligible)
        if not np.all((self.y == 0.0) | (self.y == 1.0)):
            raise ValueError("logistic responses must be 0/1")

    def subset(self, rows) -> "LogisticLoss":
        rows = np.asarray(rows)
        return LogisticLoss(self.X[rows], self.y[rows], self.eligible)

    def _score_residual(self, eta):
        return expit(eta) - self.y

    def _value_eta(self, eta) -> float:
        return float(np.mean(log1pexp(eta) - self.y * eta))

    def value(self, beta: np.ndarray) -> float:
        return self._value_eta(self.linear_predictor(beta))

    def probabilities(self, beta: Coef) -> np.ndarray:
        return expit(self.linear_predictor(_dense(beta, self.p)))

    def restricted_hessian(self, beta: np.ndarray, A) -> np.ndarray:
        A = np.asarray(A, dtype=np.int64)
        XA = self.X[:, A]
        pi = expit(self.linear_predictor(beta))
        w = pi * (1.0 - pi)
        return (XA.T * w) @ XA / self.n

    def minimize_restricted(self, A, start=None, gtol: float = NEWTON_GTOL) -> RestrictedFit:
        """Damped Newton on the coordinates in ``A``.

        Starts from ``start`` restricted to ``A`` (zeros when omitted) and
        stops once the restricted gradient drops below ``gtol`` in sup-norm or
        after 100 iterations.  Data that are separable on ``A`` drive the
        coefficients off to infinity; that case is flagged.
        """
        A = np.asarray(A, dtype=np.int64)
        XA = self.X[:, A]
        n = self.n
        b = np.zeros(A.size) if start is None else np.asarray(start, dtype=float)[A].copy()
        eta = XA @ b
        f = self._value_eta(eta)
        steps = 0
        while True:
            pi = expit(eta)
            g = XA.T @ (pi - self.y) / n
            gnorm = float(np.abs(g).max(initial=0.0))
            if gnorm <= gtol or steps >= NEWTON_MAXITER:
                break
            w = pi * (1.0 - pi)
            H = (XA.T * w) @ XA / n
            step = _newton_direction(H, g)
            t = 1.0
            for _ in range(60):
                eta_new = XA @ (b - t * step)
                f_new = self._value_eta(eta_new)
                if f_new <= f:
                    break
                t *= 0.5
            else:
                break  # no decrease left at machine precision
            b = b - t * step
            eta, f = eta_new, f_new
            steps += 1
        beta = np.zeros(self.p)
        beta[A] = b
        # every row on the right side of the hyperplane means no finite minimizer
        margin = (2.0 * self.y - 1.0) * eta
        separated = bool(margin.min() > 0.0) or (
            gnorm > SEPARATION_GTOL and bool(np.abs(b).max(initial=0.0) > SEPARATION_BETA))
        if separated:
            log.debug("logistic subproblem on %d coordinates looks separated", A.size)
        return RestrictedFit(beta, steps, separated, gnorm)


def _newton_direction(H, g):
    try:
        return sla.cho_solve(sla.cho_factor(H, lower=True, check_finite=False), g, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    try:
        Hj = H + NEWTON_JITTER * np.eye(H.shape[0])
        return sla.cho_solve(sla.cho_factor(Hj, lower=True, check_finite=False), g, check_finite=False)
    except np.linalg.LinAlgError:
        return solve_spd_min_norm(H, g)


# module-level spellings used throughout the package and in tests

def loss_value(L: Loss, beta: Coef) -> float:
    return L.loss_value(beta)


def gradient(L: Loss, beta: Coef) -> np.ndarray:
    return L.loss_gradient(beta)


def minimize_restricted(L: Loss, A: Sequence[int], start: Optional[Coef] = None) -> RestrictedFit:
    if len(A) < 1:
        raise ValueError("restricted index set must be non-empty")
    A = np.asarray(A, dtype=np.int64)
    if A.min() < 0 or A.max() >= L.p:
        raise ValueError("restricted index set out of range")
    if start is not None:
        start = _dense(start, L.p)
    return L.minimize_restricted(np.unique(A), start)
