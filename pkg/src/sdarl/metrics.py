"""Per-replication evaluation: estimation error, support recovery, accuracy."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np
from scipy.special import expit

from .losses import SparseCoef

ZERO_TOL = 1e-10


def _vec(beta) -> np.ndarray:
    if isinstance(beta, SparseCoef):
        return beta.to_dense()
    return np.asarray(beta, dtype=float)


def relative_error(beta_hat, beta_star) -> float:
    """``||beta_hat - beta_star|| / ||beta_star||``."""
    b = _vec(beta_star)
    denom = np.linalg.norm(b)
    if denom == 0.0:
        raise ValueError("relative error is undefined for a zero target")
    return float(np.linalg.norm(_vec(beta_hat) - b) / denom)


def discovery_rates(A_hat, A_star):
    """Positive, false and combined discovery rates of ``A_hat`` against ``A_star``.

    An empty ``A_hat`` has false discovery rate 0 by convention.
    """
    A_hat = set(int(i) for i in A_hat)
    A_star = set(int(i) for i in A_star)
    if not A_star:
        raise ValueError("true support must be nonempty")
    hits = len(A_hat & A_star)
    pdr = hits / len(A_star)
    fdr = (len(A_hat) - hits) / len(A_hat) if A_hat else 0.0
    return pdr, fdr, pdr + (1.0 - fdr)


def estimated_support(beta_hat, tol: float = ZERO_TOL) -> np.ndarray:
    b = _vec(beta_hat)
    return np.flatnonzero(np.abs(b) > tol)


def classification_accuracy(X, y, beta_hat, rows=None) -> float:
    """Share of ``rows`` where the 0.5-thresholded probability matches ``y``.

    A probability of exactly 0.5 predicts class 1.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if rows is not None:
        rows = np.asarray(rows)
        if rows.size == 0:
            raise ValueError("no rows to classify")
        X, y = X[rows], y[rows]
    b = _vec(beta_hat)
    idx = np.flatnonzero(b)
    eta = X[:, idx] @ b[idx] if idx.size else np.zeros(X.shape[0])
    pred = (expit(eta) >= 0.5).astype(float)
    return float(np.mean(pred == y))


@dataclass
class EvalRecord:
    method: str
    seed: int
    rep: int
    n: int
    p: int
    K: int
    T: int
    rho: float
    R: float
    are: float
    pdr: float
    fdr: float
    cdr: float
    car: Optional[float]
    iters: int
    time_s: float
    error: str = ""

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def failed(cls, method, seed, rep, n, p, K, T, rho, R, error: str) -> "EvalRecord":
        nan = math.nan
        return cls(method, seed, rep, n, p, K, T, rho, R, nan, nan, nan, nan, None, 0, 0.0, error)

    @property
    def ok(self) -> bool:
        return not self.error


def evaluate(method: str, fit, dataset, seed: int, rep: int, T: int) -> EvalRecord:
    """Score one fitted model against the dataset that produced it."""
    spec = dataset.spec
    beta = fit.beta
    pdr, fdr, cdr = discovery_rates(estimated_support(beta), dataset.support)
    car = None
    if spec.model == "logistic":
        rows = dataset.test if dataset.test is not None and dataset.test.size else dataset.train
        car = classification_accuracy(dataset.X, dataset.y, beta, rows)
    return EvalRecord(method, seed, rep, spec.n, spec.p, spec.K, int(T), spec.rho, spec.R,
                      relative_error(beta, dataset.beta_star), pdr, fdr, cdr, car,
                      int(fit.iterations), float(fit.wall_time))
