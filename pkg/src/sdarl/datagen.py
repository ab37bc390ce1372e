"""Seeded synthetic designs, coefficients and responses.

Every draw comes from a Philox (counter-based, 64-bit) stream keyed by
``(seed, replication, purpose)``, so replications are independent and can be
generated in any order or in parallel with identical results.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import lfilter
from scipy.special import expit

from .linalg import normalize_columns
from .losses import LinearLoss, LogisticLoss, SparseCoef

# stream purposes
DESIGN, COEF, NOISE, SPLIT, FOLDS = range(5)


def stream(seed: int, rep: int = 0, purpose: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(rep), int(purpose)))
    return np.random.Generator(np.random.Philox(ss))


def _rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return stream(int(seed_or_rng))


@dataclass(frozen=True)
class GenSpec:
    model: str = "linear"
    n: int = 500
    p: int = 1000
    K: int = 20
    rho: float = 0.2
    R: float = 100.0
    sigma1: float = 1.0
    design_kind: str = "ar1"
    coef_kind: str = "unit_floor"
    split: float = 0.8
    intercept: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.model not in ("linear", "logistic"):
            raise ValueError(f"model must be 'linear' or 'logistic', got {self.model!r}")
        if self.design_kind not in ("ar1", "neighbor"):
            raise ValueError(f"design_kind must be 'ar1' or 'neighbor', got {self.design_kind!r}")
        if self.coef_kind not in ("unit_floor", "logfloor"):
            raise ValueError(f"coef_kind must be 'unit_floor' or 'logfloor', got {self.coef_kind!r}")
        if min(self.n, self.p, self.K) < 1:
            raise ValueError("n, p and K must be positive")
        if self.K > self.p:
            raise ValueError("K cannot exceed p")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if self.R < 1.0:
            raise ValueError("R must be at least 1")
        if self.sigma1 < 0:
            raise ValueError("sigma1 must be nonnegative")
        if not 0.0 < self.split <= 1.0:
            raise ValueError("split must lie in (0, 1]")
        if self.design_kind == "neighbor" and self.p < 3:
            raise ValueError("neighbor design needs p >= 3")

    @property
    def m1(self) -> float:
        if self.coef_kind == "unit_floor":
            return 1.0
        return 5.0 * np.sqrt(2.0 * np.log(self.p) / self.n)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    beta_star: SparseCoef
    spec: GenSpec
    train: Optional[np.ndarray] = None
    test: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def support(self) -> np.ndarray:
        return self.beta_star.support

    def loss(self, rows=None):
        """Loss on ``rows`` (default: the training rows, or all rows)."""
        if rows is None:
            rows = self.train
        X = self.X if rows is None else self.X[rows]
        y = self.y if rows is None else self.y[rows]
        if self.spec.model == "linear":
            return LinearLoss(X, y, intercept=self.spec.intercept)
        return LogisticLoss(X, y)


def gen_ar1_design(n: int, p: int, rho: float, seed, normalize: bool = True) -> np.ndarray:
    """Rows drawn from N(0, Sigma) with ``Sigma_jk = rho**|j-k|``.

    Each row follows the stationary AR(1) recursion
    ``z_1 = e_1``, ``z_j = rho z_{j-1} + sqrt(1 - rho^2) e_j``.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    rng = _rng(seed)
    E = rng.standard_normal((n, p))
    s = np.sqrt(1.0 - rho * rho)
    if rho == 0.0:
        Z = E
    else:
        E[:, 0] /= s
        Z = lfilter([s], [1.0, -rho], E, axis=1)
    if normalize:
        return normalize_columns(Z)[0]
    return np.asfortranarray(Z)


def gen_neighbor_design(n: int, p: int, rho: float, seed, renormalize: bool = True) -> np.ndarray:
    """``X_j = Xbar_j + rho (Xbar_{j-1} + Xbar_{j+1})`` on interior columns.

    ``Xbar`` has i.i.d. N(0, 1) entries normalized to column norm sqrt(n);
    the first and last columns are copied unchanged.
    """
    if p < 3:
        raise ValueError("neighbor design needs p >= 3")
    rng = _rng(seed)
    Xbar = normalize_columns(rng.standard_normal((n, p)))[0]
    X = Xbar.copy(order="F")
    if rho != 0.0:
        X[:, 1:-1] += rho * (Xbar[:, :-2] + Xbar[:, 2:])
    if renormalize:
        X = normalize_columns(X)[0]
    return X


def gen_coef(p: int, K: int, m1: float, R: float, seed) -> SparseCoef:
    """``K`` positive coefficients on a uniformly random support.

    Values are Uniform(m1, R*m1); the first sampled coordinate is pinned to
    ``m1`` exactly so the smallest nonzero magnitude is ``m1``.
    """
    if K > p or K < 1:
        raise ValueError("need 1 <= K <= p")
    if R < 1.0:
        raise ValueError("R must be at least 1")
    rng = _rng(seed)
    idx = rng.choice(p, size=K, replace=False)
    vals = rng.uniform(m1, R * m1, size=K)
    vals[0] = m1
    order = np.argsort(idx)
    return SparseCoef(p, idx[order], vals[order])


def gen_response(X: np.ndarray, beta_star: SparseCoef, model: str, sigma1: float, seed,
                 intercept: bool = True, split: float = 0.8, split_seed=None):
    """Draw the response; logistic models also get a train/test row split.

    Returns ``(y, train, test)``; the split entries are ``None`` for linear
    models.
    """
    rng = _rng(seed)
    eta = X[:, beta_star.support] @ beta_star.values
    n = X.shape[0]
    if model == "linear":
        y = eta + (1.0 if intercept else 0.0)
        if sigma1 > 0:
            y = y + sigma1 * rng.standard_normal(n)
        return y, None, None
    if model != "logistic":
        raise ValueError(f"unknown model {model!r}")
    y = (rng.random(n) < expit(eta)).astype(float)
    srng = _rng(split_seed) if split_seed is not None else rng
    perm = srng.permutation(n)
    n_train = int(round(split * n))
    return y, np.sort(perm[:n_train]), np.sort(perm[n_train:])


def make_dataset(spec: GenSpec, rep: int = 0) -> Dataset:
    """Generate replication ``rep`` of ``spec``."""
    design_rng = stream(spec.seed, rep, DESIGN)
    if spec.design_kind == "ar1":
        X = gen_ar1_design(spec.n, spec.p, spec.rho, design_rng)
    else:
        X = gen_neighbor_design(spec.n, spec.p, spec.rho, design_rng)
    beta = gen_coef(spec.p, spec.K, spec.m1, spec.R, stream(spec.seed, rep, COEF))
    y, train, test = gen_response(X, beta, spec.model, spec.sigma1, stream(spec.seed, rep, NOISE),
                                  intercept=spec.intercept, split=spec.split,
                                  split_seed=stream(spec.seed, rep, SPLIT))
    meta = {"m1": spec.m1, "rep": rep,
            "renormalized_after_mixing": spec.design_kind == "neighbor"}
    ds = Dataset(X, y, beta, spec, train, test, meta)
    _check(ds)
    return ds


def _check(ds: Dataset) -> None:
    spec = ds.spec
    if ds.beta_star.support.size != spec.K or ds.beta_star.values.min() != spec.m1:
        raise RuntimeError("generated coefficients violate the support/minimum-signal invariant")
    norms = np.linalg.norm(ds.X, axis=0)
    if not np.allclose(norms, np.sqrt(spec.n), rtol=1e-12, atol=0):
        raise RuntimeError("generated design columns are not sqrt(n)-normalized")
