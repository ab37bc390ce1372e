"""Dense numerical kernels shared by the losses and the solver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla


class DegenerateInputError(ValueError):
    """Raised when an input has a structural defect (e.g. a zero column)."""


RANK_RTOL = 1e-10
SYMMETRY_RTOL = 1e-8


@dataclass(frozen=True)
class TopTSelection:
    threshold: float
    indices: np.ndarray  # sorted ascending


def as_design(X) -> np.ndarray:
    """Validate a design matrix and return it as a column-major float array."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"design must be a non-empty 2-D array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("design contains non-finite entries")
    return np.asfortranarray(X)


def normalize_columns(X, allow_zero: bool = False):
    """Scale every column of ``X`` to Euclidean norm ``sqrt(n)``.

    Returns ``(Xn, scale)`` with ``Xn[:, j] = X[:, j] * scale[j]``.  Zero
    columns raise :class:`DegenerateInputError` unless ``allow_zero`` is set,
    in which case they are left at zero with scale 0.
    """
    X = as_design(X)
    n = X.shape[0]
    norms = np.linalg.norm(X, axis=0)
    zero = norms == 0.0
    if zero.any() and not allow_zero:
        j = int(np.flatnonzero(zero)[0])
        raise DegenerateInputError(f"column {j} has zero norm and cannot be normalized")
    scale = np.zeros_like(norms)
    scale[~zero] = np.sqrt(n) / norms[~zero]
    Xn = np.asfortranarray(X * scale)
    # one polishing pass so the norms land on sqrt(n) to the last ulp or two
    norms2 = np.linalg.norm(Xn, axis=0)
    fix = ~zero & (norms2 != np.sqrt(n))
    if fix.any():
        corr = np.sqrt(n) / norms2[fix]
        Xn[:, fix] *= corr
        scale[fix] *= corr
    return Xn, scale


def top_t_select(u, T: int) -> TopTSelection:
    """Pick the ``T`` entries of largest magnitude.

    Ties are broken by lower index first, so the result equals the first ``T``
    entries of a stable sort on ``(-|u_i|, i)``.
    """
    a = np.abs(np.asarray(u, dtype=float))
    p = a.shape[0]
    if not 1 <= T <= p:
        raise ValueError(f"T must lie in [1, {p}], got {T}")
    if T == p:
        return TopTSelection(float(a.min()), np.arange(p))
    # partial selection, then resolve the boundary value exactly
    kth = np.partition(a, p - T)[p - T]
    above = np.flatnonzero(a > kth)
    need = T - above.size
    at = np.flatnonzero(a == kth)[:need]
    idx = np.sort(np.concatenate([above, at]))
    return TopTSelection(float(kth), idx)


def solve_spd_min_norm(A, b) -> np.ndarray:
    """Solve ``A x = b`` for symmetric PSD ``A``.

    Positive definite systems go through Cholesky.  When ``A`` is singular
    (numerical rank below full at relative tolerance 1e-10 on the
    eigenvalues) the minimum-norm least-squares solution is returned.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise ValueError(f"shape mismatch: A {A.shape}, b {b.shape}")
    scale = np.abs(A).max() if A.size else 0.0
    if scale > 0 and np.abs(A - A.T).max() > SYMMETRY_RTOL * scale:
        raise ValueError("matrix is not symmetric")
    if scale == 0.0:
        return np.zeros_like(b)
    try:
        c, low = sla.cho_factor(A, lower=True, check_finite=False)
        diag = np.abs(np.diag(c))
        # a vanishing pivot means rank deficiency; hand over to the eigen path
        if diag.min() ** 2 > RANK_RTOL * diag.max() ** 2:
            return sla.cho_solve((c, low), b, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    return _eig_min_norm(A, b)


def _eig_min_norm(A, b):
    w, V = np.linalg.eigh((A + A.T) / 2.0)
    keep = w > RANK_RTOL * max(w.max(), 0.0)
    coef = (V[:, keep].T @ b) / w[keep]
    return V[:, keep] @ coef


def lambda_max_gram(X) -> float:
    """Largest eigenvalue of ``X^T X``."""
    s = np.linalg.norm(np.asarray(X, dtype=float), ord=2)
    return float(s * s)
