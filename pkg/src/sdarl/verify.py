"""Small-instance verification battery.

Each property runs a fixed, seeded set of trials and reports
``passed/total``.  The battery passes only if every property does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .datagen import GenSpec, make_dataset, stream
from .linalg import lambda_max_gram, solve_spd_min_norm, top_t_select
from .losses import LinearLoss, LogisticLoss, Loss
from .oracle import brute_force_best_support, certify_kkt, finite_diff_gradient
from .solver import CONVERGED, SolverConfig, fit_fixed_step, fit_sdarl

GRAD_RTOL = 1e-6
GRAD_FLOOR = 1e-3  # denominator floor: near-zero entries are compared absolutely
GRAD_H = 1e-5
DESCENT_TOL = 1e-12
ORACLE_TOL = 1e-8
ORACLE_MIN_MATCH = 45


@dataclass
class PropertyResult:
    name: str
    passed: int
    total: int
    required: int
    failures: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.passed >= self.required

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        need = "" if self.required == self.total else f" (need {self.required})"
        return f"{status} {self.name}: {self.passed}/{self.total}{need}"


@dataclass
class VerifyReport:
    results: List[PropertyResult]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    @property
    def failed(self) -> List[str]:
        return [r.name for r in self.results if not r.ok]

    def text(self) -> str:
        lines = [r.line() for r in self.results]
        for r in self.results:
            if not r.ok:
                lines.extend(f"  {r.name}: {msg}" for msg in r.failures[:5])
        lines.append("ALL PASS" if self.ok else "FAILED: " + ", ".join(self.failed))
        return "\n".join(lines)


class _CorruptGradient:
    """Wraps a loss and perturbs its gradient (harness self-test)."""

    def __init__(self, L: Loss, offset: float = 1e-3):
        self._L = L
        self._offset = offset

    def __getattr__(self, name):
        return getattr(self._L, name)

    def gradient(self, beta):
        g = self._L.gradient(beta)
        return g + self._offset


def _small_loss(model: str, seed: int, n: int, p: int, K: int, sigma1: float = 0.5, R: float = 10.0) -> Loss:
    spec = GenSpec(model=model, n=n, p=p, K=K, rho=0.3, R=R, sigma1=sigma1, seed=seed,
                   split=1.0 if model == "logistic" else 0.8)
    return make_dataset(spec, 0).loss()


def check_gradients(model: str, trials: int = 50, corrupt: bool = False) -> PropertyResult:
    """Analytic gradient against central differences at random points."""
    res = PropertyResult(f"gradient_{model}", 0, trials, trials)
    for t in range(trials):
        rng = stream(1000 + t, 0, 9)
        p = int(rng.integers(3, 21))
        n = int(rng.integers(10, 40))
        L = _small_loss(model, 1000 + t, n, p, min(3, p))
        if corrupt:
            L = _CorruptGradient(L)
        beta = rng.normal(scale=0.5, size=p)
        g = L.gradient(beta)
        fd = finite_diff_gradient(L, beta, GRAD_H)
        rel = np.abs(g - fd) / np.maximum(np.abs(g), GRAD_FLOOR)
        if rel.max() <= GRAD_RTOL:
            res.passed += 1
        else:
            res.failures.append(f"trial {t}: max relative error {rel.max():.3e}")
    return res


def check_top_t(trials: int = 200) -> PropertyResult:
    """Top-T selection against a stable sort (ties go to the lower index)."""
    res = PropertyResult("top_t_selection", 0, trials, trials)
    for t in range(trials):
        rng = stream(2000 + t, 0, 9)
        p = int(rng.integers(1, 60))
        u = rng.integers(-5, 6, size=p).astype(float) if t % 2 else rng.normal(size=p)
        T = int(rng.integers(1, p + 1))
        sel = top_t_select(u, T)
        ref = np.sort(np.argsort(-np.abs(u), kind="stable")[:T])
        thr = float(np.abs(u)[ref].min()) if T else math.inf
        if np.array_equal(np.sort(sel.indices), ref) and (T == 0 or sel.threshold == thr):
            res.passed += 1
        else:
            res.failures.append(f"trial {t}: indices differ from stable sort")
    return res


def check_min_norm(trials: int = 50) -> PropertyResult:
    """Rank-deficient solves satisfy the normal equations and avoid the null space."""
    res = PropertyResult("min_norm_solve", 0, trials, trials)
    for t in range(trials):
        rng = stream(3000 + t, 0, 9)
        k = int(rng.integers(2, 8))
        r = int(rng.integers(1, k))
        B = rng.normal(size=(k, r))
        A = B @ B.T
        b = A @ rng.normal(size=k)  # consistent right-hand side
        x = solve_spd_min_norm(A, b)
        _, s, Vt = np.linalg.svd(A)
        null = Vt[s < 1e-10 * s[0]]
        ok = np.allclose(A @ x, b, atol=1e-8 * max(1.0, np.abs(b).max()))
        ok &= null.size == 0 or np.abs(null @ x).max() <= 1e-8 * max(1.0, np.abs(x).max())
        if ok:
            res.passed += 1
        else:
            res.failures.append(f"trial {t}: residual or null-space component too large")
    return res


def _instances(count: int):
    for t in range(count):
        rng = stream(4000 + t, 0, 9)
        model = "linear" if t % 2 == 0 else "logistic"
        p = int(rng.integers(20, 120))
        n = int(rng.integers(40, 120))
        K = int(rng.integers(2, 6))
        T = int(rng.integers(K, K + 4))
        L = _small_loss(model, 4000 + t, n, p, K, sigma1=0.5, R=float(rng.choice([3.0, 10.0, 100.0])))
        yield t, model, L, T


def check_descent(trials: int = 60) -> PropertyResult:
    """Loss trajectories never increase."""
    res = PropertyResult("descent", 0, trials, trials)
    for t, model, L, T in _instances(trials):
        fit = fit_sdarl(L, SolverConfig(T))
        F = np.array(fit.loss_trajectory)
        worst = float(np.max(np.diff(F))) if F.size > 1 else -math.inf
        if worst <= DESCENT_TOL:
            res.passed += 1
        else:
            res.failures.append(f"instance {t} ({model}): loss rose by {worst:.3e}")
    return res


def check_line_search(trials: int = 60) -> PropertyResult:
    """Recorded steps satisfy tau = nu**m, m < m_max and the sufficient decrease."""
    res = PropertyResult("line_search_replay", 0, trials, trials)
    for t, model, L, T in _instances(trials):
        cfg = SolverConfig(T)
        fit = fit_sdarl(L, cfg)
        F = fit.loss_trajectory
        ok = all(m < cfg.m_max for m in fit.m_history)
        ok &= all(math.isclose(tau, cfg.nu ** m, rel_tol=1e-12) for tau, m in zip(fit.tau_history, fit.m_history))
        # the accepted trial point's loss bounds the next restricted minimum from above
        for k in range(len(F) - 1):
            ok &= F[k + 1] - F[k] <= -fit.required_decrease[k] + 1e-12 * max(1.0, abs(F[k]))
        if isinstance(L, LinearLoss) and L.p <= 200:
            tau_min = cfg.nu * (1 - cfg.sigma) / (lambda_max_gram(L.X) / L.n)
            ok &= all(tau >= tau_min - 1e-12 for tau in fit.tau_history)
        if ok:
            res.passed += 1
        else:
            res.failures.append(f"instance {t} ({model}): step record inconsistent")
    return res


def check_kkt_converged(trials: int = 60) -> PropertyResult:
    """Every converged run is a hard-threshold fixed point."""
    res = PropertyResult("kkt_converged", 0, 0, 0)
    for t, model, L, T in _instances(trials):
        for fitter in (fit_sdarl, fit_fixed_step):
            fit = fitter(L, SolverConfig(T))
            if fit.termination != CONVERGED:
                continue
            res.total += 1
            cert = certify_kkt(L, fit.beta, fit.tau, fit.lam)
            if cert.passed:
                res.passed += 1
            else:
                res.failures.append(f"instance {t} ({model}, {fit.method}): residual {cert.residual:.3e}")
    res.required = res.total
    return res


def easy_instance(rep: int) -> Loss:
    """Small, nearly noiseless linear instance for the brute-force oracle."""
    spec = GenSpec(model="linear", n=30, p=12, K=3, rho=0.2, R=10, sigma1=0.01, seed=5)
    return make_dataset(spec, rep).loss()


def check_oracle(trials: int = 50) -> List[PropertyResult]:
    """SDARL against exhaustive search on easy instances, plus KKT on each fit."""
    match = PropertyResult("oracle_match", 0, trials, math.ceil(ORACLE_MIN_MATCH * trials / 50))
    kkt = PropertyResult("oracle_kkt", 0, trials, trials)
    for rep in range(trials):
        L = easy_instance(rep)
        fit = fit_sdarl(L, SolverConfig(3))
        _, _, F_best, _ = brute_force_best_support(L, 3)
        if fit.final_loss <= F_best + ORACLE_TOL:
            match.passed += 1
        else:
            match.failures.append(f"rep {rep}: F={fit.final_loss:.6e} vs best {F_best:.6e}")
        cert = certify_kkt(L, fit.beta, fit.tau, fit.lam)
        if cert.passed:
            kkt.passed += 1
        else:
            kkt.failures.append(f"rep {rep}: residual {cert.residual:.3e}")
    return [match, kkt]


def check_determinism() -> PropertyResult:
    """Two runs of the smoke preset give byte-identical per-replication CSV."""
    import tempfile
    from pathlib import Path

    from .experiment import preset_spec, run_bench, write_bench

    res = PropertyResult("determinism", 0, 1, 1)
    spec = preset_spec("smoke", replications=2)
    with tempfile.TemporaryDirectory() as tmp:
        blobs = []
        for i in range(2):
            out = Path(tmp) / str(i)
            write_bench(run_bench(spec, workers=1), spec, out)
            blobs.append((out / "results.csv").read_bytes())
    if blobs[0] == blobs[1]:
        res.passed = 1
    else:
        res.failures.append("results.csv differs between identical runs")
    return res


def run_battery(corrupt_gradient: bool = False, quick: bool = False,
                progress: Optional[Callable[[PropertyResult], None]] = None) -> VerifyReport:
    """Run every property; ``corrupt_gradient`` perturbs the loss gradients."""
    k = 4 if quick else 1
    steps: List[Callable[[], object]] = [
        lambda: check_gradients("linear", 50 // k, corrupt_gradient),
        lambda: check_gradients("logistic", 50 // k, corrupt_gradient),
        lambda: check_top_t(200 // k),
        lambda: check_min_norm(50 // k),
        lambda: check_descent(60 // k),
        lambda: check_line_search(60 // k),
        lambda: check_kkt_converged(60 // k),
        lambda: check_oracle(50 // k),
        check_determinism,
    ]
    results: List[PropertyResult] = []
    for step in steps:
        out = step()
        for r in out if isinstance(out, list) else [out]:
            results.append(r)
            if progress is not None:
                progress(r)
    return VerifyReport(results)


def summary_counts(report: VerifyReport) -> Dict[str, str]:
    return {r.name: f"{r.passed}/{r.total}" for r in report.results}
