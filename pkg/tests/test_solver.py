import math

import numpy as np
import pytest

from sdarl.datagen import GenSpec, make_dataset
from sdarl.linalg import lambda_max_gram
from sdarl.losses import LinearLoss
from sdarl.solver import (CONVERGED, LINE_SEARCH_CAP, MAX_OUTER, SolverConfig, detect_active,
                          fit_fixed_step, fit_sdarl, hard_threshold, kkt_residual, line_search)


def noiseless(seed=0, n=80, p=120, K=5, rho=0.3):
    return make_dataset(GenSpec(n=n, p=p, K=K, rho=rho, R=10, sigma1=0.0, seed=seed))


def test_config_validation():
    for bad in (dict(T=0), dict(T=3, nu=1.0), dict(T=3, nu=0.0), dict(T=3, sigma=1.0),
                dict(T=3, max_outer=0), dict(T=3, m_max=-1)):
        with pytest.raises(ValueError):
            SolverConfig(**bad)
    assert SolverConfig(3).with_T(7).T == 7


def test_hard_threshold_keeps_boundary():
    u = np.array([0.5, -2.0, 1.0, -0.99])
    # lam_tau = 0.5 -> threshold 1
    np.testing.assert_array_equal(hard_threshold(u, 0.5), [0.0, -2.0, 1.0, 0.0])


def test_detect_active_respects_eligibility():
    beta = np.array([0.0, 5.0, 0.0, 0.0])
    d = np.array([3.0, 0.0, -4.0, 1.0])
    A, I, thr = detect_active(beta, d, 1.0, 2)
    assert A.tolist() == [1, 2] and I.tolist() == [0, 3] and thr == 4.0
    A, _, _ = detect_active(beta, d, 1.0, 2, eligible=np.array([True, True, False, True]))
    assert A.tolist() == [0, 1]


def test_noiseless_recovery_exact():
    ds = noiseless()
    fit = fit_sdarl(ds.loss(), SolverConfig(5))
    assert fit.termination == CONVERGED
    assert fit.beta.support.tolist() == ds.support.tolist()
    np.testing.assert_allclose(fit.beta.values, ds.beta_star.values, rtol=1e-9)
    assert fit.final_loss < 1e-20


def test_trajectory_monotone_and_records_consistent():
    ds = make_dataset(GenSpec(n=100, p=300, K=8, rho=0.5, R=100, seed=4))
    fit = fit_sdarl(ds.loss(), SolverConfig(8))
    F = np.array(fit.loss_trajectory)
    assert np.all(np.diff(F) <= 1e-12)
    k = len(F)
    assert len(fit.tau_history) == len(fit.m_history) == len(fit.required_decrease) == k
    assert len(fit.active_set_history) == k + 1
    assert fit.iterations == k
    for tau, m in zip(fit.tau_history, fit.m_history):
        assert math.isclose(tau, 0.9 ** m, rel_tol=1e-12)


def test_fixed_step_uses_unit_step():
    ds = make_dataset(GenSpec(n=100, p=300, K=8, rho=0.5, R=100, seed=4))
    fit = fit_fixed_step(ds.loss(), SolverConfig(8))
    assert set(fit.tau_history) == {1.0} and set(fit.m_history) == {0}
    assert fit.method == "fixed_step"


def test_line_search_step_lower_bound():
    # linear losses: accepted tau >= nu (1 - sigma) / (lambda_max(X^T X) / n)
    for seed in range(10):
        ds = make_dataset(GenSpec(n=60, p=150, K=6, rho=0.8, R=100, seed=seed))
        L = ds.loss()
        cfg = SolverConfig(6)
        fit = fit_sdarl(L, cfg)
        bound = cfg.nu * (1 - cfg.sigma) / (lambda_max_gram(L.X) / L.n)
        assert min(fit.tau_history) >= bound - 1e-12


def test_line_search_accepts_first_sufficient_step(small_linear):
    L = small_linear.loss()
    cfg = SolverConfig(4)
    A = np.array([0, 1, 2, 3])
    beta = L.minimize_restricted(A).beta
    d = -L.gradient(beta)
    d[A] = 0.0
    ls = line_search(L, beta, d, A, cfg)
    assert ls.lhs <= ls.rhs and not ls.capped
    assert math.isclose(ls.tau, cfg.nu ** ls.m, rel_tol=1e-12)


def test_line_search_cap_stops_run():
    # a demanding sigma with only two trial steps runs out of backtracking room
    ds = make_dataset(GenSpec(n=60, p=200, K=8, rho=0.8, R=100, seed=0))
    fit = fit_sdarl(ds.loss(), SolverConfig(8, sigma=0.49, m_max=1))
    assert fit.termination == LINE_SEARCH_CAP
    assert fit.m_history[-1] == 1 and "line_search_cap" in fit.warnings


def test_max_outer_reported():
    ds = make_dataset(GenSpec(n=100, p=300, K=8, rho=0.5, R=100, seed=4))
    fit = fit_sdarl(ds.loss(), SolverConfig(8, max_outer=1))
    assert fit.iterations == 1
    assert fit.termination in (CONVERGED, MAX_OUTER)


def test_converged_fit_is_kkt_point():
    ds = make_dataset(GenSpec(n=100, p=300, K=8, rho=0.5, R=100, seed=4))
    L = ds.loss()
    fit = fit_sdarl(L, SolverConfig(8))
    assert fit.termination == CONVERGED
    assert kkt_residual(L, fit.beta, fit.tau, fit.lam) <= 1e-8


def test_warm_start_at_solution_converges_immediately():
    ds = noiseless(seed=2)
    L = ds.loss()
    fit = fit_sdarl(L, SolverConfig(5))
    again = fit_sdarl(L, SolverConfig(5), beta0=fit.beta, d0=fit.d)
    assert again.iterations == 1 and again.termination == CONVERGED


def test_T_larger_than_p_rejected():
    L = LinearLoss(np.eye(3), np.ones(3))
    with pytest.raises(ValueError):
        fit_sdarl(L, SolverConfig(4))


def test_to_dict_trajectory_fields():
    fit = fit_sdarl(noiseless().loss(), SolverConfig(5))
    d = fit.to_dict()
    for key in ("loss_trajectory", "tau_history", "active_set_sizes", "termination"):
        assert key in d
    assert d["active_set_sizes"][0] == 5
