import math

import numpy as np
import pytest

import volwatch as vw
from volwatch.delay import (ChangeSpec, DelayCase, estimate_delta,
                            estimate_sigma1, estimate_sigma2, estimate_upsilon,
                            make_change_spec, predict_delay, solve_u_star)
from volwatch.garch import Regime, RegimeClass
from volwatch.qmle import fit_qmle


def _spec(theta0, theta_a, k_star=22, regime=None):
    if regime is None:
        return make_change_spec(theta0, theta_a, k_star, n_draws=100_000)
    return ChangeSpec(theta0=theta0, thetaA=theta_a, k_star=k_star,
                      dist=vw.InnovationDist.standard_normal(),
                      post_regime=RegimeClass(regime, 0.0, 0.0))


@pytest.fixture(scope="module")
def spec_to_stationary(theta_stationary):
    return _spec(theta_stationary, vw.GarchParams(0.10, 0.18, 0.60))


@pytest.fixture(scope="module")
def spec_to_explosive(theta_stationary):
    return _spec(theta_stationary, vw.GarchParams(0.10, 0.18, 0.90))


@pytest.fixture(scope="module")
def fit_m2000(theta_stationary):
    path = vw.simulate_path(theta_stationary, length=2_000, seed=99)
    return fit_qmle(path.y[1:], lattice=1, seed=0)


def test_change_spec_requires_an_actual_change(theta_stationary):
    with pytest.raises(ValueError):
        _spec(theta_stationary, vw.GarchParams(0.55, 0.18, 0.80),
              regime=Regime.STATIONARY)  # only omega differs


def test_delta_zero_at_true_parameter(theta_stationary):
    # scores evaluated at the data-generating parameter have mean zero
    spec = ChangeSpec(theta0=theta_stationary, thetaA=vw.GarchParams(
        0.10, 0.18 + 1e-12, 0.80), k_star=22,
        dist=vw.InnovationDist.standard_normal(),
        post_regime=RegimeClass(Regime.STATIONARY, -0.045, 0.001))
    d, se = estimate_delta(spec, n_mc=300_000, seed=1)
    assert np.all(np.abs(d) <= 3 * se)


def test_delta_nonzero_under_change(spec_to_stationary):
    d, se = estimate_delta(spec_to_stationary, n_mc=400_000, seed=2)
    assert np.linalg.norm(d) > 5 * np.linalg.norm(se)


def test_delta_monte_carlo_consistency(spec_to_stationary):
    d1, se1 = estimate_delta(spec_to_stationary, n_mc=150_000, seed=3)
    d2, se2 = estimate_delta(spec_to_stationary, n_mc=300_000, seed=4)
    assert np.all(np.abs(d1 - d2) <= 3 * (se1 + se2))


def test_delta_rejects_explosive_regime(spec_to_explosive):
    with pytest.raises(ValueError):
        estimate_delta(spec_to_explosive, n_mc=10_000)


def test_upsilon_nonzero_under_explosive_change(spec_to_explosive):
    u, se = estimate_upsilon(spec_to_explosive, n_mc=300_000, seed=5)
    assert np.linalg.norm(u) > 5 * np.linalg.norm(se)


def test_upsilon_zero_at_true_explosive_parameter(theta_explosive):
    spec = ChangeSpec(theta0=theta_explosive,
                      thetaA=vw.GarchParams(0.10, 0.30 + 1e-12, 0.80),
                      k_star=22, dist=vw.InnovationDist.standard_normal(),
                      post_regime=RegimeClass(Regime.EXPLOSIVE, 0.044, 0.001))
    u, se = estimate_upsilon(spec, n_mc=300_000, seed=6)
    assert np.all(np.abs(u) <= 3 * se)


def test_upsilon_segment_self_consistency(spec_to_explosive):
    u1, se1 = estimate_upsilon(spec_to_explosive, n_mc=150_000, seed=7)
    u2, se2 = estimate_upsilon(spec_to_explosive, n_mc=150_000, seed=8)
    assert np.all(np.abs(u1 - u2) <= 3 * (se1 + se2))


def test_upsilon_rejects_stationary_regime(spec_to_stationary):
    with pytest.raises(ValueError):
        estimate_upsilon(spec_to_stationary, n_mc=10_000)


def test_sigma1_symmetric_psd_and_stable(spec_to_stationary):
    s = estimate_sigma1(spec_to_stationary, n_mc=200_000, seed=9)
    assert np.array_equal(s, s.T)
    assert np.linalg.eigvalsh(s).min() >= 0
    s_big = estimate_sigma1(spec_to_stationary, n_mc=2_000_000, seed=10)
    assert np.linalg.norm(s - s_big) / np.linalg.norm(s_big) < 0.05


def test_sigma2_kurtosis_factor_and_psd(spec_to_explosive):
    dist = vw.InnovationDist.standard_normal()
    draws = dist.sample(np.random.default_rng(11), 500_000)
    vals = (1 - draws ** 2) ** 2
    se = vals.std() / math.sqrt(vals.size)
    assert abs(vals.mean() - 2.0) <= 3 * se  # E(1 - eps^2)^2 = 2 for N(0,1)
    s = estimate_sigma2(spec_to_explosive, n_mc=100_000, truncation=50, seed=12)
    assert np.array_equal(s, s.T)
    assert np.linalg.eigvalsh(s).min() >= 0


def test_sigma2_truncation_stability(spec_to_explosive):
    # the adaptive default stops only once the surviving weight is < 1e-12,
    # so deepening a fixed truncation beyond it changes nothing measurable
    adaptive = estimate_sigma2(spec_to_explosive, n_mc=100_000, truncation=50,
                               seed=13, adaptive=True)
    fixed = estimate_sigma2(spec_to_explosive, n_mc=100_000, truncation=300,
                            seed=13, adaptive=False)
    assert np.linalg.norm(adaptive - fixed) / np.linalg.norm(fixed) < 1e-3
    # the raw 50-lag truncation carries a measurable (few 1e-3) tail; this is
    # the honest size of the truncation error at J = 50 for these parameters
    j50 = estimate_sigma2(spec_to_explosive, n_mc=100_000, truncation=50,
                          seed=13, adaptive=False)
    gap = np.linalg.norm(j50 - fixed) / np.linalg.norm(fixed)
    assert 0 < gap < 1e-2


def test_sigma2_sum_form_diverges_with_truncation(spec_to_explosive):
    s50 = estimate_sigma2(spec_to_explosive, n_mc=20_000, truncation=50,
                          seed=14, form="sum")
    s100 = estimate_sigma2(spec_to_explosive, n_mc=20_000, truncation=100,
                           seed=14, form="sum")
    assert np.linalg.norm(s100) > 2 * np.linalg.norm(s50)


def test_u_star_fixed_points():
    assert solve_u_star(0.0, 0.7) == 1.0
    assert solve_u_star(5.0, 0.0) == 1.0
    # eta = 1 gives the quadratic u^2 = u + t
    assert solve_u_star(3.0, 1.0) == pytest.approx((1 + math.sqrt(13)) / 2,
                                                   abs=1e-10)
    # eta = 0.5, t = 3: root of u^4 = u + 3 (independent polynomial oracle)
    roots = np.roots([1.0, 0.0, 0.0, -1.0, -3.0])
    real = [r.real for r in roots if abs(r.imag) < 1e-12 and r.real > 0]
    assert solve_u_star(3.0, 0.5) == pytest.approx(real[0], abs=1e-10)
    for t, eta in [(0.0, 0.0), (2.5, 0.3), (10.0, 0.9), (0.2, 1.5)]:
        u = solve_u_star(t, eta)
        assert abs(u - (u + t) ** (eta / 2)) < 1e-10


def test_u_n_converges_to_u_star():
    # finite-horizon roots converge to the limit root as the plug-in ratio
    # approaches its limit
    t_star, eta = 1.8, 0.6
    u_lim = solve_u_star(t_star, eta)
    errs = [abs(solve_u_star(t_star * (1 + 1 / n), eta) - u_lim)
            for n in (10, 100, 1000)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


def test_predict_delay_zero_kstar(theta_stationary, fit_m2000,
                                  spec_to_stationary):
    spec = ChangeSpec(theta0=spec_to_stationary.theta0,
                      thetaA=spec_to_stationary.thetaA, k_star=0,
                      dist=spec_to_stationary.dist,
                      post_regime=spec_to_stationary.post_regime)
    cfg = vw.MonitorConfig(scheme=vw.Weighted(0.3), c=7.556, horizon_n=500,
                           m=2_000, tuned=False)
    d, _ = estimate_delta(spec, n_mc=200_000, seed=15)
    s1 = estimate_sigma1(spec, n_mc=200_000, seed=16)
    pred = predict_delay(spec, cfg, fit_m2000, d, s1)
    assert pred.t_star == 0.0
    assert pred.u_star == 1.0
    expected_v1 = (500 ** 0.7 * 7.556 / pred.drift_strength) ** (1 / 1.7)
    assert pred.v1 == pytest.approx(expected_v1, rel=1e-12)
    assert pred.case is DelayCase.VERY_EARLY
    assert pred.s2_sq == pytest.approx(pred.drift_strength)


def test_predict_delay_vn_cross_checked_by_bisection(fit_m2000,
                                                     spec_to_explosive):
    cfg = vw.MonitorConfig(scheme=vw.Weighted(0.5), c=7.934, horizon_n=500,
                           m=2_000, tuned=False)
    u, _ = estimate_upsilon(spec_to_explosive, n_mc=200_000, seed=17)
    s2 = estimate_sigma2(spec_to_explosive, n_mc=50_000, seed=18)
    pred = predict_delay(spec_to_explosive, cfg, fit_m2000, u, s2)
    # independent bisection of u^2 = (u + k*/scale)^eta
    scale = (500 ** 0.5 * 7.934 / pred.drift_strength) ** (1 / 1.5)
    lo, hi = 1e-8, 50.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid ** 2 < (mid + 22 / scale) ** 0.5:
            lo = mid
        else:
            hi = mid
    assert pred.u_star == pytest.approx(0.5 * (lo + hi), abs=1e-8)
    assert pred.v1 == pytest.approx(pred.u_star * scale, rel=1e-12)
    assert pred.s1_sq > 0


def test_predict_delay_case_selection(fit_m2000, spec_to_explosive,
                                      spec_to_stationary):
    def with_kstar(spec, k):
        return ChangeSpec(theta0=spec.theta0, thetaA=spec.thetaA, k_star=k,
                          dist=spec.dist, post_regime=spec.post_regime)

    u, _ = estimate_upsilon(spec_to_explosive, n_mc=100_000, seed=19)
    s2 = estimate_sigma2(spec_to_explosive, n_mc=30_000, seed=20)
    wcfg = vw.MonitorConfig(scheme=vw.Weighted(0.0), c=7.215, horizon_n=500,
                            m=2_000, tuned=False)
    assert predict_delay(with_kstar(spec_to_explosive, 22), wcfg, fit_m2000,
                         u, s2).case is DelayCase.VERY_EARLY
    assert predict_delay(with_kstar(spec_to_explosive, 95), wcfg, fit_m2000,
                         u, s2).case is DelayCase.EARLY
    assert predict_delay(with_kstar(spec_to_explosive, 250), wcfg, fit_m2000,
                         u, s2).case is DelayCase.LATE

    rcfg = vw.MonitorConfig(scheme=vw.Renyi(1.5, r=22), c=6.909, horizon_n=500,
                            m=2_000, tuned=False)
    pre = predict_delay(with_kstar(spec_to_explosive, 5), rcfg, fit_m2000, u, s2)
    assert pre.case is DelayCase.RENYI_PRE_R
    assert predict_delay(with_kstar(spec_to_explosive, 100), rcfg, fit_m2000,
                         u, s2).case is DelayCase.RENYI_EARLY
    assert predict_delay(with_kstar(spec_to_explosive, 400), rcfg, fit_m2000,
                         u, s2).case is DelayCase.RENYI_LATE
    assert pre.v6 == pytest.approx(math.sqrt(5))


def test_predict_delay_rejects_near_boundary(theta_stationary, fit_m2000):
    spec = ChangeSpec(theta0=theta_stationary,
                      thetaA=vw.GarchParams(0.10, 0.18, 0.85), k_star=22,
                      dist=vw.InnovationDist.standard_normal(),
                      post_regime=RegimeClass(Regime.NEAR_BOUNDARY, 0.0, 0.01))
    cfg = vw.MonitorConfig(scheme=vw.Weighted(0.0), c=7.215, horizon_n=500,
                           m=2_000, tuned=False)
    with pytest.raises(ValueError):
        predict_delay(spec, cfg, fit_m2000, np.array([1.0, 1.0]), np.eye(2))
