import math

import numpy as np
import pytest
from scipy.stats import chi2

from volwatch.critical_values import (CvRequest, CvTable, build_cv_table,
                                      cv_darling_erdos, simulate_cv_renyi,
                                      simulate_cv_weighted)

# Budgets here are kept modest; the table-grade reproduction of the published
# values runs in the acceptance suite.
REQ = CvRequest(level=0.05, grid_points=10_000, reps=8_000, seed=100)


def test_eta_one_closed_form_values():
    assert cv_darling_erdos(0.05) == pytest.approx(2.97020, abs=5e-6)
    assert cv_darling_erdos(0.01) == pytest.approx(4.60015, abs=5e-6)
    assert cv_darling_erdos(1 - math.exp(-1)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        cv_darling_erdos(1.5)


def test_one_dimensional_variant_matches_random_walk_oracle():
    c, se = simulate_cv_weighted(0.0, REQ, dims=1)
    # independent oracle: Rademacher random walk, reflection-style maximum
    rng = np.random.default_rng(7)
    n_steps, reps = 4_000, 30_000
    sups = np.empty(reps)
    batch = 500
    for i in range(0, reps, batch):
        steps = rng.choice([-1.0, 1.0], size=(batch, n_steps)) / math.sqrt(n_steps)
        walk = np.cumsum(steps, axis=1)
        sups[i:i + batch] = np.abs(walk).max(axis=1)
    oracle = float(np.quantile(sups, 0.95)) ** 2
    assert c == pytest.approx(oracle, abs=0.25)
    # known value: the 95% point of sup |W| on [0,1] is about 2.2414
    assert math.sqrt(c) == pytest.approx(2.2414, abs=0.06)


def test_renyi_direct_concentrates_at_chi2_for_large_eta():
    req = CvRequest(level=0.05, grid_points=10_000, reps=20_000, seed=3)
    c, se = simulate_cv_renyi(8.0, req, form="direct")
    q = chi2.ppf(0.95, df=2)
    assert c > q
    assert c < q + 0.8


def test_renyi_forms_arbitration():
    """The direct [1,T] functional equals its time inversion with exponent
    2 - eta, and both sit far above the published-table recipe (1 - eta)."""
    req = CvRequest(level=0.05, grid_points=20_000, reps=12_000, seed=4)
    direct, se_d = simulate_cv_renyi(1.5, req, form="direct")
    inverted, se_i = simulate_cv_renyi(1.5, req, form="inverted")
    tabulated, se_t = simulate_cv_renyi(1.5, req, form="tabulated")
    assert direct == pytest.approx(inverted, abs=3 * (se_d + se_i) + 0.15)
    assert direct - tabulated > 6 * (se_d + se_t)
    # the tabulated form is the one near the published 6.909
    assert tabulated == pytest.approx(6.909, abs=0.3)


def test_monotone_in_level_and_eta():
    req = CvRequest(level=0.05, grid_points=5_000, reps=6_000, seed=5)
    tw = build_cv_table([0.0, 0.3, 0.5, 0.7], [0.10, 0.05, 0.01], req,
                        scheme="weighted")
    for eta in (0.0, 0.3, 0.5, 0.7):
        c10 = tw.lookup("weighted", eta, 0.10).c
        c05 = tw.lookup("weighted", eta, 0.05).c
        c01 = tw.lookup("weighted", eta, 0.01).c
        assert c01 > c05 > c10
    for lv in (0.10, 0.05, 0.01):
        cs = [tw.lookup("weighted", eta, lv).c for eta in (0.0, 0.3, 0.5, 0.7)]
        assert all(a <= b for a, b in zip(cs, cs[1:]))
    tr = build_cv_table([1.3, 1.5, 1.7, 2.0], [0.10, 0.05], req, scheme="renyi")
    for lv in (0.10, 0.05):
        cs = [tr.lookup("renyi", eta, lv).c for eta in (1.3, 1.5, 1.7, 2.0)]
        assert all(a >= b for a, b in zip(cs, cs[1:]))


def test_grid_refinement_stability():
    base = CvRequest(level=0.05, grid_points=10_000, reps=10_000, seed=6)
    double = CvRequest(level=0.05, grid_points=20_000, reps=10_000, seed=6)
    c1, se1 = simulate_cv_weighted(0.3, base)
    c2, se2 = simulate_cv_weighted(0.3, double)
    assert abs(c1 - c2) < 2 * (se1 + se2)


def test_cache_round_trip_and_reuse(tmp_path):
    cache = tmp_path / "cv.csv"
    req = CvRequest(level=0.05, grid_points=2_000, reps=2_000, seed=9)
    t1 = build_cv_table([0.0], [0.05, 0.10], req, scheme="weighted",
                        cache_path=cache)
    blob1 = cache.read_bytes()
    reloaded = CvTable.from_csv(cache)
    assert reloaded.entries == t1.entries  # lossless float round-trip
    t2 = build_cv_table([0.0], [0.05, 0.10], req, scheme="weighted",
                        cache_path=cache)
    assert t2.entries == t1.entries
    assert cache.read_bytes() == blob1
    # changed budget is not served from cache
    req2 = CvRequest(level=0.05, grid_points=2_000, reps=2_500, seed=9)
    t3 = build_cv_table([0.0], [0.05], req2, scheme="weighted", cache_path=cache)
    assert t3.lookup("weighted", 0.0, 0.05).reps == 2_500


def test_build_table_validation():
    with pytest.raises(ValueError):
        build_cv_table([], [0.05], REQ)
    with pytest.raises(ValueError):
        build_cv_table([0.0], [], REQ)
    with pytest.raises(ValueError):
        build_cv_table([0.0], [1.5], REQ)
    with pytest.raises(ValueError):
        CvRequest(level=0.0)
    with pytest.raises(ValueError):
        simulate_cv_weighted(1.2, REQ)
    with pytest.raises(ValueError):
        simulate_cv_renyi(0.5, REQ)
    with pytest.raises(ValueError):
        simulate_cv_renyi(1.5, REQ, form="bogus")


def test_de_table_entries_are_closed_form(tmp_path):
    table = build_cv_table([1.0], [0.05, 0.01], REQ, scheme="de",
                           cache_path=tmp_path / "cv.csv")
    assert table.lookup("de", 1.0, 0.05).c == cv_darling_erdos(0.05)
    assert table.lookup("de", 1.0, 0.05).se == 0.0
