import math

import numpy as np
import pytest

from twotier.analytic import FemtoObserver, femto_levy, femto_outage_lb, tier_selection_factor
from twotier.montecarlo import (MacroObserver, ScenarioConfig,
                                brute_force_dominant_check, empirical_ccdf, fit_for,
                                sample_interference, simulate_outage,
                                tier_selection_factor_mc, void_fraction, wilson_interval)
from twotier.params import reference_params

INTERIOR = FemtoObserver(250.0)


def test_no_users_no_outage(params):
    est = simulate_outage(ScenarioConfig(params, 1e-9, 0.0, replications=2000))
    assert est.p_hat == 0.0


def test_huge_target_sir_always_fails():
    p = reference_params(gamma=1e6)
    assert simulate_outage(ScenarioConfig(p, 6, 10, replications=500)).p_hat == 1.0
    assert simulate_outage(ScenarioConfig(p, 6, 10, INTERIOR, replications=500)).p_hat == 1.0


def test_config_validation(params):
    with pytest.raises(ValueError):
        ScenarioConfig(params, -1, 0)
    with pytest.raises(ValueError):
        ScenarioConfig(params, 1, 0, replications=0)
    with pytest.raises(ValueError):
        ScenarioConfig(params, 1, 0, FemtoObserver(700.0))


def test_corner_omni_worse_than_interior_omni(params):
    a = simulate_outage(ScenarioConfig(params, 30, 0, FemtoObserver(500.0, sectors=1),
                                       replications=4000))
    b = simulate_outage(ScenarioConfig(params, 30, 0, FemtoObserver(250.0, sectors=1),
                                       replications=4000))
    assert a.ci[0] > b.ci[1]


def test_seed_determinism_across_workers(params):
    cfg = ScenarioConfig(params, 24, 50, INTERIOR, replications=3000, seed=7)
    a = simulate_outage(cfg)
    b = simulate_outage(cfg.with_(workers=3))
    assert (a.outages, a.n_effective) == (b.outages, b.n_effective)
    x = sample_interference(ScenarioConfig(params, 24, 50), "c_f", 2500)
    y = sample_interference(ScenarioConfig(params, 24, 50, workers=4), "c_f", 2500)
    assert np.array_equal(x, y)
    z = sample_interference(ScenarioConfig(params, 24, 50, seed=1), "c_f", 2500)
    assert not np.array_equal(x, z)


def test_ci_shrinks_like_root_n(params):
    small = simulate_outage(ScenarioConfig(params, 24, 50, replications=2000, seed=3))
    big = simulate_outage(ScenarioConfig(params, 24, 50, replications=8000, seed=3))
    assert big.ci_halfwidth == pytest.approx(small.ci_halfwidth / 2, rel=0.25)
    assert abs(big.p_hat - small.p_hat) < 3 * small.ci_halfwidth


def test_wilson_interval():
    lo, hi = wilson_interval(0, 100)
    assert lo == pytest.approx(0.0, abs=1e-12) and 0 < hi < 0.05
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(1 - hi)
    assert wilson_interval(0, 0) == (0.0, 1.0)


def test_void_fraction(params):
    n = 40_000
    p = math.exp(-6 / 3)
    v = void_fraction(params, 6.0, n)
    assert abs(v - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_no_femtocells_no_femto_interference(params):
    assert np.all(sample_interference(ScenarioConfig(params, 24, 0.0), "c_f", 2000) == 0)
    assert np.all(sample_interference(ScenarioConfig(params, 0.0, 30, INTERIOR), "f_c", 2000) == 0)


def test_cross_tier_law_sample(params, moments):
    law = femto_levy(params, 50, moments)
    x = sample_interference(ScenarioConfig(params, 24, 50), "c_f", 20_000)
    p, se = empirical_ccdf(x, [law.kappa])
    assert p[0] == pytest.approx(1 - float(law.cdf(law.kappa)), abs=4 * se[0] + 0.01)


def test_component_observer_mismatch(params):
    with pytest.raises(ValueError):
        sample_interference(ScenarioConfig(params, 24, 50), "f_c", 10)
    with pytest.raises(ValueError):
        sample_interference(ScenarioConfig(params, 24, 50, INTERIOR), "c_out", 10)
    with pytest.raises(ValueError):
        sample_interference(ScenarioConfig(params, 24, 50), "bogus", 10)
    with pytest.raises(ValueError):
        brute_force_dominant_check(ScenarioConfig(params, 24, 50), 1.0, 10)


def test_dominant_check_ordering(params):
    cfg = ScenarioConfig(params, 24, 50, INTERIOR)
    for y in (0.5, 5.0, 50.0):
        dom, tot = brute_force_dominant_check(cfg, y, 3000)
        assert dom <= tot
    dom, tot = brute_force_dominant_check(cfg, 1e12, 1000)
    assert dom == tot == 0.0


def test_empirical_ccdf():
    p, se = empirical_ccdf([1.0, 2.0, 3.0, 4.0], [0.0, 2.0, 5.0])
    assert np.allclose(p, [1.0, 0.5, 0.0])
    assert se[1] == pytest.approx(0.25)


def test_fit_for_zero_load(params):
    assert fit_for(params, 0.0).degenerate


def test_tier_selection_factor(params):
    p = params.replace(tier_selection=True)
    est, se = tier_selection_factor_mc(p, 24, 50, 4000)
    theory = tier_selection_factor(50 / p.area_H, p.R_f)
    assert abs(est - theory) < 3 * se + 1e-3


def test_macro_observer_sector_rotation(params):
    a = simulate_outage(ScenarioConfig(params, 24, 20, MacroObserver(0.0), replications=4000))
    b = simulate_outage(ScenarioConfig(params, 24, 20, MacroObserver(2 * math.pi / 3),
                                       replications=4000))
    assert abs(a.p_hat - b.p_hat) < 2 * (a.ci_halfwidth + b.ci_halfwidth)


@pytest.mark.parametrize("obs,n_c,n_f", [
    (FemtoObserver(250.0, 2 * math.pi / 3, 3), 6, 37),
    (FemtoObserver(250.0, 2 * math.pi / 3, 3), 12, 30),
    (FemtoObserver(500.0, 2 * math.pi / 3, 1), 1, 20),
    (FemtoObserver(500.0, 2 * math.pi / 3, 1), 6, 20),
])
def test_femto_bound_below_simulation_unless_flagged(params, moments, obs, n_c, n_f):
    r = femto_outage_lb(params, n_f, n_c, obs, moments)
    est = simulate_outage(ScenarioConfig(params, n_c, n_f, obs, replications=10_000, seed=4))
    assert r.terms["no_taylor"] <= est.ci[1]
    if "approximation_strained" not in r.flags:
        assert r.p_out <= est.ci[1]
    else:
        assert r.p_out - r.terms["no_taylor"] > 0.01
