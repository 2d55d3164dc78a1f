"""Risk-free rate quadrature, uncertainty effect, welfare cost."""

import math

import numpy as np
import pytest

from sievesmm.econ import (
    DivergenceError,
    EconError,
    PreferenceParams,
    UnsupportedMGFError,
    risk_free_rate,
    stationary_variance_draws,
    uncertainty_component,
    uncertainty_table,
    welfare_cost,
    welfare_table,
)
from sievesmm.mixture import MixtureParams, sample as mixture_sample

A_MONTHLY = -math.log(0.99 ** (1 / 3))


def std_normal():
    return MixtureParams(weights=[1.0, 0, 0], locations=[0.0, 0, 0],
                         scales=[1.0, 1, 1], xi=(1.5, 1.5), k=1)


def skewed_pair():
    return MixtureParams(weights=[0.7, 0.3, 0, 0], locations=[0.3, -0.7, 0, 0],
                         scales=[0.8, 1.4, 1, 1], xi=(1.5, 1.5), k=2)


def with_tails():
    return MixtureParams(weights=[0.6, 0.2, 0.1, 0.1],
                         locations=[0.25, -0.75, 0, 0],
                         scales=[0.8, 1.4, 1, 1], xi=(2.0, 1.3), k=2)


# ---------------------------------------------------------------------------
# preferences
# ---------------------------------------------------------------------------


def test_preference_validation():
    p = PreferenceParams(gamma=4.0, a=0.01)
    assert p.delta == pytest.approx(math.exp(-0.01), abs=0)
    with pytest.raises(EconError):
        PreferenceParams(gamma=-1.0, a=0.01)
    with pytest.raises(EconError):
        PreferenceParams(gamma=4.0, a=0.0)
    with pytest.raises(EconError):
        PreferenceParams(gamma=4.0, a=0.01, horizon=0)
    with pytest.raises(EconError):
        PreferenceParams(gamma=4.0, a=0.01, reps=0)


def test_preference_from_discount():
    p = PreferenceParams.from_discount(2.0, 0.99, horizon=1200)
    assert p.a == pytest.approx(-math.log(0.99), abs=1e-15)
    assert p.delta == pytest.approx(0.99, abs=1e-15)
    assert p.horizon == 1200
    for bad in (0.0, 1.0, 1.2, -0.5):
        with pytest.raises(EconError):
            PreferenceParams.from_discount(2.0, bad)


# ---------------------------------------------------------------------------
# risk-free rate
# ---------------------------------------------------------------------------


def test_risk_free_lognormal_closed_form():
    # constant variance: kappa=0 and rho_sigma=0 make s^2 = mu_sigma at every node
    v = 0.04
    theta = {"mu_sigma": v, "rho_sigma": 0.0, "kappa_sigma": 0.0,
             "mu_c": 0.0021, "rho_c": 0.32}
    pref = PreferenceParams(gamma=4.0, a=A_MONTHLY)
    for gamma, dc in [(4.0, 0.005), (2.0, -0.01), (7.5, 0.0)]:
        pref = PreferenceParams(gamma=gamma, a=A_MONTHLY)
        r = risk_free_rate(theta, std_normal(), pref, dc, 0.123)
        expect = A_MONTHLY + gamma * (0.0021 + 0.32 * dc) - gamma**2 * v / 2
        assert abs(r - expect) < 1e-10


def test_risk_free_risk_neutral():
    theta = {"mu_sigma": 0.1, "rho_sigma": 0.5, "kappa_sigma": 0.01}
    pref = PreferenceParams(gamma=0.0, a=A_MONTHLY)
    r = risk_free_rate(theta, skewed_pair(), pref, 0.3, 0.2)
    assert r == pytest.approx(A_MONTHLY, abs=1e-14)


def test_risk_free_rejects_tails_and_few_nodes():
    theta = {"mu_sigma": 0.1, "rho_sigma": 0.5, "kappa_sigma": 0.01}
    pref = PreferenceParams(gamma=4.0, a=A_MONTHLY)
    with pytest.raises(UnsupportedMGFError):
        risk_free_rate(theta, with_tails(), pref, 0.0, 0.1)
    with pytest.raises(EconError):
        risk_free_rate(theta, std_normal(), pref, 0.0, 0.1, quad_nodes=4)
    with pytest.raises(EconError):
        risk_free_rate({"mu_sigma": 0.1}, std_normal(), pref, 0.0, 0.1)


def test_risk_free_broadcast_and_scalar():
    theta = {"mu_sigma": 2.5e-5, "rho_sigma": 0.75, "kappa_sigma": 3.25e-6}
    pref = PreferenceParams(gamma=4.0, a=A_MONTHLY)
    r = risk_free_rate(theta, skewed_pair(), pref, 0.0, 1e-4)
    assert isinstance(r, float)
    dc = np.array([-0.01, 0.0, 0.02])
    rv = risk_free_rate(theta, skewed_pair(), pref, dc, 1e-4)
    assert rv.shape == (3,)
    assert rv[1] == pytest.approx(r, abs=0)
    # rate rises with current growth through rho_c when present
    theta2 = dict(theta, mu_c=0.001, rho_c=0.3)
    rv2 = risk_free_rate(theta2, skewed_pair(), pref, dc, 1e-4)
    assert rv2[2] > rv2[0]


def test_risk_free_growth_units_rescales_gamma():
    theta = {"mu_sigma": 0.83, "rho_sigma": 0.5, "kappa_sigma": 0.1,
             "mu_c": 0.21, "rho_c": 0.32}
    a = risk_free_rate(theta, skewed_pair(),
                       PreferenceParams(gamma=4.0, a=A_MONTHLY), 0.5, 0.9,
                       growth_units=100.0)
    b = risk_free_rate(theta, skewed_pair(),
                       PreferenceParams(gamma=0.04, a=A_MONTHLY), 0.5, 0.9)
    assert a == pytest.approx(b, abs=1e-15)


def test_risk_free_quadrature_converged():
    theta = {"mu_sigma": 2.5e-5, "rho_sigma": 0.75, "kappa_sigma": 3.25e-6,
             "mu_c": 0.0014, "rho_c": 0.32}
    pref = PreferenceParams(gamma=10.0, a=A_MONTHLY)
    r32 = risk_free_rate(theta, skewed_pair(), pref, 0.002, 1e-4, quad_nodes=32)
    r64 = risk_free_rate(theta, skewed_pair(), pref, 0.002, 1e-4, quad_nodes=64)
    assert abs(r64 - r32) < 1e-6


def test_mixture_mgf_identity_against_monte_carlo():
    # E[exp(u e)] from the component formula vs 1e6 draws; u = -gamma*s, s <= 3
    p = skewed_pair()
    g = np.random.default_rng(7)
    n = 1_000_000
    draws = mixture_sample(p, g.random(n), g.standard_normal((n, p.k)),
                           g.random(n), g.random(n))
    k = p.k
    for s in (1.0, 2.0, 3.0):
        u = -0.25 * s
        closed = float(np.sum(p.weights[:k] * np.exp(
            p.locations[:k] * u + 0.5 * p.scales[:k] ** 2 * u * u)))
        mc = float(np.mean(np.exp(u * draws)))
        assert abs(mc / closed - 1.0) < 1e-3


# ---------------------------------------------------------------------------
# uncertainty component
# ---------------------------------------------------------------------------


def test_stationary_variance_draws():
    theta = {"mu_sigma": 0.02, "rho_sigma": 0.6, "kappa_sigma": 0.004}
    s2 = stationary_variance_draws(theta, 50_000, seed=3)
    assert s2.shape == (50_000,)
    assert np.all(s2 >= 0.0)
    assert s2.mean() == pytest.approx(0.02 / 0.4, rel=0.05)
    np.testing.assert_array_equal(
        s2, stationary_variance_draws(theta, 50_000, seed=3))


def test_uncertainty_constant_vol_closed_form():
    # rho=kappa=0: every draw sees s^2 = mu_sigma, so the average is exact
    v = 3e-4
    theta = {"mu_sigma": v, "rho_sigma": 0.0, "kappa_sigma": 0.0}
    got = uncertainty_component(theta, std_normal(), 4.0, n_draws=500)
    assert got == pytest.approx(-12.0 * 100.0 * 16.0 * v / 2.0, rel=1e-12)


def test_uncertainty_monotone_in_gamma():
    theta = {"mu_sigma": 2.5e-5, "rho_sigma": 0.75, "kappa_sigma": 3.25e-6}
    rows = uncertainty_table(theta, skewed_pair(), (2.0, 4.0, 6.0, 10.0),
                             n_draws=4000)
    effects = [row["effect_annualized_pct"] for row in rows]
    assert all(e < 0 for e in effects)
    assert all(abs(effects[i + 1]) > abs(effects[i]) for i in range(3))
    assert [row["gamma"] for row in rows] == [2.0, 4.0, 6.0, 10.0]


def test_uncertainty_negative_variance_floored_with_warning():
    theta = {"mu_sigma": 1e-6, "rho_sigma": 0.1, "kappa_sigma": 0.05}
    with pytest.warns(RuntimeWarning):
        got = uncertainty_component(theta, std_normal(), 4.0, n_draws=2000)
    assert math.isfinite(got)


def test_uncertainty_deterministic_in_seed():
    theta = {"mu_sigma": 2.5e-5, "rho_sigma": 0.75, "kappa_sigma": 3.25e-6}
    a = uncertainty_component(theta, skewed_pair(), 4.0, n_draws=3000, seed=1)
    b = uncertainty_component(theta, skewed_pair(), 4.0, n_draws=3000, seed=1)
    c = uncertainty_component(theta, skewed_pair(), 4.0, n_draws=3000, seed=2)
    assert a == b
    assert a != c


def test_uncertainty_rejects_tails():
    theta = {"mu_sigma": 2.5e-5, "rho_sigma": 0.75, "kappa_sigma": 3.25e-6}
    with pytest.raises(UnsupportedMGFError):
        uncertainty_component(theta, with_tails(), 4.0, n_draws=100)


# ---------------------------------------------------------------------------
# welfare cost
# ---------------------------------------------------------------------------


def test_welfare_validation():
    theta = {"mu_sigma": 0.01, "rho_sigma": 0.0, "kappa_sigma": 0.0}
    pref = PreferenceParams(gamma=1.0, a=A_MONTHLY)
    with pytest.raises(EconError):
        welfare_cost(theta, std_normal(), pref)
    pref = PreferenceParams(gamma=4.0, a=A_MONTHLY)
    with pytest.raises(EconError):
        welfare_cost(theta, std_normal(), pref, horizon=500, reps=5)
    with pytest.raises(EconError):
        welfare_cost(theta, std_normal(), pref, horizon=1000, reps=0)
    with pytest.raises(EconError):
        welfare_cost(theta, std_normal(), pref, horizon=1000, reps=5,
                     process="quarterly")


def test_welfare_iid_level_closed_form():
    sigma = 0.1
    theta = {"mu_sigma": sigma**2, "rho_sigma": 0.0, "kappa_sigma": 0.0}
    for gamma in (2.0, 4.0, 10.0):
        closed = 100.0 * (math.exp(gamma * sigma**2 / 2) - 1.0)
        lam = welfare_cost(theta, std_normal(),
                           PreferenceParams(gamma=gamma, a=A_MONTHLY),
                           horizon=2000, reps=300, process="level")
        assert lam == pytest.approx(closed, rel=0.05)


def test_welfare_degenerate_path_costs_nothing():
    # variance floor leaves 1e-12 of residual noise, hence the loose zero
    theta = {"mu_sigma": 0.0, "rho_sigma": 0.0, "kappa_sigma": 0.0}
    lam = welfare_cost(theta, std_normal(),
                       PreferenceParams(gamma=4.0, a=A_MONTHLY),
                       horizon=1000, reps=5, process="level")
    assert abs(lam) < 1e-6


def test_welfare_risk_neutral_is_free():
    theta = {"mu_sigma": 0.02, "rho_sigma": 0.5, "kappa_sigma": 0.004}
    lam = welfare_cost(theta, std_normal(),
                       PreferenceParams(gamma=0.0, a=A_MONTHLY),
                       horizon=1000, reps=10)
    assert lam == 0.0


def test_welfare_positive_under_risk():
    theta = {"mu_sigma": 0.01, "rho_sigma": 0.3, "kappa_sigma": 0.001}
    lam = welfare_cost(theta, skewed_pair(),
                       PreferenceParams(gamma=2.0, a=A_MONTHLY),
                       horizon=1000, reps=50)
    assert lam > 0.0


def test_welfare_deterministic_in_seed():
    theta = {"mu_sigma": 0.01, "rho_sigma": 0.3, "kappa_sigma": 0.001}
    pref = PreferenceParams(gamma=4.0, a=A_MONTHLY)
    kw = dict(horizon=1000, reps=20)
    assert welfare_cost(theta, std_normal(), pref, seed=5, **kw) == \
        welfare_cost(theta, std_normal(), pref, seed=5, **kw)
    assert welfare_cost(theta, std_normal(), pref, seed=5, **kw) != \
        welfare_cost(theta, std_normal(), pref, seed=6, **kw)


def test_welfare_divergence_detected():
    theta = {"mu_sigma": 1.0, "rho_sigma": 0.0, "kappa_sigma": 0.0}
    with pytest.raises(DivergenceError):
        welfare_cost(theta, std_normal(),
                     PreferenceParams(gamma=500.0, a=A_MONTHLY),
                     horizon=1000, reps=2, process="level")


def test_welfare_table_structure():
    theta = {"mu_sigma": 0.01, "rho_sigma": 0.0, "kappa_sigma": 0.0}
    rows = welfare_table(theta, std_normal(), (2.0, 6.0), A_MONTHLY,
                         horizon=1000, reps=20, process="level")
    assert [r["gamma"] for r in rows] == [2.0, 6.0]
    assert all(r["lambda_pct"] > 0 for r in rows)
    assert rows[1]["lambda_pct"] > rows[0]["lambda_pct"]
