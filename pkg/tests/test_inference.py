"""Moment Jacobians, block bootstrap standard errors, ill-posedness bounds."""

import math
import warnings

import numpy as np
import pytest

import sievesmm.inference as inf_mod
from sievesmm.dgp_sim import ModelSpec, PanelShape, simulate_ar1
from sievesmm.estimator import (
    EstimationConfig,
    draw_mc_data,
    estimate,
    prepare_context,
    to_bounded,
)
from sievesmm.inference import (
    IllPosedWarning,
    InferenceError,
    MomentJacobian,
    block_bootstrap_se,
    default_block_len,
    functional_se,
    illposedness_diagnostic,
    inference_report,
    moment_jacobian,
)
from sievesmm.mixture import MixtureError


def iid_config(n=400, **kw):
    spec = ModelSpec(kind="ar1", theta={"mu_y": 0.2, "rho_y": 0.0}, n=n, S=4,
                     free=("mu_y",))
    base = dict(model=spec, k=1, m=32, max_evals=150, f_tol=1e-10, sim_seed=2)
    base.update(kw)
    return EstimationConfig(**base)


def k2_config(n=300):
    spec = ModelSpec(kind="ar1", theta={"mu_y": 0.0, "rho_y": 0.6}, n=n, S=3,
                     free=("rho_y",))
    return EstimationConfig(model=spec, k=2, m=24, max_evals=150, sim_seed=4)


def iid_data(config, seed=0):
    g = np.random.default_rng(seed)
    return simulate_ar1(config.model.theta, g.standard_normal(config.model.n))


# ---------------------------------------------------------------------------
# Jacobian
# ---------------------------------------------------------------------------


def test_jacobian_shape_steps_and_determinism():
    config = k2_config()
    ctx = prepare_context(config, iid_data(config))
    raw = np.array([0.3, 0.1, -0.4, 0.2])
    jac = moment_jacobian(raw, ctx)
    assert jac.G.shape == (2 * 24, 4)
    assert jac.n_struct == 1
    assert jac.one_sided == ()
    np.testing.assert_allclose(jac.steps, np.maximum(1e-5, 1e-5 * np.abs(raw)))
    jac2 = moment_jacobian(raw, ctx)
    np.testing.assert_array_equal(jac.G, jac2.G)


def test_jacobian_step_scale_consistency():
    # halving the step should barely move a smooth central difference
    config = k2_config()
    ctx = prepare_context(config, iid_data(config))
    raw = np.array([0.3, 0.1, -0.4, 0.2])
    g1 = moment_jacobian(raw, ctx, step_scale=1.0).G
    g2 = moment_jacobian(raw, ctx, step_scale=0.5).G
    denom = np.maximum(np.abs(g1), 1e-8)
    assert np.max(np.abs(g1 - g2) / denom) < 1e-3


def test_jacobian_one_sided_fallback(monkeypatch):
    config = iid_config()
    ctx = prepare_context(config, iid_data(config))

    def fake_psi(raw, _ctx):
        if raw[0] > 0.5:
            raise MixtureError("rejected")
        return np.array([np.exp(1j * raw[0]), np.exp(2j * raw[0])])

    monkeypatch.setattr(inf_mod, "_psi_at", fake_psi)
    grid = type(ctx.grid)(points=np.zeros((2, 2)), weights=np.full(2, 0.5),
                          generator="sobol", seed=0, scale_mean=np.zeros(2),
                          scale_sd=np.ones(2))
    ctx2 = type(ctx)(config=ctx.config, spec=ctx.spec, grid=grid,
                     psi_data=np.ones(2, complex), draws=ctx.draws, aux=None,
                     free_names=("mu_y",), x0=np.zeros(1))
    x = np.array([0.5])            # +h rejected, -h fine
    jac = moment_jacobian(x, ctx2)
    assert jac.one_sided == (0,)
    h = jac.steps[0]
    expect = (np.exp(1j * 0.5) - np.exp(1j * (0.5 - h))).real / h
    assert jac.G[0, 0] == pytest.approx(expect, rel=1e-9)

    def reject_off_center(raw, _ctx):
        if raw[0] != 0.5:
            raise MixtureError("no")
        return np.ones(2, complex)

    monkeypatch.setattr(inf_mod, "_psi_at", reject_off_center)
    with pytest.raises(InferenceError):
        moment_jacobian(x, ctx2)


def test_jacobian_inert_coordinate_gives_zero_column(monkeypatch):
    config = iid_config()
    ctx = prepare_context(config, iid_data(config))

    def ignores_second(raw, _ctx):
        return np.array([np.exp(1j * raw[0]), np.exp(-2j * raw[0])])

    monkeypatch.setattr(inf_mod, "_psi_at", ignores_second)
    grid = type(ctx.grid)(points=np.zeros((2, 2)), weights=np.full(2, 0.5),
                          generator="sobol", seed=0, scale_mean=np.zeros(2),
                          scale_sd=np.ones(2))
    ctx2 = type(ctx)(config=ctx.config, spec=ctx.spec, grid=grid,
                     psi_data=np.ones(2, complex), draws=ctx.draws, aux=None,
                     free_names=("mu_y",), x0=np.zeros(1))
    jac = moment_jacobian(np.array([0.1, 3.0]), ctx2)
    np.testing.assert_array_equal(jac.G[:, 1], 0.0)
    assert np.any(jac.G[:, 0] != 0.0)


# ---------------------------------------------------------------------------
# bootstrap
# ---------------------------------------------------------------------------


def test_default_block_len_cube_root():
    assert default_block_len(1000) == 10
    assert default_block_len(999) == 10
    assert default_block_len(8) == 2


def test_bootstrap_validation():
    config = iid_config()
    y = iid_data(config)
    ctx = prepare_context(config, y)
    with pytest.raises(InferenceError):
        block_bootstrap_se(y, ctx.x0, ctx, B=0)
    with pytest.raises(InferenceError):
        block_bootstrap_se(y, ctx.x0, ctx, B=5, block_len=0)
    with pytest.raises(InferenceError):
        block_bootstrap_se(y, ctx.x0, ctx, B=5, block_len=400)


def test_bootstrap_deterministic_in_seed():
    config = iid_config()
    y = iid_data(config)
    ctx = prepare_context(config, y)
    res = estimate(config, y, ctx=ctx)
    a = block_bootstrap_se(y, res.raw, ctx, B=20, seed=1)
    b = block_bootstrap_se(y, res.raw, ctx, B=20, seed=1)
    np.testing.assert_array_equal(a.se_raw, b.se_raw)
    np.testing.assert_array_equal(a.cov_scores, b.cov_scores)
    c = block_bootstrap_se(y, res.raw, ctx, B=20, seed=2)
    assert not np.array_equal(a.se_raw, c.se_raw)
    assert a.block_len == default_block_len(400)
    assert not a.singular


def test_bootstrap_reuses_supplied_jacobian():
    config = iid_config()
    y = iid_data(config)
    ctx = prepare_context(config, y)
    res = estimate(config, y, ctx=ctx)
    jac = moment_jacobian(res.raw, ctx)
    a = block_bootstrap_se(y, res.raw, ctx, B=8, seed=3, jacobian=jac)
    b = block_bootstrap_se(y, res.raw, ctx, B=8, seed=3)
    np.testing.assert_array_equal(a.se_raw, b.se_raw)
    assert a.jacobian is jac


def test_bootstrap_single_replicate_gives_zero_se():
    config = iid_config(n=120)
    y = iid_data(config)
    ctx = prepare_context(config, y)
    res = estimate(config, y, ctx=ctx)
    boot = block_bootstrap_se(y, res.raw, ctx, B=1)
    np.testing.assert_array_equal(boot.cov_scores, 0.0)
    np.testing.assert_array_equal(boot.se_raw, 0.0)


def test_bootstrap_iid_matches_textbook_se():
    """With unit blocks on iid data, the location SE must sit near sd/sqrt(n).

    S=25 keeps simulation noise small and L=0 keeps the CF estimator of the
    mean close to efficient, so the textbook oracle applies at 15 percent.
    """
    spec = ModelSpec(kind="ar1", theta={"mu_y": 0.2, "rho_y": 0.0}, n=400,
                     S=25, L=0, free=("mu_y",))
    config = EstimationConfig(model=spec, k=1, m=32, max_evals=150,
                              f_tol=1e-10, sim_seed=2)
    y = iid_data(config, seed=11)
    ctx = prepare_context(config, y)
    res = estimate(config, y, ctx=ctx)
    boot = block_bootstrap_se(y, res.raw, ctx, B=500, block_len=1)
    textbook = y.std(ddof=1) / math.sqrt(400)
    assert boot.se["mu_y"] == pytest.approx(textbook, rel=0.15)


def test_bootstrap_doubling_b_is_stable():
    config = k2_config()
    y = iid_data(config)
    ctx = prepare_context(config, y)
    res = estimate(config, y, ctx=ctx)
    jac = moment_jacobian(res.raw, ctx)
    one = block_bootstrap_se(y, res.raw, ctx, B=150, seed=4, jacobian=jac)
    two = block_bootstrap_se(y, res.raw, ctx, B=300, seed=4, jacobian=jac)
    rel = np.abs(two.se_raw - one.se_raw) / one.se_raw
    assert np.max(rel) < 0.10


def test_bootstrap_bounded_scale_chain_rule():
    config = k2_config()
    y = iid_data(config)
    ctx = prepare_context(config, y)
    res = estimate(config, y, ctx=ctx)
    boot = block_bootstrap_se(y, res.raw, ctx, B=12, seed=5)
    lo, hi = ctx.spec.bounds["rho_y"]
    h = 1e-6
    deriv = (to_bounded(res.raw[0] + h, lo, hi) - to_bounded(res.raw[0] - h, lo, hi)) / (2 * h)
    assert boot.se["rho_y"] == pytest.approx(abs(deriv) * boot.se_raw[0], rel=1e-12)
    assert set(boot.se) == {"rho_y"}
    assert boot.se_raw.shape == (4,)


def test_bootstrap_panel_resamples_units():
    spec = ModelSpec(kind="tobit_panel",
                     theta={"rho": 0.5, "theta1": -1.0, "theta2": 1.0},
                     n=40, S=2, panel=PanelShape(T=4, burn_in=5))
    config = EstimationConfig(model=spec, k=1, m=16, max_evals=100, sim_seed=6)
    data = draw_mc_data(config, "gaussian", 0)
    ctx = prepare_context(config, data)
    res = estimate(config, data, ctx=ctx)
    a = block_bootstrap_se(data, res.raw, ctx, B=6, seed=1)
    b = block_bootstrap_se(data, res.raw, ctx, B=6, seed=1)
    np.testing.assert_array_equal(a.se_raw, b.se_raw)
    assert set(a.se) == {"rho", "theta1", "theta2"}
    assert np.all(np.isfinite(a.se_raw))


# ---------------------------------------------------------------------------
# functionals
# ---------------------------------------------------------------------------


def test_functional_se_unit_gradient_is_coordinate_se():
    config = k2_config()
    y = iid_data(config)
    ctx = prepare_context(config, y)
    res = estimate(config, y, ctx=ctx)
    boot = block_bootstrap_se(y, res.raw, ctx, B=10, seed=7)
    for j in range(res.raw.size):
        e = np.zeros(res.raw.size)
        e[j] = 1.0
        assert functional_se(res, e, boot) == pytest.approx(boot.se_raw[j], abs=1e-15)
    with pytest.raises(InferenceError):
        functional_se(res, np.zeros(res.raw.size + 1), boot)


# ---------------------------------------------------------------------------
# ill-posedness
# ---------------------------------------------------------------------------


def test_illposedness_positive_on_k2():
    config = k2_config()
    y = iid_data(config)
    ctx = prepare_context(config, y)
    res = estimate(config, y, ctx=ctx)
    jac = moment_jacobian(res.raw, ctx)
    diag = illposedness_diagnostic(jac, ctx.grid.weights, config.floor)
    assert diag.lambda_min > 0
    assert not diag.degenerate
    # eigenvalue interlacing: the full minimum cannot exceed the block minimum
    assert diag.lambda_min_full <= diag.lambda_min + 1e-15
    assert diag.bound_tv == 1.0 / (math.sqrt(diag.lambda_min) * config.floor)
    assert diag.bound_sup == diag.bound_tv / config.floor


def test_illposedness_rank_deficient_warns_and_zeroes():
    G = np.zeros((8, 3))
    G[:, 0] = np.linspace(1, 2, 8)
    G[:, 1] = np.linspace(-1, 1, 8)
    G[:, 2] = G[:, 1]            # duplicated mixture direction
    jac = MomentJacobian(G=G, steps=np.full(3, 1e-5), n_struct=1)
    with pytest.warns(IllPosedWarning):
        diag = illposedness_diagnostic(jac, np.full(4, 0.25), 0.5)
    assert diag.lambda_min == 0.0
    assert diag.degenerate
    assert diag.bound_tv == math.inf and diag.bound_sup == math.inf


def test_illposedness_input_checks():
    jac = MomentJacobian(G=np.ones((4, 2)), steps=np.full(2, 1e-5), n_struct=1)
    with pytest.raises(InferenceError):
        illposedness_diagnostic(jac, np.full(2, 0.5), 0.0)
    with pytest.raises(InferenceError):
        illposedness_diagnostic(jac, np.full(3, 1 / 3), 0.5)
    all_struct = MomentJacobian(G=np.ones((4, 2)), steps=np.full(2, 1e-5), n_struct=2)
    with pytest.raises(InferenceError):
        illposedness_diagnostic(all_struct, np.full(2, 0.5), 0.5)


def test_jacobian_rejects_nonfinite():
    with pytest.raises(InferenceError):
        MomentJacobian(G=np.array([[1.0, np.nan]]), steps=np.ones(2), n_struct=1)


def test_inference_report_round_trip():
    config = k2_config()
    y = iid_data(config)
    ctx = prepare_context(config, y)
    res = estimate(config, y, ctx=ctx)
    boot = block_bootstrap_se(y, res.raw, ctx, B=5, seed=9)
    diag = illposedness_diagnostic(boot.jacobian, ctx.grid.weights, config.floor)
    rep = inference_report(boot, diag)
    assert rep["se"]["rho_y"] == boot.se["rho_y"]
    assert rep["lambda_min"] == diag.lambda_min
    assert rep["sup_bound"] == diag.bound_sup
    assert rep["B"] == 5 and rep["seeds"] == {"bootstrap": 9}
    import json
    json.dumps(rep)
