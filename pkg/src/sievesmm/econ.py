"""Consumption-based counterfactuals for the linear-variance SV model.

The risk-free rate is available in closed form up to one expectation over the
chi-square variance innovation, handled by Gauss-Hermite quadrature in the
underlying normal.  The welfare cost of fluctuations is simulation based.
All formulas take the shock distribution as a fitted mixture; heavy-tail
components have no moment generating function, so the rate calculators
refuse them outright.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import roots_hermitenorm

from .dgp_sim import (PURPOSE_VARIANCE_PATH, PURPOSE_WELFARE, base_stream,
                      simulate_sv_linear)
from .mixture import MixtureParams
from .mixture import sample as mixture_sample


class EconError(RuntimeError):
    pass


class UnsupportedMGFError(EconError):
    """Raised when a tail component makes E[exp(u e)] infinite."""


class DivergenceError(EconError):
    pass


@dataclass(frozen=True)
class PreferenceParams:
    """CRRA preferences: risk aversion gamma, time-preference rate a with
    discount factor delta = exp(-a), plus simulation sizes for the welfare
    calculation."""

    gamma: float
    a: float
    horizon: int = 5000
    reps: int = 1000

    def __post_init__(self):
        if not (self.gamma >= 0.0 and math.isfinite(self.gamma)):
            raise EconError("gamma must be a finite nonnegative number")
        if not (self.a > 0.0 and math.isfinite(self.a)):
            raise EconError("time-preference rate must be positive (0 < delta < 1)")
        if self.horizon < 1 or self.reps < 1:
            raise EconError("horizon and reps must be at least 1")

    @property
    def delta(self) -> float:
        return math.exp(-self.a)

    @classmethod
    def from_discount(cls, gamma: float, delta: float, **kw) -> "PreferenceParams":
        if not (0.0 < delta < 1.0):
            raise EconError("discount factor must lie in (0, 1)")
        return cls(gamma=gamma, a=-math.log(delta), **kw)


def _require_gaussian_only(p: MixtureParams) -> None:
    if p.tail_weight > 0.0:
        raise UnsupportedMGFError(
            "mixture carries tail weight; its MGF does not exist, so the "
            "quadrature rate formula does not apply")


def _chi2_nodes(quad_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    # chi-square(1) as the law of z^2, z standard normal on Hermite nodes
    z, w = roots_hermitenorm(quad_nodes)
    return z * z, w / w.sum()


def _log_mixture_mgf(p: MixtureParams, u: np.ndarray) -> np.ndarray:
    """log E[exp(u e)] for the Gaussian part, log-sum-exp over components."""
    k = p.k
    w = p.weights[:k]
    expo = p.locations[:k] * u[..., None] + 0.5 * (p.scales[:k] ** 2) * (u ** 2)[..., None]
    m = np.max(expo, axis=-1)
    return m + np.log(np.sum(w * np.exp(expo - m[..., None]), axis=-1))


def _sigma_params(theta: dict) -> tuple[float, float, float]:
    try:
        return tuple(float(theta[nm]) for nm in ("mu_sigma", "rho_sigma", "kappa_sigma"))
    except KeyError as exc:
        raise EconError(f"theta is missing {exc.args[0]}") from None


def _log_expected_mgf(p, gam, s2_next, wq):
    """log E_q[ sum_j w_j exp(-gam mu_j s + gam^2 sig_j^2 s^2 / 2) ]."""
    neg = int(np.count_nonzero(s2_next < 0.0))
    if neg:
        warnings.warn(f"variance went negative at {neg} quadrature points; floored at 0",
                      RuntimeWarning)
        s2_next = np.maximum(s2_next, 0.0)
    inner = _log_mixture_mgf(p, -gam * np.sqrt(s2_next))
    m = np.max(inner, axis=-1)
    return m + np.log(np.sum(wq * np.exp(inner - m[..., None]), axis=-1))


def risk_free_rate(theta: dict, p: MixtureParams, pref: PreferenceParams,
                   dc_t, sigma2_t, *, quad_nodes: int = 64,
                   growth_units: float = 1.0):
    """One-period log risk-free rate given today's growth and variance state.

    r_t = a + g (mu_c + rho_c dc_t) - log sum_j w_j E[exp(-g mu_j s + g^2 sig_j^2 s^2 / 2)]
    with s^2 = mu_sigma + rho_sigma sigma2_t + kappa_sigma (e2 - 1), e2 chi-square(1),
    and g = gamma / growth_units.  Pass growth_units=100 when theta was
    estimated on growth rates in percent; the returned rate is always in log
    units per period.  Scalar in, scalar out; arrays broadcast.
    """
    _require_gaussian_only(p)
    if quad_nodes < 8:
        raise EconError("quad_nodes must be at least 8")
    mu_s, rho_s, kap = _sigma_params(theta)
    gam = pref.gamma / growth_units
    mu_c = float(theta.get("mu_c", 0.0))
    rho_c = float(theta.get("rho_c", 0.0))
    dc = np.asarray(dc_t, dtype=float)
    s2 = np.asarray(sigma2_t, dtype=float)
    dc_b, s2_b = np.broadcast_arrays(dc, s2)
    e2, wq = _chi2_nodes(quad_nodes)
    s2_next = mu_s + rho_s * s2_b[..., None] + kap * (e2 - 1.0)
    log_E = _log_expected_mgf(p, gam, s2_next, wq)
    r = pref.a + gam * (mu_c + rho_c * dc_b) - log_E
    if np.isscalar(dc_t) and np.isscalar(sigma2_t):
        return float(r)
    return r


def stationary_variance_draws(theta: dict, n_draws: int, *, burn: int = 1000,
                              seed: int = 0) -> np.ndarray:
    """Simulate the variance recursion to (approximate) stationarity."""
    g = base_stream(seed, PURPOSE_VARIANCE_PATH, 0)
    e2 = g.standard_normal(burn + n_draws) ** 2
    path = simulate_sv_linear(theta, np.zeros(burn + n_draws), e2)
    return path.sigma2[burn:]


def uncertainty_component(theta: dict, p: MixtureParams, gamma: float, *,
                          quad_nodes: int = 64, n_draws: int = 100_000,
                          burn: int = 1000, seed: int = 0,
                          growth_units: float = 1.0) -> float:
    """Uncertainty part of the risk-free rate, annualized percent.

    Isolates -log E[exp(-g s e)] from the rate, averages it over simulated
    stationary variance states, and scales by 12 months and 100 for percent.
    Negative output means uncertainty lowers the rate (precautionary saving).
    """
    _require_gaussian_only(p)
    if quad_nodes < 8:
        raise EconError("quad_nodes must be at least 8")
    mu_s, rho_s, kap = _sigma_params(theta)
    gam = gamma / growth_units
    s2_draws = stationary_variance_draws(theta, n_draws, burn=burn, seed=seed)
    e2, wq = _chi2_nodes(quad_nodes)
    total = 0.0
    chunk = 10_000  # keeps the (chunk, nodes, components) exponent array small
    for i in range(0, s2_draws.shape[0], chunk):
        s2_now = s2_draws[i:i + chunk]
        s2_next = mu_s + rho_s * s2_now[:, None] + kap * (e2 - 1.0)
        total += float(np.sum(-_log_expected_mgf(p, gam, s2_next, wq)))
    return 12.0 * 100.0 * total / s2_draws.shape[0]


def uncertainty_table(theta: dict, p: MixtureParams, gammas, **kw) -> list[dict]:
    return [{"gamma": float(g),
             "effect_annualized_pct": uncertainty_component(theta, p, float(g), **kw)}
            for g in gammas]


# ---------------------------------------------------------------------------
# welfare cost of fluctuations
# ---------------------------------------------------------------------------


def welfare_cost(theta: dict, p: MixtureParams, pref: PreferenceParams, *,
                 horizon: int | None = None, reps: int | None = None,
                 seed: int = 0, growth_units: float = 1.0,
                 process: str = "growth") -> float:
    """Percent consumption compensation lambda equating expected discounted
    utility of risky consumption, scaled up by (1 + lambda), with the utility
    of the expected path.

    process="growth" compounds model output into levels, C_t = prod exp(dc_s);
    process="level" reads the model output as log level deviations directly,
    the textbook iid setting.  Utility sums that overflow raise
    DivergenceError; a deterministic path returns exactly 0.
    """
    gamma = pref.gamma
    if abs(gamma - 1.0) < 1e-12:
        raise EconError("gamma = 1 (log utility) is not supported")
    if process not in ("growth", "level"):
        raise EconError("process must be 'growth' or 'level'")
    H = pref.horizon if horizon is None else int(horizon)
    R = pref.reps if reps is None else int(reps)
    if H < 1000:
        raise EconError("welfare horizon must be at least 1000 periods")
    if R < 1:
        raise EconError("need at least one replication")

    k = p.k
    sum_upow = np.zeros(H)
    sum_C = np.zeros(H)
    with np.errstate(over="ignore", invalid="ignore"):
        for r in range(R):
            g = base_stream(seed, PURPOSE_WELFARE, r)
            nu = g.random(H)
            z = g.standard_normal((H, k))
            nu_l = g.random(H)
            nu_r = g.random(H)
            e2 = g.standard_normal(H) ** 2
            eps = mixture_sample(p, nu, z, nu_l, nu_r)
            path = simulate_sv_linear(theta, eps, e2)
            dc = path.y / growth_units
            log_C = np.cumsum(dc) if process == "growth" else dc
            sum_upow += np.exp((1.0 - gamma) * log_C)
            sum_C += np.exp(log_C)
    mean_upow = sum_upow / R
    C_star = sum_C / R
    if not (np.all(np.isfinite(mean_upow)) and np.all(np.isfinite(C_star))):
        raise DivergenceError("utility sum is non-finite; gamma too large for "
                              "the simulated consumption range")
    disc = pref.delta ** np.arange(1, H + 1)
    A = float(disc @ mean_upow)
    with np.errstate(over="ignore"):
        B = float(disc @ np.exp((1.0 - gamma) * np.log(C_star)))
    if not (math.isfinite(A) and math.isfinite(B) and A > 0.0 and B > 0.0):
        raise DivergenceError("discounted utility is non-finite or non-positive")

    # root of ((1+lambda)^{1-gamma} A - B) / (1-gamma) in u = log(1+lambda);
    # strictly increasing in u, so [-10, 10] brackets any finite solution
    if gamma == 0.0:
        lam = B / A - 1.0
        return 100.0 * lam

    def F(u: float) -> float:
        t = math.exp(min((1.0 - gamma) * u, 700.0))
        return (t * A - B) / (1.0 - gamma)

    if F(0.0) == 0.0:
        return 0.0
    lo, hi = -10.0, 10.0
    if not (F(lo) < 0.0 < F(hi)):
        raise DivergenceError("could not bracket the welfare compensation")
    u = brentq(F, lo, hi, xtol=1e-14, rtol=8.9e-16)
    return 100.0 * (math.exp(u) - 1.0)


def welfare_table(theta: dict, p: MixtureParams, gammas, a: float, **kw) -> list[dict]:
    out = []
    for g in gammas:
        pref = PreferenceParams(gamma=float(g), a=a)
        out.append({"gamma": float(g), "lambda_pct": welfare_cost(theta, p, pref, **kw)})
    return out
