"""Model simulators driven by pre-drawn base randomness.

Every stochastic input is drawn once per estimation from streams keyed by
(seed, purpose, sample index), so the map from parameters to simulated data is
deterministic and the optimizer sees a noiseless objective (common random
numbers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq
from scipy.signal import lfilter
from scipy.special import gamma as gamma_fn

from .mixture import MixtureParams, sample as mixture_sample

# stream namespaces; data/bootstrap/welfare live outside the estimation draws
PURPOSE_UNIFORM = 1
PURPOSE_NORMAL = 2
PURPOSE_TAIL_LEFT = 3
PURPOSE_TAIL_RIGHT = 4
PURPOSE_VOLSHOCK = 5
PURPOSE_DATA = 10
PURPOSE_DATA_VOL = 11
PURPOSE_REGRESSOR = 12
PURPOSE_BOOTSTRAP = 20
PURPOSE_WELFARE = 30
PURPOSE_VARIANCE_PATH = 31

SIGMA2_FLOOR_DEFAULT = 1e-12

_MODEL_KINDS = ("ar1", "sv_lognormal", "sv_linear", "tobit_panel")

_DEFAULT_THETA_NAMES = {
    "ar1": ("mu_y", "rho_y"),
    "sv_lognormal": ("mu_y", "rho_y", "mu_sigma", "rho_sigma", "kappa_sigma"),
    "sv_linear": ("mu_c", "rho_c", "mu_sigma", "rho_sigma", "kappa_sigma"),
    "tobit_panel": ("rho", "theta1", "theta2"),
}

_RHO_BAR = 0.99

_DEFAULT_BOUNDS = {
    "ar1": {"mu_y": (-np.inf, np.inf), "rho_y": (-_RHO_BAR, _RHO_BAR)},
    "sv_lognormal": {
        "mu_y": (-np.inf, np.inf), "rho_y": (-_RHO_BAR, _RHO_BAR),
        "mu_sigma": (-np.inf, np.inf), "rho_sigma": (-_RHO_BAR, _RHO_BAR),
        "kappa_sigma": (0.0, np.inf),
    },
    "sv_linear": {
        "mu_c": (-np.inf, np.inf), "rho_c": (-_RHO_BAR, _RHO_BAR),
        "mu_sigma": (0.0, np.inf), "rho_sigma": (0.0, _RHO_BAR),
        "kappa_sigma": (0.0, np.inf),
    },
    "tobit_panel": {
        "rho": (-_RHO_BAR, _RHO_BAR),
        "theta1": (-np.inf, np.inf), "theta2": (-np.inf, np.inf),
    },
}


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class PanelShape:
    T: int
    burn_in: int
    # regressor AR(1) design used by the Monte-Carlo data generator
    x_mean: float = 2.0
    x_autocorr: float = 0.3
    x_var: float = 2.0


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Which DGP, its named parameters, bounds, and moment configuration.

    ``exog`` holds the fixed regressor panel for the censored-panel model; it
    is observed data, shared between the real sample and every simulated one.
    """

    kind: str
    theta: dict
    n: int
    S: int
    L: int = 1
    free: tuple = ()
    bounds: dict = field(default_factory=dict)
    panel: PanelShape | None = None
    exog: np.ndarray | None = None
    aux_model: str | None = None          # None | garch | avgarch
    aux_cf_mode: str = "level0_log_lags"  # level0_log_lags | levels | logs
    long_sample: bool = False

    def __post_init__(self):
        if self.kind not in _MODEL_KINDS:
            raise SimulationError(f"unknown model kind {self.kind!r}")
        names = _DEFAULT_THETA_NAMES[self.kind]
        missing = [p for p in names if p not in self.theta]
        if missing:
            raise SimulationError(f"{self.kind} needs parameters {missing}")
        object.__setattr__(self, "theta", dict(self.theta))
        if not self.free:
            object.__setattr__(self, "free", tuple(names))
        merged = dict(_DEFAULT_BOUNDS[self.kind])
        merged.update(self.bounds)
        object.__setattr__(self, "bounds", merged)
        for p in self.free:
            if p not in names:
                raise SimulationError(f"unknown free parameter {p!r}")
        self._check_stationarity(self.theta)
        if self.kind == "tobit_panel":
            if self.panel is None:
                burn = math.ceil(2.0 * math.log(max(self.n, 2)))
                object.__setattr__(self, "panel", PanelShape(T=5, burn_in=burn))
            if self.exog is not None:
                x = np.asarray(self.exog, dtype=float)
                if x.shape != (self.n, self.panel.T):
                    raise SimulationError("exog panel must be n x T")
                object.__setattr__(self, "exog", x)
        if self.aux_model not in (None, "garch", "avgarch"):
            raise SimulationError("aux_model must be None, 'garch' or 'avgarch'")
        if self.aux_cf_mode not in ("level0_log_lags", "levels", "logs"):
            raise SimulationError("bad aux_cf_mode")
        if self.n < 2 or self.S < 1 or self.L < 0:
            raise SimulationError("need n >= 2, S >= 1, L >= 0")

    def _check_stationarity(self, theta: dict) -> None:
        for p, v in theta.items():
            lo, hi = self.bounds.get(p, (-np.inf, np.inf))
            if not (lo <= v <= hi):
                raise SimulationError(f"{p}={v} outside bounds [{lo}, {hi}]")
        for p in ("rho_y", "rho_sigma", "rho_c", "rho"):
            if p in theta and abs(theta[p]) >= 1.0:
                raise SimulationError(f"|{p}| must be < 1")

    def with_theta(self, theta: dict) -> "ModelSpec":
        return replace(self, theta={**self.theta, **theta})

    @property
    def sim_length(self) -> int:
        return self.n * self.S if self.long_sample else self.n

    @property
    def sim_samples(self) -> int:
        return 1 if self.long_sample else self.S


@dataclass(frozen=True)
class BaseDraws:
    """Common random numbers for one estimation run.

    Time-series shapes: nu (n, S), z (n, S, k), nu_l / nu_r (n, S), e2 (n, S).
    Panel shapes get a period axis: (units, m+T, S) and z (units, m+T, S, k).
    e2 is standard normal for the lognormal volatility model, chi-square(1)
    for the linear one, absent otherwise.
    """

    nu: np.ndarray
    z: np.ndarray
    nu_l: np.ndarray
    nu_r: np.ndarray
    e2: np.ndarray | None
    seed: int
    kind: str
    k: int


def base_stream(seed: int, purpose: int, s: int) -> np.random.Generator:
    """Independent Philox stream keyed by (seed, purpose, sample index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, purpose, s))))


def draw_base(spec: ModelSpec, k: int, seed: int) -> BaseDraws:
    """Fill every base array from keyed streams; identical across calls."""
    S = spec.sim_samples
    if spec.kind == "tobit_panel":
        per = spec.panel.T + spec.panel.burn_in
        shape = (spec.n, per)
    else:
        shape = (spec.sim_length,)

    def fill(purpose, extra=()):
        cols = []
        for s in range(S):
            g = base_stream(seed, purpose, s)
            cols.append(g.random(shape + extra) if purpose in (PURPOSE_UNIFORM, PURPOSE_TAIL_LEFT, PURPOSE_TAIL_RIGHT)
                        else g.standard_normal(shape + extra))
        return np.stack(cols, axis=len(shape))

    nu = fill(PURPOSE_UNIFORM)
    z = fill(PURPOSE_NORMAL, extra=(k,))
    nu_l = fill(PURPOSE_TAIL_LEFT)
    nu_r = fill(PURPOSE_TAIL_RIGHT)
    e2 = None
    if spec.kind == "sv_lognormal":
        e2 = fill(PURPOSE_VOLSHOCK)
    elif spec.kind == "sv_linear":
        e2 = fill(PURPOSE_VOLSHOCK) ** 2
    return BaseDraws(nu=nu, z=z, nu_l=nu_l, nu_r=nu_r, e2=e2, seed=seed,
                     kind=spec.kind, k=k)


# ---------------------------------------------------------------------------
# recursions
# ---------------------------------------------------------------------------


def simulate_ar1(theta: dict, e: np.ndarray, y0: float = 0.0) -> np.ndarray:
    """y_t = mu_y + rho_y y_{t-1} + e_t from y_0 (exact linear filter)."""
    rho = float(theta.get("rho_y", theta.get("rho", 0.0)))
    mu = float(theta.get("mu_y", theta.get("mu", 0.0)))
    if abs(rho) >= 1.0:
        raise SimulationError("|rho| must be < 1")
    e = np.asarray(e, dtype=float)
    out, _ = lfilter([1.0], [1.0, -rho], mu + e, zi=np.array([rho * y0]))
    return out


class SvLogPath(NamedTuple):
    y: np.ndarray
    sigma: np.ndarray
    clamped: int


def simulate_sv_lognormal(theta: dict, e1: np.ndarray, e2: np.ndarray,
                          init: float | None = None) -> SvLogPath:
    """y_t = mu_y + rho_y y_{t-1} + sigma_t e1_t with log sigma AR(1) in e2.

    Initialized at the volatility fixed point mu_sigma/(1-rho_sigma) and y_0=0
    unless ``init`` overrides the log-volatility start.  Overflowing log
    volatility is clamped with the count reported.
    """
    mu_s, rho_s, kap = (float(theta[p]) for p in ("mu_sigma", "rho_sigma", "kappa_sigma"))
    ls0 = mu_s / (1.0 - rho_s) if init is None else float(init)
    ls, _ = lfilter([1.0], [1.0, -rho_s], mu_s + kap * np.asarray(e2, dtype=float),
                    zi=np.array([rho_s * ls0]))
    clamp = 700.0  # exp overflow guard
    clamped = int(np.count_nonzero(ls > clamp))
    sigma = np.exp(np.minimum(ls, clamp))
    y = simulate_ar1({"mu_y": theta.get("mu_y", 0.0), "rho_y": theta.get("rho_y", 0.0)},
                     sigma * np.asarray(e1, dtype=float))
    return SvLogPath(y=y, sigma=sigma, clamped=clamped)


class SvLinearPath(NamedTuple):
    y: np.ndarray
    sigma2: np.ndarray
    floor_hits: int


def simulate_sv_linear(theta: dict, e1: np.ndarray, e2: np.ndarray,
                       init: float | None = None,
                       floor: float = SIGMA2_FLOOR_DEFAULT) -> SvLinearPath:
    """sigma2_t = mu_sigma + rho_sigma sigma2_{t-1} + kappa_sigma (e2_t - 1),
    floored at ``floor`` inside the recursion; y_t = mu_c + rho_c y_{t-1}
    + sigma_t e1_t."""
    mu_s, rho_s, kap = (float(theta[p]) for p in ("mu_sigma", "rho_sigma", "kappa_sigma"))
    if floor <= 0:
        raise SimulationError("sigma2 floor must be positive")
    e2 = np.asarray(e2, dtype=float)
    s0 = mu_s / (1.0 - rho_s) if init is None else float(init)
    innov = mu_s + kap * (e2 - 1.0)
    sig2, _ = lfilter([1.0], [1.0, -rho_s], innov, zi=np.array([rho_s * s0]))
    floor_hits = 0
    if np.any(sig2 < floor):
        # rerun with the floor applied inside the state recursion
        sig2 = np.empty_like(innov)
        prev = s0
        for t in range(innov.shape[0]):
            v = innov[t] + rho_s * prev
            if v < floor:
                v = floor
                floor_hits += 1
            sig2[t] = v
            prev = v
    y = simulate_ar1({"mu_y": theta.get("mu_c", 0.0), "rho_y": theta.get("rho_c", 0.0)},
                     np.sqrt(sig2) * np.asarray(e1, dtype=float))
    return SvLinearPath(y=y, sigma2=sig2, floor_hits=floor_hits)


def simulate_tobit_panel(theta: dict, x: np.ndarray, e: np.ndarray,
                         burn_in: int) -> np.ndarray:
    """Censored dynamic panel: y = (theta1 + theta2 x + u) 1{. >= 0} with
    u_t = rho u_{t-1} + e_t started at zero ``burn_in`` periods before the
    sample window."""
    rho = float(theta["rho"])
    if abs(rho) >= 1.0:
        raise SimulationError("|rho| must be < 1")
    if burn_in < 0:
        raise SimulationError("burn_in must be >= 0")
    x = np.asarray(x, dtype=float)
    e = np.asarray(e, dtype=float)
    n, T = x.shape
    if e.shape != (n, burn_in + T):
        raise SimulationError("shock panel must be units x (burn_in + T)")
    u = lfilter([1.0], [1.0, -rho], e, axis=1)
    ystar = float(theta["theta1"]) + float(theta["theta2"]) * x + u[:, burn_in:]
    return np.where(ystar >= 0.0, ystar, 0.0)


def simulate_for_estimation(spec: ModelSpec, p: MixtureParams, draws: BaseDraws):
    """Push base draws through the mixture sampler and the model recursion for
    each simulated sample; deterministic in (spec, p, draws).

    Returns dict with 'y' of shape (S, n) (or (S, units, T) for the panel) and
    the volatility path / diagnostics where the model has them.
    """
    if draws.kind != spec.kind:
        raise SimulationError("draws were made for a different model kind")
    S = spec.sim_samples
    if spec.kind == "tobit_panel":
        T, m = spec.panel.T, spec.panel.burn_in
        ys = np.empty((S, spec.n, T))
        x = spec.exog
        if x is None:
            raise SimulationError("tobit simulation needs the exog regressor panel")
        for s in range(S):
            e1 = mixture_sample(p, draws.nu[:, :, s].ravel(),
                                draws.z[:, :, s, :].reshape(-1, draws.k),
                                draws.nu_l[:, :, s].ravel(), draws.nu_r[:, :, s].ravel())
            e1 = e1.reshape(spec.n, m + T)
            ys[s] = simulate_tobit_panel(spec.theta, x, e1, m)
        return {"y": ys}

    n = spec.sim_length
    ys = np.empty((S, n))
    vol = np.empty((S, n))
    floor_hits = 0
    clamped = 0
    for s in range(S):
        e1 = mixture_sample(p, draws.nu[:, s], draws.z[:, s, :],
                            draws.nu_l[:, s], draws.nu_r[:, s])
        if spec.kind == "ar1":
            ys[s] = simulate_ar1(spec.theta, e1)
            vol[s] = 1.0
        elif spec.kind == "sv_lognormal":
            path = simulate_sv_lognormal(spec.theta, e1, draws.e2[:, s])
            ys[s], vol[s] = path.y, path.sigma
            clamped += path.clamped
        else:
            path = simulate_sv_linear(spec.theta, e1, draws.e2[:, s])
            ys[s], vol[s] = path.y, path.sigma2
            floor_hits += path.floor_hits
    out = {"y": ys}
    if spec.kind == "sv_lognormal":
        out["sigma"] = vol
        out["clamped"] = clamped
    elif spec.kind == "sv_linear":
        out["sigma2"] = vol
        out["floor_hits"] = floor_hits
    return out


def draw_tobit_regressors(n: int, T: int, seed: int, mean: float = 2.0,
                          autocorr: float = 0.3, var: float = 2.0) -> np.ndarray:
    """Stationary Gaussian AR(1) regressor panel, one independent row per
    unit, sampled from the regressor stream of ``seed``."""
    g = base_stream(seed, PURPOSE_REGRESSOR, 0)
    innov_sd = math.sqrt(var * (1.0 - autocorr ** 2))
    z = g.standard_normal((n, T))
    x0 = mean + math.sqrt(var) * z[:, 0]
    e = innov_sd * z[:, 1:]
    rows = lfilter([1.0], [1.0, -autocorr],
                   mean * (1.0 - autocorr) + e, axis=1,
                   zi=(autocorr * x0)[:, None])[0]
    return np.concatenate([x0[:, None], rows], axis=1)


# ---------------------------------------------------------------------------
# named shock distributions for Monte-Carlo truths
# ---------------------------------------------------------------------------


@lru_cache(maxsize=8)
def gev_shape_for_skewness(target: float = -0.9) -> float:
    """Shape parameter of the GEV whose skewness equals ``target``; solved by
    1-D root finding on the Gamma-moment expression (shape < 0, short left
    branch)."""

    def skew(xi):
        g1 = gamma_fn(1.0 - xi)
        g2 = gamma_fn(1.0 - 2.0 * xi)
        g3 = gamma_fn(1.0 - 3.0 * xi)
        num = g3 - 3.0 * g2 * g1 + 2.0 * g1 ** 3
        den = (g2 - g1 ** 2) ** 1.5
        return np.sign(xi) * num / den

    # right endpoint stays away from 0 where the moment ratio cancels to noise
    return brentq(lambda v: skew(v) - target, -0.95, -0.01, xtol=1e-13)


@lru_cache(maxsize=8)
def _gev_standardize_consts(xi: float) -> tuple[float, float]:
    g1 = gamma_fn(1.0 - xi)
    g2 = gamma_fn(1.0 - 2.0 * xi)
    mean = (g1 - 1.0) / xi
    var = (g2 - g1 * g1) / (xi * xi)
    return mean, math.sqrt(var)


def standardized_gev_sample(u: np.ndarray, xi: float | None = None) -> np.ndarray:
    """Inverse-transform GEV draws standardized to mean 0, variance 1."""
    if xi is None:
        xi = gev_shape_for_skewness()
    mean, sd = _gev_standardize_consts(xi)
    u = np.asarray(u, dtype=float)
    q = ((-np.log(u)) ** (-xi) - 1.0) / xi
    return (q - mean) / sd


def standardized_gev_density(e: np.ndarray, xi: float | None = None) -> np.ndarray:
    if xi is None:
        xi = gev_shape_for_skewness()
    mean, sd = _gev_standardize_consts(xi)
    x = np.asarray(e, dtype=float) * sd + mean
    z = 1.0 + xi * x
    out = np.zeros_like(x)
    ok = z > 0
    t = z[ok] ** (-1.0 / xi)
    out[ok] = sd * t ** (xi + 1.0) * np.exp(-t)
    return out


_T5_SCALE = math.sqrt(5.0 / 3.0)


def standardized_t5_sample(rng: np.random.Generator, size) -> np.ndarray:
    return rng.standard_t(5, size=size) / _T5_SCALE


def standardized_t5_density(e: np.ndarray) -> np.ndarray:
    x = np.asarray(e, dtype=float) * _T5_SCALE
    c = gamma_fn(3.0) / (gamma_fn(2.5) * math.sqrt(5.0 * math.pi))
    return _T5_SCALE * c * (1.0 + x * x / 5.0) ** -3.0
