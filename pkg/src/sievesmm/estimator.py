"""Characteristic-function matching with frozen common random numbers.

The estimation pipeline freezes everything stochastic up front (data CF, grid,
base draws, auxiliary parameters), so the objective is a deterministic
function of the free parameter vector and the simplex search sees no
simulation noise.  The Monte-Carlo harness replays the whole pipeline over
independently drawn datasets with (master, replication)-keyed seeds.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from .aux_garch import AuxModelError, GarchParams, filter_garch11, fit_garch11
from .cf_moments import (CFGrid, EmbeddedSeries, build_cf_grid, cf_distance,
                         empirical_cf, lag_embed)
from .dgp_sim import (PURPOSE_DATA, PURPOSE_DATA_VOL, BaseDraws, ModelSpec,
                      SimulationError, base_stream, draw_base,
                      draw_tobit_regressors, simulate_ar1, simulate_for_estimation,
                      simulate_sv_linear, simulate_sv_lognormal,
                      simulate_tobit_panel, standardized_gev_density,
                      standardized_gev_sample, standardized_t5_density,
                      standardized_t5_sample)
from .mixture import (MixtureError, MixtureParams, RawMixtureParams,
                      bandwidth_floor, density, mixture_free_count,
                      raw_from_free, sample as mixture_sample, transform_params)
from .optim import OptimError, direct_search, nelder_mead

NAMED_TRUTHS = ("gev", "student_t5", "gaussian")

_EXP_CAP = 50.0  # one-sided transforms saturate instead of overflowing


class EstimationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# bounded <-> free coordinates for the structural parameters
# ---------------------------------------------------------------------------


def to_bounded(x: float, lo: float, hi: float) -> float:
    if np.isfinite(lo) and np.isfinite(hi):
        return lo + (hi - lo) * float(expit(x))
    if np.isfinite(lo):
        return lo + math.exp(min(x, _EXP_CAP))
    if np.isfinite(hi):
        return hi - math.exp(min(x, _EXP_CAP))
    return float(x)


def to_free(theta: float, lo: float, hi: float) -> float:
    if np.isfinite(lo) and np.isfinite(hi):
        u = (theta - lo) / (hi - lo)
        u = min(max(u, 1e-12), 1.0 - 1e-12)
        return math.log(u / (1.0 - u))
    if np.isfinite(lo):
        return math.log(max(theta - lo, 1e-10))
    if np.isfinite(hi):
        return math.log(max(hi - theta, 1e-10))
    return float(theta)


# ---------------------------------------------------------------------------
# configuration and result types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EstimationConfig:
    """Everything needed to run one estimation except the data itself."""

    model: ModelSpec
    k: int
    enable_tails: bool = False
    impose_mean_zero: bool = True
    impose_unit_variance: bool = True
    floor_c: float = 1.0
    floor_b: float = 2.0
    sigma_floor: float | None = None
    m: int = 128
    generator: str = "sobol"
    grid_seed: int = 0
    sim_seed: int = 1
    method: str = "nelder_mead"  # nelder_mead | direct_then_nm
    max_evals: int = 600
    f_tol: float = 1e-8
    restarts: int = 0
    step: float = 0.25
    direct_budget: int = 50
    direct_width: float = 2.0

    def __post_init__(self):
        if self.k < 1 or self.m < 1 or self.max_evals < 1 or self.direct_budget < 1:
            raise EstimationError("counts must be positive")
        if self.f_tol <= 0 or self.step <= 0 or self.direct_width <= 0:
            raise EstimationError("tolerances must be positive")
        if self.method not in ("nelder_mead", "direct_then_nm"):
            raise EstimationError("method must be nelder_mead or direct_then_nm")
        if self.restarts < 0:
            raise EstimationError("restarts must be >= 0")

    @property
    def floor(self) -> float:
        if self.sigma_floor is not None:
            return self.sigma_floor
        return bandwidth_floor(self.k, b=self.floor_b, c=self.floor_c)

    def mixture_flags(self) -> dict:
        return {"impose_mean_zero": self.impose_mean_zero,
                "impose_unit_variance": self.impose_unit_variance,
                "enable_tails": self.enable_tails}


@dataclass(frozen=True, eq=False)
class EstimationResult:
    theta: dict
    mixture: MixtureParams
    raw: np.ndarray
    objective: float
    n_eval: int
    converged: bool
    trace: tuple
    aux: GarchParams | None
    seeds: dict
    eta_realized: float

    def to_json_dict(self) -> dict:
        return {
            "theta": {k: float(v) for k, v in self.theta.items()},
            "mixture": self.mixture.to_json_dict(),
            "raw": [float(v) for v in self.raw],
            "objective": float(self.objective),
            "n_eval": int(self.n_eval),
            "converged": bool(self.converged),
            "trace": [float(v) for v in self.trace],
            "aux": None if self.aux is None else self.aux.to_json_dict(),
            "seeds": {k: int(v) for k, v in self.seeds.items()},
            "eta_realized": float(self.eta_realized),
        }


@dataclass(frozen=True, eq=False)
class SmmContext:
    """Frozen per-estimation state: everything the objective reads."""

    config: EstimationConfig
    spec: ModelSpec
    grid: CFGrid
    psi_data: np.ndarray
    draws: BaseDraws
    aux: GarchParams | None
    free_names: tuple
    x0: np.ndarray

    @property
    def n_struct(self) -> int:
        return len(self.free_names)


# ---------------------------------------------------------------------------
# embeddings
# ---------------------------------------------------------------------------


def _embed_ts(y: np.ndarray, sigma_aux: np.ndarray | None, L: int,
              mode: str) -> EmbeddedSeries:
    if sigma_aux is None:
        return lag_embed([y], L)
    n = y.shape[0]
    cols = [y[L - l: n - l] for l in range(L + 1)]
    if mode == "levels":
        cols += [sigma_aux[L - l: n - l] for l in range(L + 1)]
    elif mode == "logs":
        ls = np.log(sigma_aux)
        cols += [ls[L - l: n - l] for l in range(L + 1)]
    else:  # level at lag 0, log at the lags
        cols.append(sigma_aux[L:n])
        ls = np.log(sigma_aux)
        cols += [ls[L - l: n - l] for l in range(1, L + 1)]
    return EmbeddedSeries(rows=np.column_stack(cols), L=L)


def _embed_panel(y: np.ndarray, x: np.ndarray, L: int) -> np.ndarray:
    """Within-unit lag blocks (y_t..y_{t-L}, x_t..x_{t-L}), pooled over units
    and periods."""
    T = y.shape[1]
    if T <= L:
        raise EstimationError("panel needs T > L")
    cols = [y[:, L - l: T - l] for l in range(L + 1)]
    cols += [x[:, L - l: T - l] for l in range(L + 1)]
    stacked = np.stack(cols, axis=2)
    return stacked.reshape(-1, 2 * (L + 1))


# ---------------------------------------------------------------------------
# objective
# ---------------------------------------------------------------------------


def decode_params(raw: np.ndarray, ctx: SmmContext) -> tuple[dict, MixtureParams]:
    """Split the free vector into bounded structural values and a valid
    mixture; raises MixtureError when the mixture part cannot be mapped."""
    raw = np.asarray(raw, dtype=float)
    theta = dict(ctx.spec.theta)
    for j, name in enumerate(ctx.free_names):
        lo, hi = ctx.spec.bounds[name]
        theta[name] = to_bounded(raw[j], lo, hi)
    rm = raw_from_free(raw[ctx.n_struct:], ctx.config.k, **ctx.config.mixture_flags())
    p = transform_params(rm, ctx.config.k, ctx.config.floor, b=ctx.config.floor_b)
    return theta, p


def simulated_cf(theta: dict, p: MixtureParams, ctx: SmmContext) -> np.ndarray:
    """Average CF over the S simulated samples at the given parameters."""
    spec = ctx.spec.with_theta(theta)
    sim = simulate_for_estimation(spec, p, ctx.draws)
    y = sim["y"]
    S = y.shape[0]
    acc = None
    for s in range(S):
        if spec.kind == "tobit_panel":
            emb = _embed_panel(y[s], spec.exog, spec.L)
        else:
            sig = filter_garch11(y[s], ctx.aux) if ctx.aux is not None else None
            emb = _embed_ts(y[s], sig, spec.L, spec.aux_cf_mode)
        psi = empirical_cf(emb, ctx.grid)
        acc = psi if acc is None else acc + psi
    return acc / S


def objective(raw: np.ndarray, ctx: SmmContext) -> float:
    """Weighted squared CF distance at a free-parameter vector; +inf when the
    parameter transform rejects the point, so the simplex stays total."""
    try:
        theta, p = decode_params(raw, ctx)
        psi_sim = simulated_cf(theta, p, ctx)
    except (MixtureError, SimulationError):
        return math.inf
    val = cf_distance(ctx.psi_data, psi_sim, ctx.grid.weights)
    return float(val) if np.isfinite(val) else math.inf


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------


def _as_panel_data(data) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(data, dict):
        y, x = data["y"], data["x"]
    else:
        y, x = data
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if y.shape != x.shape or y.ndim != 2:
        raise EstimationError("panel data needs matching n x T outcome and regressor arrays")
    return y, x


def prepare_context(config: EstimationConfig, data) -> SmmContext:
    """Fit-and-freeze the auxiliary model, embed the data, build the scaled
    grid, compute the data CF once, and draw the base randomness."""
    spec = config.model
    if spec.kind == "tobit_panel":
        y, x = _as_panel_data(data)
        if y.shape[0] != spec.n or y.shape[1] != spec.panel.T:
            raise EstimationError("panel data shape disagrees with the model spec")
        spec = replace(spec, exog=x)
        aux = None
        emb_data = _embed_panel(y, x, spec.L)
    else:
        y = np.asarray(data, dtype=float)
        if y.ndim != 1:
            raise EstimationError("time-series data must be one-dimensional")
        if y.shape[0] != spec.n:
            raise EstimationError(f"data length {y.shape[0]} disagrees with spec n={spec.n}")
        if y.shape[0] <= spec.L + 10:
            raise EstimationError("data too short for the lag structure")
        aux = fit_garch11(y, spec.aux_model) if spec.aux_model else None
        sig = filter_garch11(y, aux) if aux is not None else None
        emb_data = _embed_ts(y, sig, spec.L, spec.aux_cf_mode)

    rows = emb_data.rows if isinstance(emb_data, EmbeddedSeries) else emb_data
    scale_mean = rows.mean(axis=0)
    scale_sd = np.maximum(rows.std(axis=0), 1e-12)
    grid = build_cf_grid(config.m, rows.shape[1], generator=config.generator,
                         seed=config.grid_seed, scale=(scale_mean, scale_sd))
    psi_data = empirical_cf(emb_data, grid)
    draws = draw_base(spec, config.k, config.sim_seed)

    x0_struct = [to_free(spec.theta[name], *spec.bounds[name]) for name in spec.free]
    n_mix = mixture_free_count(config.k, **config.mixture_flags())
    x0 = np.concatenate([np.asarray(x0_struct, dtype=float), np.zeros(n_mix)])
    return SmmContext(config=config, spec=spec, grid=grid, psi_data=psi_data,
                      draws=draws, aux=aux, free_names=tuple(spec.free), x0=x0)


def estimate(config: EstimationConfig, data, *,
             ctx: SmmContext | None = None) -> EstimationResult:
    """Full pipeline; pure in (config, data).  A context prepared from the
    same inputs may be passed to skip re-preparation."""
    if ctx is None:
        ctx = prepare_context(config, data)

    def f(raw):
        return objective(raw, ctx)

    x0 = ctx.x0
    if config.method == "direct_then_nm":
        box = np.stack([x0 - config.direct_width, x0 + config.direct_width], axis=1)
        x0 = direct_search(f, box, config.direct_budget)
    res = nelder_mead(f, x0, step=config.step, f_tol=config.f_tol,
                      max_evals=config.max_evals, restarts=config.restarts)
    theta, p = decode_params(res.x, ctx)
    theta_hat = {name: theta[name] for name in ctx.free_names}
    return EstimationResult(theta=theta_hat, mixture=p, raw=res.x,
                            objective=res.fun, n_eval=res.n_eval,
                            converged=res.converged, trace=res.trace,
                            aux=ctx.aux,
                            seeds={"sim": config.sim_seed, "grid": config.grid_seed},
                            eta_realized=res.spread)


# ---------------------------------------------------------------------------
# Monte-Carlo harness
# ---------------------------------------------------------------------------


def _truth_draw(truth, g: np.random.Generator, shape) -> np.ndarray:
    flat = int(np.prod(shape))
    if isinstance(truth, MixtureParams):
        nu = g.random(flat)
        z = g.standard_normal((flat, truth.k))
        nu_l = g.random(flat)
        nu_r = g.random(flat)
        e = mixture_sample(truth, nu, z, nu_l, nu_r)
    elif truth == "gev":
        e = standardized_gev_sample(g.random(flat))
    elif truth == "student_t5":
        e = standardized_t5_sample(g, flat)
    elif truth == "gaussian":
        e = g.standard_normal(flat)
    else:
        raise EstimationError(f"unknown truth {truth!r}")
    return np.asarray(e).reshape(shape)


def truth_density(truth, e: np.ndarray) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    if isinstance(truth, MixtureParams):
        return density(truth, e)
    if truth == "gev":
        return standardized_gev_density(e)
    if truth == "student_t5":
        return standardized_t5_density(e)
    if truth == "gaussian":
        return np.exp(-0.5 * e * e) / math.sqrt(2.0 * math.pi)
    raise EstimationError(f"unknown truth {truth!r}")


def replication_seed(master: int, r: int) -> int:
    """Estimation CRN seed for replication r; injective in (master, r) for
    r < 1_000_003."""
    return master * 1_000_003 + r + 1


def draw_mc_data(config: EstimationConfig, truth, r: int):
    """Dataset for replication r of a Monte-Carlo run, keyed by
    (config.sim_seed, r); the spec's theta acts as the true parameter."""
    spec = config.model
    master = config.sim_seed
    g = base_stream(master, PURPOSE_DATA, r)
    if spec.kind == "tobit_panel":
        m, T = spec.panel.burn_in, spec.panel.T
        e = _truth_draw(truth, g, (spec.n, m + T))
        x = draw_tobit_regressors(spec.n, T, replication_seed(master, r),
                                  mean=spec.panel.x_mean,
                                  autocorr=spec.panel.x_autocorr,
                                  var=spec.panel.x_var)
        y = simulate_tobit_panel(spec.theta, x, e, m)
        return {"y": y, "x": x}
    e = _truth_draw(truth, g, (spec.n,))
    if spec.kind == "ar1":
        return simulate_ar1(spec.theta, e)
    g2 = base_stream(master, PURPOSE_DATA_VOL, r)
    if spec.kind == "sv_lognormal":
        return simulate_sv_lognormal(spec.theta, e, g2.standard_normal(spec.n)).y
    return simulate_sv_linear(spec.theta, e, g2.standard_normal(spec.n) ** 2).y


@dataclass(frozen=True, eq=False)
class MonteCarloSummary:
    parameters: tuple
    true_values: dict
    mean: dict
    sd: dict
    sqrt_n_sd: dict
    n_fail: int
    R: int
    estimates: np.ndarray
    objectives: tuple
    density_grid: np.ndarray
    density_true: np.ndarray
    density_mean: np.ndarray
    density_q025: np.ndarray
    density_q975: np.ndarray

    def write_summary_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["parameter", "mean", "sd", "n_fail", "sqrt_n_sd"])
            for name in self.parameters:
                sd = self.sd[name]
                rsd = self.sqrt_n_sd[name]
                w.writerow([name, repr(self.mean[name]),
                            "" if math.isnan(sd) else repr(sd),
                            self.n_fail,
                            "" if math.isnan(rsd) else repr(rsd)])

    def write_density_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["e", "true", "mean", "q025", "q975"])
            for i, e in enumerate(self.density_grid):
                w.writerow([repr(float(e)), repr(float(self.density_true[i])),
                            repr(float(self.density_mean[i])),
                            repr(float(self.density_q025[i])),
                            repr(float(self.density_q975[i]))])


_MC_FAILURES = (EstimationError, MixtureError, SimulationError, OptimError, AuxModelError)


def _replication_or_none(args):
    config, truth, r = args
    try:
        return run_replication(config, truth, r)
    except _MC_FAILURES:
        return None


def monte_carlo(config: EstimationConfig, R: int, truth,
                grid_points: int = 201, grid_halfwidth: float = 5.0,
                threads: int = 1) -> MonteCarloSummary:
    """R independent datasets from the truth, one estimate each.

    Failures are counted and excluded from the averages.  Each replication is
    reproducible in isolation from (config.sim_seed, r), so the summary does
    not depend on ``threads``; results are reduced in replication order.
    """
    if R < 1:
        raise EstimationError("R must be >= 1")
    names = tuple(config.model.free)
    egrid = np.linspace(-grid_halfwidth, grid_halfwidth, grid_points)
    jobs = [(config, truth, r) for r in range(R)]
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_replication_or_none, jobs))
    else:
        results = [_replication_or_none(j) for j in jobs]
    rows, dens, objs = [], [], []
    n_fail = 0
    for res in results:
        if res is None:
            n_fail += 1
            continue
        rows.append([res.theta[name] for name in names])
        dens.append(density(res.mixture, egrid))
        objs.append(res.objective)
    if not rows:
        raise EstimationError("every replication failed")
    est = np.asarray(rows)
    dmat = np.asarray(dens)
    n_eff = config.model.n
    mean = {name: float(est[:, j].mean()) for j, name in enumerate(names)}
    if est.shape[0] > 1:
        sd = {name: float(est[:, j].std(ddof=1)) for j, name in enumerate(names)}
    else:
        sd = {name: math.nan for name in names}
    sqrt_n_sd = {name: (math.sqrt(n_eff) * sd[name] if not math.isnan(sd[name]) else math.nan)
                 for name in names}
    return MonteCarloSummary(
        parameters=names,
        true_values={name: float(config.model.theta[name]) for name in names},
        mean=mean, sd=sd, sqrt_n_sd=sqrt_n_sd,
        n_fail=n_fail, R=R, estimates=est, objectives=tuple(objs),
        density_grid=egrid,
        density_true=truth_density(truth, egrid),
        density_mean=dmat.mean(axis=0),
        density_q025=np.quantile(dmat, 0.025, axis=0),
        density_q975=np.quantile(dmat, 0.975, axis=0),
    )


def run_replication(config: EstimationConfig, truth, r: int) -> EstimationResult:
    """One Monte-Carlo replication, self-contained and rerunnable."""
    data = draw_mc_data(config, truth, r)
    cfg_r = replace(config, sim_seed=replication_seed(config.sim_seed, r))
    return estimate(cfg_r, data)
