"""Post-estimation uncertainty.

Numerical moment gradients reuse the estimation context unchanged, so the
finite differences see no simulation noise.  The block bootstrap holds the
point estimate and auxiliary parameters fixed, resampling only the observed
data and the base randomness; sandwich standard errors and the
small-eigenvalue ill-posedness diagnostic come out of the same pieces.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .aux_garch import filter_garch11
from .cf_moments import EmbeddedSeries, empirical_cf
from .dgp_sim import PURPOSE_BOOTSTRAP, base_stream, draw_base
from .estimator import (EstimationError, SmmContext, _as_panel_data,
                        _embed_panel, _embed_ts, decode_params, simulated_cf,
                        to_bounded)
from .mixture import MixtureError

_EIG_TOL = 1e-10


class InferenceError(RuntimeError):
    pass


class IllPosedWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class MomentJacobian:
    """Re/Im-stacked CF gradient: rows 0..m-1 real parts, m..2m-1 imaginary."""

    G: np.ndarray
    steps: np.ndarray
    n_struct: int
    one_sided: tuple = ()

    def __post_init__(self):
        if not np.all(np.isfinite(self.G)):
            raise InferenceError("Jacobian has non-finite entries")


def _psi_at(raw: np.ndarray, ctx: SmmContext) -> np.ndarray:
    theta, p = decode_params(raw, ctx)
    return simulated_cf(theta, p, ctx)


def moment_jacobian(raw: np.ndarray, ctx: SmmContext, *,
                    step_scale: float = 1.0) -> MomentJacobian:
    """Central differences of the averaged simulated CF, step
    h_j = step_scale * max(1e-5, 1e-5 |x_j|); one-sided fallback when the
    transform rejects a perturbed point."""
    raw = np.asarray(raw, dtype=float)
    p = raw.size
    m = ctx.grid.m
    steps = step_scale * np.maximum(1e-5, 1e-5 * np.abs(raw))
    psi0 = None
    G = np.empty((2 * m, p))
    one_sided = []
    for j in range(p):
        h = steps[j]
        plus = minus = None
        xp = raw.copy(); xp[j] += h
        xm = raw.copy(); xm[j] -= h
        try:
            plus = _psi_at(xp, ctx)
        except MixtureError:
            pass
        try:
            minus = _psi_at(xm, ctx)
        except MixtureError:
            pass
        if plus is not None and minus is not None:
            col = (plus - minus) / (2.0 * h)
        else:
            if psi0 is None:
                psi0 = _psi_at(raw, ctx)
            if plus is not None:
                col = (plus - psi0) / h
            elif minus is not None:
                col = (psi0 - minus) / h
            else:
                raise InferenceError(f"transform rejects both perturbations of coordinate {j}")
            one_sided.append(j)
        G[:m, j] = col.real
        G[m:, j] = col.imag
    return MomentJacobian(G=G, steps=steps, n_struct=ctx.n_struct,
                          one_sided=tuple(one_sided))


# ---------------------------------------------------------------------------
# block bootstrap
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    se: dict                  # structural parameters, reporting scale
    se_raw: np.ndarray        # all free coordinates, unconstrained scale
    cov_scores: np.ndarray
    D: np.ndarray
    jacobian: MomentJacobian
    B: int
    block_len: int
    seed: int
    singular: bool


def _resample_blocks(y: np.ndarray, block_len: int, g: np.random.Generator) -> np.ndarray:
    n = y.shape[0]
    n_blocks = math.ceil(n / block_len)
    starts = g.integers(0, n - block_len + 1, size=n_blocks)
    out = np.concatenate([y[s:s + block_len] for s in starts])
    return out[:n]


def _stack(psi: np.ndarray) -> np.ndarray:
    return np.concatenate([psi.real, psi.imag])


def default_block_len(n: int) -> int:
    return math.ceil(n ** (1.0 / 3.0))


def block_bootstrap_se(data, raw_hat: np.ndarray, ctx: SmmContext, B: int,
                       block_len: int | None = None, *, seed: int = 0,
                       jacobian: MomentJacobian | None = None) -> BootstrapResult:
    """Sandwich standard errors with a moving-block bootstrap of the data side
    and fresh base randomness on the simulated side; the point estimate and
    the auxiliary parameters stay fixed.

    Scores are left on the raw CF scale, so the estimated covariance already
    carries the 1/n sampling noise and the returned values are standard errors
    directly.  Panel data resamples whole units instead of blocks.
    """
    if B < 1:
        raise InferenceError("B must be >= 1")
    spec = ctx.spec
    n = spec.n
    if block_len is None:
        block_len = default_block_len(n)
    if not (1 <= block_len < n):
        raise InferenceError("need 1 <= block_len < n")
    raw_hat = np.asarray(raw_hat, dtype=float)
    theta_hat, p_hat = decode_params(raw_hat, ctx)
    if jacobian is None:
        jacobian = moment_jacobian(raw_hat, ctx)
    G = jacobian.G
    m = ctx.grid.m
    w2 = np.concatenate([ctx.grid.weights, ctx.grid.weights])
    GW = G.T * w2

    if spec.kind == "tobit_panel":
        y_obs, x_obs = _as_panel_data(data)
    else:
        y_obs = np.asarray(data, dtype=float)

    scores = np.empty((B, raw_hat.size))
    for b in range(B):
        g = base_stream(seed, PURPOSE_BOOTSTRAP, b)
        if spec.kind == "tobit_panel":
            idx = g.integers(0, n, size=n)
            y_b, x_b = y_obs[idx], x_obs[idx]
            emb = _embed_panel(y_b, x_b, spec.L)
            ctx_b = replace(ctx, spec=replace(spec, exog=x_b))
        else:
            y_b = _resample_blocks(y_obs, block_len, g)
            sig_b = filter_garch11(y_b, ctx.aux) if ctx.aux is not None else None
            emb = _embed_ts(y_b, sig_b, spec.L, spec.aux_cf_mode)
            ctx_b = ctx
        psi_data_b = empirical_cf(emb, ctx.grid)
        draws_b = draw_base(ctx_b.spec, ctx.config.k, _bootstrap_draw_seed(seed, b))
        ctx_b = replace(ctx_b, draws=draws_b)
        psi_sim_b = simulated_cf(theta_hat, p_hat, ctx_b)
        scores[b] = GW @ _stack(psi_data_b - psi_sim_b)

    cov_scores = np.cov(scores, rowvar=False, ddof=1) if B > 1 else np.zeros((raw_hat.size,) * 2)
    cov_scores = np.atleast_2d(cov_scores)
    gram = GW @ G
    singular = False
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e12:
        warnings.warn(f"moment Gram matrix ill-conditioned (cond={cond:.2e}); "
                      "using pseudo-inverse", IllPosedWarning)
        D = np.linalg.pinv(gram)
        singular = True
    else:
        D = np.linalg.inv(gram)
    var_raw = np.diag(D @ cov_scores @ D)
    se_raw = np.sqrt(np.maximum(var_raw, 0.0))

    se = {}
    h = 1e-6
    for j, name in enumerate(ctx.free_names):
        lo, hi = spec.bounds[name]
        deriv = (to_bounded(raw_hat[j] + h, lo, hi) - to_bounded(raw_hat[j] - h, lo, hi)) / (2 * h)
        se[name] = abs(deriv) * se_raw[j]
    return BootstrapResult(se=se, se_raw=se_raw, cov_scores=cov_scores, D=D,
                           jacobian=jacobian, B=B, block_len=block_len,
                           seed=seed, singular=singular)


def _bootstrap_draw_seed(seed: int, b: int) -> int:
    return seed * 4_000_037 + b + 1


def functional_se(result, dphi: np.ndarray, boot: BootstrapResult) -> float:
    """Delta-method standard error of a smooth functional with gradient
    ``dphi`` in the raw coordinates."""
    dphi = np.asarray(dphi, dtype=float)
    p = boot.D.shape[0]
    if dphi.shape != (p,):
        raise InferenceError(f"gradient must have length {p}")
    if result is not None and np.asarray(result.raw).size != p:
        raise InferenceError("gradient length disagrees with the estimate")
    v = float(dphi @ boot.D @ boot.cov_scores @ boot.D @ dphi)
    return math.sqrt(max(v, 0.0))


# ---------------------------------------------------------------------------
# ill-posedness diagnostic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IllPosedness:
    lambda_min: float        # mixture-parameter block
    lambda_min_full: float   # all free parameters
    bound_tv: float
    bound_sup: float
    degenerate: bool


def illposedness_diagnostic(jac: MomentJacobian, weights: np.ndarray,
                            sigma_floor: float) -> IllPosedness:
    """Smallest eigenvalue of the weighted moment Gram restricted to the
    mixture columns, and the implied total-variation / sup-norm error
    inflation bounds 1/(sqrt(lambda) * floor) and that again over the floor."""
    if sigma_floor <= 0:
        raise InferenceError("sigma floor must be positive")
    G = jac.G
    w2 = np.concatenate([np.asarray(weights, dtype=float)] * 2)
    if w2.shape[0] != G.shape[0]:
        raise InferenceError("weights do not match the Jacobian rows")
    gram = (G.T * w2) @ G
    lam_full = float(np.linalg.eigvalsh(gram)[0])
    mix = gram[jac.n_struct:, jac.n_struct:]
    if mix.size == 0:
        raise InferenceError("no mixture columns in the Jacobian")
    lam = float(np.linalg.eigvalsh(mix)[0])
    degenerate = False
    scale = max(float(np.max(np.abs(mix))), 1.0)
    if lam <= _EIG_TOL * scale:
        warnings.warn("moment Gram matrix is numerically rank deficient: the "
                      "mixture parameters are not locally identified at this "
                      "point", IllPosedWarning)
        lam = 0.0
        degenerate = True
    lam_full = max(lam_full, 0.0)
    if lam > 0:
        bound_tv = 1.0 / (math.sqrt(lam) * sigma_floor)
        bound_sup = bound_tv / sigma_floor
    else:
        bound_tv = math.inf
        bound_sup = math.inf
    return IllPosedness(lambda_min=lam, lambda_min_full=lam_full,
                        bound_tv=bound_tv, bound_sup=bound_sup,
                        degenerate=degenerate)


def inference_report(boot: BootstrapResult, diag: IllPosedness | None = None) -> dict:
    """JSON-ready summary of one inference run.

    diag is None when the mixture is fully pinned (no sieve columns), in
    which case the ill-posedness fields are reported as null."""
    return {
        "se": {k: float(v) for k, v in boot.se.items()},
        "se_raw": [float(v) for v in boot.se_raw],
        "lambda_min": None if diag is None else float(diag.lambda_min),
        "lambda_min_full": None if diag is None else float(diag.lambda_min_full),
        "tv_bound": None if diag is None else float(diag.bound_tv),
        "sup_bound": None if diag is None else float(diag.bound_sup),
        "B": int(boot.B),
        "block_len": int(boot.block_len),
        "seeds": {"bootstrap": int(boot.seed)},
    }
