"""Gaussian-and-tails mixture: density, exact sampling, parameter transforms.

The shock density is a k-component Gaussian mixture plus two optional
polynomial-tail components (indices xi_left, xi_right).  All estimation happens
in unconstrained coordinates; ``transform_params`` maps them to a valid
``MixtureParams`` with the mean-zero / unit-variance restrictions absorbed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr

XI_MAX_DEFAULT = 20.0
MU_CLAMP_MULT = 5.0
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_W_DEGENERATE = 1e-12


class MixtureError(ValueError):
    pass


class DegenerateWeightError(MixtureError):
    """First mixture weight too small to absorb the mean-zero restriction."""


class InfiniteVarianceError(MixtureError):
    """Tail component with xi < 1 has no finite variance."""


# ---------------------------------------------------------------------------
# parameter containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MixtureParams:
    """Constrained mixture parameters.

    Vectors have length k+2; entries k and k+1 are the left and right tail
    components (weights may be zero).  ``sigma_floor`` and ``mu_bound`` record
    the effective constraints the parameters were built under (post
    normalization), used by ``validate``; they are None for hand-built params.
    """

    weights: np.ndarray
    locations: np.ndarray
    scales: np.ndarray
    xi: tuple[float, float]
    k: int
    sigma_floor: float | None = None
    mu_bound: float | None = None
    mean_zero_implied: bool = False

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "locations", np.asarray(self.locations, dtype=float))
        object.__setattr__(self, "scales", np.asarray(self.scales, dtype=float))

    @property
    def tail_weight(self) -> float:
        return float(self.weights[self.k] + self.weights[self.k + 1])

    def validate(self) -> None:
        k = self.k
        if k < 1:
            raise MixtureError("need at least one Gaussian component")
        for name, v in (("weights", self.weights), ("locations", self.locations), ("scales", self.scales)):
            if v.shape != (k + 2,) or not np.all(np.isfinite(v)):
                raise MixtureError(f"{name} must be {k + 2} finite reals")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise MixtureError("weights must be nonnegative and sum to 1")
        # tail scales may be anything positive; the bandwidth floor binds Gaussians only
        if np.any(self.scales <= 0):
            raise MixtureError("scales must be positive")
        if self.sigma_floor is not None and np.any(self.scales[:k] < self.sigma_floor * (1 - 1e-9)):
            raise MixtureError("Gaussian scale below bandwidth floor")
        if self.mu_bound is not None:
            start = 1 if self.mean_zero_implied else 0
            if np.any(np.abs(self.locations[start:k]) > self.mu_bound * (1 + 1e-9)):
                raise MixtureError("Gaussian location outside bound")
        xl, xr = self.xi
        if self.tail_weight > 0 and not (1.0 <= xl and 1.0 <= xr):
            raise MixtureError("tail indices must be >= 1 when tails carry weight")

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "weights": self.weights.tolist(),
            "locations": self.locations.tolist(),
            "scales": self.scales.tolist(),
            "xi_left": float(self.xi[0]),
            "xi_right": float(self.xi[1]),
            "flags": {
                "sigma_floor": self.sigma_floor,
                "mu_bound": self.mu_bound,
                "mean_zero_implied": self.mean_zero_implied,
            },
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "MixtureParams":
        flags = d.get("flags", {})
        return cls(
            weights=np.asarray(d["weights"], dtype=float),
            locations=np.asarray(d["locations"], dtype=float),
            scales=np.asarray(d["scales"], dtype=float),
            xi=(float(d["xi_left"]), float(d["xi_right"])),
            k=int(d["k"]),
            sigma_floor=flags.get("sigma_floor"),
            mu_bound=flags.get("mu_bound"),
            mean_zero_implied=bool(flags.get("mean_zero_implied", False)),
        )


@dataclass(frozen=True)
class RawMixtureParams:
    """Unconstrained mixture coordinates.

    omega: k+1 logits (weight 1 is the softmax reference); mu: k+1 locations
    for components 2..k plus the two tails (location 1 is implied when the
    mean-zero restriction is on, otherwise taken from ``mu1``); sigma: k+2 log
    scales (entry 0 pinned to 0 under unit variance); xi: 2 unconstrained tail
    indices.  Flags select which entries are free.
    """

    omega: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    xi: np.ndarray
    impose_mean_zero: bool = True
    impose_unit_variance: bool = True
    enable_tails: bool = False
    mu1: float = 0.0

    def __post_init__(self):
        for name in ("omega", "mu", "sigma", "xi"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    @classmethod
    def zeros(cls, k: int, *, impose_mean_zero: bool = True,
              impose_unit_variance: bool = True, enable_tails: bool = False) -> "RawMixtureParams":
        return cls(
            omega=np.zeros(k + 1),
            mu=np.zeros(k + 1),
            sigma=np.zeros(k + 2),
            xi=np.zeros(2),
            impose_mean_zero=impose_mean_zero,
            impose_unit_variance=impose_unit_variance,
            enable_tails=enable_tails,
        )


# ---------------------------------------------------------------------------
# free-vector packing (the optimizer sees only active coordinates)
# ---------------------------------------------------------------------------


def mixture_free_count(k: int, *, impose_mean_zero: bool = True,
                       impose_unit_variance: bool = True, enable_tails: bool = False) -> int:
    n_w = k + 1 if enable_tails else k - 1
    n_mu = (k + 1 if enable_tails else k - 1) + (0 if impose_mean_zero else 1)
    n_sg = (k - 1 if impose_unit_variance else k) + (2 if enable_tails else 0)
    n_xi = 2 if enable_tails else 0
    return n_w + n_mu + n_sg + n_xi


def raw_from_free(x: np.ndarray, k: int, *, impose_mean_zero: bool = True,
                  impose_unit_variance: bool = True, enable_tails: bool = False) -> RawMixtureParams:
    """Unpack an active-coordinate vector into full raw arrays (inert slots zero)."""
    x = np.asarray(x, dtype=float)
    expected = mixture_free_count(k, impose_mean_zero=impose_mean_zero,
                                  impose_unit_variance=impose_unit_variance,
                                  enable_tails=enable_tails)
    if x.shape != (expected,):
        raise MixtureError(f"free vector must have length {expected}, got {x.shape}")
    omega = np.zeros(k + 1)
    mu = np.zeros(k + 1)
    sigma = np.zeros(k + 2)
    xi = np.zeros(2)
    i = 0
    if enable_tails:
        omega[:] = x[i:i + k + 1]; i += k + 1
    else:
        omega[:k - 1] = x[i:i + k - 1]; i += k - 1
    if enable_tails:
        mu[:] = x[i:i + k + 1]; i += k + 1
    else:
        mu[:k - 1] = x[i:i + k - 1]; i += k - 1
    mu1 = 0.0
    if not impose_mean_zero:
        mu1 = float(x[i]); i += 1
    if impose_unit_variance:
        sigma[1:k] = x[i:i + k - 1]; i += k - 1
    else:
        sigma[0:k] = x[i:i + k]; i += k
    if enable_tails:
        sigma[k:k + 2] = x[i:i + 2]; i += 2
        xi[:] = x[i:i + 2]; i += 2
    return RawMixtureParams(omega=omega, mu=mu, sigma=sigma, xi=xi,
                            impose_mean_zero=impose_mean_zero,
                            impose_unit_variance=impose_unit_variance,
                            enable_tails=enable_tails, mu1=mu1)


def free_from_raw(raw: RawMixtureParams, k: int) -> np.ndarray:
    parts = []
    if raw.enable_tails:
        parts.append(raw.omega)
    else:
        parts.append(raw.omega[:k - 1])
    if raw.enable_tails:
        parts.append(raw.mu)
    else:
        parts.append(raw.mu[:k - 1])
    if not raw.impose_mean_zero:
        parts.append([raw.mu1])
    if raw.impose_unit_variance:
        parts.append(raw.sigma[1:k])
    else:
        parts.append(raw.sigma[0:k])
    if raw.enable_tails:
        parts.append(raw.sigma[k:k + 2])
        parts.append(raw.xi)
    return np.concatenate([np.asarray(p, dtype=float) for p in parts]) if parts else np.zeros(0)


# ---------------------------------------------------------------------------
# tail distribution primitives
# ---------------------------------------------------------------------------


def _tail_density_right(u, xi):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u >= 0
    up = u[pos]
    out[pos] = (2.0 + xi) * up ** (1.0 + xi) / (1.0 + up ** (2.0 + xi)) ** 2
    return out


def _tail_density_left(u, xi):
    return _tail_density_right(-np.asarray(u, dtype=float), xi)


def _tail_cdf_right(u, xi):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    up = u[pos] ** (2.0 + xi)
    out[pos] = up / (1.0 + up)
    return out


def _tail_cdf_left(u, xi):
    # mass of the left tail component at or below u; the component lives on u <= 0
    u = np.asarray(u, dtype=float)
    out = np.ones_like(u)
    neg = u < 0
    out[neg] = 1.0 / (1.0 + np.abs(u[neg]) ** (2.0 + xi))
    return out


def tail_quantile(nu, xi: float, side: str):
    """Inverse CDF of a standardized tail component.

    Left: -(1/nu - 1)^(1/(2+xi)) on (-inf, 0]; right: (1/(1-nu) - 1)^(1/(2+xi))
    on [0, inf).  Strictly monotone in nu.
    """
    nu_arr = np.asarray(nu, dtype=float)
    if np.any(nu_arr <= 0.0) or np.any(nu_arr >= 1.0):
        raise MixtureError("tail quantile requires nu strictly inside (0, 1)")
    if xi < 1.0:
        raise MixtureError("tail index must be >= 1")
    a = 1.0 / (2.0 + xi)
    if side == "left":
        out = -((1.0 / nu_arr - 1.0) ** a)
    elif side == "right":
        out = (1.0 / (1.0 - nu_arr) - 1.0) ** a
    else:
        raise MixtureError("side must be 'left' or 'right'")
    return float(out) if np.isscalar(nu) else out


@lru_cache(maxsize=256)
def _tail_moment(order: int, xi: float) -> float:
    """Moment of |u| of order ``order`` under the right-tail density, by adaptive
    quadrature to relative tolerance 1e-8."""
    if order >= 2 and xi < 1.0:
        raise InfiniteVarianceError("second tail moment requires xi >= 1")
    val, _ = quad(lambda u: u ** order * (2.0 + xi) * u ** (1.0 + xi) / (1.0 + u ** (2.0 + xi)) ** 2,
                  0.0, np.inf, epsrel=1e-8, limit=200)
    return val


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------


def bandwidth_floor(k: int, b: float = 2.0, c: float = 1.0) -> float:
    """Smallest admissible Gaussian scale at sieve dimension k: c*log(k+1)^(2/b)/k."""
    if k < 1:
        raise MixtureError("k must be >= 1")
    if b <= 0 or c <= 0:
        raise MixtureError("b and c must be positive")
    return c * math.log(k + 1.0) ** (2.0 / b) / k


def mu_clamp_bound(k: int, b: float = 2.0, mult: float = MU_CLAMP_MULT) -> float:
    return mult * math.log(k + 1.0) ** (1.0 / b)


def transform_params(raw: RawMixtureParams, k: int, floor: float, *,
                     b: float = 2.0, xi_max: float = XI_MAX_DEFAULT) -> MixtureParams:
    """Map unconstrained coordinates to valid mixture parameters.

    Weights by softmax with component 1 as reference; scales floor + exp;
    free locations soft-clamped to +/- mu_bar by tanh; mean-zero absorbs the
    weighted mean (tail means by quadrature) into location 1; unit variance
    divides all locations and scales by the root second moment.  Deterministic
    and continuous in the raw coordinates.
    """
    if k < 1:
        raise MixtureError("k must be >= 1")
    for name in ("omega", "mu", "sigma", "xi"):
        if not np.all(np.isfinite(getattr(raw, name))):
            raise MixtureError(f"non-finite raw {name}")
    if raw.omega.shape != (k + 1,) or raw.mu.shape != (k + 1,) or raw.sigma.shape != (k + 2,):
        raise MixtureError("raw arrays have wrong length for k")

    # --- weights ------------------------------------------------------------
    weights = np.zeros(k + 2)
    if raw.enable_tails:
        logits = np.concatenate(([0.0], raw.omega))
    else:
        logits = np.concatenate(([0.0], raw.omega[:k - 1]))
    logits = logits - logits.max()
    expl = np.exp(logits)
    soft = expl / expl.sum()
    if raw.enable_tails:
        weights[:k] = soft[:k]
        weights[k:] = soft[k:]
    else:
        weights[:k] = soft

    # --- scales -------------------------------------------------------------
    scales = np.empty(k + 2)
    sg_raw = raw.sigma.copy()
    if raw.impose_unit_variance:
        sg_raw[0] = 0.0
    with np.errstate(over="raise"):
        try:
            scales[:k] = floor + np.exp(sg_raw[:k])
            scales[k:] = np.exp(sg_raw[k:])  # tail scales carry no floor
        except FloatingPointError as exc:
            raise MixtureError("raw scale overflow") from exc

    # --- tail indices -------------------------------------------------------
    if raw.enable_tails:
        sig = 1.0 / (1.0 + np.exp(-raw.xi))
        xi_l, xi_r = 1.0 + (xi_max - 1.0) * sig
    else:
        xi_l = xi_r = 1.0

    # --- locations ----------------------------------------------------------
    mu_bar = mu_clamp_bound(k, b)
    locations = np.zeros(k + 2)
    locations[1:k] = mu_bar * np.tanh(raw.mu[:k - 1] / mu_bar)
    if raw.enable_tails:
        locations[k:] = raw.mu[k - 1:]

    if raw.impose_mean_zero:
        partial_mean = float(np.dot(weights[1:k], locations[1:k]))
        if weights[k] > 0:
            partial_mean += weights[k] * (locations[k] - scales[k] * _tail_moment(1, round(xi_l, 12)))
        if weights[k + 1] > 0:
            partial_mean += weights[k + 1] * (locations[k + 1] + scales[k + 1] * _tail_moment(1, round(xi_r, 12)))
        if weights[0] < _W_DEGENERATE:
            raise DegenerateWeightError("weight 1 is numerically zero; cannot absorb the mean-zero restriction")
        locations[0] = -partial_mean / weights[0]
        mean_zero_implied = True
    else:
        locations[0] = mu_bar * math.tanh(raw.mu1 / mu_bar)
        mean_zero_implied = False

    # --- unit variance ------------------------------------------------------
    sigma_floor_eff: float | None = floor
    mu_bound_eff: float = mu_bar
    if raw.impose_unit_variance:
        m2 = float(np.dot(weights[:k], locations[:k] ** 2 + scales[:k] ** 2))
        if weights[k] > 0:
            t1 = _tail_moment(1, round(xi_l, 12))
            t2 = _tail_moment(2, round(xi_l, 12))
            m2 += weights[k] * (locations[k] ** 2 - 2 * locations[k] * scales[k] * t1 + scales[k] ** 2 * t2)
        if weights[k + 1] > 0:
            t1 = _tail_moment(1, round(xi_r, 12))
            t2 = _tail_moment(2, round(xi_r, 12))
            m2 += weights[k + 1] * (locations[k + 1] ** 2 + 2 * locations[k + 1] * scales[k + 1] * t1 + scales[k + 1] ** 2 * t2)
        root = math.sqrt(m2)
        locations = locations / root
        scales = scales / root
        sigma_floor_eff = floor / root
        mu_bound_eff = mu_bar / root

    p = MixtureParams(weights=weights, locations=locations, scales=scales,
                      xi=(float(xi_l), float(xi_r)), k=k,
                      sigma_floor=sigma_floor_eff, mu_bound=mu_bound_eff,
                      mean_zero_implied=mean_zero_implied)
    p.validate()
    return p


# ---------------------------------------------------------------------------
# density, CDF, moments, sampling
# ---------------------------------------------------------------------------


def density(p: MixtureParams, e):
    """Mixture density at e (scalar or array).

    Gaussian parts are evaluated in log space so tiny scales underflow to zero
    instead of producing NaNs.
    """
    e_arr = np.atleast_1d(np.asarray(e, dtype=float))
    out = np.zeros_like(e_arr)
    k = p.k
    with np.errstate(over="ignore"):    # u*u may saturate to inf; exp(-inf) = 0
        for j in range(k):
            w = p.weights[j]
            if w == 0:
                continue
            u = (e_arr - p.locations[j]) / p.scales[j]
            out += w * np.exp(-0.5 * u * u - _LOG_SQRT_2PI - math.log(p.scales[j]))
    wl, wr = p.weights[k], p.weights[k + 1]
    if wl > 0:
        u = (e_arr - p.locations[k]) / p.scales[k]
        mask = e_arr <= p.locations[k]
        out[mask] += wl / p.scales[k] * _tail_density_left(u[mask], p.xi[0])
    if wr > 0:
        u = (e_arr - p.locations[k + 1]) / p.scales[k + 1]
        mask = e_arr >= p.locations[k + 1]
        out[mask] += wr / p.scales[k + 1] * _tail_density_right(u[mask], p.xi[1])
    return float(out[0]) if np.isscalar(e) else out


def mixture_cdf(p: MixtureParams, e):
    """Closed-form CDF (Gaussian ndtr plus polynomial tail CDFs)."""
    e_arr = np.atleast_1d(np.asarray(e, dtype=float))
    out = np.zeros_like(e_arr)
    k = p.k
    for j in range(k):
        w = p.weights[j]
        if w == 0:
            continue
        out += w * ndtr((e_arr - p.locations[j]) / p.scales[j])
    if p.weights[k] > 0:
        out += p.weights[k] * _tail_cdf_left((e_arr - p.locations[k]) / p.scales[k], p.xi[0])
    if p.weights[k + 1] > 0:
        out += p.weights[k + 1] * _tail_cdf_right((e_arr - p.locations[k + 1]) / p.scales[k + 1], p.xi[1])
    return float(out[0]) if np.isscalar(e) else out


def mixture_moments(p: MixtureParams) -> tuple[float, float]:
    """Mean and variance; tail contributions by quadrature of the tail densities."""
    k = p.k
    if p.weights[k] > 0 and p.xi[0] < 1.0:
        raise InfiniteVarianceError("left tail weight positive with xi < 1")
    if p.weights[k + 1] > 0 and p.xi[1] < 1.0:
        raise InfiniteVarianceError("right tail weight positive with xi < 1")
    mean = float(np.dot(p.weights[:k], p.locations[:k]))
    m2 = float(np.dot(p.weights[:k], p.locations[:k] ** 2 + p.scales[:k] ** 2))
    if p.weights[k] > 0:
        t1 = _tail_moment(1, round(p.xi[0], 12))
        t2 = _tail_moment(2, round(p.xi[0], 12))
        mean += p.weights[k] * (p.locations[k] - p.scales[k] * t1)
        m2 += p.weights[k] * (p.locations[k] ** 2 - 2 * p.locations[k] * p.scales[k] * t1 + p.scales[k] ** 2 * t2)
    if p.weights[k + 1] > 0:
        t1 = _tail_moment(1, round(p.xi[1], 12))
        t2 = _tail_moment(2, round(p.xi[1], 12))
        mean += p.weights[k + 1] * (p.locations[k + 1] + p.scales[k + 1] * t1)
        m2 += p.weights[k + 1] * (p.locations[k + 1] ** 2 + 2 * p.locations[k + 1] * p.scales[k + 1] * t1 + p.scales[k + 1] ** 2 * t2)
    return mean, m2 - mean * mean


def sample(p: MixtureParams, nu, z, nu_l, nu_r):
    """Draw from the mixture by inverting base randomness.

    nu selects the component through the cumulative weights (half-open
    intervals, right-closed selection); z supplies the k Gaussian innovations;
    nu_l / nu_r feed the tail quantiles.  Deterministic in its inputs; accepts
    scalars or arrays of matching leading shape (z one dimension more, size k).
    """
    scalar = np.isscalar(nu)
    nu_arr = np.atleast_1d(np.asarray(nu, dtype=float))
    z_arr = np.atleast_2d(np.asarray(z, dtype=float))
    if z_arr.shape[0] == 1 and nu_arr.shape[0] > 1:
        z_arr = np.broadcast_to(z_arr, (nu_arr.shape[0], z_arr.shape[1]))
    nul_arr = np.atleast_1d(np.asarray(nu_l, dtype=float))
    nur_arr = np.atleast_1d(np.asarray(nu_r, dtype=float))
    k = p.k
    cumw = np.cumsum(p.weights)
    idx = np.searchsorted(cumw, nu_arr, side="right")
    idx = np.minimum(idx, k + 1)

    out = np.empty_like(nu_arr)
    gauss = idx < k
    if np.any(gauss):
        j = idx[gauss]
        rows = np.nonzero(gauss)[0]
        out[gauss] = p.locations[j] + p.scales[j] * z_arr[rows, j]
    left = idx == k
    if np.any(left):
        out[left] = p.locations[k] + p.scales[k] * tail_quantile(nul_arr[left], p.xi[0], "left")
    right = idx == k + 1
    if np.any(right):
        out[right] = p.locations[k + 1] + p.scales[k + 1] * tail_quantile(nur_arr[right], p.xi[1], "right")
    return float(out[0]) if scalar else out
