"""Auxiliary GARCH(1,1) / AVGARCH(1,1): quasi-ML fit on the observed series,
then volatility filtering of data and simulated samples with the same frozen
parameters.

Both variants use the lagged recursion (sigma at t from y at t-1), which keeps
filtering of a simulated path well defined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter
from scipy.special import expit

from .optim import OptimError, nelder_mead

_STAB = 0.999  # persistence kept strictly inside the unit interval


class AuxModelError(ValueError):
    pass


class DegenerateDataError(AuxModelError):
    pass


@dataclass(frozen=True)
class GarchParams:
    mu: float
    alpha1: float
    alpha2: float
    variant: str = "garch"
    converged: bool = True

    def __post_init__(self):
        if self.variant not in ("garch", "avgarch"):
            raise AuxModelError("variant must be 'garch' or 'avgarch'")
        if not (self.mu > 0 and np.isfinite(self.mu)):
            raise AuxModelError("mu must be positive and finite")
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise AuxModelError("alpha coefficients must be nonnegative")
        if self.variant == "garch" and self.alpha1 + self.alpha2 >= 1:
            raise AuxModelError("garch needs alpha1 + alpha2 < 1")
        if self.variant == "avgarch" and self.alpha2 >= 1:
            raise AuxModelError("avgarch needs alpha2 < 1")

    def to_json_dict(self) -> dict:
        return {"variant": self.variant, "mu": self.mu, "alpha1": self.alpha1,
                "alpha2": self.alpha2, "converged": self.converged}

    @classmethod
    def from_json_dict(cls, d: dict) -> "GarchParams":
        return cls(mu=float(d["mu"]), alpha1=float(d["alpha1"]),
                   alpha2=float(d["alpha2"]), variant=d.get("variant", "garch"),
                   converged=bool(d.get("converged", True)))


def filter_garch11(series, eta: GarchParams) -> np.ndarray:
    """Volatility path sigma_t implied by ``eta`` on a fixed series.

    garch:   sigma2_t = mu + alpha1 y_{t-1}^2 + alpha2 sigma2_{t-1},
             started at the unconditional variance mu/(1-alpha1-alpha2).
    avgarch: sigma_t = mu + alpha1 |y_{t-1}| + alpha2 sigma_{t-1},
             started at its zero-data fixed point mu/(1-alpha2).
    Returns standard deviations, strictly positive, same length as input.
    """
    y = np.asarray(series, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise AuxModelError("series must be a nonempty vector")
    if eta.variant == "garch":
        s0 = eta.mu / (1.0 - eta.alpha1 - eta.alpha2)
        drive = eta.mu + eta.alpha1 * y[:-1] ** 2
        rest, _ = lfilter([1.0], [1.0, -eta.alpha2], drive,
                          zi=np.array([eta.alpha2 * s0]))
        return np.sqrt(np.concatenate([[s0], rest]))
    s0 = eta.mu / (1.0 - eta.alpha2)
    drive = eta.mu + eta.alpha1 * np.abs(y[:-1])
    rest, _ = lfilter([1.0], [1.0, -eta.alpha2], drive,
                      zi=np.array([eta.alpha2 * s0]))
    return np.concatenate([[s0], rest])


def _neg_quasi_loglik(y: np.ndarray, eta: GarchParams, sigma2_init: float) -> float:
    if eta.variant == "garch":
        drive = eta.mu + eta.alpha1 * y[:-1] ** 2
        rest, _ = lfilter([1.0], [1.0, -eta.alpha2], drive,
                          zi=np.array([eta.alpha2 * sigma2_init]))
        sig2 = np.concatenate([[sigma2_init], rest])
    else:
        s0 = math.sqrt(sigma2_init)
        drive = eta.mu + eta.alpha1 * np.abs(y[:-1])
        rest, _ = lfilter([1.0], [1.0, -eta.alpha2], drive,
                          zi=np.array([eta.alpha2 * s0]))
        sig2 = np.concatenate([[s0], rest]) ** 2
    return 0.5 * float(np.sum(np.log(sig2) + y * y / sig2))


def _decode(r: np.ndarray, variant: str) -> GarchParams:
    mu = math.exp(min(r[0], 50.0))
    if variant == "garch":
        tot = _STAB * expit(r[1])
        frac = expit(r[2])
        a1, a2 = tot * frac, tot * (1.0 - frac)
    else:
        a2 = _STAB * expit(r[1])
        a1 = math.exp(min(r[2], 50.0))
    return GarchParams(mu=mu, alpha1=a1, alpha2=a2, variant=variant)


def fit_garch11(series, variant: str = "garch", *, max_evals: int = 4000) -> GarchParams:
    """Quasi-ML estimate over log/logit-transformed parameters; the filter
    recursion inside the likelihood starts at the sample variance."""
    y = np.asarray(series, dtype=float)
    if y.ndim != 1 or y.size < 50:
        raise AuxModelError("need a univariate series of length >= 50")
    v = float(np.var(y))
    if not (v > 0 and np.isfinite(v)):
        raise DegenerateDataError("series variance must be positive and finite")
    if variant not in ("garch", "avgarch"):
        raise AuxModelError("variant must be 'garch' or 'avgarch'")

    def f(r):
        try:
            eta = _decode(r, variant)
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                val = _neg_quasi_loglik(y, eta, v)
            return val if np.isfinite(val) else np.inf
        except (OverflowError, FloatingPointError, AuxModelError):
            return np.inf

    # start at alpha1=0.1, alpha2=0.8 with mu matching the sample variance
    if variant == "garch":
        r0 = [math.log(0.1 * v), math.log(0.9 / (_STAB - 0.9)), math.log(1.0 / 8.0)]
    else:
        r0 = [math.log(0.1 * math.sqrt(v)), math.log(0.8 / (_STAB - 0.8)), math.log(0.1)]
    try:
        res = nelder_mead(f, np.array(r0), step=0.5, f_tol=1e-8,
                          max_evals=max_evals, restarts=1)
    except OptimError as exc:
        raise DegenerateDataError(f"quasi-likelihood not finite at start: {exc}") from exc
    eta = _decode(res.x, variant)
    return GarchParams(mu=eta.mu, alpha1=eta.alpha1, alpha2=eta.alpha2,
                       variant=variant, converged=res.converged)
