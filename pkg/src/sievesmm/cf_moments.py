"""Frequency grid, lag embedding, and characteristic-function moments.

The estimation objective integrates |psi_data - psi_sim|^2 over frequencies tau
drawn from a Gaussian weighting density matched to the data.  Draws come from a
low-discrepancy sequence pushed through Box-Muller, so the integral is a
uniform-weight average over the grid and the grid is exactly reconstructible
from a small descriptor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

_CHUNK = 1 << 22  # phase-matrix entries per block, keeps peak memory modest


class CFError(ValueError):
    pass


@dataclass(frozen=True)
class CFGrid:
    points: np.ndarray          # (m, d)
    weights: np.ndarray         # (m,), sums to 1
    generator: str              # sobol | halton
    seed: int                   # extra fast-forward offset into the sequence
    scale_mean: np.ndarray      # (d,)
    scale_sd: np.ndarray        # (d,)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def descriptor(self) -> dict:
        return {
            "generator": self.generator,
            "m": self.m,
            "d": self.d,
            "seed": self.seed,
            "scale_mean": self.scale_mean.tolist(),
            "scale_sd": self.scale_sd.tolist(),
        }

    @classmethod
    def from_descriptor(cls, desc: dict) -> "CFGrid":
        return build_cf_grid(
            m=int(desc["m"]),
            d=int(desc["d"]),
            generator=str(desc["generator"]),
            seed=int(desc["seed"]),
            scale=(np.asarray(desc["scale_mean"], dtype=float),
                   np.asarray(desc["scale_sd"], dtype=float)),
        )


def build_cf_grid(m: int, d: int, generator: str = "sobol", seed: int = 0,
                  scale=(0.0, 1.0)) -> CFGrid:
    """Build the frequency grid: m QMC points in (0,1)^(2*ceil(d/2)), Box-Muller
    to d standard normal coordinates, then affine scale to the target mean/SD.

    The first (all-zero) point of the unscrambled sequence is skipped; ``seed``
    fast-forwards further so distinct grids stay reconstructible without
    scrambling entropy.  Weights are uniform 1/m.
    """
    if m < 1:
        raise CFError("m must be >= 1")
    if d < 1:
        raise CFError("d must be >= 1")
    mean = np.broadcast_to(np.asarray(scale[0], dtype=float), (d,)).copy()
    sd = np.broadcast_to(np.asarray(scale[1], dtype=float), (d,)).copy()
    if np.any(sd <= 0):
        raise CFError("scale standard deviations must be positive")

    n_unif = 2 * ((d + 1) // 2)
    if generator == "sobol":
        eng = qmc.Sobol(n_unif, scramble=False)
    elif generator == "halton":
        eng = qmc.Halton(n_unif, scramble=False)
    else:
        raise CFError("generator must be 'sobol' or 'halton'")
    eng.fast_forward(1 + seed)
    u = eng.random(m)

    # u1 = 0 cannot occur past index 0, but guard the log anyway
    u1 = np.maximum(u[:, 0::2], np.finfo(float).tiny)
    u2 = u[:, 1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    ang = 2.0 * np.pi * u2
    z = np.empty((m, n_unif))
    z[:, 0::2] = r * np.cos(ang)
    z[:, 1::2] = r * np.sin(ang)

    points = mean + sd * z[:, :d]
    weights = np.full(m, 1.0 / m)
    return CFGrid(points=points, weights=weights, generator=generator, seed=seed,
                  scale_mean=mean, scale_sd=sd)


@dataclass(frozen=True)
class EmbeddedSeries:
    rows: np.ndarray   # (n - L, d)
    L: int

    @property
    def d(self) -> int:
        return self.rows.shape[1]


def lag_embed(series_list, L: int) -> EmbeddedSeries:
    """Stack per-series lag blocks: row t is (y_t, ..., y_{t-L}, x_t, ..., x_{t-L}).

    All series must share the same length n > L; returns n - L rows.
    """
    if L < 0:
        raise CFError("L must be >= 0")
    arrays = [np.asarray(s, dtype=float) for s in series_list]
    if not arrays:
        raise CFError("need at least one series")
    n = arrays[0].shape[0]
    for a in arrays:
        if a.ndim != 1 or a.shape[0] != n:
            raise CFError("all series must be 1-D with equal length")
    if n <= L:
        raise CFError("series shorter than the lag window")
    blocks = []
    for a in arrays:
        blocks.append(np.stack([a[L - l: n - l] for l in range(L + 1)], axis=1))
    return EmbeddedSeries(rows=np.concatenate(blocks, axis=1), L=L)


def _phase_means(rows: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Mean cos and sin of rows @ tau' without BLAS, chunked over rows."""
    n, d = rows.shape
    m = tau.shape[0]
    step = max(1, _CHUNK // max(m, 1))
    acc_c = np.zeros(m)
    acc_s = np.zeros(m)
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        phase = np.einsum("nd,md->nm", rows[lo:hi], tau)
        acc_c += np.cos(phase).sum(axis=0)
        acc_s += np.sin(phase).sum(axis=0)
    return (acc_c + 1j * acc_s) / n


def empirical_cf(data, grid: CFGrid) -> np.ndarray:
    """(1/n) sum_t exp(i tau . row_t) for every grid frequency, as mean cos
    plus i mean sin; every modulus is <= 1 by construction."""
    rows = data.rows if isinstance(data, EmbeddedSeries) else np.asarray(data, dtype=float)
    if rows.ndim != 2:
        raise CFError("embedded data must be a 2-D row matrix")
    if rows.shape[1] != grid.d:
        raise CFError(f"row dimension {rows.shape[1]} does not match grid dimension {grid.d}")
    return _phase_means(rows, grid.points)


def cf_distance(psi_data: np.ndarray, psi_sim: np.ndarray, weights: np.ndarray) -> float:
    """Weighted squared distance sum_l w_l |psi_data_l - psi_sim_l|^2."""
    a = np.asarray(psi_data)
    b = np.asarray(psi_sim)
    w = np.asarray(weights, dtype=float)
    if a.shape != b.shape or a.shape != w.shape:
        raise CFError("CF vectors and weights must share one length")
    diff = a - b
    return float(np.sum(w * (diff.real * diff.real + diff.imag * diff.imag)))
