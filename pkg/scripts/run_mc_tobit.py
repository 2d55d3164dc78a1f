#!/usr/bin/env python3
"""Censored dynamic panel recovery study.

y_jt = (theta1 + theta2 x_jt + u_jt) 1{...>=0} with latent AR(1) u and
left-skewed GEV innovations; roughly 40 percent of observations censor at
zero under this design.  Moments pool the within-unit lag blocks
(y_t, y_{t-1}, x_t, x_{t-1}) over units and periods; the regressor panel is
held fixed between data and simulations, replication by replication.
"""

import argparse
import time

import numpy as np

from sievesmm import EstimationConfig, ModelSpec, PanelShape, monte_carlo
from sievesmm.estimator import draw_mc_data

TRUTH = {"rho": 0.8, "theta1": -1.25, "theta2": 1.0}
N = 200
T = 5
BURN = 10
S = 5
K = 2
X_VAR = 4.0   # regressor dispersion that yields the documented censoring share


def build_config(m: int, max_evals: int, seed: int) -> EstimationConfig:
    spec = ModelSpec(
        kind="tobit_panel",
        theta=dict(TRUTH),
        n=N,
        S=S,
        panel=PanelShape(T=T, burn_in=BURN, x_var=X_VAR),
    )
    return EstimationConfig(model=spec, k=K, m=m, max_evals=max_evals,
                            f_tol=1e-9, sim_seed=seed)


def censored_share(config: EstimationConfig, truth, reps: int) -> float:
    zeros = total = 0
    for r in range(reps):
        y = draw_mc_data(config, truth, r)["y"]
        zeros += int(np.count_nonzero(y == 0.0))
        total += y.size
    return zeros / total


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=100)
    ap.add_argument("--m", type=int, default=128)
    ap.add_argument("--max-evals", type=int, default=500)
    ap.add_argument("--seed", type=int, default=13)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    config = build_config(args.m, args.max_evals, args.seed)
    share = censored_share(config, "gev", min(args.reps, 20))
    print(f"censored share of simulated truth: {share:.3f}")

    t0 = time.time()
    summary = monte_carlo(config, args.reps, "gev", threads=args.threads)
    dt = time.time() - t0
    print(f"reps={summary.R} fail={summary.n_fail} time={dt:.0f}s "
          f"({dt / summary.R:.1f}s per rep)")
    for name in ("rho", "theta1", "theta2"):
        print(f"{name:8s} true={TRUTH[name]: .2f}  mean={summary.mean[name]: .4f}  "
              f"sd={summary.sd[name]:.4f}")
    if args.out:
        summary.write_summary_csv(args.out)
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
