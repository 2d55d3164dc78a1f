"""Sieve-SMM: simulated method of moments with a Gaussian-and-tails mixture sieve.

Estimates structural parameters together with a nonparametric shock density by
matching empirical and simulated characteristic functions on a quasi-Monte-Carlo
frequency grid, with derivative-free optimization, common random numbers,
block-bootstrap inference, and asset-pricing counterfactual calculators.
"""

__version__ = "0.1.0"

from .mixture import (
    MixtureParams,
    RawMixtureParams,
    bandwidth_floor,
    density,
    mixture_cdf,
    mixture_moments,
    sample,
    tail_quantile,
    transform_params,
)
from .cf_moments import CFGrid, build_cf_grid, cf_distance, empirical_cf, lag_embed
from .dgp_sim import (
    BaseDraws,
    ModelSpec,
    PanelShape,
    draw_base,
    simulate_ar1,
    simulate_for_estimation,
    simulate_sv_linear,
    simulate_sv_lognormal,
    simulate_tobit_panel,
)
from .aux_garch import GarchParams, filter_garch11, fit_garch11
from .estimator import (
    EstimationConfig,
    EstimationResult,
    SmmContext,
    direct_search,
    estimate,
    monte_carlo,
    nelder_mead,
)
from .inference import (
    MomentJacobian,
    block_bootstrap_se,
    functional_se,
    illposedness_diagnostic,
    moment_jacobian,
)
from .econ import (
    PreferenceParams,
    risk_free_rate,
    uncertainty_component,
    uncertainty_table,
    welfare_cost,
    welfare_table,
)

__all__ = [
    "MixtureParams",
    "RawMixtureParams",
    "bandwidth_floor",
    "density",
    "mixture_cdf",
    "mixture_moments",
    "sample",
    "tail_quantile",
    "transform_params",
    "CFGrid",
    "build_cf_grid",
    "cf_distance",
    "empirical_cf",
    "lag_embed",
    "BaseDraws",
    "ModelSpec",
    "PanelShape",
    "draw_base",
    "simulate_ar1",
    "simulate_for_estimation",
    "simulate_sv_linear",
    "simulate_sv_lognormal",
    "simulate_tobit_panel",
    "GarchParams",
    "filter_garch11",
    "fit_garch11",
    "EstimationConfig",
    "EstimationResult",
    "SmmContext",
    "direct_search",
    "estimate",
    "monte_carlo",
    "nelder_mead",
    "MomentJacobian",
    "block_bootstrap_se",
    "functional_se",
    "illposedness_diagnostic",
    "moment_jacobian",
    "PreferenceParams",
    "risk_free_rate",
    "uncertainty_component",
    "uncertainty_table",
    "welfare_cost",
    "welfare_table",
]
