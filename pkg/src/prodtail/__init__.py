"""Tails of dependent products X*Y and finite-time ruin with stochastic discounting."""

__version__ = "0.1.0"

from .dependence import FGM, Independent, KernelSpec, Sarmanov, bind, tilted_g, validate
from .distributions import (
    DiscreteFinite,
    Exponential,
    LightLongTail,
    Lognormal,
    Pareto,
    Shifted,
    Uniform,
    Weibull,
    from_json,
)
from .errors import ConfigError, DomainError, ModelInvalidError, NumericError, NumericWarning, SamplerStuckError
from .product_tail import (
    TailCurve,
    exact_product_tail,
    exact_two_point_fgm_tail,
    h_integral_tail,
    iterated_tail,
    mc_product_tail,
)
from .ruin import RiskModelSpec, asymptotic_ruin, compare_ruin, estimate_ruin

__all__ = [
    "__version__",
    "FGM", "Independent", "KernelSpec", "Sarmanov", "bind", "tilted_g", "validate",
    "DiscreteFinite", "Exponential", "LightLongTail", "Lognormal", "Pareto", "Shifted", "Uniform", "Weibull",
    "from_json",
    "ConfigError", "DomainError", "ModelInvalidError", "NumericError", "NumericWarning", "SamplerStuckError",
    "TailCurve", "exact_product_tail", "exact_two_point_fgm_tail", "h_integral_tail", "iterated_tail",
    "mc_product_tail",
    "RiskModelSpec", "asymptotic_ruin", "compare_ruin", "estimate_ruin",
]
