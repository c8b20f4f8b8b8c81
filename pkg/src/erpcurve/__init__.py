"""Option-implied equity risk premium term structures.

Calibrates Gaussian-mixture risk-neutral densities to end-of-day index
option chains, tilts them by a constant relative risk aversion, and
evaluates a closed-form annualized equity risk premium with uncertainty
bands per expiration.
"""

__version__ = "0.1.0"

from .calibrate import (
    FitConfig,
    FitDiagnostics,
    FitTarget,
    fit_density,
    select_fit_targets,
)
from .carry import CarryParams, fit_carry, pair_quotes, select_near_money
from .chain import (
    ExpirySlice,
    OptionQuote,
    OptionType,
    Session,
    build_slices,
    load_column_mapping,
    parse_chain_file,
)
from .erp import (
    ErpPoint,
    ErpTermStructure,
    build_term_structure,
    erp_annualized,
    risk_return_points,
    term_structure_from_fits,
)
from .mixture import MixtureDensity, make_martingale_mixture, mixture_price
from .pricing import black_price, implied_vol
from .report import (
    TermStructureRecord,
    read_density_cache,
    read_term_structure,
    write_density_cache,
    write_term_structure,
)
from .synth import SynthSpec, generate_chain, quadrature_erp, quadrature_price
from .tilt import TiltedDensity, real_world_moments, tilt, tilted_components

__all__ = [
    "CarryParams",
    "ErpPoint",
    "ErpTermStructure",
    "ExpirySlice",
    "FitConfig",
    "FitDiagnostics",
    "FitTarget",
    "MixtureDensity",
    "OptionQuote",
    "OptionType",
    "Session",
    "SynthSpec",
    "TermStructureRecord",
    "TiltedDensity",
    "black_price",
    "build_slices",
    "build_term_structure",
    "erp_annualized",
    "fit_carry",
    "fit_density",
    "generate_chain",
    "implied_vol",
    "load_column_mapping",
    "make_martingale_mixture",
    "mixture_price",
    "pair_quotes",
    "parse_chain_file",
    "quadrature_erp",
    "quadrature_price",
    "read_density_cache",
    "read_term_structure",
    "real_world_moments",
    "risk_return_points",
    "select_fit_targets",
    "select_near_money",
    "term_structure_from_fits",
    "tilt",
    "tilted_components",
    "write_density_cache",
    "write_term_structure",
]
