"""Flexibility-area estimation for distribution networks.

Estimates the set of active/reactive power setpoints reachable at the
point of common coupling by combining flexibility offers, via Monte-Carlo
power flow, exhaustive lattice power flow, a multi-objective OPF boundary
sweep, or convolution-based counting with merge/persist/adapt variants.
"""

__version__ = "1.0.0"

from .bundle import save_tensors, tc_plus_adapt
from .errors import (
    ConfigError,
    ContractError,
    FingerprintMismatch,
    FlexAreaError,
    IntractableError,
    MemoryBudgetError,
    NetworkValidationError,
    RuntimeFailure,
    SchemaError,
)
from .estimators import exhaustive_pf, monte_carlo_pf
from .fagrid import FaGrid, bilinear_upsample, min_combine, normalize, read_csv, write_csv
from .network import (
    Constraints,
    Network,
    apply_scenario,
    load_fixture,
    load_network,
    validate_network,
)
from .offers import FspOffer, offers_from_network
from .opf import opf_boundary_sweep, solve_single_opf
from .pf import build_model, check_constraints, solve_model
from .runner import RunResult, dispatch
from .settings import RunConfig, validate_settings
from .tensorconv import tc_plus, tc_plus_merge
from .ttrain import TtTensor, tt_decompose, tt_reconstruct

__all__ = [
    "__version__",
    "ConfigError", "ContractError", "FingerprintMismatch", "FlexAreaError",
    "IntractableError", "MemoryBudgetError", "NetworkValidationError",
    "RuntimeFailure", "SchemaError",
    "Constraints", "Network", "apply_scenario", "load_fixture", "load_network",
    "validate_network",
    "FspOffer", "offers_from_network",
    "FaGrid", "bilinear_upsample", "min_combine", "normalize", "read_csv", "write_csv",
    "build_model", "check_constraints", "solve_model",
    "monte_carlo_pf", "exhaustive_pf",
    "opf_boundary_sweep", "solve_single_opf",
    "tc_plus", "tc_plus_merge", "save_tensors", "tc_plus_adapt",
    "TtTensor", "tt_decompose", "tt_reconstruct",
    "RunConfig", "validate_settings", "RunResult", "dispatch",
]
