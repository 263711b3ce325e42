"""Ruin and dividend functionals for dual risk models with proportional gains."""

__version__ = "0.1.0"

from .brownian import (  # noqa: E402
    BrownianControl,
    BrownianParams,
    CoeffTable,
    ScaleFamily,
    rho_eval_brownian,
    solve_brownian,
    v_eval_brownian,
)
from .inversion import InversionControl, Method, ruin_probability, ruin_time_transform  # noqa: E402
from .lattice import mu_eval, rho_eval, solve_lattice, v_eval  # noqa: E402
from .mc import MCConfig, MCEstimate, simulate_brownian_lattice, simulate_lattice, simulate_ruin  # noqa: E402
from .model import (  # noqa: E402
    Deterministic,
    DomainError,
    Drift,
    DualModelParams,
    Erlang,
    Exponential,
    HyperExponential,
    LatticeParams,
    NoAdditiveGain,
    NumericalError,
    classify_drift,
)
from .transforms import (  # noqa: E402
    RuinTransform,
    SeriesControl,
    generalized_ruin_lt,
    ruin_lt,
    ruin_time_lt,
)

__all__ = [
    "__version__",
    "BrownianControl",
    "BrownianParams",
    "CoeffTable",
    "ScaleFamily",
    "rho_eval_brownian",
    "solve_brownian",
    "v_eval_brownian",
    "InversionControl",
    "Method",
    "ruin_probability",
    "ruin_time_transform",
    "mu_eval",
    "rho_eval",
    "solve_lattice",
    "v_eval",
    "MCConfig",
    "MCEstimate",
    "simulate_brownian_lattice",
    "simulate_lattice",
    "simulate_ruin",
    "Deterministic",
    "DomainError",
    "Drift",
    "DualModelParams",
    "Erlang",
    "Exponential",
    "HyperExponential",
    "LatticeParams",
    "NoAdditiveGain",
    "NumericalError",
    "classify_drift",
    "RuinTransform",
    "SeriesControl",
    "generalized_ruin_lt",
    "ruin_lt",
    "ruin_time_lt",
]
