"""
pycorv - Langevin samplers for bounded domains

Mirror SGLD, Ito-transformed Langevin and change-of-random-variable (CoRV)
SGLD over a catalog of bijective transforms, with density-recovery and
weak-error diagnostics and Bayesian Poisson NMF.
"""

__version__ = "0.1.0"

from .errors import (
    ComputationError, ConfigError, DataError, DataParseError, DivergenceError, DomainError,
    NumericalOverflowError, PycorvError,
)
from .samplers import (
    ConstantStepsize, SampleTrace, SamplerKind, SamplerSpec, run_chain, run_chains_parallel,
)
from .targets import GradientOracle, make_target, proxy_potential, proxy_potential_gradient
from .transforms import Interval, default_transform, make_transform, resolve_transform

__all__ = [
    "__version__",
    "ComputationError", "ConfigError", "DataError", "DataParseError", "DivergenceError",
    "DomainError", "NumericalOverflowError", "PycorvError",
    "ConstantStepsize", "SampleTrace", "SamplerKind", "SamplerSpec", "run_chain",
    "run_chains_parallel",
    "GradientOracle", "make_target", "proxy_potential", "proxy_potential_gradient",
    "Interval", "default_transform", "make_transform", "resolve_transform",
]
