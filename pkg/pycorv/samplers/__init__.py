"""
pycorv.samplers - Langevin samplers for interval-constrained targets
"""

from .engine import ChainRunner, run_chain, run_chains_async, run_chains_parallel
from .state import (
    SAMPLER_KINDS, ChainState, ConstantStepsize, SampleTrace, SamplerKind, SamplerSpec,
)
from .steps import MAX_FOLDS, MAX_ITO_RETRIES, reflect_into, step_corv, step_ito, step_mirror, step_sgld

__all__ = [
    "ChainRunner", "run_chain", "run_chains_async", "run_chains_parallel",
    "SAMPLER_KINDS", "ChainState", "ConstantStepsize", "SampleTrace", "SamplerKind", "SamplerSpec",
    "MAX_FOLDS", "MAX_ITO_RETRIES", "reflect_into",
    "step_corv", "step_ito", "step_mirror", "step_sgld",
]
