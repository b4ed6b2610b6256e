"""
pycorv.samplers.engine - Chain runner and parallel replicate chains

ChainRunner advances one scalar chain with the step method registered for its
sampler kind. Replicate chains go to a process pool from asyncio, one job per
seed; each job builds its own stream from its seed, so results do not depend
on the worker count.
"""

import asyncio
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from ..errors import ConfigError, DivergenceError, PycorvError
from ..rng import chain_stream, check_distinct
from ..targets import GradientOracle, TargetDensity
from ..transforms import Transform, default_transform
from .registry import collect_step_names, steps
from .state import ChainState, SampleTrace, SamplerKind, SamplerSpec
from .steps import step_corv, step_ito, step_mirror, step_sgld

logger = logging.getLogger(__name__)

ChainResult = Union[SampleTrace, PycorvError]


class ChainRunner:
    """Runs one chain of `spec` on `target`, drawing gradients from `oracle`."""

    _step_table: Optional[Dict[SamplerKind, str]] = None

    def __init__(self, spec: SamplerSpec, target: TargetDensity, oracle: GradientOracle):
        spec.validate(target)
        if oracle.base != target:
            raise ConfigError(f"oracle targets {oracle.base}, chain targets {target}")
        self.spec = spec
        self.target = target
        self.oracle = oracle
        cls = type(self)
        if cls._step_table is None:
            cls._step_table = collect_step_names(cls)
        self._advance = getattr(self, cls._step_table[spec.kind])

    @property
    def transform(self) -> Transform:
        """The transform that places the starting point."""
        return self.spec.transform or default_transform(self.target.domain)

    @steps(SamplerKind.SGLD)
    def _advance_sgld(self, state: ChainState) -> ChainState:
        return step_sgld(state, self.oracle)

    @steps(SamplerKind.MIRROR_SGLD)
    def _advance_mirror(self, state: ChainState) -> ChainState:
        return step_mirror(state, self.oracle, self.target.domain)

    @steps(SamplerKind.ITO_LMC)
    def _advance_ito(self, state: ChainState) -> ChainState:
        return step_ito(state, self.oracle, self.spec.transform)

    @steps(SamplerKind.CORV_SGLD)
    def _advance_corv(self, state: ChainState) -> ChainState:
        return step_corv(state, self.oracle, self.spec.transform)

    def step(self, state: ChainState) -> ChainState:
        """One update with this runner's sampler."""
        return self._advance(state)

    def initial_state(self, rng: np.random.Generator, initial_phi: float = 0.0,
                      replicates: Optional[int] = None) -> ChainState:
        """Start at theta_0 = f(initial_phi); a vector of `replicates` copies when given."""
        theta = self.transform.eval(float(initial_phi))
        kind = self.spec.kind
        if kind is SamplerKind.MIRROR_SGLD:
            phi = None
        elif kind is SamplerKind.SGLD:
            phi = theta
        else:
            phi = float(initial_phi)
        if replicates is not None:
            theta = np.full(replicates, theta, dtype=np.float64)
            phi = None if phi is None else np.full(replicates, phi, dtype=np.float64)
        return ChainState(phi, theta, 0, self.spec.stepsize, rng)

    def run(self, n_steps: int, seed: int, initial_phi: float = 0.0) -> SampleTrace:
        spec = self.spec
        burn_in = spec.resolved_burn_in(n_steps)
        if n_steps < 1:
            raise ConfigError(f"n_steps must be >= 1, got {n_steps}")
        if burn_in >= n_steps:
            raise ConfigError(f"burn_in ({burn_in}) must be smaller than n_steps ({n_steps})")

        rng = chain_stream(seed)
        self.oracle = self.oracle.bound_to(rng)
        keeps_phi = spec.kind in (SamplerKind.ITO_LMC, SamplerKind.CORV_SGLD)
        n_keep = (n_steps - burn_in) // spec.thinning
        thetas = np.empty(n_keep)
        phis = np.empty(n_keep) if keeps_phi else None
        kept = 0

        state = self.initial_state(rng, initial_phi)
        started = time.perf_counter()
        for t in range(1, n_steps + 1):
            try:
                state = self._advance(state)
            except DivergenceError as err:
                err.step_index = t
                err.partial_trace = SampleTrace(
                    thetas[:kept].copy(),
                    None if phis is None else phis[:kept].copy(),
                    state.boundary_events, time.perf_counter() - started, spec, seed, t - 1)
                logger.warning(f"{spec.label} seed {seed} diverged at step {t}: {err}")
                raise
            if t > burn_in and (t - burn_in) % spec.thinning == 0:
                thetas[kept] = state.theta
                if phis is not None:
                    phis[kept] = state.phi
                kept += 1

        elapsed = time.perf_counter() - started
        logger.debug(f"{spec.label} seed {seed}: {n_steps} steps in {elapsed:.3f}s, "
                     f"{state.boundary_events} boundary events")
        return SampleTrace(thetas, phis, state.boundary_events, elapsed, spec, seed, n_steps)


def run_chain(spec: SamplerSpec, target: TargetDensity, oracle: GradientOracle,
              n_steps: int, seed: int, initial_phi: float = 0.0) -> SampleTrace:
    """Run one chain from theta_0 = f(initial_phi)."""
    return ChainRunner(spec, target, oracle).run(n_steps, seed, initial_phi)


def _chain_job(spec, target, oracle, n_steps, seed, initial_phi, keep_failures) -> ChainResult:
    try:
        return run_chain(spec, target, oracle, n_steps, seed, initial_phi)
    except PycorvError as err:
        if keep_failures:
            return err
        raise


async def run_chains_async(specs: Union[SamplerSpec, Sequence[SamplerSpec]],
                           target: TargetDensity, oracle: GradientOracle,
                           n_steps: int, seeds: Sequence[int], workers: int = 1,
                           initial_phi: float = 0.0,
                           keep_failures: bool = False) -> List[ChainResult]:
    """One chain per seed, in seed order.

    `specs` is either one spec shared by all chains or one per seed. With
    keep_failures, a failed chain yields its PycorvError in place of a trace.
    """
    seeds = [int(s) for s in seeds]
    check_distinct(seeds)
    if isinstance(specs, SamplerSpec):
        specs = [specs] * len(seeds)
    if len(specs) != len(seeds):
        raise ConfigError(f"{len(specs)} sampler specs for {len(seeds)} seeds")
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    for spec in set(specs):
        spec.validate(target)

    jobs = [(spec, target, oracle, n_steps, seed, initial_phi, keep_failures)
            for spec, seed in zip(specs, seeds)]
    if workers == 1 or len(jobs) == 1:
        return [_chain_job(*job) for job in jobs]

    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [loop.run_in_executor(pool, _chain_job, *job) for job in jobs]
        return list(await asyncio.gather(*futures))


def run_chains_parallel(specs: Union[SamplerSpec, Sequence[SamplerSpec]],
                        target: TargetDensity, oracle: GradientOracle,
                        n_steps: int, seeds: Sequence[int], workers: int = 1,
                        initial_phi: float = 0.0,
                        keep_failures: bool = False) -> List[ChainResult]:
    """Blocking wrapper around run_chains_async."""
    return asyncio.run(run_chains_async(
        specs, target, oracle, n_steps, seeds, workers, initial_phi, keep_failures))
