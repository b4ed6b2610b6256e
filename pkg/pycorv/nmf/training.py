"""
pycorv.nmf.training - Sampler-driven NMF training with predictive RMSE

Every eval_interval iterations after burn-in the current factor sample is
folded into a running predictive mean over the train, validation and test
entries; RMSE is measured against that mean.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..errors import ConfigError
from ..rng import chain_stream
from ..samplers import SamplerKind, SamplerSpec
from ..transforms import POSITIVE_REALS
from .dataset import Entries, RatingsDataset, Split
from .model import FactorState, init_factors, nmf_step_corv, nmf_step_mirror, sample_minibatch

logger = logging.getLogger(__name__)

NMF_SAMPLERS = (SamplerKind.MIRROR_SGLD, SamplerKind.CORV_SGLD)


class PredictiveAccumulator:
    """Running mean of per-sample predictions on fixed entry sets."""

    def __init__(self, entries: Dict[Split, Entries]):
        self.entries = dict(entries)
        self.means: Dict[Split, np.ndarray] = {s: np.zeros(len(e)) for s, e in self.entries.items()}
        self.n_accumulated = 0

    def add(self, state: FactorState) -> None:
        self.n_accumulated += 1
        k = self.n_accumulated
        for split, e in self.entries.items():
            prediction = state.predict(e.rows, e.cols)
            self.means[split] += (prediction - self.means[split]) / k

    def predict(self, split: Split) -> np.ndarray:
        if self.n_accumulated < 1:
            raise ConfigError("predictive accumulator is empty")
        return self.means[split]


def rmse(predictions, values) -> float:
    diff = np.asarray(predictions, dtype=np.float64) - np.asarray(values, dtype=np.float64)
    return float(np.sqrt(np.mean(diff * diff)))


def predict_rmse(acc: PredictiveAccumulator, split: Split) -> float:
    e = acc.entries.get(split)
    if e is None or len(e) == 0:
        raise ConfigError(f"no {split.name.lower()} entries to evaluate")
    return rmse(acc.predict(split), e.values)


@dataclass(frozen=True)
class RMSEPoint:
    iteration: int
    train_rmse: float
    valid_rmse: float
    test_rmse: float
    wall_time: float


@dataclass
class TrainingResult:
    label: str
    state: FactorState
    curve: List[RMSEPoint] = field(default_factory=list)
    n_iters: int = 0
    n_accumulated: int = 0

    @property
    def final_test_rmse(self) -> float:
        return self.curve[-1].test_rmse


def iterations_to_reach(curve: Sequence[RMSEPoint], threshold: float,
                        metric: str = "test_rmse") -> Optional[int]:
    """First evaluated iteration whose metric is at or below threshold."""
    for point in curve:
        if getattr(point, metric) <= threshold:
            return point.iteration
    return None


def _evaluate(acc: PredictiveAccumulator, state: FactorState) -> Dict[Split, float]:
    if acc.n_accumulated == 0:
        # nothing kept yet: score the current sample alone
        acc = PredictiveAccumulator(acc.entries)
        acc.add(state)
    return {s: predict_rmse(acc, s) if len(acc.entries[s]) else math.nan for s in Split}


def train_nmf(dataset: RatingsDataset, spec: SamplerSpec, rank: int, rate_w: float = 1.0,
              rate_h: float = 1.0, batch_size: int = 2000, n_iters: int = 10000, seed: int = 0,
              eval_interval: int = 100, burn_in: Optional[int] = None,
              initial: Optional[FactorState] = None) -> TrainingResult:
    """Run mirror or CoRV SGLD over (W, H), evaluating RMSE every eval_interval iterations.

    burn_in defaults to 20% of n_iters; `initial` resumes from saved factors.
    """
    problems = []
    if spec.kind not in NMF_SAMPLERS:
        problems.append(f"sampler.kind: NMF supports {', '.join(k.value for k in NMF_SAMPLERS)}, "
                        f"got {spec.kind.value}")
    if spec.kind is SamplerKind.CORV_SGLD and (spec.transform is None or spec.transform.codomain != POSITIVE_REALS):
        problems.append(f"sampler.transform: must map onto {POSITIVE_REALS}")
    if not spec.stepsize > 0.0:
        problems.append(f"sampler.stepsize: must be > 0, got {spec.stepsize}")
    if n_iters < 0:
        problems.append(f"n_iters: must be >= 0, got {n_iters}")
    if eval_interval < 1:
        problems.append(f"eval_interval: must be >= 1, got {eval_interval}")
    if not (rate_w > 0.0 and rate_h > 0.0):
        problems.append("rates: prior rates must be > 0")
    train = dataset.entries(Split.TRAIN)
    if not 1 <= batch_size <= len(train):
        problems.append(f"batch_size: must lie in [1, {len(train)}], got {batch_size}")
    if problems:
        raise ConfigError("invalid NMF training run", problems)

    corv = spec.kind is SamplerKind.CORV_SGLD
    transform = spec.transform if corv else None
    rng = chain_stream(seed)
    if initial is None:
        state = init_factors(dataset.n_users, dataset.n_items, rank, rng, rate_w, rate_h, transform)
    else:
        if initial.shape != (dataset.n_users, dataset.n_items) or initial.rank != rank:
            raise ConfigError(f"initial factors have shape {initial.shape} rank {initial.rank}, "
                              f"dataset needs {(dataset.n_users, dataset.n_items)} rank {rank}")
        if corv and initial.phi_W is None:
            raise ConfigError("resuming CoRV training needs saved proxy factors")
        state = initial
    burn_in = n_iters // 5 if burn_in is None else burn_in
    eps = spec.stepsize
    acc = PredictiveAccumulator({s: dataset.entries(s) for s in Split})
    result = TrainingResult(spec.label, state, n_iters=n_iters)

    def record(iteration: int, elapsed: float) -> None:
        scores = _evaluate(acc, state)
        result.curve.append(RMSEPoint(iteration, scores[Split.TRAIN], scores[Split.VALIDATION],
                                      scores[Split.TEST], elapsed))
        logger.info(f"{spec.label} iter {iteration}: test RMSE {scores[Split.TEST]:.4f}")

    started = time.perf_counter()
    record(0, 0.0)
    for it in range(1, n_iters + 1):
        batch = sample_minibatch(train, batch_size, rng)
        if corv:
            state = nmf_step_corv(state, batch, eps, transform, rng)
        else:
            state = nmf_step_mirror(state, batch, eps, rng)
        if it % eval_interval == 0 or it == n_iters:
            if it > burn_in:
                acc.add(state)
            record(it, time.perf_counter() - started)

    result.state = state
    result.n_accumulated = acc.n_accumulated
    return result
