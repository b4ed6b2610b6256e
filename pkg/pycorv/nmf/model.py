"""
pycorv.nmf.model - Poisson NMF with exponential priors

    X_ij ~ Poisson(sum_r W_ir H_rj),  W_ir ~ Exponential(rate_w),  H_rj ~ Exponential(rate_h)

Minibatch gradients of the potential and one step of the mirror and CoRV
samplers over the factor matrices. W is updated first and H is then updated
against the new W. Only the rows of W and columns of H that a minibatch
touches are moved.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ..errors import ConfigError, DivergenceError, NumericalOverflowError
from ..transforms import POSITIVE_REALS, Transform
from .dataset import Entries

logger = logging.getLogger(__name__)

# A mirrored entry that lands exactly on 0 is nudged here so every rate stays positive.
ZERO_FLOOR = 1e-12


@dataclass(frozen=True)
class FactorState:
    W: np.ndarray
    H: np.ndarray
    rate_w: float = 1.0
    rate_h: float = 1.0
    # CoRV only; W = f(phi_W) exactly
    phi_W: Optional[np.ndarray] = None
    phi_H: Optional[np.ndarray] = None

    @property
    def rank(self) -> int:
        return self.W.shape[1]

    @property
    def shape(self):
        return self.W.shape[0], self.H.shape[1]

    def predict(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """X_hat_k = sum_r W[rows_k, r] H[r, cols_k]."""
        return np.sum(self.W[rows] * self.H[:, cols].T, axis=1)


def init_factors(n_users: int, n_items: int, rank: int, rng: np.random.Generator,
                 rate_w: float = 1.0, rate_h: float = 1.0,
                 transform: Optional[Transform] = None) -> FactorState:
    """Prior draws; with a transform, phi = f^-1(W) and W is recomputed as f(phi)."""
    if rank < 1:
        raise ConfigError(f"rank must be >= 1, got {rank}")
    W = rng.exponential(1.0 / rate_w, size=(n_users, rank))
    H = rng.exponential(1.0 / rate_h, size=(rank, n_items))
    if transform is None:
        return FactorState(W, H, rate_w, rate_h)
    phi_W = transform.inverse(W)
    phi_H = transform.inverse(H)
    return FactorState(transform.eval(phi_W), transform.eval(phi_H), rate_w, rate_h, phi_W, phi_H)


@dataclass(frozen=True)
class Minibatch:
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    # N / |S|
    scale: float

    def __len__(self) -> int:
        return len(self.values)


def sample_minibatch(train: Entries, size: int, rng: np.random.Generator) -> Minibatch:
    """Uniform over training entries, with replacement."""
    if len(train) == 0:
        raise ConfigError("training split is empty")
    if not 1 <= size <= len(train):
        raise ConfigError(f"minibatch size must lie in [1, {len(train)}], got {size}")
    picks = rng.integers(0, len(train), size=size)
    return Minibatch(train.rows[picks], train.cols[picks], train.values[picks], len(train) / size)


def full_batch(train: Entries) -> Minibatch:
    return Minibatch(train.rows, train.cols, train.values, 1.0)


def _residuals(state: FactorState, batch: Minibatch) -> np.ndarray:
    """X_k / X_hat_k - 1 per batch entry."""
    x_hat = state.predict(batch.rows, batch.cols)
    if np.any(x_hat <= 0.0):
        raise NumericalOverflowError(
            "non-positive Poisson rate in minibatch",
            value=x_hat, intermediates={"min_rate": float(x_hat.min())})
    return batch.values / x_hat - 1.0


def gradient_w(state: FactorState, batch: Minibatch) -> np.ndarray:
    """Minibatch gradient for every row of W (prior term only for untouched rows)."""
    acc = np.zeros_like(state.W)
    np.add.at(acc, batch.rows, state.H[:, batch.cols].T * _residuals(state, batch)[:, None])
    return -batch.scale * acc + state.rate_w


def gradient_h(state: FactorState, batch: Minibatch) -> np.ndarray:
    """Minibatch gradient for every column of H."""
    acc = np.zeros((state.H.shape[1], state.rank))
    np.add.at(acc, batch.cols, state.W[batch.rows] * _residuals(state, batch)[:, None])
    return -batch.scale * acc.T + state.rate_h


def nmf_stochastic_gradient(state: FactorState, batch: Minibatch, factor: str, index: int) -> np.ndarray:
    """Gradient for row `index` of W (factor "W") or column `index` of H (factor "H")."""
    if len(batch) == 0:
        raise ConfigError("minibatch is empty")
    if factor == "W":
        return gradient_w(state, batch)[index]
    if factor == "H":
        return gradient_h(state, batch)[:, index]
    raise ConfigError(f"factor must be 'W' or 'H', got {factor!r}")


def _check_finite(values, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise DivergenceError(f"non-finite {what} in NMF step")


def _mirror(x: np.ndarray) -> np.ndarray:
    x = np.abs(x)
    x[x == 0.0] = ZERO_FLOOR
    return x


def nmf_step_mirror(state: FactorState, batch: Minibatch, eps: float,
                    rng: np.random.Generator) -> FactorState:
    """|x - eps grad + sqrt(2 eps) eta| for touched rows of W, then columns of H."""
    noise_scale = math.sqrt(2.0 * eps)

    rows = np.unique(batch.rows)
    eta = rng.standard_normal((len(rows), state.rank))
    proposal = state.W[rows] - eps * gradient_w(state, batch)[rows] + noise_scale * eta
    _check_finite(proposal, "W proposal")
    W = state.W.copy()
    W[rows] = _mirror(proposal)
    state = replace(state, W=W)

    cols = np.unique(batch.cols)
    eta = rng.standard_normal((state.rank, len(cols)))
    proposal = state.H[:, cols] - eps * gradient_h(state, batch)[:, cols] + noise_scale * eta
    _check_finite(proposal, "H proposal")
    H = state.H.copy()
    H[:, cols] = _mirror(proposal)
    return replace(state, H=H)


def _corv_update(phi, grad, eta, eps: float, t: Transform):
    fp, ratio = t.drift_terms(phi)
    return phi - eps * (fp * grad - ratio) + math.sqrt(2.0 * eps) * eta


def nmf_step_corv(state: FactorState, batch: Minibatch, eps: float, t: Transform,
                  rng: np.random.Generator) -> FactorState:
    """SGLD on phi_W then phi_H, with W = f(phi_W) and H = f(phi_H)."""
    if t.codomain != POSITIVE_REALS:
        raise ConfigError(f"NMF transforms must map onto {POSITIVE_REALS}, {t.name} maps onto {t.codomain}")
    if state.phi_W is None or state.phi_H is None:
        raise ConfigError("CoRV step needs proxy factors; initialise with a transform")

    rows = np.unique(batch.rows)
    eta = rng.standard_normal((len(rows), state.rank))
    phi = _corv_update(state.phi_W[rows], gradient_w(state, batch)[rows], eta, eps, t)
    _check_finite(phi, "phi_W update")
    phi_W = state.phi_W.copy()
    W = state.W.copy()
    phi_W[rows] = phi
    W[rows] = t.eval(phi)
    state = replace(state, W=W, phi_W=phi_W)

    cols = np.unique(batch.cols)
    eta = rng.standard_normal((state.rank, len(cols)))
    phi = _corv_update(state.phi_H[:, cols], gradient_h(state, batch)[:, cols], eta, eps, t)
    _check_finite(phi, "phi_H update")
    phi_H = state.phi_H.copy()
    H = state.H.copy()
    phi_H[:, cols] = phi
    H[:, cols] = t.eval(phi)
    return replace(state, H=H, phi_H=phi_H)
