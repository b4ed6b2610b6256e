"""
pycorv.samplers.steps - One Langevin step per sampler

All four updates draw the proposal noise eta from the chain's stream first
and query the gradient oracle second, so a shared stream gives identical
draws across samplers (CoRV with the identity transform reproduces SGLD bit
for bit). phi/theta may be floats or ndarrays.
"""

import logging
import math

import numpy as np

from ..errors import ConfigError, DivergenceError
from ..rng import draw_normal
from ..targets import GradientOracle
from ..transforms import Interval, Transform, _like
from .state import ChainState

logger = logging.getLogger(__name__)

MAX_FOLDS = 64
MAX_ITO_RETRIES = 8


def _check_finite(value, state: ChainState, what: str) -> None:
    if not np.all(np.isfinite(value)):
        raise DivergenceError(
            f"non-finite {what} at step {state.step} (stepsize {state.stepsize:g})",
            state=state.snapshot())


def step_sgld(state: ChainState, oracle: GradientOracle) -> ChainState:
    """theta <- theta - eps U'(theta) + sqrt(2 eps) eta."""
    eps = state.stepsize
    eta = draw_normal(state.rng, state.theta)
    grad = oracle.gradient(state.theta)
    with np.errstate(invalid="ignore", over="ignore"):
        theta = state.theta - eps * grad + math.sqrt(2.0 * eps) * eta
    _check_finite(theta, state, "SGLD update")
    return state.advance(theta, theta)


def reflect_into(x, domain: Interval, max_folds: int = MAX_FOLDS):
    """Fold x back across the boundaries until it lies in the closed domain.

    Returns (folded value, total number of folds).
    """
    folded = np.array(x, dtype=np.float64, ndmin=1)
    counts = np.zeros(folded.shape, dtype=np.int64)
    while True:
        below = folded < domain.lower
        above = folded > domain.upper
        outside = below | above
        if not outside.any():
            break
        # only a finite bound can be crossed
        folded[below] = 2.0 * domain.lower - folded[below]
        folded[above] = 2.0 * domain.upper - folded[above]
        counts += outside
        if counts.max() > max_folds:
            raise DivergenceError(
                f"proposal needed more than {max_folds} reflections to re-enter {domain}")
    if np.ndim(x) == 0:
        return float(folded[0]), int(counts.sum())
    return folded.reshape(np.shape(x)), int(counts.sum())


def step_mirror(state: ChainState, oracle: GradientOracle, domain: Interval) -> ChainState:
    """SGLD proposal in target space, reflected at the boundaries."""
    if domain.is_unconstrained:
        raise ConfigError("mirror step needs a domain with a finite boundary")
    eps = state.stepsize
    eta = draw_normal(state.rng, state.theta)
    grad = oracle.gradient(state.theta)
    with np.errstate(invalid="ignore", over="ignore"):
        proposal = state.theta - eps * grad + math.sqrt(2.0 * eps) * eta
    _check_finite(proposal, state, "mirror proposal")
    try:
        theta, folds = reflect_into(proposal, domain)
    except DivergenceError as err:
        err.state = state.snapshot()
        raise
    return state.advance(None, theta, folds)


def _ito_increment(phi, grad, eta, eps: float, t: Transform):
    # g'(theta) = 1/f'(phi) and g''(theta) = -f''(phi)/f'(phi)^3, phi = g(theta)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        gp = 1.0 / t.deriv1(phi)
        gpp = -t.log_deriv_ratio(phi) * gp * gp
        return phi + eps * (-gp * grad + gpp) + math.sqrt(2.0 * eps) * gp * eta


def step_ito(state: ChainState, oracle: GradientOracle, t: Transform) -> ChainState:
    """Discretized Ito transformation of the target-space Langevin SDE.

    A non-finite phi update counts as a boundary event and is retried with a
    fresh eta, at most MAX_ITO_RETRIES times.
    """
    eps = state.stepsize
    eta = draw_normal(state.rng, state.phi)
    grad = oracle.gradient(state.theta)
    phi = _ito_increment(state.phi, grad, eta, eps, t)
    events = 0
    bad = ~np.isfinite(phi)
    retries = 0
    while np.any(bad):
        if retries == MAX_ITO_RETRIES:
            raise DivergenceError(
                f"Ito update stayed non-finite after {MAX_ITO_RETRIES} redraws at step {state.step}",
                state=state.snapshot())
        retries += 1
        events += int(np.count_nonzero(bad))
        eta = np.where(bad, draw_normal(state.rng, state.phi), eta)
        phi = _like(_ito_increment(state.phi, grad, eta, eps, t), state.phi)
        bad = ~np.isfinite(phi)
    if retries:
        logger.debug(f"Ito step {state.step}: {events} non-finite update(s) redrawn")
    return state.advance(phi, t.eval(phi), events)


def step_corv(state: ChainState, oracle: GradientOracle, t: Transform) -> ChainState:
    """SGLD on the proxy potential U(phi) = U_theta(f(phi)) - log f'(phi)."""
    eps = state.stepsize
    eta = draw_normal(state.rng, state.phi)
    grad = oracle.gradient(state.theta)
    fp, ratio = t.drift_terms(state.phi)
    with np.errstate(invalid="ignore", over="ignore"):
        phi = state.phi - eps * (fp * grad - ratio) + math.sqrt(2.0 * eps) * eta
    _check_finite(phi, state, "CoRV update")
    return state.advance(phi, t.eval(phi))
