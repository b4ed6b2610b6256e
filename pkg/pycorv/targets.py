"""
pycorv.targets - Target densities and gradient oracles

Targets expose the unnormalized potential U(theta) = -log pi(theta) + const,
its gradient, and a frozen scipy.stats distribution for exact pdf, cdf and
inverse-cdf sampling (diagnostics only). GradientOracle emulates a noisy
stochastic gradient by adding Gaussian noise to the exact one.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from typing import Any, Dict, Mapping, Optional, Type

import numpy as np
from scipy import stats

from .errors import ConfigError, NumericalOverflowError
from .rng import draw_normal
from .transforms import Interval, POSITIVE_REALS, REAL_LINE, Transform, UNIT_INTERVAL

logger = logging.getLogger(__name__)


class TargetDensity(ABC):
    """A distribution on an interval with closed-form U and U'."""

    name: str = ""

    @property
    @abstractmethod
    def domain(self) -> Interval:
        ...

    @property
    @abstractmethod
    def boundary_density_finite(self) -> bool:
        """Whether pi(theta) has a finite limit at every finite boundary."""

    @abstractmethod
    def _potential(self, theta):
        ...

    @abstractmethod
    def _grad_potential(self, theta):
        ...

    @property
    def distribution(self):
        """Frozen scipy.stats distribution, or None."""
        return None

    @property
    def exact_mean(self) -> Optional[float]:
        return None

    @property
    def params(self) -> Dict[str, float]:
        return asdict(self)

    # Evaluated right at a boundary these return the IEEE value of the
    # closed form (inf), never a clamped one. Scalars go through np.float64
    # so 1/0 follows numpy rules instead of raising ZeroDivisionError.
    def potential(self, theta):
        if np.ndim(theta) == 0:
            theta = np.float64(theta)
        with np.errstate(divide="ignore", invalid="ignore"):
            return self._potential(theta)

    def grad_potential(self, theta):
        if np.ndim(theta) == 0:
            theta = np.float64(theta)
        with np.errstate(divide="ignore", invalid="ignore"):
            return self._grad_potential(theta)

    def pdf_normalized(self, theta):
        if self.distribution is None:
            return None
        return self.distribution.pdf(theta)

    def __str__(self) -> str:
        args = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.name}({args})"


@dataclass(frozen=True)
class BetaTarget(TargetDensity):
    alpha: float = 0.5
    beta: float = 0.5
    name = "beta"

    @property
    def domain(self) -> Interval:
        return UNIT_INTERVAL

    @property
    def boundary_density_finite(self) -> bool:
        return min(self.alpha, self.beta) >= 1.0

    def _potential(self, theta):
        return -(self.alpha - 1.0) * np.log(theta) - (self.beta - 1.0) * np.log1p(-theta)

    def _grad_potential(self, theta):
        return -(self.alpha - 1.0) / theta + (self.beta - 1.0) / (1.0 - theta)

    @property
    def distribution(self):
        return stats.beta(self.alpha, self.beta)

    @property
    def exact_mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


@dataclass(frozen=True)
class GammaTarget(TargetDensity):
    shape: float = 0.5
    scale: float = 1.0
    name = "gamma"

    @property
    def domain(self) -> Interval:
        return POSITIVE_REALS

    @property
    def boundary_density_finite(self) -> bool:
        return self.shape >= 1.0

    def _potential(self, theta):
        return -(self.shape - 1.0) * np.log(theta) + theta / self.scale

    def _grad_potential(self, theta):
        return -(self.shape - 1.0) / theta + 1.0 / self.scale

    @property
    def distribution(self):
        return stats.gamma(self.shape, scale=self.scale)

    @property
    def exact_mean(self) -> float:
        return self.shape * self.scale


@dataclass(frozen=True)
class TruncatedNormalTarget(TargetDensity):
    """Standard normal truncated to (lower, upper)."""
    lower: float = -1.0
    upper: float = 1.0
    name = "truncated_normal"

    @property
    def domain(self) -> Interval:
        return Interval(self.lower, self.upper)

    @property
    def boundary_density_finite(self) -> bool:
        return True

    def _potential(self, theta):
        return 0.5 * np.square(theta)

    def _grad_potential(self, theta):
        return theta * 1.0

    @property
    def distribution(self):
        return stats.truncnorm(self.lower, self.upper)

    @property
    def exact_mean(self) -> float:
        norm = stats.norm
        mass = norm.cdf(self.upper) - norm.cdf(self.lower)
        return float((norm.pdf(self.lower) - norm.pdf(self.upper)) / mass)


@dataclass(frozen=True)
class TranslatedBetaTarget(TargetDensity):
    """Beta(alpha, beta) moved to (-1, 1): w = 2x - 1."""
    alpha: float = 2.0
    beta: float = 2.0
    name = "translated_beta"

    @property
    def domain(self) -> Interval:
        return Interval(-1.0, 1.0)

    @property
    def boundary_density_finite(self) -> bool:
        return min(self.alpha, self.beta) >= 1.0

    def _potential(self, theta):
        return -(self.alpha - 1.0) * np.log1p(theta) - (self.beta - 1.0) * np.log1p(-theta)

    def _grad_potential(self, theta):
        return -(self.alpha - 1.0) / (theta + 1.0) + (self.beta - 1.0) / (1.0 - theta)

    @property
    def distribution(self):
        return stats.beta(self.alpha, self.beta, loc=-1.0, scale=2.0)

    @property
    def exact_mean(self) -> float:
        return (self.alpha - self.beta) / (self.alpha + self.beta)


@dataclass(frozen=True)
class NormalTarget(TargetDensity):
    """Unconstrained normal, for checking plain SGLD."""
    mean: float = 0.0
    std: float = 1.0
    name = "normal"

    @property
    def domain(self) -> Interval:
        return REAL_LINE

    @property
    def boundary_density_finite(self) -> bool:
        return True

    def _potential(self, theta):
        return 0.5 * np.square((theta - self.mean) / self.std)

    def _grad_potential(self, theta):
        return (theta - self.mean) / self.std ** 2

    @property
    def distribution(self):
        return stats.norm(self.mean, self.std)

    @property
    def exact_mean(self) -> float:
        return self.mean


_FAMILIES: Dict[str, Type[TargetDensity]] = {
    cls.name: cls for cls in (
        BetaTarget, GammaTarget, TruncatedNormalTarget, TranslatedBetaTarget, NormalTarget,
    )
}

TARGET_NAMES = tuple(_FAMILIES)

# Parameters that must be strictly positive, per family.
_POSITIVE = {
    "beta": ("alpha", "beta"),
    "gamma": ("shape", "scale"),
    "translated_beta": ("alpha", "beta"),
    "normal": ("std",),
}


def make_target(name: str, params: Optional[Mapping[str, Any]] = None) -> TargetDensity:
    """Build a target from its config name and parameter map."""
    params = dict(params or {})
    cls = _FAMILIES.get(name)
    if cls is None:
        raise ConfigError(f"unknown target {name!r}; expected one of {', '.join(TARGET_NAMES)}")

    problems = []
    allowed = {f.name for f in fields(cls)}
    for key in sorted(set(params) - allowed):
        problems.append(f"target.{key}: not a parameter of {name}")
    values = {}
    for key in sorted(allowed & set(params)):
        try:
            values[key] = float(params[key])
        except (TypeError, ValueError):
            problems.append(f"target.{key}: expected a number, got {params[key]!r}")
            continue
        if not math.isfinite(values[key]):
            problems.append(f"target.{key}: must be finite")
    for key in _POSITIVE.get(name, ()):
        if key in values and values[key] <= 0.0:
            problems.append(f"target.{key}: must be > 0, got {values[key]:g}")
    if name == "truncated_normal":
        lower = values.get("lower", -1.0)
        upper = values.get("upper", 1.0)
        if not lower < upper:
            problems.append(f"target.lower: must be < upper, got ({lower:g}, {upper:g})")
    if problems:
        raise ConfigError(f"invalid {name} target", problems)
    return cls(**values)


def proxy_potential(target: TargetDensity, t: Transform, phi):
    """U(phi) = U_theta(f(phi)) - log f'(phi)."""
    return target.potential(t.eval(phi)) - t.log_deriv1(phi)


def proxy_potential_gradient(target: TargetDensity, t: Transform, phi):
    """U'(phi) = f'(phi) U'_theta(f(phi)) - f''(phi)/f'(phi)."""
    theta = t.eval(phi)
    fp = t.deriv1(phi)
    grad = target.grad_potential(theta)
    ratio = t.log_deriv_ratio(phi)
    with np.errstate(invalid="ignore", over="ignore"):
        result = fp * grad - ratio
    if not np.all(np.isfinite(result)):
        raise NumericalOverflowError(
            f"non-finite proxy gradient for {target} under {t.name}",
            value=phi,
            intermediates={"theta": theta, "deriv1": fp, "grad_potential": grad, "ratio": ratio},
        )
    return result


class OracleMode(str, Enum):
    EXACT = "exact"
    ADDITIVE_NOISE = "additive-noise"
    MINIBATCH = "minibatch"


@dataclass(frozen=True)
class GradientOracle:
    """U'_theta plus zero-mean Gaussian noise of standard deviation noise_std.

    Owns a mutable random stream once bound: one oracle per chain.
    """
    base: TargetDensity
    noise_std: float = 0.0
    mode: OracleMode = OracleMode.EXACT
    rng: Optional[np.random.Generator] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "mode", OracleMode(self.mode))
        if not self.noise_std >= 0.0:
            raise ConfigError(f"oracle.noise_std: must be >= 0, got {self.noise_std}")

    @property
    def noisy(self) -> bool:
        return self.mode is OracleMode.ADDITIVE_NOISE and self.noise_std > 0.0

    def bound_to(self, rng: np.random.Generator) -> "GradientOracle":
        """The same oracle drawing from `rng` (the owning chain's stream)."""
        return replace(self, rng=rng)

    def noise(self, like):
        """delta ~ Normal(0, noise_std^2), shaped like `like`; 0.0 when exact."""
        if not self.noisy:
            return 0.0
        if self.rng is None:
            raise ConfigError("noisy oracle has no random stream; bind one with bound_to()")
        return self.noise_std * draw_normal(self.rng, like)

    def gradient(self, theta):
        """U'_theta(theta) + delta."""
        if self.mode is OracleMode.MINIBATCH:
            raise ConfigError("minibatch gradients are computed by the nmf module")
        grad = self.base.grad_potential(theta)
        if not self.noisy:
            return grad
        return grad + self.noise(theta)

    def proxy_gradient(self, phi, t: Transform):
        """f'(phi)(U'_theta(f(phi)) + delta) - f''(phi)/f'(phi)."""
        return t.deriv1(phi) * self.gradient(t.eval(phi)) - t.log_deriv_ratio(phi)


def stochastic_gradient(oracle: GradientOracle, x, t: Optional[Transform] = None):
    """Noisy gradient in target space, or in proxy space when `t` is given.

    In proxy space the noise enters as f'(phi) * delta, so it vanishes where
    f' does.
    """
    with np.errstate(invalid="ignore", over="ignore"):
        result = oracle.gradient(x) if t is None else oracle.proxy_gradient(x, t)
    if not np.all(np.isfinite(result)):
        raise NumericalOverflowError(
            f"non-finite stochastic gradient for {oracle.base}", value=x)
    return result
