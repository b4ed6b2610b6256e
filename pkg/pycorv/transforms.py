"""
pycorv.transforms - Scalar transform catalog

Maps the unbounded proxy variable phi to the bounded target variable
theta = f(phi), with the closed-form derivatives the samplers need. Every
method accepts a float or an ndarray and is applied elementwise.

| name     | f(phi)                           | codomain | L     |
|----------|----------------------------------|----------|-------|
| sigmoid  | 1/(1+exp(-phi))                  | (0, 1)   | 1/4   |
| arctan   | arctan(phi)/pi + 1/2             | (0, 1)   | 1/pi  |
| softsign | phi/(2(1+|phi|)) + 1/2           | (0, 1)   | 1/2   |
| exp      | exp(phi)                         | (0, inf) | inf   |
| softplus | log(1+exp(phi))                  | (0, inf) | 1     |
| icll     | phi - Ei(-exp(phi)) + gamma      | (0, inf) | 1     |
| identity | phi                              | R        | 1     |

Transforms are immutable after construction and safe to share between
threads.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Type

import numpy as np
from scipy.special import expit, logit

from .errors import ConfigError, DomainError
from .special import ein

logger = logging.getLogger(__name__)

# Exponentials see phi clamped to this range (saturation, not an error).
PHI_LIMIT = 700.0


def _saturate(phi):
    return np.clip(phi, -PHI_LIMIT, PHI_LIMIT)


def _like(value, template):
    """Return a Python float when the input was scalar."""
    if np.ndim(template) == 0:
        return float(value)
    return value


@dataclass(frozen=True)
class Interval:
    """Open interval (lower, upper); either side may be infinite."""
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ConfigError(f"interval needs lower < upper, got ({self.lower}, {self.upper})")

    @property
    def has_finite_lower(self) -> bool:
        return math.isfinite(self.lower)

    @property
    def has_finite_upper(self) -> bool:
        return math.isfinite(self.upper)

    @property
    def is_bounded(self) -> bool:
        return self.has_finite_lower and self.has_finite_upper

    @property
    def is_unconstrained(self) -> bool:
        return not (self.has_finite_lower or self.has_finite_upper)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, x, closed: bool = True):
        """Elementwise membership test."""
        if closed:
            return (x >= self.lower) & (x <= self.upper)
        return (x > self.lower) & (x < self.upper)

    def clip_open(self, x):
        """Push values that rounded onto a finite bound back to the interior."""
        if self.has_finite_lower:
            x = np.maximum(x, np.nextafter(self.lower, self.upper))
        if self.has_finite_upper:
            x = np.minimum(x, np.nextafter(self.upper, self.lower))
        return x

    def __str__(self) -> str:
        return f"({self.lower:g}, {self.upper:g})"


UNIT_INTERVAL = Interval(0.0, 1.0)
POSITIVE_REALS = Interval(0.0, math.inf)
REAL_LINE = Interval()


class Transform(ABC):
    """Increasing bijection f: R -> codomain, with f', f'', f''/f', f^-1."""

    name: str = ""
    codomain: Interval = REAL_LINE
    lipschitz_bound: float = math.inf
    lipschitz_monotone: bool = True

    def eval(self, phi):
        """theta = f(phi), always inside the open codomain."""
        return _like(self.codomain.clip_open(self._forward(phi)), phi)

    def inverse(self, theta):
        """phi = f^-1(theta) for theta in the closed codomain."""
        inside = self.codomain.contains(np.asarray(theta), closed=True)
        if not np.all(inside):
            raise DomainError(f"{self.name}: inverse needs theta in {self.codomain}, got {theta!r}")
        return _like(self._inverse(theta), theta)

    @abstractmethod
    def _forward(self, phi):
        ...

    @abstractmethod
    def _inverse(self, theta):
        ...

    @abstractmethod
    def deriv1(self, phi):
        """f'(phi)."""

    @abstractmethod
    def deriv2(self, phi):
        """f''(phi)."""

    @abstractmethod
    def log_deriv_ratio(self, phi):
        """f''(phi)/f'(phi) in closed form (finite where f' underflows)."""

    @abstractmethod
    def log_deriv1(self, phi):
        """log f'(phi) in closed form."""

    def drift_terms(self, phi):
        """(f'(phi), f''(phi)/f'(phi)), the two factors of the proxy drift."""
        return self.deriv1(phi), self.log_deriv_ratio(phi)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r}, codomain={self.codomain})"


class SigmoidTransform(Transform):
    name = "sigmoid"
    codomain = UNIT_INTERVAL
    lipschitz_bound = 0.25

    def _forward(self, phi):
        return expit(_saturate(phi))

    def _inverse(self, theta):
        return logit(theta)

    def deriv1(self, phi):
        phi = _saturate(phi)
        return expit(phi) * expit(-phi)

    def deriv2(self, phi):
        return self.deriv1(phi) * self.log_deriv_ratio(phi)

    def log_deriv_ratio(self, phi):
        # 1 - 2 sigmoid(phi)
        return -np.tanh(0.5 * _saturate(phi))

    def log_deriv1(self, phi):
        phi = _saturate(phi)
        return -np.logaddexp(0.0, -phi) - np.logaddexp(0.0, phi)


class ArctanTransform(Transform):
    name = "arctan"
    codomain = UNIT_INTERVAL
    lipschitz_bound = 1.0 / math.pi

    def _forward(self, phi):
        # Tail forms avoid the 1/2 - 1/2 cancellation for large |phi|.
        with np.errstate(divide="ignore"):
            inv = 1.0 / np.asarray(phi, dtype=np.float64)
            return np.where(
                phi < -1.0, -np.arctan(inv) / math.pi,
                np.where(phi > 1.0, 1.0 - np.arctan(inv) / math.pi,
                         0.5 + np.arctan(phi) / math.pi))

    def _inverse(self, theta):
        with np.errstate(divide="ignore"):
            return np.where(theta < 0.5,
                            -1.0 / np.tan(math.pi * np.asarray(theta)),
                            1.0 / np.tan(math.pi * (1.0 - np.asarray(theta))))

    def deriv1(self, phi):
        return 1.0 / (math.pi * (1.0 + np.square(phi)))

    def deriv2(self, phi):
        return -2.0 * phi / (math.pi * np.square(1.0 + np.square(phi)))

    def log_deriv_ratio(self, phi):
        return -2.0 * phi / (1.0 + np.square(phi))

    def log_deriv1(self, phi):
        return -math.log(math.pi) - np.log1p(np.square(phi))


class SoftsignTransform(Transform):
    name = "softsign"
    codomain = UNIT_INTERVAL
    lipschitz_bound = 0.5

    def _forward(self, phi):
        half = 0.5 / (1.0 + np.abs(phi))
        return np.where(phi < 0.0, half, 1.0 - half)

    def _inverse(self, theta):
        with np.errstate(divide="ignore"):
            return np.where(theta < 0.5,
                            1.0 - 0.5 / np.asarray(theta),
                            0.5 / (1.0 - np.asarray(theta)) - 1.0)

    def deriv1(self, phi):
        return 0.5 / np.square(1.0 + np.abs(phi))

    def deriv2(self, phi):
        return -np.sign(phi) / (1.0 + np.abs(phi)) ** 3

    def log_deriv_ratio(self, phi):
        return -2.0 * np.sign(phi) / (1.0 + np.abs(phi))

    def log_deriv1(self, phi):
        return -math.log(2.0) - 2.0 * np.log1p(np.abs(phi))


class ExpTransform(Transform):
    name = "exp"
    codomain = POSITIVE_REALS
    lipschitz_bound = math.inf
    lipschitz_monotone = False

    def _forward(self, phi):
        return np.exp(_saturate(phi))

    def _inverse(self, theta):
        with np.errstate(divide="ignore"):
            return np.log(theta)

    def deriv1(self, phi):
        return np.exp(_saturate(phi))

    def deriv2(self, phi):
        return np.exp(_saturate(phi))

    def log_deriv_ratio(self, phi):
        return np.ones_like(phi, dtype=np.float64) if np.ndim(phi) else 1.0

    def log_deriv1(self, phi):
        return _saturate(phi) * 1.0


class SoftplusTransform(Transform):
    name = "softplus"
    codomain = POSITIVE_REALS
    lipschitz_bound = 1.0

    def _forward(self, phi):
        return np.logaddexp(0.0, _saturate(phi))

    def _inverse(self, theta):
        # log(expm1(theta)), written to survive both tails
        with np.errstate(divide="ignore"):
            return theta + np.log(-np.expm1(-np.asarray(theta, dtype=np.float64)))

    def deriv1(self, phi):
        return expit(_saturate(phi))

    def deriv2(self, phi):
        phi = _saturate(phi)
        return expit(phi) * expit(-phi)

    def log_deriv_ratio(self, phi):
        # 1 - f'(phi)
        return expit(-_saturate(phi))

    def drift_terms(self, phi):
        fp = expit(_saturate(phi))
        return fp, 1.0 - fp

    def log_deriv1(self, phi):
        return -np.logaddexp(0.0, -_saturate(phi))


class ICLLTransform(Transform):
    """f(phi) = phi - Ei(-e^phi) + gamma, evaluated as Ein(e^phi)."""

    name = "icll"
    codomain = POSITIVE_REALS
    lipschitz_bound = 1.0

    newton_tol = 1e-15
    newton_max_iter = 100

    def _forward(self, phi):
        return ein(np.exp(_saturate(phi)))

    def _inverse(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        with np.errstate(divide="ignore"):
            log_theta = np.log(theta)
            # softplus inverse as the starting point
            phi = theta + np.log(-np.expm1(-theta))
        # Newton on log f(phi) = log theta; log f is concave and increasing in
        # phi, so the iteration converges monotonically after one step.
        for _ in range(self.newton_max_iter):
            f = self._forward(phi)
            step = (np.log(f) - log_theta) * f / self.deriv1(phi)
            phi = phi - step
            if np.all(np.abs(step) <= self.newton_tol * (1.0 + np.abs(phi))):
                break
        else:
            logger.warning(f"icll inverse did not converge for theta={theta!r}")
        return phi

    def deriv1(self, phi):
        return -np.expm1(-np.exp(_saturate(phi)))

    def deriv2(self, phi):
        phi = _saturate(phi)
        return np.exp(phi - np.exp(phi))

    def log_deriv_ratio(self, phi):
        x = np.exp(_saturate(phi))
        with np.errstate(over="ignore"):
            return x / np.expm1(x)

    def drift_terms(self, phi):
        x = np.exp(_saturate(phi))
        with np.errstate(over="ignore"):
            return -np.expm1(-x), x / np.expm1(x)

    def log_deriv1(self, phi):
        return np.log(-np.expm1(-np.exp(_saturate(phi))))


class IdentityTransform(Transform):
    """f(phi) = phi. CoRV with this transform is plain SGLD."""

    name = "identity"
    codomain = REAL_LINE
    lipschitz_bound = 1.0

    def _forward(self, phi):
        return phi

    def _inverse(self, theta):
        return theta

    def eval(self, phi):
        return phi

    def deriv1(self, phi):
        return np.ones_like(phi, dtype=np.float64) if np.ndim(phi) else 1.0

    def deriv2(self, phi):
        return np.zeros_like(phi, dtype=np.float64) if np.ndim(phi) else 0.0

    def log_deriv_ratio(self, phi):
        return np.zeros_like(phi, dtype=np.float64) if np.ndim(phi) else 0.0

    def log_deriv1(self, phi):
        return np.zeros_like(phi, dtype=np.float64) if np.ndim(phi) else 0.0


class AffineTransform(Transform):
    """theta = offset + scale * base(sign * phi), with scale * sign > 0.

    Rescales a (0,1) transform to (a,b), shifts a positive transform to
    (a,inf) or reflects it to (-inf,b).
    """

    def __init__(self, base: Transform, codomain: Interval, offset: float,
                 scale: float, sign: float = 1.0):
        if scale * sign <= 0.0:
            raise ConfigError("affine transform must stay increasing")
        self.base = base
        self.name = base.name
        self.codomain = codomain
        self.offset = float(offset)
        self.scale = float(scale)
        self.sign = float(sign)
        self.lipschitz_bound = abs(self.scale) * base.lipschitz_bound
        self.lipschitz_monotone = base.lipschitz_monotone

    def _forward(self, phi):
        return self.offset + self.scale * self.base._forward(self.sign * phi)

    def _inverse(self, theta):
        return self.sign * self.base._inverse((theta - self.offset) / self.scale)

    def deriv1(self, phi):
        return abs(self.scale) * self.base.deriv1(self.sign * phi)

    def deriv2(self, phi):
        return self.scale * self.base.deriv2(self.sign * phi)

    def log_deriv_ratio(self, phi):
        return self.sign * self.base.log_deriv_ratio(self.sign * phi)

    def log_deriv1(self, phi):
        return math.log(abs(self.scale)) + self.base.log_deriv1(self.sign * phi)


_CATALOG: Dict[str, Type[Transform]] = {
    cls.name: cls for cls in (
        SigmoidTransform, ArctanTransform, SoftsignTransform, ExpTransform,
        SoftplusTransform, ICLLTransform, IdentityTransform,
    )
}

TRANSFORM_NAMES = tuple(_CATALOG)


def make_transform(name: str) -> Transform:
    """Build a catalog transform by its canonical name."""
    try:
        return _CATALOG[name]()
    except KeyError:
        raise ConfigError(
            f"unknown transform {name!r}; expected one of {', '.join(TRANSFORM_NAMES)}") from None


def adapt_transform(t: Transform, domain: Interval) -> Transform:
    """Fit a catalog transform's codomain onto `domain`."""
    if t.codomain == domain:
        return t
    base = t.codomain
    if base == UNIT_INTERVAL and domain.is_bounded:
        return AffineTransform(t, domain, domain.lower, domain.width)
    if base == POSITIVE_REALS and domain.has_finite_lower and not domain.has_finite_upper:
        return AffineTransform(t, domain, domain.lower, 1.0)
    if base == POSITIVE_REALS and domain.has_finite_upper and not domain.has_finite_lower:
        return AffineTransform(t, domain, domain.upper, -1.0, sign=-1.0)
    raise ConfigError(f"transform {t.name!r} with codomain {t.codomain} cannot map onto {domain}")


def resolve_transform(name: str, domain: Interval) -> Transform:
    return adapt_transform(make_transform(name), domain)


def default_transform(domain: Interval) -> Transform:
    """sigmoid for bounded, softplus for half-lines, identity for R."""
    if domain.is_bounded:
        return resolve_transform("sigmoid", domain)
    if domain.is_unconstrained:
        return make_transform("identity")
    return resolve_transform("softplus", domain)


@dataclass(frozen=True)
class LipschitzReport:
    """What a grid scan of f' says about the Lipschitz/monotone assumption."""
    name: str
    lipschitz_bound: float
    max_deriv: float
    min_deriv: float
    argmax_phi: float
    bound_holds: bool
    lower_tail_deriv: float
    upper_tail_deriv: float
    lower_trend: str
    upper_trend: str


def _tail_trend(end: float, inner: float, peak: float) -> str:
    if end < inner and end < 1e-2 * peak:
        return "vanishing"
    if end > inner * (1.0 + 1e-9):
        return "growing"
    return "bounded"


def check_lipschitz_monotone(t: Transform, grid) -> LipschitzReport:
    """Scan f' on `grid` (sorted, within [-50, 50]) against 0 <= f' <= L."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 3:
        raise ConfigError("grid must be a 1-d array with at least 3 points")
    if not np.all(np.isfinite(grid)) or np.any(np.diff(grid) < 0):
        raise ConfigError("grid must be finite and sorted")
    if grid[0] < -50.0 or grid[-1] > 50.0:
        raise ConfigError("grid must lie within [-50, 50]")

    fp = np.asarray(t.deriv1(grid), dtype=np.float64)
    peak = float(fp.max())
    bound = t.lipschitz_bound
    holds = bool(
        math.isfinite(bound)
        and np.all(fp >= 0.0)
        and np.all(fp <= bound * (1.0 + 1e-12))
    )
    inner = max(1, grid.size // 10)
    report = LipschitzReport(
        name=t.name,
        lipschitz_bound=bound,
        max_deriv=peak,
        min_deriv=float(fp.min()),
        argmax_phi=float(grid[int(np.argmax(fp))]),
        bound_holds=holds,
        lower_tail_deriv=float(fp[0]),
        upper_tail_deriv=float(fp[-1]),
        lower_trend=_tail_trend(float(fp[0]), float(fp[inner]), peak),
        upper_trend=_tail_trend(float(fp[-1]), float(fp[-1 - inner]), peak),
    )
    logger.debug(f"Lipschitz scan: {report}")
    return report
