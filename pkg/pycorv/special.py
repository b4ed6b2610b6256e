"""
pycorv.special - Exponential integral

Native Ei(x) for x < 0 (the only branch the ICLL transform evaluates) and the
entire function Ein, from which ICLL is built without the cancellation that
`phi - Ei(-exp(phi)) + gamma` suffers for very negative phi.

Both work on scalars and ndarrays alike.
"""

import numpy as np

from .errors import DomainError

EULER_GAMMA = 0.57721566490153286061

# Power series below this |x|, continued fraction above. The alternating series
# loses about log10(e^|x|) digits to cancellation, which would break the 1e-10
# relative contract well before |x| = 10.
SERIES_CUTOFF = 1.0

_EPS = 1e-17
_FPMIN = 1e-300
_MAX_TERMS = 200


def _ein_series(z: np.ndarray) -> np.ndarray:
    """Ein(z) = sum_{k>=1} (-1)^(k+1) z^k / (k k!), for 0 <= z <= SERIES_CUTOFF."""
    total = np.zeros_like(z)
    power = np.ones_like(z)  # (-1)^(k+1) z^k / k!
    for k in range(1, _MAX_TERMS):
        power = power * (-z) / k
        term = -power / k
        total = total + term
        if np.all(np.abs(term) <= _EPS * np.abs(total)):
            break
    return total


def _e1_continued_fraction(z: np.ndarray) -> np.ndarray:
    """E1(z) for z > SERIES_CUTOFF by modified Lentz on the even CF."""
    b = z + 1.0
    c = np.full_like(z, 1.0 / _FPMIN)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, _MAX_TERMS):
        a = -float(i * i)
        b = b + 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h = h * delta
        if np.all(np.abs(delta - 1.0) < _EPS):
            break
    with np.errstate(under="ignore"):
        return h * np.exp(-z)


def _e1(z: np.ndarray) -> np.ndarray:
    """E1(z) for z > 0, elementwise."""
    out = np.empty_like(z)
    small = z <= SERIES_CUTOFF
    if np.any(small):
        zs = z[small]
        out[small] = -EULER_GAMMA - np.log(zs) + _ein_series(zs)
    if np.any(~small):
        out[~small] = _e1_continued_fraction(z[~small])
    return out


def exponential_integral_ei(x):
    """Ei(x) = -E1(-x) for x < 0.

    Accurate to ~1e-10 relative on [-700, -1e-300]; below -745 the result
    underflows to -0.0.
    """
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~(arr < 0.0)):
        raise DomainError(f"Ei is only implemented for x < 0, got {x!r}")
    result = -_e1(np.atleast_1d(-arr))
    if arr.ndim == 0:
        return float(result[0])
    return result.reshape(arr.shape)


def ein(x):
    """Ein(x) = integral_0^x (1 - e^-t)/t dt for x >= 0.

    Equal to E1(x) + ln x + gamma, i.e. -Ei(-x) + ln x + gamma.
    """
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr < 0.0) or np.any(np.isnan(arr)):
        raise DomainError(f"Ein is only implemented for x >= 0, got {x!r}")
    z = np.atleast_1d(arr)
    out = np.empty_like(z)
    small = z <= SERIES_CUTOFF
    if np.any(small):
        out[small] = _ein_series(z[small])
    if np.any(~small):
        zl = z[~small]
        out[~small] = _e1_continued_fraction(zl) + np.log(zl) + EULER_GAMMA
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)
