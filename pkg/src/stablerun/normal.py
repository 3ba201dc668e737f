"""Normal distribution kernel: density, CDF, survival, quantile, reverse hazard.

Every function accepts a Python float or a numpy array. Scalars go through
``math.erfc`` and come back as ``float``; arrays go through ``scipy.special``.
Standardized arguments beyond ``TAIL_Z`` are clamped to exactly 0 or 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

SQRT2 = math.sqrt(2.0)
SQRT_2PI = math.sqrt(2.0 * math.pi)
INV_SQRT_2PI = 1.0 / SQRT_2PI

# Below -TAIL_Z the lower tail is subnormal in double precision.
TAIL_Z = 38.0


class TailUnderflowError(ArithmeticError):
    """Raised when a quantity needs a CDF value that has underflowed to zero."""


def std_pdf(z):
    if np.ndim(z) == 0:
        z = float(z)
        return INV_SQRT_2PI * math.exp(-0.5 * z * z)
    z = np.asarray(z, dtype=float)
    return INV_SQRT_2PI * np.exp(-0.5 * z * z)


def std_cdf(z):
    if np.ndim(z) == 0:
        z = float(z)
        if z < -TAIL_Z:
            return 0.0
        if z > TAIL_Z:
            return 1.0
        return 0.5 * math.erfc(-z / SQRT2)
    z = np.asarray(z, dtype=float)
    out = 0.5 * special.erfc(-z / SQRT2)
    out[z < -TAIL_Z] = 0.0
    out[z > TAIL_Z] = 1.0
    return out


def std_sf(z):
    """Upper tail ``1 - Phi(z)``, computed without cancellation."""
    return std_cdf(-z if np.ndim(z) == 0 else -np.asarray(z, dtype=float))


def in_tail(z) -> bool | np.ndarray:
    """True where the standardized value is beyond the clamping threshold."""
    if np.ndim(z) == 0:
        return abs(float(z)) > TAIL_Z
    return np.abs(np.asarray(z, dtype=float)) > TAIL_Z


def _lower_quantile(v):
    # v <= 1/2. ndtri (Cephes rational approximation) followed by one Newton
    # step; in the lower half both Phi(z) - v and phi(z) keep relative accuracy.
    z = special.ndtri(v)
    return z - (std_cdf(z) - v) / std_pdf(z)


def std_quantile(u):
    """Inverse of ``std_cdf`` on the open interval (0, 1).

    Raises ValueError for any ``u`` outside (0, 1), including NaN.
    """
    if np.ndim(u) == 0:
        u = float(u)
        if not 0.0 < u < 1.0:
            raise ValueError(f"quantile level must lie in (0, 1), got {u!r}")
        if u == 0.5:
            return 0.0
        if u < 0.5:
            return float(_lower_quantile(u))
        # 1 - u is exact for u in [1/2, 1)
        return -float(_lower_quantile(1.0 - u))
    u = np.asarray(u, dtype=float)
    if not np.all((u > 0.0) & (u < 1.0)):
        raise ValueError("quantile levels must lie in (0, 1)")
    lower = u <= 0.5
    v = np.where(lower, u, 1.0 - u)
    z = _lower_quantile(v)
    z = np.where(lower, z, -z)
    z[u == 0.5] = 0.0
    return z


@dataclass(frozen=True)
class Gaussian:
    """Normal distribution with the given mean and standard deviation."""

    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not (self.sd > 0.0 and math.isfinite(self.sd)):
            raise ValueError(f"sd must be finite and > 0, got {self.sd!r}")
        if not math.isfinite(self.mean):
            raise ValueError(f"mean must be finite, got {self.mean!r}")

    def standardize(self, x):
        if np.ndim(x) == 0:
            return (float(x) - self.mean) / self.sd
        return (np.asarray(x, dtype=float) - self.mean) / self.sd

    def pdf(self, x):
        return std_pdf(self.standardize(x)) / self.sd

    def cdf(self, x):
        return std_cdf(self.standardize(x))

    def sf(self, x):
        return std_sf(self.standardize(x))

    def quantile(self, u):
        return self.mean + self.sd * std_quantile(u)

    def reverse_hazard(self, x):
        """``pdf(x) / cdf(x)``; strictly decreasing in ``x`` for a normal law.

        Raises TailUnderflowError when the CDF has been clamped to zero.
        """
        z = self.standardize(x)
        if np.any(np.asarray(z) < -TAIL_Z):
            raise TailUnderflowError(
                f"cdf underflows at standardized value(s) below {-TAIL_Z}"
            )
        return std_pdf(z) / (self.sd * std_cdf(z))


STANDARD = Gaussian(0.0, 1.0)


def pdf(g: Gaussian, x):
    return g.pdf(x)


def cdf(g: Gaussian, x):
    return g.cdf(x)


def sf(g: Gaussian, x):
    return g.sf(x)


def quantile(g: Gaussian, u):
    return g.quantile(u)


def reverse_hazard(g: Gaussian, x):
    return g.reverse_hazard(x)
