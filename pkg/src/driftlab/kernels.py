"""Compactly supported bump profiles and their derivatives.

Both the point kernel ``zeta`` and the mollifier ``rho`` have the profile
``(1 - |y|^2/r^2)^p`` on the open ball of radius ``r``; with ``p = 4`` the
profile is three times continuously differentiable across the boundary.
Derivatives are written through ``f(q) = (1 - q)^p`` with ``q = |y|^2/r^2``.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement
from math import factorial

import numpy as np
from scipy.special import beta, gamma

from .errors import ConfigError


def sphere_area(d):
    return 2 * np.pi ** (d / 2) / gamma(d / 2)


def rho_constant(d, r, p):
    """Normalising constant making ``C (1 - |y|^2/r^2)^p`` a probability density."""
    return 1.0 / (r**d * sphere_area(d) * 0.5 * beta(d / 2, p + 1))


def _fderiv(q, p, n):
    """n-th derivative of (1 - q)^p, zero outside q < 1."""
    s = np.clip(1.0 - q, 0.0, None)
    return (-1) ** n * factorial(p) / factorial(p - n) * s ** (p - n) * (q < 1)


def radial_derivative(y, alpha, p, r=1.0):
    """``d^alpha`` of ``(1 - |y|^2/r^2)^p`` at points ``y`` (shape ``(n, d)``).

    ``alpha`` is a sorted tuple of axis indices of length at most 3.
    """
    y = np.asarray(y, dtype=float) / r
    q = np.sum(y * y, axis=-1)
    k = len(alpha)
    if k == 0:
        out = _fderiv(q, p, 0)
    elif k == 1:
        (i,) = alpha
        out = 2 * y[..., i] * _fderiv(q, p, 1)
    elif k == 2:
        i, j = alpha
        out = 4 * y[..., i] * y[..., j] * _fderiv(q, p, 2)
        if i == j:
            out = out + 2 * _fderiv(q, p, 1)
    elif k == 3:
        i, j, l = alpha
        out = 8 * y[..., i] * y[..., j] * y[..., l] * _fderiv(q, p, 3)
        sym = (i == j) * y[..., l] + (i == l) * y[..., j] + (j == l) * y[..., i]
        out = out + 4 * sym * _fderiv(q, p, 2)
    else:
        raise ValueError("only derivatives up to order 3 are implemented")
    return out / r**k


def multi_indices(d, max_order=3):
    out = []
    for k in range(max_order + 1):
        out.extend(combinations_with_replacement(range(d), k))
    return out


@lru_cache(maxsize=None)
def unit_l1_norms(d, p):
    """L1 norms of all partial derivatives (order <= 3) of the unit-radius mollifier.

    Midpoint rule on a uniform grid over the bounding cube; six significant
    digits in d = 2, about four in d = 3.
    """
    n = {2: 2000, 3: 240}.get(d, max(8, int(round(2e7 ** (1 / d)))))
    h = 2.0 / n
    axis = -1 + h * (np.arange(n) + 0.5)
    c = rho_constant(d, 1.0, p)
    totals = {a: 0.0 for a in multi_indices(d)}
    # chunk over the first axis to bound memory
    rest = np.stack(np.meshgrid(*([axis] * (d - 1)), indexing="ij"), axis=-1).reshape(-1, d - 1)
    for x0 in np.array_split(axis, max(1, n // 50)):
        pts = np.concatenate(
            [np.repeat(x0, len(rest))[:, None], np.tile(rest, (len(x0), 1))], axis=1)
        pts = pts[np.sum(pts * pts, axis=1) < 1]
        for a in totals:
            totals[a] += np.abs(radial_derivative(pts, a, p)).sum()
    return {a: c * v * h**d for a, v in totals.items()}


@dataclass(frozen=True)
class KernelParams:
    """Point kernel, mollifier and quadrature settings for a given range ``R``.

    The mollified field is evaluated with a lattice rule: the truncated
    kernel sum is sampled on the fixed grid ``quad_spacing * Z^d`` and the
    mollifier (and its derivatives) is centred at the evaluation point.
    ``quadrature_order`` is the number of grid nodes per mollifier diameter.
    """

    dimension: int
    range: float
    amplitude: float = 0.6
    profile_order: int = 4
    quadrature_order: int = 24
    norms: dict = field(init=False, repr=False, compare=False)
    m: float = field(init=False)

    def __post_init__(self):
        if not 0 < self.amplitude:
            raise ConfigError("kernel amplitude must be positive")
        if self.profile_order < 4:
            raise ConfigError("profile order below 4 does not give a C^3 mollifier")
        if self.quadrature_order < 4:
            raise ConfigError("quadrature order must be at least 4")
        unit = unit_l1_norms(self.dimension, self.profile_order)
        norms = {a: v / self.r_rho ** len(a) for a, v in unit.items()}
        object.__setattr__(self, "norms", norms)
        object.__setattr__(self, "m", float(max(1.0, max(norms.values()))))

    @classmethod
    def for_spec(cls, spec, **kw):
        return cls(spec.dimension, spec.range, **kw)

    @property
    def r_zeta(self):
        return self.range / 8

    @property
    def r_rho(self):
        return self.range / 8

    @property
    def rho_c(self):
        return rho_constant(self.dimension, self.r_rho, self.profile_order)

    @property
    def quad_spacing(self):
        return 2 * self.r_rho / self.quadrature_order

    @property
    def reach(self):
        """Distance from x of every point that can influence fields at x."""
        return self.r_rho + self.r_zeta

    def zeta(self, y):
        return self.amplitude * radial_derivative(y, (), self.profile_order, self.r_zeta)

    def rho(self, y, alpha=()):
        return self.rho_c * radial_derivative(y, tuple(sorted(alpha)), self.profile_order, self.r_rho)
