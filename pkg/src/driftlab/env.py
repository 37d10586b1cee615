"""Poisson point-process environments generated cell by cell.

Space is tiled by cubic cells of side ``R/4``.  The number of points in a
cell and their positions are drawn from the Philox stream keyed by the
master seed, with the counter made of (draw index, replica index, packed
cell coordinates).  Any bounded region can therefore be realised on demand,
and the realisation does not depend on which queries came before.

Coordinates handed to the numba kernels are always *internal* coordinates:
an :class:`EnvHandle` with offset ``o`` maps a query point ``y`` to
``y + o``.  Shifting a view only changes ``o``, which is how the
translation group acts on the environment.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numba import njit
from scipy import stats

from .errors import ConfigError
from .rng import derive_key, block_uniforms

# Per-cell counts are capped at this Poisson upper quantile.
CELL_CAP_TAIL = 1e-12
# Mean number of points in a ball of radius R/8 when the intensity is not given.
POINTS_PER_SMALL_BALL = 3.0


def ball_volume(d, r):
    from scipy.special import gamma
    return np.pi ** (d / 2) / gamma(d / 2 + 1) * r**d


@dataclass(frozen=True)
class EnvironmentSpec:
    """Law of the environment: a homogeneous Poisson process on R^d.

    Parameters
    ----------
    dimension : int
        Space dimension, at least 2.
    range : float
        Dependence range ``R``.  Kernel and mollifier radii are ``R/8``.
    seed : int
        64-bit master seed.
    intensity : float, optional
        Points per unit volume.  Defaults to the value giving on average
        three points in a ball of radius ``R/8``.
    """

    dimension: int = 2
    range: float = 32.0
    seed: int = 0
    intensity: float | None = None

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 2:
            raise ConfigError(f"dimension must be an integer >= 2, got {self.dimension}")
        if not np.isfinite(self.range) or self.range <= 0:
            raise ConfigError(f"range must be positive, got {self.range}")
        if self.intensity is not None and (not np.isfinite(self.intensity) or self.intensity <= 0):
            raise ConfigError(f"intensity must be positive, got {self.intensity}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.dimension > 8:
            raise ConfigError("dimension above 8 is not supported by the cell packing")

    @property
    def nu(self):
        if self.intensity is not None:
            return float(self.intensity)
        return POINTS_PER_SMALL_BALL / ball_volume(self.dimension, self.range / 8)

    @property
    def cell_side(self):
        return self.range / 4

    @property
    def mean_per_cell(self):
        return self.nu * self.cell_side**self.dimension

    @cached_property
    def key(self):
        return derive_key(self.seed)

    @cached_property
    def count_cdf(self):
        """Poisson CDF table for the per-cell count, truncated at the cap."""
        cap = int(stats.poisson.ppf(1 - CELL_CAP_TAIL, self.mean_per_cell))
        cdf = stats.poisson.cdf(np.arange(cap + 1), self.mean_per_cell)
        cdf[-1] = 1.0
        return cdf

    @property
    def cell_cap(self):
        return len(self.count_cdf) - 1


@njit(cache=True)
def _pack_cell(cell):
    """Two 32-bit counter words holding the cell's integer coordinates."""
    d = cell.shape[0]
    bits = 64 // d
    half = np.int64(1) << (bits - 1)
    packed = np.uint64(0)
    for i in range(d):
        v = cell[i] + half
        if v < 0 or v >= 2 * half:
            raise ValueError("cell coordinate outside packable range")
        packed = (packed << np.uint64(bits)) | np.uint64(v)
    return packed & np.uint64(0xFFFFFFFF), packed >> np.uint64(32)


@njit(cache=True)
def _cell_points(cell, replica, k0, k1, side, cdf, out, start):
    """Write the points of one cell into ``out[start:]``; return their count."""
    d = cell.shape[0]
    c2, c3 = _pack_cell(cell)
    rep = np.uint64(replica)
    u, _ = block_uniforms(np.uint64(0), rep, c2, c3, k0, k1)
    n = 0
    while n < cdf.shape[0] - 1 and u >= cdf[n]:
        n += 1
    # coordinate j of point i uses uniform number i*d + j of the blocks >= 1
    for i in range(n):
        for j in range(d):
            q = i * d + j
            a, b = block_uniforms(np.uint64(1 + q // 2), rep, c2, c3, k0, k1)
            v = a if q % 2 == 0 else b
            out[start + i, j] = (float(cell[j]) + v) * side
    return n


@njit(cache=True)
def gather_points(center, radius, replica, k0, k1, side, cdf, out):
    """Points within ``radius`` of ``center`` in canonical order.

    Cells are visited in lexicographic order of their integer coordinates
    and points within a cell in generation order.  ``out`` must hold at
    least ``n_cells * cap`` rows; see :func:`buffer_rows`.
    """
    d = center.shape[0]
    lo = np.empty(d, np.int64)
    hi = np.empty(d, np.int64)
    for i in range(d):
        lo[i] = np.int64(np.floor((center[i] - radius) / side))
        hi[i] = np.int64(np.floor((center[i] + radius) / side))
    cell = lo.copy()
    r2 = radius * radius
    total = 0
    while True:
        base = total
        n = _cell_points(cell, replica, k0, k1, side, cdf, out, base)
        for i in range(n):
            s = 0.0
            for j in range(d):
                t = out[base + i, j] - center[j]
                s += t * t
            if s <= r2:
                if base + i != total:
                    for j in range(d):
                        out[total, j] = out[base + i, j]
                total += 1
        # odometer increment
        k = d - 1
        while k >= 0:
            cell[k] += 1
            if cell[k] <= hi[k]:
                break
            cell[k] = lo[k]
            k -= 1
        if k < 0:
            break
    return total


def buffer_rows(spec, radius):
    cells_per_axis = int(np.floor(2 * radius / spec.cell_side)) + 2
    return cells_per_axis**spec.dimension * spec.cell_cap + 1


@dataclass(frozen=True)
class EnvHandle:
    """One realisation of the environment, seen from ``origin_offset``."""

    spec: EnvironmentSpec
    replica: int = 0
    origin_offset: np.ndarray = field(default=None)

    def __post_init__(self):
        off = self.origin_offset
        if off is None:
            off = np.zeros(self.spec.dimension)
        off = np.array(off, dtype=float)
        if off.shape != (self.spec.dimension,):
            raise ConfigError("offset has wrong dimension")
        off.setflags(write=False)
        object.__setattr__(self, "origin_offset", off)

    def internal(self, x):
        """Internal coordinates of view coordinates ``x`` (shape ``(..., d)``)."""
        return np.asarray(x, dtype=float) + self.origin_offset


@dataclass(frozen=True)
class PointBatch:
    center: np.ndarray
    radius: float
    points: np.ndarray


def make_env(spec, replica_index=0):
    """Environment handle for replica ``replica_index`` of ``spec``."""
    if not isinstance(spec, EnvironmentSpec):
        raise ConfigError("spec must be an EnvironmentSpec")
    if not 0 <= int(replica_index) < 2**32:
        raise ConfigError(f"replica index must fit in 32 bits, got {replica_index}")
    return EnvHandle(spec, int(replica_index))


def shifted_view(env, x):
    """The environment translated so that view point 0 sits at ``x``."""
    return EnvHandle(env.spec, env.replica, env.origin_offset + np.asarray(x, dtype=float))


def points_in_ball(env, center, radius):
    """All process points within distance ``radius`` of ``center``."""
    center = np.asarray(center, dtype=float)
    spec = env.spec
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if radius == 0:
        return PointBatch(center, 0.0, np.empty((0, spec.dimension)))
    buf = np.empty((buffer_rows(spec, radius), spec.dimension))
    k0, k1 = spec.key
    n = gather_points(env.internal(center), float(radius), env.replica, k0, k1,
                      spec.cell_side, spec.count_cdf, buf)
    return PointBatch(center, float(radius), buf[:n] - env.origin_offset)
