"""Euler-Maruyama simulation of dX = b(X, omega) dt + dW.

Brownian increments come from Philox with counter
``(fine step, trajectory, block, BROWNIAN_TAG)``.  A run with
``noise_substeps = s`` sums ``s`` consecutive fine increments into one
step, so a run at step ``h`` with ``s = 2`` and a run at ``h / 2`` with
``s = 1`` see the same Brownian path (coupled refinement).

Time averages are left-endpoint Riemann sums, accumulated in equal time
blocks so that batch-means errors can be formed from a single path.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import fields as F
from .env import EnvHandle, buffer_rows, make_env
from .errors import ConfigError, NumericalFailure
from .kernels import KernelParams
from .rng import BROWNIAN_TAG, block_normals, derive_key
from .stats import EstimateReport, batch_means

ANNEALED_FIRST = 2 << 30
OBSERVABLES = ("phi", "phi_eps", "b")


def default_step(spec):
    """0.01 (R/4)^2: per-step displacement well below the correlation length."""
    return 0.01 * (spec.range / 4) ** 2


@dataclass(frozen=True)
class SdeConfig:
    """Simulation parameters.

    ``h_step`` is an upper bound: the horizon is split into
    ``ceil(T / h_step)`` equal steps.  ``replica`` is the environment of a
    quenched run; annealed runs use ``first_replica + j`` for path ``j``.
    """

    T: float
    M: int = 1
    h_step: float | None = None
    brownian_seed: int = 0
    replica: int = 0
    first_replica: int = ANNEALED_FIRST
    noise_substeps: int = 1
    time_blocks: int = 0
    first_path: int = 0

    def __post_init__(self):
        if self.h_step is not None and not self.h_step > 0:
            raise ConfigError(f"h_step must be positive, got {self.h_step}")
        if not self.T > 0 or (self.h_step is not None and self.T < self.h_step):
            raise ConfigError("horizon T must be at least one step")
        if self.M < 1:
            raise ConfigError("need at least one trajectory")
        if self.noise_substeps < 1:
            raise ConfigError("noise_substeps must be >= 1")
        if not 0 <= self.brownian_seed < 2**64:
            raise ConfigError("brownian_seed must be an unsigned 64-bit integer")

    def step_for(self, spec):
        return self.h_step if self.h_step is not None else default_step(spec)

    def n_steps(self, spec):
        return int(math.ceil(self.T / self.step_for(spec) - 1e-9))

    def blocks(self, paths):
        if self.time_blocks:
            return self.time_blocks
        return max(1, -(-100 // paths))


@dataclass
class TrajectoryResult:
    """Outcome of ``M`` paths.

    ``block_means[j, k, o]`` is the time average of observable ``o`` (in the
    order phi, phi_eps, b_1..b_d) over time block ``k`` of path ``j``.
    """

    endpoint: np.ndarray
    T: float
    h: float
    n_steps: int
    max_b: np.ndarray
    block_means: np.ndarray
    names: tuple = field(default=())

    @property
    def slope(self):
        return self.endpoint / self.T

    def time_average(self, name):
        """Whole-horizon average of an observable for every path."""
        cols = self._columns(name)
        return self.block_means[:, :, cols].mean(axis=1)

    def _columns(self, name):
        if name == "b":
            return [i for i, n in enumerate(self.names) if n.startswith("b_")]
        if name not in self.names:
            raise ConfigError(f"unknown observable {name!r}; choose from {self.names}")
        return self.names.index(name)


@njit(cache=True, error_model="numpy")
def _paths(x0, replicas, offsets, n_steps, h, substeps, eps, lam, mu, alpha, need_field,
           bk0, bk1, first_path, k0, k1, side, cdf, r_zeta, amp, p, r_rho, rho_c, hq, m,
           buf, n_blocks, endpoint, max_b, acc):
    """Run every path; returns -1 on success or the failing step index."""
    n_paths, d = x0.shape
    grad = np.empty(d)
    hess = np.empty((d, d))
    z = np.empty(d)
    b = np.zeros(d)
    x = np.empty(d)
    dw = np.empty(d)
    sq = math.sqrt(h / substeps)
    den = 1.0 + (eps / d) * mu
    scale_c = 1.0 / (8.0 * d * d)
    tag = np.uint64(BROWNIAN_TAG)
    for j in range(n_paths):
        traj = np.uint64(first_path + j)
        for i in range(d):
            x[i] = x0[j, i]
        mb = 0.0
        for k in range(n_steps):
            blk = (k * n_blocks) // n_steps
            phi_v = 0.0
            pe = 1.0
            if need_field:
                for i in range(d):
                    z[i] = offsets[j, i] + x[i]
                phi_v = field_raw_scaled(z, replicas[j], k0, k1, side, cdf, r_zeta, amp, p,
                                         r_rho, rho_c, hq, m, buf, grad, hess)
                pe = (1.0 + (eps / d) * phi_v) / den
                for i in range(d):
                    if i == 0:
                        c = 0.0
                        for jj in range(1, d):
                            c -= hess[jj, jj]
                    else:
                        c = hess[0, i]
                    ge = (eps / d) * grad[i] / den
                    b[i] = ge / (2.0 * pe) + eps * (c * scale_c + lam * alpha[i]) / pe
            nb = 0.0
            for i in range(d):
                nb += b[i] * b[i]
            nb = math.sqrt(nb)
            if nb > mb:
                mb = nb
            acc[j, blk, 0] += phi_v
            acc[j, blk, 1] += pe
            for i in range(d):
                acc[j, blk, 2 + i] += b[i]
            # Brownian increment: sum of `substeps` fine increments
            for i in range(d):
                dw[i] = 0.0
            for s in range(substeps):
                step = np.uint64(k * substeps + s)
                for w in range((d + 1) // 2):
                    g0, g1 = block_normals(step, traj, np.uint64(w), tag, bk0, bk1)
                    dw[2 * w] += g0
                    if 2 * w + 1 < d:
                        dw[2 * w + 1] += g1
            finite = True
            for i in range(d):
                x[i] += b[i] * h + sq * dw[i]
                if not math.isfinite(x[i]):
                    finite = False
            if not finite:
                return k
        for i in range(d):
            endpoint[j, i] = x[i]
        max_b[j] = mb
    # block sums -> block means
    for blk in range(n_blocks):
        lo = -((-blk * n_steps) // n_blocks)
        hi = -((-(blk + 1) * n_steps) // n_blocks)
        cnt = hi - lo
        for j in range(n_paths):
            for o in range(acc.shape[2]):
                acc[j, blk, o] = acc[j, blk, o] / cnt if cnt > 0 else np.nan
    return -1


@njit(cache=True, error_model="numpy")
def field_raw_scaled(z, replica, k0, k1, side, cdf, r_zeta, amp, p, r_rho, rho_c, hq, m,
                     buf, grad, hess):
    v = F.field_raw(z, replica, k0, k1, side, cdf, r_zeta, amp, p, r_rho, rho_c, hq,
                    buf, grad, hess)
    d = z.shape[0]
    for i in range(d):
        grad[i] /= m
        for j in range(d):
            hess[i, j] /= m
    return v / m


def _run(spec, kernel, params, cfg, replicas, offsets, track=True):
    kernel = kernel or KernelParams.for_spec(spec)
    F._check(spec, kernel)
    d = spec.dimension
    n_paths = len(replicas)
    n_steps = cfg.n_steps(spec)
    h = cfg.T / n_steps
    n_blocks = min(cfg.blocks(n_paths), n_steps)
    eps = params.eps if params is not None else 0.0
    lam = params.lam if params is not None else 0.0
    mu = params.mu_phi if params is not None else 0.0
    alpha = np.asarray(params.a_eps if params is not None else np.zeros(d), dtype=float)
    need_field = bool(eps > 0 or track)
    bk0, bk1 = derive_key(cfg.brownian_seed, BROWNIAN_TAG)
    endpoint = np.empty((n_paths, d))
    max_b = np.empty(n_paths)
    acc = np.zeros((n_paths, n_blocks, 2 + d))
    buf = np.empty((buffer_rows(spec, kernel.reach), d))
    x0 = np.zeros((n_paths, d))
    k0, k1, side, cdf, r_zeta, amp, p, r_rho, rho_c, hq = F.kernel_args(spec, kernel)
    status = _paths(x0, np.asarray(replicas, dtype=np.int64), np.ascontiguousarray(offsets, float),
                    n_steps, h, cfg.noise_substeps, eps, lam, mu, alpha, need_field,
                    bk0, bk1, cfg.first_path, k0, k1, side, cdf, r_zeta, amp, p, r_rho,
                    rho_c, hq, kernel.m, buf, n_blocks, endpoint, max_b, acc)
    if status >= 0:
        raise NumericalFailure(f"non-finite state at step {status}", step=int(status))
    names = ("phi", "phi_eps") + tuple(f"b_{i + 1}" for i in range(d))
    return TrajectoryResult(endpoint, cfg.T, h, n_steps, max_b, acc, names)


def simulate_quenched(env, cfg, params=None, kernel=None, track=True):
    """``cfg.M`` paths from the origin of the view ``env``, all in that environment.

    Identical ``(env, cfg, params)`` give bit-identical results.
    """
    if not isinstance(env, EnvHandle):
        raise ConfigError("simulate_quenched needs an environment handle")
    d = env.spec.dimension
    offsets = np.broadcast_to(env.origin_offset, (cfg.M, d))
    return _run(env.spec, kernel, params, cfg, np.full(cfg.M, env.replica), offsets, track)


def simulate_annealed(spec, cfg, params=None, kernel=None, track=True):
    """``cfg.M`` paths, path ``j`` in replica ``cfg.first_replica + j``."""
    if cfg.first_replica + cfg.M > 2**32:
        raise ConfigError("replica range exceeds 32 bits")
    reps = cfg.first_replica + np.arange(cfg.M, dtype=np.int64)
    return _run(spec, kernel, params, cfg, reps, np.zeros((cfg.M, spec.dimension)), track)


def annealed_slope(spec, cfg, params=None, kernel=None, result=None):
    """Mean of X_T / T over paths, each in a fresh environment.

    Paths are independent, so the batch-means SE is the ordinary one.
    """
    r = result if result is not None else simulate_annealed(spec, cfg, params, kernel, track=False)
    return batch_means(r.slope, "annealed_slope", "annealed")


def env_time_average(envs, cfg, params=None, observable="phi", kernel=None):
    """Time average of ``observable`` along paths, pooled over environments.

    ``envs`` is one handle or a sequence of handles.  Each environment runs
    ``cfg.M`` paths.  ``observable`` is ``phi``, ``phi_eps``, ``b`` or ``b_i``.

    The SE comes from the most independent units available: per-environment
    averages when there are several environments, else per-path averages,
    else time blocks of the single path.  Time blocks shorter than the
    decorrelation time of the field understate the error, so they are the
    last resort.
    """
    if isinstance(envs, EnvHandle):
        envs = [envs]
    results = [simulate_quenched(e, cfg, params, kernel) for e in envs]
    cols = results[0]._columns(observable)
    blocks = np.stack([r.block_means[:, :, cols] for r in results])  # env, path, block, ...
    if len(results) > 1:
        units, variant = blocks.mean(axis=(1, 2)), "environments"
    elif blocks.shape[1] > 1:
        units, variant = blocks[0].mean(axis=1), "paths"
    else:
        units, variant = blocks[0, 0], "time-blocks"
    return EstimateReport(f"time_average_{observable}", units.mean(axis=0),
                          units.std(axis=0, ddof=1) / np.sqrt(len(units)),
                          sum(r.n_steps * r.endpoint.shape[0] for r in results),
                          variant, units)


def environments(spec, count, first_replica=ANNEALED_FIRST):
    return [make_env(spec, first_replica + i) for i in range(count)]


def static_target(sample, params, observable="phi"):
    """E^P[phi_eps f] over replicas at the origin (the invariant-measure mean of f).

    Also usable at eps = 0, where it is E^P[f].
    """
    d = sample.spec.dimension
    pe, _ = F.phi_eps_from(sample.value, sample.gradient, params.eps, params.mu_phi, d)
    if observable == "phi":
        f = sample.value
    elif observable == "phi_eps":
        f = pe
    elif observable == "b" or observable.startswith("b_"):
        f = F.drift_from(sample.batch, params.eps, params.lam, params.mu_phi, params.a_eps)
        if observable != "b":
            f = f[:, int(observable[2:]) - 1]
    else:
        raise ConfigError(f"unknown observable {observable!r}")
    w = pe if f.ndim == 1 else pe[:, None]
    return batch_means(w * f, f"invariant_mean_{observable}", "plain")


def strong_error(spec, cfg, params, kernel=None, levels=3):
    """Mean |X_T(h) - X_T(h/2)| under coupled noise for h, h/2, ... .

    Returns (steps, errors) with ``levels`` entries, coarsest first.
    """
    h0 = cfg.T / cfg.n_steps(spec)
    steps, errs = [], []
    for lvl in range(levels):
        h = h0 / 2**lvl
        coarse = _replace(cfg, h_step=h, noise_substeps=2)
        fine = _replace(cfg, h_step=h / 2, noise_substeps=1)
        # coarse step k consumes fine increments 2k and 2k+1
        a = simulate_annealed(spec, coarse, params, kernel, track=False)
        b = simulate_annealed(spec, fine, params, kernel, track=False)
        steps.append(h)
        errs.append(float(np.linalg.norm(a.endpoint - b.endpoint, axis=1).mean()))
    return np.array(steps), np.array(errs)


def _replace(cfg, **kw):
    from dataclasses import replace
    return replace(cfg, **kw)
