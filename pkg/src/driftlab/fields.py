"""The random field phi, the divergence-free field c and the drift b.

``phi_hat`` is the Poisson kernel sum truncated at one.  The mollified
field is evaluated with a lattice rule: ``phi_hat`` is sampled on the fixed
grid ``h Z^d`` (in internal coordinates) and

    phi(x) = h^d / m * sum_k phi_hat(z_k) rho(x - z_k).

Gradient and Hessian put the derivative on ``rho`` only, so they are the
exact derivatives of the computed ``phi`` and ``phi`` itself is C^3 in x.
Everything at x depends on process points within ``R/4`` of x.

Array helpers (``c_from_hessian``, ``phi_eps_from``, ``drift_from``) work
on batches and are what the statistics and simulation code use; the
per-point functions at the bottom are thin wrappers.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .env import EnvironmentSpec, EnvHandle, buffer_rows, gather_points
from .errors import ConfigError
from .kernels import KernelParams


@njit(cache=True, inline="always")
def _ipow(s, n):
    out = 1.0
    for _ in range(n):
        out *= s
    return out


@njit(cache=True, error_model="numpy")
def _phi_hat_at(z, pts, npts, r_zeta, amp, p):
    d = z.shape[0]
    r2 = r_zeta * r_zeta
    acc = 0.0
    for i in range(npts):
        q = 0.0
        for j in range(d):
            t = z[j] - pts[i, j]
            q += t * t
        if q < r2:
            acc += amp * _ipow(1.0 - q / r2, p)
    return min(acc, 1.0)


@njit(cache=True, error_model="numpy")
def field_raw(x, replica, k0, k1, side, cdf, r_zeta, amp, p, r_rho, rho_c, hq,
              buf, grad, hess):
    """Mollified field (before division by m) with gradient and Hessian.

    Writes into ``grad`` (d,) and ``hess`` (d, d); returns the value.
    """
    d = x.shape[0]
    npts = gather_points(x, r_rho + r_zeta, replica, k0, k1, side, cdf, buf)
    for i in range(d):
        grad[i] = 0.0
        for j in range(d):
            hess[i, j] = 0.0
    if npts == 0:
        return 0.0
    lo = np.empty(d, np.int64)
    nb = np.empty(d, np.int64)
    stride = np.empty(d, np.int64)
    size = 1
    for i in range(d - 1, -1, -1):
        lo[i] = np.int64(np.ceil((x[i] - r_rho) / hq))
        nb[i] = np.int64(np.floor((x[i] + r_rho) / hq)) - lo[i] + 1
        stride[i] = size
        size *= nb[i]
    # kernel sum on the node box, accumulated point by point in canonical order
    grid = np.zeros(size)
    plo = np.empty(d, np.int64)
    phi_ = np.empty(d, np.int64)
    k = np.empty(d, np.int64)
    rz2 = r_zeta * r_zeta
    last = d - 1
    for n in range(npts):
        empty = False
        for i in range(d):
            a = np.int64(np.ceil((buf[n, i] - r_zeta) / hq)) - lo[i]
            b = np.int64(np.floor((buf[n, i] + r_zeta) / hq)) - lo[i]
            plo[i] = max(a, 0)
            phi_[i] = min(b, nb[i] - 1)
            if plo[i] > phi_[i]:
                empty = True
        if empty:
            continue
        for i in range(d):
            k[i] = plo[i]
        # odometer over the leading axes, direct range on the last one
        while True:
            qpart = 0.0
            base = 0
            for i in range(last):
                t = (k[i] + lo[i]) * hq - buf[n, i]
                qpart += t * t
                base += k[i] * stride[i]
            if qpart < rz2:
                half = np.sqrt(rz2 - qpart)
                a = max(plo[last], np.int64(np.ceil((buf[n, last] - half) / hq)) - lo[last] - 1)
                b = min(phi_[last], np.int64(np.floor((buf[n, last] + half) / hq)) - lo[last] + 1)
                for kl in range(a, b + 1):
                    t = (kl + lo[last]) * hq - buf[n, last]
                    q = qpart + t * t
                    if q < rz2:
                        grid[base + kl] += amp * _ipow(1.0 - q / rz2, p)
            j = last - 1
            while j >= 0:
                k[j] += 1
                if k[j] <= phi_[j]:
                    break
                k[j] = plo[j]
                j -= 1
            if j < 0:
                break
    # per-axis scaled offsets (x - z) / r_rho of the node box
    width = 0
    for i in range(d):
        width = max(width, nb[i])
    ys = np.empty((d, width))
    for i in range(d):
        for kk in range(nb[i]):
            ys[i, kk] = (x[i] - (kk + lo[i]) * hq) / r_rho
    value = 0.0
    c1 = -p
    c2 = p * (p - 1)
    for i in range(d):
        k[i] = 0
    while True:
        qpart = 0.0
        base = 0
        for i in range(last):
            qpart += ys[i, k[i]] * ys[i, k[i]]
            base += k[i] * stride[i]
        if qpart < 1.0:
            for kl in range(nb[last]):
                g = grid[base + kl]
                if g == 0.0:
                    continue
                yl = ys[last, kl]
                q = qpart + yl * yl
                if q >= 1.0:
                    continue
                ph = min(g, 1.0)
                s = 1.0 - q
                sp2 = _ipow(s, p - 2)
                f1 = c1 * sp2 * s
                f2 = c2 * sp2
                value += ph * sp2 * s * s
                k[last] = kl
                for i in range(d):
                    yi = ys[i, k[i]]
                    grad[i] += ph * 2.0 * yi * f1
                    for j in range(i, d):
                        hess[i, j] += ph * 4.0 * yi * ys[j, k[j]] * f2
                    hess[i, i] += ph * 2.0 * f1
        j = last - 1
        while j >= 0:
            k[j] += 1
            if k[j] < nb[j]:
                break
            k[j] = 0
            j -= 1
        if j < 0:
            break
    w = rho_c * hq**d
    value *= w
    for i in range(d):
        grad[i] *= w / r_rho
        for j in range(i, d):
            hess[i, j] *= w / (r_rho * r_rho)
            hess[j, i] = hess[i, j]
    return value


@njit(cache=True, error_model="numpy")
def _field_many(xs, replicas, k0, k1, side, cdf, r_zeta, amp, p, r_rho, rho_c, hq,
                buf, vals, grads, hess):
    for n in range(xs.shape[0]):
        vals[n] = field_raw(xs[n], replicas[n], k0, k1, side, cdf, r_zeta, amp, p,
                            r_rho, rho_c, hq, buf, grads[n], hess[n])


@njit(cache=True, error_model="numpy")
def _phi_hat_many(xs, replicas, k0, k1, side, cdf, r_zeta, amp, p, buf, out):
    for n in range(xs.shape[0]):
        npts = gather_points(xs[n], r_zeta, replicas[n], k0, k1, side, cdf, buf)
        out[n] = _phi_hat_at(xs[n], buf, npts, r_zeta, amp, p)


def kernel_args(spec, kernel):
    k0, k1 = spec.key
    return (k0, k1, spec.cell_side, spec.count_cdf, kernel.r_zeta, kernel.amplitude,
            kernel.profile_order, kernel.r_rho, kernel.rho_c, kernel.quad_spacing)


def _check(spec, kernel):
    if kernel.dimension != spec.dimension or kernel.range != spec.range:
        raise ConfigError("kernel parameters do not match the environment")


@dataclass
class FieldBatch:
    """phi, its gradient and Hessian at ``n`` points (already divided by m)."""

    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray

    def __len__(self):
        return len(self.value)

    def __getitem__(self, idx):
        return FieldBatch(self.value[idx], self.gradient[idx], self.hessian[idx])


@dataclass
class FieldEval:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray


def evaluate(spec, kernel, xs, replicas):
    """Evaluate phi at internal coordinates ``xs`` (n, d) for replicas (n,)."""
    _check(spec, kernel)
    xs = np.ascontiguousarray(np.asarray(xs, dtype=float).reshape(-1, spec.dimension))
    reps = np.ascontiguousarray(np.broadcast_to(np.asarray(replicas, dtype=np.int64), (len(xs),)))
    if np.any(reps < 0) or np.any(reps >= 2**32):
        raise ConfigError("replica indices must fit in 32 bits")
    d = spec.dimension
    vals = np.empty(len(xs))
    grads = np.empty((len(xs), d))
    hess = np.empty((len(xs), d, d))
    buf = np.empty((buffer_rows(spec, kernel.reach), d))
    _field_many(xs, reps, *kernel_args(spec, kernel), buf, vals, grads, hess)
    m = kernel.m
    return FieldBatch(vals / m, grads / m, hess / m)


def evaluate_env(env, kernel, xs):
    """Evaluate phi at view coordinates ``xs`` of the handle ``env``."""
    xs = np.asarray(xs, dtype=float)
    return evaluate(env.spec, kernel, env.internal(xs.reshape(-1, env.spec.dimension)), env.replica)


def phi_hat_batch(spec, kernel, xs, replicas):
    xs = np.ascontiguousarray(np.asarray(xs, dtype=float).reshape(-1, spec.dimension))
    reps = np.ascontiguousarray(np.broadcast_to(np.asarray(replicas, dtype=np.int64), (len(xs),)))
    out = np.empty(len(xs))
    buf = np.empty((buffer_rows(spec, kernel.r_zeta), spec.dimension))
    k0, k1 = spec.key
    _phi_hat_many(xs, reps, k0, k1, spec.cell_side, spec.count_cdf, kernel.r_zeta,
                  kernel.amplitude, kernel.profile_order, buf, out)
    return out


# -- algebra on batches ------------------------------------------------------

def h_from_gradient(grad):
    """Skew matrix with h[i,0] = d_i phi, h[0,i] = -d_i phi and zero elsewhere."""
    grad = np.asarray(grad, dtype=float)
    d = grad.shape[-1]
    h = np.zeros(grad.shape + (d,))
    h[..., 1:, 0] = grad[..., 1:]
    h[..., 0, 1:] = -grad[..., 1:]
    return h


def c_from_hessian(hess):
    """Row divergence of h over 8 d^2, expressed through the Hessian of phi.

    c_1 = -(1/8d^2) sum_{j>=2} d_j^2 phi,  c_i = (1/8d^2) d_1 d_i phi for i >= 2.
    """
    hess = np.asarray(hess, dtype=float)
    d = hess.shape[-1]
    c = np.empty(hess.shape[:-1])
    diag = np.diagonal(hess, axis1=-2, axis2=-1)
    c[..., 0] = -diag[..., 1:].sum(axis=-1)
    c[..., 1:] = hess[..., 0, 1:]
    return c / (8 * d * d)


def phi_eps_from(value, grad, eps, mu, d):
    """phi_eps and its gradient from phi, grad phi and E[phi(0)]."""
    den = 1.0 + (eps / d) * mu
    pe = (1.0 + (eps / d) * np.asarray(value)) / den
    ge = (eps / d) * np.asarray(grad) / den
    return pe, ge


def drift_from(batch, eps, lam, mu, a_eps):
    """b = grad phi_eps / (2 phi_eps) + eps (c + lam * a_eps) / phi_eps."""
    d = batch.gradient.shape[-1]
    pe, ge = phi_eps_from(batch.value, batch.gradient, eps, mu, d)
    c = c_from_hessian(batch.hessian)
    alpha = lam * np.asarray(a_eps, dtype=float)
    pe_col = pe[..., None]
    return ge / (2 * pe_col) + eps * (c + alpha) / pe_col


@dataclass(frozen=True)
class DriftParams:
    """Parameters of the drift family.

    ``mu_phi`` is E[phi(0)] and ``a_eps`` is E[c(0)/phi_eps(0)]; both come
    from a calibration at the same epsilon.
    """

    eps: float
    lam: float
    mu_phi: float
    a_eps: tuple

    def __post_init__(self):
        if not 0 <= self.eps <= 1:
            raise ConfigError(f"epsilon must lie in [0, 1], got {self.eps}")
        if not -1 <= self.lam <= 1:
            raise ConfigError(f"lambda must lie in [-1, 1], got {self.lam}")
        object.__setattr__(self, "a_eps", tuple(float(a) for a in np.ravel(self.a_eps)))

    @classmethod
    def from_calibration(cls, calib, lam):
        return cls(calib.epsilon, lam, calib.mu_phi.value, tuple(calib.a_eps.value))

    @property
    def alpha(self):
        return self.lam * np.asarray(self.a_eps)


# -- per-point API -----------------------------------------------------------

def phi_hat(x, env, kernel=None):
    """Truncated kernel sum min(sum_p zeta(x - p), 1)."""
    kernel = kernel or KernelParams.for_spec(env.spec)
    return float(phi_hat_batch(env.spec, kernel, env.internal(x), env.replica)[0])


def phi(x, env, kernel=None):
    kernel = kernel or KernelParams.for_spec(env.spec)
    b = evaluate_env(env, kernel, x)
    return FieldEval(float(b.value[0]), b.gradient[0], b.hessian[0])


def h_matrix(x, env, kernel=None):
    return h_from_gradient(phi(x, env, kernel).gradient)


def c_field(x, env, kernel=None):
    return c_from_hessian(phi(x, env, kernel).hessian)


def phi_eps(x, env, params, kernel=None):
    f = phi(x, env, kernel)
    d = env.spec.dimension
    pe, ge = phi_eps_from(f.value, f.gradient, params.eps, params.mu_phi, d)
    # Hessian of phi_eps is the same rescaling of the Hessian of phi
    den = 1.0 + (params.eps / d) * params.mu_phi
    return FieldEval(float(pe), ge, (params.eps / d) * f.hessian / den)


def drift_b(x, env, params, kernel=None):
    kernel = kernel or KernelParams.for_spec(env.spec)
    b = evaluate_env(env, kernel, x)
    return drift_from(b, params.eps, params.lam, params.mu_phi, params.a_eps)[0]
