"""Monte Carlo estimates of expectations under the static measure.

All expectations are taken at the origin over independent replicas of the
environment.  The field (value, gradient, Hessian) is evaluated once per
replica and cached, so every epsilon and lambda reuses the same samples.

Several integrands have an exactly known mean of zero (``c``,
``grad phi_eps``, ``grad log phi_eps``) and are subtracted as control
variates.  The targets are O(eps^2) while the raw integrands are O(eps), so
this is the difference between feasible and hopeless sample sizes.
"""

import json
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import fields as F
from .env import EnvironmentSpec
from .errors import CalibrationError, ConfigError, DomainError
from .kernels import KernelParams
from .stats import EstimateReport, batch_means, combined_se, exact

MIN_CALIBRATION_SAMPLES = 10_000
# Replica blocks used by default, so calibration and verification samples
# never overlap.
CALIBRATION_FIRST = 0
STATICS_FIRST = 1 << 30
CHECK_FIRST = 3 << 30

_CACHE = OrderedDict()
_CACHE_SIZE = 4


@dataclass
class OriginSample:
    """phi, grad phi and Hessian at the origin for replicas ``first .. first + n``."""

    spec: EnvironmentSpec
    kernel: KernelParams
    first_replica: int
    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray
    c: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.c = F.c_from_hessian(self.hessian)

    def __len__(self):
        return len(self.value)

    @property
    def batch(self):
        return F.FieldBatch(self.value, self.gradient, self.hessian)

    def head(self, n):
        if n > len(self):
            raise ValueError("not enough cached samples")
        return OriginSample(self.spec, self.kernel, self.first_replica,
                            self.value[:n], self.gradient[:n], self.hessian[:n])


def sample_origin(spec, n, first_replica=CALIBRATION_FIRST, kernel=None):
    """Field data at the origin for ``n`` consecutive replicas (cached)."""
    kernel = kernel or KernelParams.for_spec(spec)
    if first_replica + n > 2**32:
        raise ConfigError("replica range exceeds 32 bits")
    key = (spec, kernel, first_replica)
    hit = _CACHE.get(key)
    if hit is not None and len(hit) >= n:
        _CACHE.move_to_end(key)
        return hit if len(hit) == n else hit.head(n)
    xs = np.zeros((n, spec.dimension))
    b = F.evaluate(spec, kernel, xs, np.arange(first_replica, first_replica + n))
    s = OriginSample(spec, kernel, first_replica, b.value, b.gradient, b.hessian)
    _CACHE[key] = s
    while len(_CACHE) > _CACHE_SIZE:
        _CACHE.popitem(last=False)
    return s


def clear_cache():
    _CACHE.clear()


def _tilt(value, eps, mu, d):
    """delta with phi_eps = 1 + delta."""
    return (eps / d) * (value - mu) / (1.0 + (eps / d) * mu)


@dataclass
class Calibration:
    """Global constants of the drift family at one epsilon."""

    epsilon: float
    dimension: int
    m: float
    seed: int
    first_replica: int
    mu_phi: EstimateReport
    var_phi: EstimateReport
    g_eps: EstimateReport
    a_eps: EstimateReport
    d_eps0: EstimateReport
    kappa_c: EstimateReport
    kappa_ibp: EstimateReport
    variant: str = "control-variate"

    @property
    def n(self):
        return self.mu_phi.n

    def params(self, lam):
        return F.DriftParams.from_calibration(self, lam)

    def check(self, k=4.0):
        """Raise if ``g`` is outside [1, 3] by more than ``k`` standard errors."""
        g, se = float(self.g_eps.value), float(self.g_eps.se)
        if g < 1 - k * se or g > 3 + k * se:
            raise CalibrationError(f"g(eps) = {g} +- {se} outside [1, 3]")

    def to_dict(self):
        out = {"epsilon": self.epsilon, "dimension": self.dimension, "m": self.m,
               "seed": self.seed, "first_replica": self.first_replica,
               "variant": self.variant}
        for name in ("mu_phi", "var_phi", "g_eps", "a_eps", "d_eps0", "kappa_c", "kappa_ibp"):
            out[name] = getattr(self, name).to_dict()
        return out

    @classmethod
    def from_dict(cls, data):
        kw = dict(data)
        for name in ("mu_phi", "var_phi", "g_eps", "a_eps", "d_eps0", "kappa_c", "kappa_ibp"):
            kw[name] = EstimateReport.from_dict(data[name])
        return cls(**kw)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def calibrate(spec, eps, n, *, kernel=None, first_replica=CALIBRATION_FIRST,
              variant="control-variate", sample=None):
    """Estimate E[phi], g(eps), E[c/phi_eps], d_{eps,0} and E[c phi].

    Parameters
    ----------
    spec : EnvironmentSpec
    eps : float
        Perturbation size in [0, 1].
    n : int
        Number of replicas, at least 10^4.
    variant : {"control-variate", "plain"}
        With control variates, ``E[c] = 0`` and ``E[phi_eps] = 1`` are used to
        centre the integrands of ``a_eps``, ``g_eps`` and ``kappa_c``.

    Raises
    ------
    CalibrationError
        If phi has zero variance over the sample (mis-tuned kernel).
    """
    if n < MIN_CALIBRATION_SAMPLES:
        raise ConfigError(f"calibration needs at least {MIN_CALIBRATION_SAMPLES} replicas")
    if not 0 <= eps <= 1:
        raise ConfigError(f"epsilon must lie in [0, 1], got {eps}")
    if variant not in ("control-variate", "plain"):
        raise ConfigError(f"unknown variant {variant!r}")
    s = sample if sample is not None else sample_origin(spec, n, first_replica, kernel)
    kernel = s.kernel
    d = spec.dimension
    phi, c = s.value, s.c

    mu = batch_means(phi, "mu_phi")
    var = batch_means((phi - mu.value) ** 2, "var_phi")
    if not var.value > 0:
        raise CalibrationError("phi(0) has zero variance: kernel or intensity mis-tuned")
    delta = _tilt(phi, eps, mu.value, d)
    inv = 1.0 / (1.0 + delta)
    if eps == 0:
        g = exact("g_eps", 1.0, n)
    elif variant == "control-variate":
        # E[1/phi_eps] = 1 + E[delta^2 / (1 + delta)] because E[phi_eps] = 1
        g = batch_means(delta**2 * inv, "g_eps", variant)
        g.value = g.value + 1.0
        g.batches = g.batches + 1.0
    else:
        g = batch_means(inv, "g_eps", variant)
    if variant == "control-variate":
        a = batch_means(c * (inv - 1.0)[:, None], "a_eps", variant)
        kappa = batch_means(c * (phi - mu.value)[:, None], "kappa_c", variant)
    else:
        a = batch_means(c * inv[:, None], "a_eps", variant)
        kappa = batch_means(c * phi[:, None], "kappa_c", variant)
    d0 = EstimateReport("d_eps0", eps * a.value, eps * a.se, n, a.variant,
                        None if a.batches is None else eps * a.batches)
    ibp = batch_means((s.gradient[:, 1:] ** 2).sum(axis=1) / (8 * d * d), "kappa_ibp")
    return Calibration(float(eps), d, kernel.m, int(spec.seed), first_replica,
                       mu, var, g, a, d0, kappa, ibp, variant)


@dataclass
class StaticDrift:
    """Two estimators of d_{eps,lambda} = E[b(0)]."""

    direct: EstimateReport
    identity: EstimateReport


def drift_samples(sample, eps, lam, calib):
    """b_{eps,lam}(0) per replica together with grad phi_eps and c."""
    d = sample.spec.dimension
    mu = float(calib.mu_phi.value)
    b = F.drift_from(sample.batch, eps, lam, mu, calib.a_eps.value)
    _, ge = F.phi_eps_from(sample.value, sample.gradient, eps, mu, d)
    return b, ge


def _require_calibrated(calib, eps):
    if calib is None:
        raise ConfigError("a calibration is required")
    if abs(calib.epsilon - eps) > 1e-15:
        raise ConfigError(f"calibration is for epsilon={calib.epsilon}, not {eps}")


def static_drift(spec, eps, lam, calib, n, variant="control-variate", *,
                 first_replica=STATICS_FIRST, sample=None, kernel=None):
    """Expected local drift under the static measure.

    The direct estimator averages ``b(0)`` over fresh replicas; its control
    variate version subtracts ``grad phi_eps / 2 + eps c`` (mean zero).  The
    identity estimator is ``d_{eps,0} (1 + lam g(eps))`` from the calibration.
    """
    _require_calibrated(calib, eps)
    s = sample if sample is not None else sample_origin(spec, n, first_replica, kernel)
    b, ge = drift_samples(s, eps, lam, calib)
    if variant == "control-variate":
        direct = batch_means(b - 0.5 * ge - eps * s.c, "d_direct", variant)
    elif variant == "plain":
        direct = batch_means(b, "d_direct", variant)
    else:
        raise ConfigError(f"unknown variant {variant!r}")
    if eps == 0:
        direct = exact("d_direct", np.zeros(spec.dimension), len(s))
    g, d0 = calib.g_eps, calib.d_eps0
    ident_val = d0.value * (1 + lam * g.value)
    ident_se = combined_se((1 + lam * g.value) * d0.se, lam * d0.value * g.se)
    identity = EstimateReport("d_identity", ident_val, ident_se, calib.n, calib.variant)
    return StaticDrift(direct, identity)


def velocity(spec, eps, lam, calib, n, variant="control-variate", *,
             first_replica=STATICS_FIRST, sample=None, kernel=None):
    """Asymptotic velocity as the Q_eps-mean of the drift, E[phi_eps b(0)].

    ``phi_eps b = grad phi_eps / 2 + eps c + eps alpha`` pointwise.  With
    control variates the first two (mean-zero) terms are removed, leaving
    ``eps lam a_eps`` whose uncertainty is that of the calibrated ``a_eps``.
    """
    _require_calibrated(calib, eps)
    s = sample if sample is not None else sample_origin(spec, n, first_replica, kernel)
    d = spec.dimension
    b, ge = drift_samples(s, eps, lam, calib)
    pe, _ = F.phi_eps_from(s.value, s.gradient, eps, float(calib.mu_phi.value), d)
    if eps == 0:
        return exact("velocity", np.zeros(d), len(s))
    if variant == "plain":
        return batch_means(pe[:, None] * b, "velocity", variant)
    if variant != "control-variate":
        raise ConfigError(f"unknown variant {variant!r}")
    # the residual phi_eps b - grad phi_eps / 2 - eps c equals eps lam a_eps
    # identically, so its sample mean is that constant up to rounding
    a = calib.a_eps
    return EstimateReport("velocity", eps * lam * a.value, abs(eps * lam) * a.se, len(s),
                          variant, None if a.batches is None else eps * lam * a.batches)


def lambda_star(calib, k=4.0):
    """The lambda for which the expected local drift vanishes, -1/g(eps)."""
    g, se = float(np.asarray(calib.g_eps.value)), float(np.asarray(calib.g_eps.se))
    if g < 1 - k * se:
        raise CalibrationError(f"g(eps) = {g} is below 1 by more than {k} standard errors")
    return -1.0 / max(g, 1.0)


def gamma_coeff(calib_or_g, lam):
    """gamma = -(1 + lam g) / lam, positive for lam in (-1/3, 0)."""
    g = calib_or_g
    if isinstance(calib_or_g, Calibration):
        g = float(np.asarray(calib_or_g.g_eps.value))
    if not -1 / 3 < lam < 0:
        raise DomainError(f"lambda must lie in (-1/3, 0), got {lam}")
    return -(1 + lam * g) / lam


def direct_d0_grid(sample, eps_grid, mu, n_batches=100):
    """Control-variate d_{eps,0} for several epsilons on shared samples.

    Returns (values, batches) with shapes (len(eps_grid), d) and
    (n_batches, len(eps_grid), d).
    """
    d = sample.spec.dimension
    parts = []
    for eps in eps_grid:
        delta = _tilt(sample.value, eps, mu, d)
        inv_m1 = 1.0 / (1.0 + delta) - 1.0
        _, ge = F.phi_eps_from(sample.value, sample.gradient, eps, mu, d)
        parts.append((0.5 * ge + eps * sample.c) * inv_m1[:, None])
    arr = np.stack(parts, axis=1)
    r = batch_means(arr, "d_eps0_grid", "control-variate", n_batches)
    return r


def curvature_fit(sample, eps_grid, mu):
    """Fit d_{eps,0} = q eps^2 + s eps^3 per component; q with batch-means SE.

    The constant and linear terms vanish exactly, so they are not fitted.
    """
    eps_grid = np.asarray(eps_grid, dtype=float)
    r = direct_d0_grid(sample, eps_grid, mu)
    design = np.stack([eps_grid**2, eps_grid**3], axis=1)
    pinv = np.linalg.pinv(design)
    q = pinv[0] @ r.value
    qb = np.einsum("e,bed->bd", pinv[0], r.batches)
    se = qb.std(axis=0, ddof=1) / np.sqrt(len(qb))
    return EstimateReport("curvature_q", q, se, len(sample), "control-variate", qb), r
