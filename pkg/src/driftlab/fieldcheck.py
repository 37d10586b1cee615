"""Runtime checks of the uniform bounds and structure of the drift family.

The bounds on phi_eps, c and b are uniform in (x, omega), so a single
violation at any sampled point is a failure.  Each check records the worst
ratio to its bound and the coordinates of offending samples.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import fields as F
from .env import make_env, shifted_view
from .errors import PropertyViolation
from .kernels import KernelParams
from .rng import uniform_stream
from .statics import CHECK_FIRST

LAMBDAS = (-1.0, 0.0, 1.0)
MAX_OFFENDERS = 20


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float = 0.0
    bound: float = 0.0
    n: int = 0
    offending: list = field(default_factory=list)
    note: str = ""

    def to_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "worst": float(self.worst),
                "bound": float(self.bound), "n": int(self.n), "offending": self.offending,
                "note": self.note}


@dataclass
class PropertyReport:
    epsilon: float
    n: int
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def to_dict(self):
        return {"epsilon": self.epsilon, "n": self.n, "passed": bool(self.passed),
                "checks": [c.to_dict() for c in self.checks]}

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def raise_on_failure(self):
        bad = self.failures()
        if bad:
            names = ", ".join(c.name for c in bad)
            raise PropertyViolation(f"property checks failed: {names}",
                                    [o for c in bad for o in c.offending])


def _bound_check(name, values, bound, xs, reps):
    """values: (n,) magnitudes to compare against a scalar bound."""
    values = np.asarray(values, dtype=float)
    tol = bound * (1 + 1e-12)
    bad = np.nonzero(~(values <= tol))[0]
    worst = float(np.max(values) / bound) if bound > 0 else float(np.max(values))
    offending = [{"x": xs[i].tolist(), "replica": int(reps[i]), "value": float(values[i])}
                 for i in bad[:MAX_OFFENDERS]]
    return CheckResult(name, len(bad) == 0, worst, float(bound), len(values), offending)


def sample_points(spec, n, stream=0, first_replica=CHECK_FIRST, box=None):
    """Deterministic probe locations in [0, box)^d and one replica per probe."""
    box = 10 * spec.range if box is None else box
    u = uniform_stream(spec.seed, stream, n * spec.dimension).reshape(n, spec.dimension)
    return u * box, first_replica + np.arange(n, dtype=np.int64)


def close_pairs(spec, n, stream=1, lo=1e-3, hi=1e-1):
    """Points x and partners y with |x - y| log-uniform in [lo, hi]."""
    d = spec.dimension
    xs, reps = sample_points(spec, n, stream)
    u = uniform_stream(spec.seed, stream + 1000, n * (d + 1)).reshape(n, d + 1)
    # uniform directions from normals via Box-Muller on pairs of uniforms
    g = np.sqrt(-2 * np.log(1 - u[:, :1])) * np.cos(2 * np.pi * u[:, 1:])
    direction = g / np.linalg.norm(g, axis=1, keepdims=True)
    r = lo * (hi / lo) ** u[:, 0]
    return xs, xs + r[:, None] * direction, reps


def _derived(batch, d, eps, mu, lam, a_eps):
    den = 1.0 + (eps / d) * mu
    pe = (1.0 + (eps / d) * batch.value) / den
    ge = (eps / d) * batch.gradient / den
    he = (eps / d) * batch.hessian / den
    c = F.c_from_hessian(batch.hessian)
    b = F.drift_from(batch, eps, lam, mu, a_eps)
    return pe, ge, he, c, b


def verify_field_properties(spec, params, n, *, kernel=None, n_pairs=10_000, n_probe=100,
                            n_corr=None, lambdas=LAMBDAS):
    """Check the uniform bounds, Lipschitz bounds, symmetry, shifts and range.

    Parameters
    ----------
    spec : EnvironmentSpec
    params : DriftParams
        Supplies epsilon, E[phi] and E[c/phi_eps]; lambda is swept over
        ``lambdas``.
    n : int
        Number of sampled (x, replica) pairs for the pointwise bounds.
    """
    kernel = kernel or KernelParams.for_spec(spec)
    d = spec.dimension
    eps, mu, a_eps = params.eps, params.mu_phi, params.a_eps
    lams = sorted(set(lambdas) | {params.lam})
    xs, reps = sample_points(spec, n)
    batch = F.evaluate(spec, kernel, xs, reps)
    checks = []

    # phi itself: |d^alpha phi| <= 1 for |alpha| <= 2
    checks.append(_bound_check("phi_abs", np.abs(batch.value), 1.0, xs, reps))
    checks.append(_bound_check("phi_grad_abs", np.abs(batch.gradient).max(axis=1), 1.0, xs, reps))
    checks.append(_bound_check("phi_hess_abs", np.abs(batch.hessian).max(axis=(1, 2)), 1.0, xs, reps))

    pe, ge, he, c, _ = _derived(batch, d, eps, mu, 0.0, a_eps)
    lo_b, hi_b = (d - eps) / (d + eps), (d + eps) / (d - eps)
    below = np.maximum(lo_b - pe, 0.0)
    r = _bound_check("phi_eps_range", np.maximum(below, pe - hi_b) + 1.0, 1.0, xs, reps)
    r.worst = float(max(np.max(lo_b / pe), np.max(pe / hi_b)))
    r.note = f"[{lo_b}, {hi_b}]"
    checks.append(r)
    slope = eps / (d - eps)
    diag_he = np.abs(np.diagonal(he, axis1=1, axis2=2))
    if eps > 0:
        checks.append(_bound_check("phi_eps_grad", np.abs(ge).max(axis=1), slope, xs, reps))
        checks.append(_bound_check("phi_eps_second", diag_he.max(axis=1), slope, xs, reps))
    checks.append(_bound_check("c_abs", np.linalg.norm(c, axis=1), 1 / 8, xs, reps))
    for lam in lams:
        b = F.drift_from(batch, eps, lam, mu, a_eps)
        if eps > 0:
            checks.append(_bound_check(f"b_abs[lam={lam:g}]", np.linalg.norm(b, axis=1), eps, xs, reps))
        else:
            checks.append(_bound_check(f"b_abs[lam={lam:g}]", np.linalg.norm(b, axis=1) + 1.0, 1.0, xs, reps))

    hs = np.abs(batch.hessian - np.swapaxes(batch.hessian, 1, 2)).max()
    checks.append(CheckResult("hessian_symmetric", bool(hs == 0.0), float(hs), 0.0, n))
    h = F.h_from_gradient(batch.gradient[:n_probe])
    skew = np.abs(h + np.swapaxes(h, 1, 2)).max()
    checks.append(CheckResult("h_skew", bool(skew == 0.0), float(skew), 0.0, len(h)))

    checks.extend(lipschitz_checks(spec, kernel, params, n_pairs, lams))
    checks.append(shift_covariance(spec, kernel, n_probe))
    checks.extend(range_checks(spec, kernel, params, n_corr or min(n, 20_000)))
    return PropertyReport(float(eps), int(n), checks)


def lipschitz_checks(spec, kernel, params, n_pairs, lams=LAMBDAS):
    d = spec.dimension
    eps, mu, a_eps = params.eps, params.mu_phi, params.a_eps
    xs, ys, reps = close_pairs(spec, n_pairs)
    bx = F.evaluate(spec, kernel, xs, reps)
    by = F.evaluate(spec, kernel, ys, reps)
    dist = np.linalg.norm(xs - ys, axis=1)
    px = _derived(bx, d, eps, mu, 0.0, a_eps)
    py = _derived(by, d, eps, mu, 0.0, a_eps)
    out = []
    slope = eps / (d - eps)
    if eps > 0:
        jumps = [np.abs(px[0] - py[0]),
                 np.abs(px[1] - py[1]).max(axis=1),
                 np.abs(np.diagonal(px[2] - py[2], axis1=1, axis2=2)).max(axis=1)]
        for j, jump in enumerate(jumps):
            out.append(_bound_check(f"phi_eps_lipschitz[j={j}]", jump / dist, slope, xs, reps))
    out.append(_bound_check("c_lipschitz", np.linalg.norm(px[3] - py[3], axis=1) / dist, 1 / 8, xs, reps))
    for lam in lams:
        b1 = F.drift_from(bx, eps, lam, mu, a_eps)
        b2 = F.drift_from(by, eps, lam, mu, a_eps)
        out.append(_bound_check(f"b_lipschitz[lam={lam:g}]",
                                np.linalg.norm(b1 - b2, axis=1) / dist, 1.0, xs, reps))
    return out


def shift_covariance(spec, kernel, n_probe=100):
    """phi(x, env) == phi(0, shifted_view(env, x)) bit for bit."""
    xs, reps = sample_points(spec, n_probe, stream=2)
    bad = []
    for x, rep in zip(xs, reps):
        env = make_env(spec, int(rep))
        a = F.evaluate_env(env, kernel, x[None, :])
        b = F.evaluate_env(shifted_view(env, x), kernel, np.zeros((1, spec.dimension)))
        same = (np.array_equal(a.value, b.value) and np.array_equal(a.gradient, b.gradient)
                and np.array_equal(a.hessian, b.hessian))
        if not same:
            bad.append({"x": x.tolist(), "replica": int(rep)})
    return CheckResult("shift_covariance", not bad, float(len(bad)), 0.0, n_probe, bad[:MAX_OFFENDERS])


def drift_correlation(spec, kernel, params, z, n, first_replica=CHECK_FIRST + (1 << 28)):
    """Sample correlation across replicas of b_1(0) and b_1(z)."""
    d = spec.dimension
    reps = first_replica + np.arange(n, dtype=np.int64)
    b0 = F.evaluate(spec, kernel, np.zeros((n, d)), reps)
    bz = F.evaluate(spec, kernel, np.broadcast_to(np.asarray(z, float), (n, d)), reps)
    f0 = F.drift_from(b0, params.eps, params.lam, params.mu_phi, params.a_eps)[:, 0]
    fz = F.drift_from(bz, params.eps, params.lam, params.mu_phi, params.a_eps)[:, 0]
    return float(np.corrcoef(f0, fz)[0, 1])


def range_checks(spec, kernel, params, n):
    """Independence beyond the range R and visible dependence inside R/4."""
    if params.eps == 0:
        return [CheckResult("range_independent", True, 0.0, 0.0, n, note="b == 0"),
                CheckResult("range_dependent", True, 0.0, 0.0, n, note="b == 0")]
    band = 3 / np.sqrt(n)
    far = np.zeros(spec.dimension)
    far[0] = 2 * spec.range
    near = np.zeros(spec.dimension)
    near[0] = spec.range / 16
    r_far = drift_correlation(spec, kernel, params, far, n)
    r_near = drift_correlation(spec, kernel, params, near, n)
    return [CheckResult("range_independent", abs(r_far) <= band, r_far, band, n, note="|z| = 2R"),
            CheckResult("range_dependent", abs(r_near) > band, r_near, band, n, note="|z| = R/16")]


def finite_difference_checks(spec, kernel=None, n_probe=100, step=1e-3):
    """Derivative transfer and divergence-free c against central differences.

    Returns a dict with the worst relative gradient error, worst relative
    Hessian error and worst absolute divergence of c over the probes.
    """
    kernel = kernel or KernelParams.for_spec(spec)
    d = spec.dimension
    xs, reps = sample_points(spec, n_probe, stream=3)
    base = F.evaluate(spec, kernel, xs, reps)
    grad_fd = np.empty((n_probe, d))
    hess_fd = np.empty((n_probe, d, d))
    div = np.zeros(n_probe)
    for i in range(d):
        e = np.zeros(d)
        e[i] = step
        up = F.evaluate(spec, kernel, xs + e, reps)
        dn = F.evaluate(spec, kernel, xs - e, reps)
        grad_fd[:, i] = (up.value - dn.value) / (2 * step)
        hess_fd[:, :, i] = (up.gradient - dn.gradient) / (2 * step)
        div += (F.c_from_hessian(up.hessian)[:, i] - F.c_from_hessian(dn.hessian)[:, i]) / (2 * step)

    def rel(a, b):
        scale = np.maximum(np.abs(b).reshape(len(b), -1).max(axis=1), 1e-300)
        return np.abs(a - b).reshape(len(b), -1).max(axis=1) / scale

    nonzero = np.abs(base.gradient).max(axis=1) > 0
    return {
        "grad_rel_err": float(rel(grad_fd, base.gradient)[nonzero].max(initial=0.0)),
        "hess_rel_err": float(rel(hess_fd, base.hessian)[nonzero].max(initial=0.0)),
        "div_c_abs": float(np.abs(div).max()),
        "n_probe": int(n_probe),
        "n_trivial": int((~nonzero).sum()),
    }


def quadrature_consistency(spec, kernel=None, n_probe=100):
    """Largest change of phi when the lattice rule's order is doubled."""
    kernel = kernel or KernelParams.for_spec(spec)
    fine = KernelParams(kernel.dimension, kernel.range, kernel.amplitude,
                        kernel.profile_order, 2 * kernel.quadrature_order)
    xs, reps = sample_points(spec, n_probe, stream=4)
    a = F.evaluate(spec, kernel, xs, reps).value
    b = F.evaluate(spec, fine, xs, reps).value
    return float(np.abs(a - b).max())


def tune_epsilon0(spec, calib_for, grid, n, **kw):
    """Largest epsilon on ``grid`` (ascending) such that every grid point up
    to it passes :func:`verify_field_properties`.

    ``calib_for(eps)`` must return a Calibration at that epsilon.
    Returns ``(eps0, reports)``.
    """
    eps0 = 0.0
    reports = {}
    for eps in grid:
        rep = verify_field_properties(spec, calib_for(eps).params(0.0), n, **kw)
        reports[eps] = rep
        if not rep.passed:
            break
        eps0 = eps
    return eps0, reports
