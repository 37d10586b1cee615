"""Reproduction harness for the four headline statements.

Each ``verdict_*`` function is a pure function of estimates and CIs and
returns ``(verdict, clauses, required_n)``.  ``verdict`` is ``"pass"``,
``"fail"`` or ``"inconclusive"``; inconclusive is returned whenever the
intervals are too wide to decide, together with an estimate of the sample
size that would resolve them (``None`` when no finite size would).

p1  at lambda = 0 the velocity vanishes but the static drift does not.
p2  at lambda = -1/4 the static drift is -gamma times the velocity, gamma > 0.
p3  at lambda = -1/g(eps) the static drift vanishes, the velocity does not.
t01 time averages along a path converge to the phi_eps-weighted mean.
"""

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import sde as S
from . import statics as T
from .fields import DriftParams
from .stats import CI_Z, EstimateReport, combined_se

MARGIN = 1.5  # safety factor on required-N extrapolations


@dataclass
class TheoremReport:
    theorem: str
    inputs: dict
    estimates: dict
    clauses: dict
    verdict: str
    required_n: int | None = None
    notes: list = field(default_factory=list)
    runtime: float = field(default=0.0, compare=False)

    def to_dict(self):
        """Report content; runtime is kept out so reports are reproducible."""
        return {
            "theorem": self.theorem,
            "inputs": self.inputs,
            "estimates": {k: v.to_dict() if isinstance(v, EstimateReport) else v
                          for k, v in self.estimates.items()},
            "clauses": self.clauses,
            "verdict": self.verdict,
            "required_n": self.required_n,
            "notes": self.notes,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _needed(n, se, target_se):
    """Sample size at which ``se`` (at n samples) shrinks to ``target_se``."""
    if not target_se > 0 or not np.isfinite(target_se):
        return None
    return int(math.ceil(MARGIN * n * (se / target_se) ** 2))


# -- verdict logic -------------------------------------------------------------

def verdict_p1(d, v):
    """``d``: static drift at lambda = 0; ``v``: velocity at lambda = 0."""
    dn = float(np.linalg.norm(d.value))
    d_resolved = d.excludes_zero()
    v_contains = v.contains(0.0)
    hw = float(np.max(v.halfwidth))
    narrow = hw <= dn / 5
    clauses = {"d_excludes_zero": d_resolved, "v_contains_zero": v_contains,
               "v_halfwidth_le_d_over_5": bool(narrow)}
    if d_resolved and v_contains and narrow:
        return "pass", clauses, None
    if d_resolved and not v_contains and narrow:
        return "fail", clauses, None
    if not d_resolved:
        i = int(np.argmax(np.abs(d.value)))
        req = _needed(d.n, float(d.se[i]), abs(float(d.value[i])) / (2 * CI_Z))
        return "inconclusive", clauses, req
    # d resolved, v interval too wide for the 1/5 rule
    i = int(np.argmax(v.se))
    return "inconclusive", clauses, _needed(v.n, float(v.se[i]), dn / (5 * CI_Z))


def verdict_p2(d, v, gamma):
    """``d``/``v`` at lambda = -1/4; ``gamma`` is (value, se)."""
    g, g_se = gamma
    dv, vv = np.asarray(d.value), np.asarray(v.value)
    cos = float(dv @ vv / (np.linalg.norm(dv) * np.linalg.norm(vv))) if (
        np.linalg.norm(dv) > 0 and np.linalg.norm(vv) > 0) else float("nan")
    resid = dv + g * vv
    se = combined_se(d.se, g * v.se, vv * g_se)
    clauses = {
        "gamma_positive": bool(g > 0),
        "cosine_le_-0.99": bool(cos <= -0.99),
        "d_plus_gamma_v_within_3se": bool(np.all(np.abs(resid) <= CI_Z * se)),
        "cosine": cos,
    }
    ok = clauses["gamma_positive"] and clauses["cosine_le_-0.99"] and clauses[
        "d_plus_gamma_v_within_3se"]
    if ok:
        return "pass", clauses, None
    resolved = d.excludes_zero() and v.excludes_zero()
    if not clauses["gamma_positive"] or not clauses["d_plus_gamma_v_within_3se"] or resolved:
        return "fail", clauses, None
    i = int(np.argmax(np.abs(dv)))
    n = min(d.n, v.n)
    return "inconclusive", clauses, _needed(n, max(float(d.se[i]), float(v.se[i])),
                                            abs(float(dv[i])) / (2 * CI_Z))


def verdict_p3(d_identity, d_direct, v, d_scale):
    """``d_scale`` is |d_{eps,0}|, the yardstick for rounding-level cancellation."""
    tol = 64 * np.finfo(float).eps * max(float(d_scale), np.finfo(float).tiny)
    z = np.abs(v.value) / np.where(v.se > 0, v.se, np.inf)
    clauses = {
        "identity_cancels": bool(np.all(np.abs(d_identity.value) <= tol)),
        "direct_contains_zero": d_direct.contains(0.0),
        "v_at_least_5se": bool(np.max(z) >= 5),
    }
    if all(clauses.values()):
        return "pass", clauses, None
    if not clauses["identity_cancels"] or not clauses["direct_contains_zero"]:
        return "fail", clauses, None
    i = int(np.argmax(np.abs(v.value)))
    return "inconclusive", clauses, _needed(v.n, float(v.se[i]), abs(float(v.value[i])) / 6)


def verdict_t01(avg, target, baseline=None):
    """Time average vs the phi_eps-weighted target; optionally discriminate
    from the unweighted ``baseline``."""
    se = combined_se(avg.se, target.se)
    agree = bool(np.all(np.abs(avg.value - target.value) <= CI_Z * se))
    clauses = {"agrees_with_target": agree}
    if baseline is not None:
        se_b = combined_se(avg.se, baseline.se)
        clauses["differs_from_unweighted"] = bool(
            np.any(np.abs(avg.value - baseline.value) > CI_Z * se_b))
    if all(clauses.values()):
        return "pass", clauses, None
    if not agree:
        return "fail", clauses, None
    gap = float(np.max(np.abs(target.value - baseline.value)))
    return "inconclusive", clauses, _needed(avg.n, float(np.max(avg.se)), gap / (2 * CI_Z))


# -- drivers -------------------------------------------------------------------

class Context:
    """Caches calibrations and samples shared between theorem runs."""

    def __init__(self, config):
        self.config = config
        self.spec = config.spec
        self.kernel = config.kernel_params
        self._calib = {}

    def calibration(self, eps):
        if eps not in self._calib:
            self._calib[eps] = T.calibrate(self.spec, eps, self.config.statics.calibration_samples,
                                           kernel=self.kernel)
        return self._calib[eps]

    def sample(self, n):
        return T.sample_origin(self.spec, n, T.STATICS_FIRST, self.kernel)


def _inputs(cfg, eps, lam, n=None, **extra):
    out = {"epsilon": eps, "lambda": lam, "seed": cfg.run.seed,
           "dimension": cfg.environment.dimension, "range": cfg.environment.range}
    if n is not None:
        out["N"] = n
    out.update(extra)
    return out


def theorem_p1(ctx, eps=None):
    cfg = ctx.config
    eps = cfg.statics.tuned_epsilon if eps is None else eps
    n, nv = cfg.statics.samples, cfg.statics.velocity_samples
    if eps == 0:
        zero = EstimateReport("d_direct", np.zeros(ctx.spec.dimension), np.zeros(ctx.spec.dimension), n)
        return TheoremReport("p1", _inputs(cfg, eps, 0.0, n), {"d": zero, "v": zero},
                             {"epsilon_positive": False}, "inconclusive", None,
                             ["epsilon = 0: drift and velocity both vanish identically"])
    cal = ctx.calibration(eps)
    d = T.static_drift(ctx.spec, eps, 0.0, cal, n, sample=ctx.sample(n)).direct
    v = T.velocity(ctx.spec, eps, 0.0, cal, nv, variant="plain", sample=ctx.sample(nv))
    verdict, clauses, req = verdict_p1(d, v)
    return TheoremReport("p1", _inputs(cfg, eps, 0.0, n, N_velocity=nv),
                         {"d": d, "v": v}, clauses, verdict, req,
                         ["d: control-variate direct estimator; v: plain Monte Carlo"])


def theorem_p2(ctx, eps=None, lam=-0.25):
    cfg = ctx.config
    eps = cfg.statics.tuned_epsilon if eps is None else eps
    n = cfg.statics.samples
    cal = ctx.calibration(eps)
    g = float(cal.g_eps.value)
    gamma = T.gamma_coeff(g, lam)
    gamma_se = float(cal.g_eps.se)  # gamma = -1/lam - g
    sample = ctx.sample(n)
    d = T.static_drift(ctx.spec, eps, lam, cal, n, sample=sample).direct
    v = T.velocity(ctx.spec, eps, lam, cal, n, sample=sample)
    verdict, clauses, req = verdict_p2(d, v, (gamma, gamma_se))
    clauses["gamma_arithmetic_g2"] = bool(abs(T.gamma_coeff(2.0, -0.25) - 2.0) < 1e-15)
    if not clauses["gamma_arithmetic_g2"]:
        verdict = "fail"
    est = {"d": d, "v": v, "g": cal.g_eps, "gamma": {"value": gamma, "se": gamma_se}}
    return TheoremReport("p2", _inputs(cfg, eps, lam, n), est, clauses, verdict, req)


def theorem_p3(ctx, eps=None):
    cfg = ctx.config
    eps = cfg.statics.tuned_epsilon if eps is None else eps
    n = cfg.statics.samples
    cal = ctx.calibration(eps)
    lam = T.lambda_star(cal)
    sample = ctx.sample(n)
    sd = T.static_drift(ctx.spec, eps, lam, cal, n, sample=sample)
    v = T.velocity(ctx.spec, eps, lam, cal, n, sample=sample)
    scale = float(np.linalg.norm(cal.d_eps0.value))
    verdict, clauses, req = verdict_p3(sd.identity, sd.direct, v, scale)
    est = {"d_identity": sd.identity, "d_direct": sd.direct, "v": v, "g": cal.g_eps}
    return TheoremReport("p3", _inputs(cfg, eps, lam, n), est, clauses, verdict, req)


def theorem_t01(ctx, eps=None):
    cfg = ctx.config
    eps = cfg.statics.tuned_epsilon if eps is None else eps
    q = cfg.sde
    cal = ctx.calibration(eps)
    params = DriftParams.from_calibration(cal, 0.0)
    sample = ctx.sample(cfg.statics.samples)
    target = S.static_target(sample, params, "phi")
    baseline = T.batch_means(sample.value, "mean_phi")
    envs = S.environments(ctx.spec, q.t01_environments)
    # Euler-Maruyama biases the invariant law by O(h); a finer step keeps it below the CI
    h = q.t01_step_fraction * (q.h_step or S.default_step(ctx.spec))
    avg = S.env_time_average(envs, S.SdeConfig(T=q.t01_T, h_step=h, brownian_seed=cfg.run.seed),
                             params, "phi", ctx.kernel)
    verdict, clauses, req = verdict_t01(avg, target, baseline if eps > 0 else None)
    est = {"time_average": avg, "target": target, "unweighted": baseline}
    return TheoremReport("t01", _inputs(cfg, eps, 0.0, cfg.statics.samples, T=q.t01_T,
                                        h_step=h, environments=q.t01_environments),
                         est, clauses, verdict, req)


RUNNERS = {"p1": theorem_p1, "p2": theorem_p2, "p3": theorem_p3, "t01": theorem_t01}


def reproduce_theorem(theorem_id, config, ctx=None, **kw):
    if theorem_id not in RUNNERS:
        from .errors import ConfigError
        raise ConfigError(f"unknown theorem {theorem_id!r}")
    ctx = ctx or Context(config)
    t0 = time.perf_counter()
    rep = RUNNERS[theorem_id](ctx, **kw)
    rep.runtime = time.perf_counter() - t0
    return rep
