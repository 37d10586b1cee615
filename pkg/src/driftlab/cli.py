"""Command-line entry point.

    driftlab calibrate|fieldcheck|statics|simulate [--config PATH] [--seed U64]
             [--out DIR] [--stage-cache on|off]
    driftlab theorem {p1,p2,p3,t01} [...]
    driftlab run [...]

Reports are JSON with sorted keys and no timestamps, so one configuration
always produces byte-identical files; wall-clock timings go to
``timing.json`` next to them.  Exit status: 0 success, 2 invalid
configuration, 3 property violation (including a failed theorem verdict),
4 numerical failure.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import fieldcheck as FC
from . import sde as S
from . import statics as T
from . import theorems as TH
from .config import STAGES, THEOREMS, ExperimentConfig
from .errors import DriftLabError, PropertyViolation
from .fields import DriftParams
from .stats import agree, batch_means, combined_se, rows_to_csv_text

CACHE_DIR = ".stage-cache"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def dumps(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


class Runner:
    """Executes stages for one configuration and writes their artifacts."""

    def __init__(self, config, out, use_cache=True, trajectories=False):
        self.config = config
        self.out = out
        self.use_cache = use_cache
        self.trajectories = trajectories
        self.ctx = TH.Context(config)
        self.timing = {}

    # -- bookkeeping ------------------------------------------------------
    def _write(self, name, text):
        os.makedirs(self.out, exist_ok=True)
        with open(os.path.join(self.out, name), "w", newline="") as fh:
            fh.write(text)

    def _cache_path(self, stage):
        return os.path.join(self.out, CACHE_DIR, f"{stage}-{self.config.digest()}.json")

    def stage(self, name, fn):
        """Run ``fn`` (returning (report, csv_rows)) with caching and timing."""
        t0 = time.perf_counter()
        path = self._cache_path(name)
        cached = None
        if self.use_cache and os.path.exists(path):
            with open(path) as fh:
                cached = json.load(fh)
        if cached is None:
            report, rows = fn()
            cached = {"report": json.loads(dumps(report)), "csv": rows_to_csv_text(rows)}
            if self.use_cache:
                os.makedirs(os.path.dirname(path), exist_ok=True)
                with open(path, "w") as fh:
                    json.dump(cached, fh, sort_keys=True)
            self.timing[name] = {"seconds": time.perf_counter() - t0, "cached": False}
        else:
            self.timing[name] = {"seconds": time.perf_counter() - t0, "cached": True}
        self._write(f"{name}.json", dumps(cached["report"]))
        self._write(f"{name}_estimates.csv", cached["csv"])
        self._write("timing.json", dumps(self.timing))
        return cached["report"]

    # -- stages -----------------------------------------------------------
    def _eps_values(self):
        s = self.config.statics
        return sorted(set(s.epsilon_grid) | {s.tuned_epsilon, self.config.sde.epsilon})

    def calibrate(self):
        def fn():
            cals = {repr(e): self.ctx.calibration(e) for e in self._eps_values()}
            rows = []
            for e, c in cals.items():
                for est in (c.mu_phi, c.var_phi, c.g_eps, c.a_eps, c.d_eps0, c.kappa_c,
                            c.kappa_ibp):
                    rows.extend(est.rows(e, "", self.config.run.seed))
            return {"calibrations": cals}, rows
        return self.stage("calibrate", fn)

    def fieldcheck(self):
        cfg = self.config

        def fn():
            f = cfg.fieldcheck
            reports = {}
            for eps in cfg.statics.epsilon_grid:
                rep = FC.verify_field_properties(
                    self.ctx.spec, self.ctx.calibration(eps).params(0.0), f.samples,
                    kernel=self.ctx.kernel, n_pairs=f.pairs, n_probe=f.probes)
                reports[repr(eps)] = rep
            eps0 = reports_prefix_ok(reports)
            fd = FC.finite_difference_checks(self.ctx.spec, self.ctx.kernel, f.probes)
            quad = FC.quadrature_consistency(self.ctx.spec, self.ctx.kernel, f.probes)
            out = {"epsilon0": eps0, "reports": reports, "finite_differences": fd,
                   "quadrature_doubling_max_change": quad}
            return out, []

        rep = self.stage("fieldcheck", fn)
        used = [cfg.statics.tuned_epsilon, cfg.sde.epsilon]
        if max(used) > rep["epsilon0"]:
            bad = [r for e, r in rep["reports"].items() if not r["passed"]]
            raise PropertyViolation(
                f"configured epsilon {max(used)} exceeds the validated epsilon0 "
                f"{rep['epsilon0']}", [o for r in bad for c in r["checks"] for o in c["offending"]])
        return rep

    def statics(self):
        cfg = self.config
        s = cfg.statics

        def fn():
            spec = self.ctx.spec
            sample = self.ctx.sample(s.samples)
            rows, out = [], {}
            eps = s.tuned_epsilon
            cal = self.ctx.calibration(eps)
            mu = float(cal.mu_phi.value)
            d = spec.dimension
            pe, ge = T.F.phi_eps_from(sample.value, sample.gradient, eps, mu, d)
            zero = {"E_c": batch_means(sample.c, "E_c"),
                    "E_grad_phi_eps": batch_means(ge, "E_grad_phi_eps"),
                    "E_phi_eps": batch_means(pe, "E_phi_eps")}
            zero_ok = {"E_c": zero["E_c"].contains(0.0),
                       "E_grad_phi_eps": zero["E_grad_phi_eps"].contains(0.0),
                       "E_phi_eps": bool(abs(zero["E_phi_eps"].value - 1) <= 4 * zero["E_phi_eps"].se)}
            out["zero_mean"] = {"estimates": zero, "passed": zero_ok}
            k = cal.kappa_c.component(0)
            ibp = cal.kappa_ibp
            out["kappa"] = {"kappa_c1": k, "kappa_ibp": ibp,
                            "excludes_zero": k.excludes_zero(),
                            "agrees": agree(k.value, ibp.value, combined_se(k.se, ibp.se))}
            per_lam = {}
            for lam in s.lambdas:
                sd = T.static_drift(spec, eps, lam, cal, s.samples, sample=sample)
                # v = lam d_{eps,0} and d_{eps,lam} = d_{eps,0}(1 + lam g); the
                # control-variate velocity equals lam d_{eps,0} by construction,
                # so the first identity is checked with plain Monte Carlo
                v = T.velocity(spec, eps, lam, cal, s.samples, "plain", sample=sample)
                v_id = lam * cal.d_eps0.value
                ok33 = agree(v.value, v_id, combined_se(v.se, abs(lam) * cal.d_eps0.se))
                ok34 = agree(sd.direct.value, sd.identity.value,
                             combined_se(sd.direct.se, sd.identity.se))
                per_lam[repr(lam)] = {"d_direct": sd.direct, "d_identity": sd.identity,
                                      "velocity": v, "velocity_identity_holds": ok33,
                                      "drift_identity_holds": ok34}
                for est in (sd.direct, sd.identity, v):
                    rows.extend(est.rows(eps, lam, cfg.run.seed))
            out["lambdas"] = per_lam
            q, grid = T.curvature_fit(sample, s.curvature_grid, mu)
            target = -cal.kappa_c.value / d
            out["curvature"] = {"q": q, "target": target, "target_se": cal.kappa_c.se / d,
                                "agrees_component_1": agree(q.value[0], target[0],
                                                            combined_se(q.se[0], cal.kappa_c.se[0] / d))}
            out["epsilon"] = eps
            return out, rows
        return self.stage("statics", fn)

    def simulate(self):
        cfg = self.config
        q = cfg.sde

        def fn():
            spec = self.ctx.spec
            bm_cfg = S.SdeConfig(T=q.bm_T, M=q.bm_M, h_step=q.h_step, brownian_seed=cfg.run.seed)
            bm = S.simulate_annealed(spec, bm_cfg, None, self.ctx.kernel, track=False)
            bm_slope = S.annealed_slope(spec, bm_cfg, result=bm)
            var = bm.endpoint.var(axis=0, ddof=1)
            cal = self.ctx.calibration(q.epsilon)
            params = DriftParams.from_calibration(cal, q.lam)
            an_cfg = S.SdeConfig(T=q.T, M=q.M, h_step=q.h_step, brownian_seed=cfg.run.seed)
            run = S.simulate_annealed(spec, an_cfg, params, self.ctx.kernel, track=False)
            slope = S.annealed_slope(spec, an_cfg, result=run)
            v = T.velocity(spec, q.epsilon, q.lam, cal, cfg.statics.samples,
                           sample=self.ctx.sample(cfg.statics.samples))
            out = {
                "brownian": {"slope": bm_slope, "endpoint_variance": var, "T": q.bm_T,
                             "contains_zero": bm_slope.contains(0.0),
                             "variance_within_5pct": bool(np.all(np.abs(var / q.bm_T - 1) <= 0.05))},
                "annealed": {"slope": slope, "velocity": v, "epsilon": q.epsilon, "lambda": q.lam,
                             "contains_velocity": slope.contains(v.value),
                             "max_b": float(run.max_b.max()),
                             "bound_respected": bool(run.max_b.max() <= q.epsilon)},
            }
            if self.trajectories:
                lines = ["path," + ",".join(f"x{i + 1}" for i in range(spec.dimension))]
                lines += [f"{j}," + ",".join(repr(float(x)) for x in run.endpoint[j])
                          for j in range(len(run.endpoint))]
                self._write("trajectories.csv", "\n".join(lines) + "\n")
            rows = list(bm_slope.rows(0.0, 0.0, cfg.run.seed)) + list(
                slope.rows(q.epsilon, q.lam, cfg.run.seed))
            return out, rows
        return self.stage("simulate", fn)

    def theorem(self, tid):
        def fn():
            rep = TH.reproduce_theorem(tid, self.config, self.ctx)
            self.timing[f"theorem_{tid}_compute"] = rep.runtime
            rows = []
            for name, est in rep.estimates.items():
                if hasattr(est, "rows"):
                    rows.extend(est.rows(rep.inputs.get("epsilon", ""),
                                         rep.inputs.get("lambda", ""), self.config.run.seed))
            return rep.to_dict(), rows
        rep = self.stage(f"theorem_{tid}", fn)
        if rep["verdict"] == "fail":
            raise PropertyViolation(f"theorem {tid}: verdict fail ({rep['clauses']})")
        return rep

    def theorems(self):
        return {t: self.theorem(t) for t in self.config.run.theorems}

    def run(self):
        results = {}
        for st in self.config.run.stages:
            results[st] = getattr(self, st)()
        return results


def reports_prefix_ok(reports):
    """Largest epsilon such that it and every smaller grid value passed."""
    best = 0.0
    for e in sorted(reports, key=float):
        if not reports[e].passed:
            break
        best = float(e)
    return best


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI experiment configuration")
    common.add_argument("--seed", type=int, metavar="U64", help="override the master seed")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--stage-cache", choices=("on", "off"), default="on")
    p = argparse.ArgumentParser(prog="driftlab", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("calibrate", "fieldcheck", "statics", "simulate", "run"):
        sp = sub.add_parser(name, parents=[common])
        if name in ("simulate", "run"):
            sp.add_argument("--trajectories", action="store_true",
                            help="also write per-trajectory endpoints as CSV")
    th = sub.add_parser("theorem", parents=[common])
    th.add_argument("id", choices=THEOREMS)
    return p


def load_config(args):
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            from .errors import ConfigError
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = cfg.with_seed(args.seed)
    if args.out:
        cfg = cfg.with_output(args.out)
    return cfg


def main(argv=None):
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = load_config(args)
        runner = Runner(cfg, cfg.run.output, args.stage_cache == "on",
                        getattr(args, "trajectories", False))
        if args.command == "run":
            runner.run()
        elif args.command == "theorem":
            runner.theorem(args.id)
        else:
            getattr(runner, args.command)()
    except DriftLabError as exc:
        print(f"driftlab: {exc}", file=sys.stderr)
        return exc.exit_status
    return 0


if __name__ == "__main__":
    sys.exit(main())
