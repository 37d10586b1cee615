import json

import numpy as np
import pytest

from driftlab import fieldcheck as FC
from driftlab.errors import PropertyViolation
from driftlab.fields import DriftParams


def test_eps_zero_passes_trivially(spec, kernel):
    rep = FC.verify_field_properties(spec, DriftParams(0.0, 0.0, 0.3, (0.0, 0.0)), 2_000,
                                     kernel=kernel, n_pairs=500, n_probe=20)
    assert rep.passed, [c.name for c in rep.failures()]
    rep.raise_on_failure()


def test_eps_small_passes_everything(spec, kernel, calib):
    rep = FC.verify_field_properties(spec, calib.params(0.0), 5_000, kernel=kernel,
                                     n_pairs=2_000, n_probe=50)
    assert rep.passed, [(c.name, c.worst) for c in rep.failures()]
    names = {c.name for c in rep.checks}
    for must in ("phi_eps_range", "phi_eps_grad", "c_abs", "b_abs[lam=-1]", "b_abs[lam=0]",
                 "b_abs[lam=1]", "hessian_symmetric", "h_skew", "shift_covariance"):
        assert must in names
    data = json.loads(rep.to_json())
    assert data["passed"] and data["epsilon"] == 0.1


def test_violation_is_reported_with_offenders(spec, kernel, calib):
    # an absurd global drift constant pushes |b| above eps
    bad = DriftParams(0.1, 0.0, float(calib.mu_phi.value), (10.0, 0.0))
    rep = FC.verify_field_properties(spec, bad, 1_000, kernel=kernel, n_pairs=200, n_probe=10)
    assert not rep.passed
    assert not rep["b_abs[lam=1]"].passed and rep["b_abs[lam=0]"].passed
    off = rep["b_abs[lam=1]"].offending
    assert off and {"x", "replica", "value"} <= set(off[0])
    with pytest.raises(PropertyViolation) as info:
        rep.raise_on_failure()
    assert info.value.exit_status == 3 and info.value.offending


def test_finite_differences_at_default_scale(spec, kernel):
    fd = FC.finite_difference_checks(spec, kernel, n_probe=30)
    assert fd["grad_rel_err"] <= 1e-4 and fd["hess_rel_err"] <= 1e-4
    assert fd["div_c_abs"] <= 1e-4


def test_finite_differences_at_unit_scale(unit_spec):
    fd = FC.finite_difference_checks(unit_spec, n_probe=30, step=1e-4)
    assert fd["grad_rel_err"] <= 1e-4 and fd["hess_rel_err"] <= 1e-4
    assert fd["div_c_abs"] <= 1e-4


def test_quadrature_doubling_at_unit_scale(unit_spec):
    assert FC.quadrature_consistency(unit_spec, n_probe=30) <= 1e-6


def test_sample_points_deterministic(spec):
    a, ra = FC.sample_points(spec, 10)
    b, rb = FC.sample_points(spec, 10)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(ra, rb)
    x, y, _ = FC.close_pairs(spec, 1000)
    dist = np.linalg.norm(x - y, axis=1)
    assert dist.min() >= 1e-3 * (1 - 1e-9) and dist.max() <= 1e-1 * (1 + 1e-9)


def test_tune_epsilon0_prefix(spec, kernel):
    from driftlab.statics import calibrate
    cals = {e: calibrate(spec, e, 10_000) for e in (0.1, 0.5)}
    eps0, reps = FC.tune_epsilon0(spec, cals.__getitem__, [0.1, 0.5], 1_000, kernel=kernel,
                                  n_pairs=200, n_probe=10)
    assert eps0 == 0.5 and all(r.passed for r in reps.values())
