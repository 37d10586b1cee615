import numpy as np
import pytest

from driftlab import statics as T
from driftlab.errors import CalibrationError, ConfigError, DomainError
from driftlab.env import EnvironmentSpec
from driftlab.stats import exact


def test_gamma_arithmetic():
    assert T.gamma_coeff(2.0, -0.25) == 2.0
    for lam in (-1 / 3, 0.0, 0.1, -0.5):
        with pytest.raises(DomainError):
            T.gamma_coeff(2.0, lam)


def test_gamma_is_minus_inverse_lambda_minus_g():
    for g in (1.0, 1.02, 1.5, 3.0):
        for lam in (-0.3, -0.25, -0.1, -1e-3):
            assert T.gamma_coeff(g, lam) == pytest.approx(-1 / lam - g, rel=1e-12)


def test_lambda_star_from_calibration(calib):
    lam = T.lambda_star(calib)
    assert lam == -1 / float(calib.g_eps.value)
    assert -1 <= lam < 0


def test_lambda_star_examples(calib):
    from dataclasses import replace
    assert T.lambda_star(replace(calib, g_eps=exact("g_eps", 1.02))) == pytest.approx(-0.98039, abs=1e-5)
    assert T.lambda_star(replace(calib, g_eps=exact("g_eps", 1.0))) == -1.0


def test_lambda_star_rejects_g_below_one(calib):
    from dataclasses import replace
    bad = replace(calib, g_eps=exact("g_eps", 0.5))
    with pytest.raises(CalibrationError):
        T.lambda_star(bad)


def test_calibration_basic_facts(calib):
    assert calib.epsilon == 0.1 and calib.m == 1.0
    assert 1 <= calib.g_eps.value < 1 + 1e-3   # g - 1 = O(eps^2 var(phi))
    assert calib.mu_phi.value > 0
    calib.check()
    # d_{eps,0} = eps a exactly, at the estimator level
    np.testing.assert_array_equal(calib.d_eps0.value, 0.1 * calib.a_eps.value)
    back = T.Calibration.from_dict(calib.to_dict())
    assert back.to_dict() == calib.to_dict()


def test_calibration_input_errors(spec):
    with pytest.raises(ConfigError):
        T.calibrate(spec, 0.1, 100)
    with pytest.raises(ConfigError):
        T.calibrate(spec, 1.5, 20_000)
    with pytest.raises(ConfigError):
        T.calibrate(spec, 0.1, 20_000, variant="bogus")
    empty = EnvironmentSpec(range=32.0, seed=1, intensity=1e-12)
    with pytest.raises(CalibrationError):
        T.calibrate(empty, 0.1, 10_000)


def test_eps_zero_is_exact(spec):
    cal = T.calibrate(spec, 0.0, 20_000)
    assert cal.g_eps.value == 1 and cal.g_eps.se == 0
    assert not cal.d_eps0.value.any()
    v = T.velocity(spec, 0.0, 0.5, cal, 20_000)
    d = T.static_drift(spec, 0.0, 0.5, cal, 20_000)
    assert not v.value.any() and not d.direct.value.any() and not d.identity.value.any()


def test_lambda_zero_velocity_and_identity_at_lambda_star(spec, calib):
    n = 50_000
    sample = T.sample_origin(spec, n, T.STATICS_FIRST)
    v = T.velocity(spec, 0.1, 0.0, calib, n, sample=sample)
    assert not v.value.any() and not v.se.any()
    sd = T.static_drift(spec, 0.1, T.lambda_star(calib), calib, n, sample=sample)
    scale = np.linalg.norm(calib.d_eps0.value)
    assert np.all(np.abs(sd.identity.value) <= 64 * np.finfo(float).eps * scale)


def test_drift_and_velocity_identities_small_n(spec, calib):
    n = 50_000
    sample = T.sample_origin(spec, n, T.STATICS_FIRST)
    for lam in (-0.25, 0.5, 1.0):
        sd = T.static_drift(spec, 0.1, lam, calib, n, sample=sample)
        se = np.sqrt(sd.direct.se**2 + sd.identity.se**2)
        assert np.all(np.abs(sd.direct.value - sd.identity.value) <= 3 * se)
        v = T.velocity(spec, 0.1, lam, calib, n, "plain", sample=sample)
        se = np.sqrt(v.se**2 + (lam * calib.d_eps0.se) ** 2)
        assert np.all(np.abs(v.value - lam * calib.d_eps0.value) <= 3 * se)


def test_calibration_mismatch_rejected(spec, calib):
    with pytest.raises(ConfigError):
        T.static_drift(spec, 0.2, 0.0, calib, 10_000)
    with pytest.raises(ConfigError):
        T.velocity(spec, 0.1, 0.0, None, 10_000)


def test_sample_origin_is_deterministic(spec):
    T.clear_cache()
    a = T.sample_origin(spec, 2_000, 123)
    T.clear_cache()
    b = T.sample_origin(spec, 2_000, 123)
    np.testing.assert_array_equal(a.value, b.value)
    np.testing.assert_array_equal(a.hessian, b.hessian)
