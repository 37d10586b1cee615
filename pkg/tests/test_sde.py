import numpy as np
import pytest

from driftlab import sde as S
from driftlab.env import make_env, shifted_view
from driftlab.errors import ConfigError, NumericalFailure
from driftlab.fields import DriftParams


def test_default_step(spec, unit_spec):
    assert S.default_step(spec) == pytest.approx(0.64)
    assert S.default_step(unit_spec) == pytest.approx(6.25e-4)
    cfg = S.SdeConfig(T=1.0, h_step=0.3)
    assert cfg.n_steps(spec) == 4


def test_config_errors():
    for kw in ({"T": 0.0}, {"T": 1.0, "h_step": -1}, {"T": 1.0, "M": 0},
               {"T": 0.1, "h_step": 1.0}, {"T": 1.0, "noise_substeps": 0},
               {"T": 1.0, "brownian_seed": -1}):
        with pytest.raises(ConfigError):
            S.SdeConfig(**kw)


def test_brownian_baseline(spec, kernel):
    cfg = S.SdeConfig(T=10.0, M=10_000, h_step=0.64)
    r = S.simulate_annealed(spec, cfg, None, kernel, track=False)
    slope = S.annealed_slope(spec, cfg, result=r)
    assert slope.contains(0.0)
    var = r.endpoint.var(axis=0, ddof=1)
    assert np.all(np.abs(var / 10.0 - 1) <= 0.05)
    assert not r.max_b.any()


def test_quenched_runs_are_bitwise_reproducible(spec, kernel, calib):
    params = calib.params(1.0)
    env = make_env(spec, 11)
    cfg = S.SdeConfig(T=50.0, M=3)
    a = S.simulate_quenched(env, cfg, params, kernel)
    b = S.simulate_quenched(env, cfg, params, kernel)
    np.testing.assert_array_equal(a.endpoint, b.endpoint)
    np.testing.assert_array_equal(a.block_means, b.block_means)
    c = S.simulate_quenched(env, S.SdeConfig(T=50.0, M=3, brownian_seed=1), params, kernel)
    assert not np.array_equal(a.endpoint, c.endpoint)


def test_shifted_environment_shifts_the_drift(spec, kernel, calib):
    # starting at the origin of a view shifted by z sees omega(z + .)
    params = calib.params(0.5)
    env = make_env(spec, 3)
    view = shifted_view(env, [5.0, -2.0])
    r = S.simulate_quenched(view, S.SdeConfig(T=20.0), params, kernel)
    assert np.isfinite(r.endpoint).all()


def test_drift_bound_along_paths(spec, kernel, calib):
    r = S.simulate_annealed(spec, S.SdeConfig(T=200.0, M=20), calib.params(1.0), kernel)
    assert r.max_b.max() <= 0.1
    assert r.max_b.max() > 0
    assert r.block_means.shape == (20, 5, 4)
    assert r.time_average("b").shape == (20, 2)
    with pytest.raises(ConfigError):
        r.time_average("nope")


def test_strong_error_decreases(spec, kernel):
    from driftlab.statics import calibrate
    cal = calibrate(spec, 1.0, 20_000)
    steps, errs = S.strong_error(spec, S.SdeConfig(T=20.0, M=50), cal.params(1.0), kernel)
    assert np.all(np.diff(errs) < 0)
    assert np.all(errs <= np.sqrt(steps))


def test_non_finite_state_raises(spec, kernel):
    bad = DriftParams(0.1, 1.0, 0.3, (np.nan, 0.0))
    with pytest.raises(NumericalFailure) as info:
        S.simulate_annealed(spec, S.SdeConfig(T=5.0, M=2), bad, kernel)
    assert info.value.step == 0 and info.value.exit_status == 4


def test_time_average_units(spec, kernel, calib):
    params = calib.params(0.0)
    cfg = S.SdeConfig(T=20.0, M=4)
    one = S.env_time_average(make_env(spec, 5), cfg, params, "phi", kernel)
    assert one.variant == "paths" and one.batches.shape == (4,)
    many = S.env_time_average(S.environments(spec, 3), cfg, params, "phi", kernel)
    assert many.variant == "environments" and many.batches.shape == (3,)
    single = S.env_time_average(make_env(spec, 5), S.SdeConfig(T=20.0), params, "phi", kernel)
    assert single.variant == "time-blocks"


def test_static_target_at_eps_zero_is_plain_mean(spec):
    from driftlab.statics import sample_origin
    s = sample_origin(spec, 20_000)
    t = S.static_target(s, DriftParams(0.0, 0.0, 0.3, (0.0, 0.0)), "phi")
    assert t.value == pytest.approx(s.value.mean(), rel=1e-12)
