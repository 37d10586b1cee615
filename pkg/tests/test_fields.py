import numpy as np
import pytest

from driftlab import fields as F
from driftlab.env import EnvironmentSpec, make_env, points_in_ball, shifted_view
from driftlab.fieldcheck import finite_difference_checks, quadrature_consistency, sample_points
from driftlab.fields import DriftParams
from driftlab.errors import ConfigError
from driftlab.kernels import KernelParams


def test_empty_environment_gives_zero():
    spec = EnvironmentSpec(range=32.0, seed=1, intensity=1e-12)
    env = make_env(spec, 0)
    f = F.phi([3.0, 4.0], env)
    assert f.value == 0 and not f.gradient.any() and not f.hessian.any()
    assert F.phi_hat([3.0, 4.0], env) == 0


def test_dense_environment_saturates():
    # ~200 points per small ball: phi_hat is 1 on the whole mollifier ball, so
    # phi is constant up to the lattice-rule error, which must shrink with order
    spec = EnvironmentSpec(range=32.0, seed=1, intensity=200 / (np.pi * 16))
    env = make_env(spec, 0)
    errs = []
    for q in (24, 96):
        kernel = KernelParams.for_spec(spec, quadrature_order=q)
        f = F.phi([0.3, -5.1], env, kernel)
        errs.append((abs(f.value - 1 / kernel.m), np.abs(f.gradient).max(),
                     np.abs(f.hessian).max()))
    v, g, h = errs[0]
    assert v < 1e-6 and g < 1e-5 and h < 1e-3
    assert all(fine < coarse / 10 for coarse, fine in zip(errs[0], errs[1]))


def test_phi_hat_truncation_and_single_point():
    pts = np.zeros((5, 2))
    z = np.zeros(2)
    assert F._phi_hat_at(z, pts, 5, 4.0, 0.6, 4) == 1.0
    assert F._phi_hat_at(z, pts, 1, 4.0, 0.6, 4) == pytest.approx(0.6)
    z = np.array([1.0, 1.5])
    assert F._phi_hat_at(z, pts, 1, 4.0, 0.6, 4) == pytest.approx(0.6 * (1 - 3.25 / 16) ** 4)
    assert F._phi_hat_at(np.array([4.0, 0.1]), pts, 5, 4.0, 0.6, 4) == 0.0


def test_phi_hat_single_point_in_sparse_environment():
    spec = EnvironmentSpec(range=32.0, seed=3, intensity=2e-4)
    kernel = KernelParams.for_spec(spec)
    for rep in range(200):
        env = make_env(spec, rep)
        near = points_in_ball(env, [0.0, 0.0], 3 * kernel.r_zeta).points
        if len(near) == 1:
            p = near[0]
            x = p + np.array([1.0, -2.0])
            assert F.phi_hat(x, env, kernel) == pytest.approx(kernel.zeta((x - p)[None, :])[0])
            return
    pytest.fail("no replica with an isolated point")


def test_phi_hat_bounded(spec, kernel):
    xs, reps = sample_points(spec, 5000)
    v = F.phi_hat_batch(spec, kernel, xs, reps)
    assert v.min() >= 0 and v.max() <= 1 and (v == 1).any() and (v == 0).any()


def test_locality_of_field(spec, kernel):
    # phi at x uses only points within R/4: compare with a sparse environment
    # realisation that agrees inside that ball (same replica, same cells).
    env = make_env(spec, 11)
    a = F.phi([0.0, 0.0], env, kernel)
    b = F.evaluate(spec, kernel, np.zeros((1, 2)), 11)
    assert a.value == b.value[0]
    assert kernel.reach == spec.range / 4


def test_derivative_transfer_default_scale(spec, kernel):
    r = finite_difference_checks(spec, kernel, n_probe=100, step=1e-3)
    assert r["n_trivial"] == 0
    assert r["grad_rel_err"] <= 1e-4
    assert r["hess_rel_err"] <= 1e-4
    assert r["div_c_abs"] <= 1e-4


def test_derivative_transfer_unit_scale(unit_spec):
    # step 1e-3 is r_rho / 125 at R = 1, too coarse for the tolerance (see notes);
    # 1e-4 keeps the same tolerance
    r = finite_difference_checks(unit_spec, n_probe=100, step=1e-4)
    assert r["grad_rel_err"] <= 1e-4
    assert r["hess_rel_err"] <= 1e-4
    assert r["div_c_abs"] <= 1e-4


def test_quadrature_doubling_unit_scale(unit_spec):
    assert quadrature_consistency(unit_spec, n_probe=100) <= 1e-6


def test_quadrature_converges(spec):
    # at R = 32 the kink of min(., 1) limits the lattice rule; check convergence
    coarse = quadrature_consistency(spec, KernelParams.for_spec(spec, quadrature_order=12), 50)
    fine = quadrature_consistency(spec, KernelParams.for_spec(spec, quadrature_order=48), 50)
    assert fine < coarse / 8


def test_h_matrix_example():
    g = np.array([0.3, -0.25])
    np.testing.assert_array_equal(F.h_from_gradient(g), [[0.0, 0.25], [-0.25, 0.0]])
    g3 = np.array([0.1, 0.2, 0.3])
    h = F.h_from_gradient(g3)
    assert np.array_equal(h, -h.T)
    assert h[1, 0] == 0.2 and h[2, 0] == 0.3 and h[1, 2] == 0 and h[2, 1] == 0
    assert not F.h_from_gradient(np.zeros(3)).any()


def test_h_skew_on_field(spec, kernel):
    env = make_env(spec, 2)
    h = F.h_matrix([1.0, 2.0], env, kernel)
    assert np.array_equal(h + h.T, np.zeros((2, 2)))


def test_c_from_hessian():
    H = np.array([[1.0, 2.0, 3.0], [2.0, 5.0, 6.0], [3.0, 6.0, 9.0]])
    c = F.c_from_hessian(H)
    np.testing.assert_allclose(c, np.array([-(5.0 + 9.0), 2.0, 3.0]) / (8 * 9))
    assert not F.c_from_hessian(np.zeros((2, 2))).any()


def test_c_matches_divergence_of_h(spec, kernel):
    # c_i = (1/8d^2) sum_j d_j h_ij computed from finite differences of grad phi
    env = make_env(spec, 8)
    x = np.array([2.0, -1.0])
    step = 1e-3
    div = np.zeros(2)
    for j in range(2):
        e = np.zeros(2)
        e[j] = step
        hp = F.h_matrix(x + e, env, kernel)
        hm = F.h_matrix(x - e, env, kernel)
        div += (hp[:, j] - hm[:, j]) / (2 * step)
    np.testing.assert_allclose(F.c_field(x, env, kernel), div / 32, rtol=1e-5, atol=1e-12)


def test_eps_zero(spec, kernel):
    env = make_env(spec, 3)
    p = DriftParams(0.0, 0.5, 0.35, (0.0, 0.0))
    f = F.phi_eps([1.0, 1.0], env, p, kernel)
    assert f.value == 1.0 and not f.gradient.any()
    assert not F.drift_b([1.0, 1.0], env, p, kernel).any()


def test_drift_formula(spec, kernel):
    env = make_env(spec, 3)
    p = DriftParams(0.2, -0.5, 0.3, (1e-3, -2e-3))
    x = [4.0, -2.0]
    f = F.phi(x, env, kernel)
    den = 1 + 0.1 * 0.3
    pe = (1 + 0.1 * f.value) / den
    ge = 0.1 * f.gradient / den
    c = F.c_from_hessian(f.hessian)
    expected = ge / (2 * pe) + 0.2 * (c + np.array([-5e-4, 1e-3])) / pe
    np.testing.assert_allclose(F.drift_b(x, env, p, kernel), expected, rtol=1e-14)


def test_shift_covariance_bitwise(spec, kernel):
    xs, reps = sample_points(spec, 100, stream=21)
    for x, r in zip(xs, reps):
        env = make_env(spec, int(r))
        a = F.phi(x, env, kernel)
        b = F.phi([0.0, 0.0], shifted_view(env, x), kernel)
        assert a.value == b.value
        assert np.array_equal(a.gradient, b.gradient) and np.array_equal(a.hessian, b.hessian)


def test_hessian_symmetric(spec, kernel):
    xs, reps = sample_points(spec, 500, stream=22)
    H = F.evaluate(spec, kernel, xs, reps).hessian
    assert np.array_equal(H, np.swapaxes(H, 1, 2))


def test_drift_params_validation():
    with pytest.raises(ConfigError):
        DriftParams(1.5, 0.0, 0.3, (0, 0))
    with pytest.raises(ConfigError):
        DriftParams(0.1, -1.5, 0.3, (0, 0))


def test_kernel_mismatch(spec, unit_spec):
    with pytest.raises(ConfigError):
        F.evaluate(spec, KernelParams.for_spec(unit_spec), np.zeros((1, 2)), 0)


def test_three_dimensions():
    spec = EnvironmentSpec(dimension=3, range=32.0, seed=2)
    r = finite_difference_checks(spec, n_probe=5, step=1e-3)
    assert r["grad_rel_err"] <= 1e-4 and r["hess_rel_err"] <= 1e-4 and r["div_c_abs"] <= 1e-4
