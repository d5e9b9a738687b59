import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import interior_xv, random_rotation
from kurth import core

vec3 = arrays(np.float64, 3, elements=st.floats(-2, 2))


def test_to_radial_orthogonal_units():
    s = core.to_radial([1, 0, 0], [0, 1, 0])
    assert (s.r, s.p_r, s.beta) == pytest.approx((1.0, 0.0, 1.0))


def test_to_radial_collinear():
    s = core.to_radial([0.5, 0, 0], [0.2, 0, 0])
    assert (s.r, s.p_r, s.beta) == pytest.approx((0.5, 0.2, 0.0), abs=1e-15)


def test_to_radial_rejects_origin():
    with pytest.raises(ValueError):
        core.to_radial([0, 0, 0], [1, 0, 0])


def test_beta_matches_cross_product(rng):
    x = rng.normal(size=(500, 3))
    v = rng.normal(size=(500, 3))
    s = core.to_radial(x, v)
    beta = np.sum(np.cross(x, v) ** 2, axis=1)
    np.testing.assert_allclose(s.beta, beta, atol=1e-12 * max(1, beta.max()))


@settings(max_examples=200, deadline=None)
@given(vec3, vec3)
def test_support_F_cartesian_form(x, v):
    if np.linalg.norm(x) < 1e-3:
        return
    s = core.to_radial(x, v)
    F = core.support_F(*s).F
    expected = 1 - x @ x - v @ v + np.sum(np.cross(x, v) ** 2)
    assert abs(F - expected) < 1e-12 * max(1.0, abs(expected), (x @ x) * (v @ v))


def test_support_F_examples():
    info = core.support_F(0.6, 0.0, 0.09)
    assert info.F == pytest.approx(0.48, abs=1e-15)
    assert info.inside
    edge = core.support_F(1.0, 0.0, 0.0)
    assert edge.F == 0.0 and not edge.inside


def test_F_energy_identity_inside_ball(rng):
    # the energy form uses the r <= 1 branch of U
    r = rng.uniform(0.01, 1.0, 1000)
    p = rng.uniform(-1.5, 1.5, 1000)
    beta = rng.uniform(0, 1.5, 1000)
    F = core.support_F(r, p, beta).F
    e = core.energy(r, p, beta)
    np.testing.assert_allclose(F, -2 * (1 + e) + beta, atol=1e-12 * np.max(beta / r**2))


@pytest.mark.parametrize("r, U", [(0.0, -1.5), (1.0, -1.0), (2.0, -0.5), (0.5, 0.125 - 1.5)])
def test_potential_values(r, U):
    assert core.potential_U(r) == pytest.approx(U, abs=1e-15)


def test_potential_continuity_and_decay():
    assert core.potential_U(1.0 - 1e-12) == pytest.approx(core.potential_U(1.0 + 1e-12), abs=1e-11)
    assert abs(core.potential_U(1e3)) < 1.1e-3
    assert core.potential_dU(1.0) == pytest.approx(1.0)


def test_potential_derivative_fd():
    r = np.linspace(0.05, 3, 57)
    h = 1e-6
    fd = (core.potential_U(r + h) - core.potential_U(r - h)) / (2 * h)
    np.testing.assert_allclose(core.potential_dU(r), fd, rtol=1e-7)


def test_effective_potential_and_energy():
    assert core.effective_potential(1.0, 0.0) == pytest.approx(-1.0)
    assert core.effective_potential(0.5, 0.25) == pytest.approx(-0.875)
    assert core.energy(0.6, 0.0, 0.09) == pytest.approx(-1.195)


def test_eval_Q_examples():
    assert core.eval_Q([0, 0, 0], [0, 0, 0]) == pytest.approx(3 / (4 * np.pi**3))
    assert core.eval_Q([0, 0, 0], [0, 0, 0]) == pytest.approx(0.02418864, rel=1e-6)
    assert core.eval_Q([2, 0, 0], [0, 0, 0]) == 0.0
    # r = 0.6, p_r = 0, beta = 0.09
    q = core.eval_Q([0.6, 0, 0], [0, 0.5, 0])
    assert q == pytest.approx(3 / (4 * np.pi**3) / np.sqrt(0.48), rel=1e-14)
    # quoted value 0.0349139 is rounded loosely; the exact one is 0.03491331
    assert q == pytest.approx(0.0349139, rel=1e-4)


def test_eval_Q_tilde_consistent_with_eval_Q(rng):
    x, v = interior_xv(rng, 200)
    s = core.to_radial(x, v)
    np.testing.assert_allclose(core.eval_Q_tilde(core.energy(*s), s.beta), core.eval_Q(x, v), rtol=1e-12)


def test_eval_Q_zero_on_boundary_and_outside(rng):
    assert core.eval_Q([1, 0, 0], [0, 0, 0]) == 0.0
    x = rng.uniform(-2, 2, (2000, 3))
    v = rng.uniform(-2, 2, (2000, 3))
    q = core.eval_Q(x, v)
    F = 1 - (x * x).sum(1) - (v * v).sum(1) + np.sum(np.cross(x, v) ** 2, 1)
    beta = np.sum(np.cross(x, v) ** 2, 1)
    assert np.all(q >= 0)
    assert np.array_equal(q > 0, (F > 0) & (beta < 1))


def test_eval_Q_rotation_invariance(rng):
    x, v = interior_xv(rng, 1000)
    A = random_rotation(rng)
    q = core.eval_Q(x, v)
    np.testing.assert_allclose(core.eval_Q(x @ A.T, v @ A.T), q, rtol=1e-12, atol=0)


def test_grad_Q_vanishing_components():
    gx, _ = core.grad_Q([0, 0, 0], [0.3, -0.2, 0.5])
    _, gv = core.grad_Q([0.3, -0.2, 0.5], [0, 0, 0])
    assert np.all(gx == 0) and np.all(gv == 0)


def test_grad_Q_finite_differences(rng):
    x, v = interior_xv(rng, 100, margin=0.1)
    gx, gv = core.grad_Q(x, v)
    h = 1e-5
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fdx = (core.eval_Q(x + e, v) - core.eval_Q(x - e, v)) / (2 * h)
        fdv = (core.eval_Q(x, v + e) - core.eval_Q(x, v - e)) / (2 * h)
        scale = np.max(np.abs(np.concatenate([gx, gv], 1)), axis=1)
        assert np.max(np.abs(fdx - gx[:, i]) / scale) < 1e-6
        assert np.max(np.abs(fdv - gv[:, i]) / scale) < 1e-6


def test_grad_Q_rejects_outside():
    with pytest.raises(ValueError):
        core.grad_Q([2, 0, 0], [0, 0, 0])
