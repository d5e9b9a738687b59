import numpy as np
import pytest
from scipy.optimize import brentq

from kurth.phi import (
    NoPeriodError,
    PhiIntegrationError,
    detect_period,
    integrate_phi,
    period,
    phi_energy,
    turning_points,
)

TOL = 1e-10


def test_equilibrium_is_fixed():
    traj = integrate_phi(1.0, 0.0, t_end=20.0)
    t = np.linspace(0, 20, 500)
    assert np.max(np.abs(traj.phi(t) - 1)) < TOL
    assert np.max(np.abs(traj.phidot(t))) < TOL


def test_energy_value_and_conservation():
    traj = integrate_phi(1.0, 0.6)
    t = np.linspace(0, traj.t_end, 3000)
    assert traj.energy0 == pytest.approx(-0.32, abs=1e-15)
    assert np.max(np.abs(traj.energy(t) + 0.32)) < 10 * TOL


def test_energy_oracle_tighter_integration():
    # an independent run with a much smaller tolerance is the reference
    coarse = integrate_phi(1.0, 0.6, tol=1e-8)
    fine = integrate_phi(1.0, 0.6, tol=1e-13)
    t = np.linspace(0, coarse.t_end, 400)
    assert np.max(np.abs(coarse.phi(t) - fine.phi(t))) < 1e-6


@pytest.mark.parametrize("eps", [0.1, 0.3, 0.6, 0.9])
@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_energy_drift_one_period(eps, alpha):
    try:
        T = period(eps, alpha)
    except NoPeriodError:
        # unbound orbit: use a fixed window instead of a period
        T = 20.0
    traj = integrate_phi(alpha, eps, t_end=T)
    t = np.linspace(0, T, 2000)
    assert np.max(np.abs(traj.energy(t) - traj.energy0)) < 10 * TOL


def test_orbit_closure():
    T = period(0.6)
    traj = integrate_phi(1.0, 0.6, tol=TOL)
    phi, phidot = traj.state(T)
    assert abs(phi - 1) < 100 * TOL and abs(phidot - 0.6) < 100 * TOL


@pytest.mark.parametrize("eps", [0.1, 0.3, 0.6, 0.9])
def test_detected_period_matches_closed_form(eps):
    traj = integrate_phi(1.0, eps)
    T = 2 * np.pi / (1 - eps**2) ** 1.5
    assert detect_period(traj) / T - 1 == pytest.approx(0.0, abs=1e-6)


def test_period_examples():
    assert period(0.0) == pytest.approx(2 * np.pi)
    assert period(0.6) == pytest.approx(12.2718463, abs=1e-7)


@pytest.mark.parametrize("alpha", [0.5, 2.0])
def test_period_general_alpha_detected(alpha):
    eps = 0.4
    traj = integrate_phi(alpha, eps)
    assert detect_period(traj) == pytest.approx(period(eps, alpha), rel=1e-6)


def test_unbound_orbit_has_no_period():
    with pytest.raises(NoPeriodError):
        period(1.0)
    traj = integrate_phi(1.0, 1.2, t_end=10.0)
    assert traj.period is None
    with pytest.raises(NoPeriodError):
        detect_period(traj)


@pytest.mark.parametrize("alpha, eps", [(1.0, 1.0), (4.0, 2.0), (0.25, 0.5)])
def test_marginal_orbit_has_no_period(alpha, eps):
    with pytest.raises(NoPeriodError):
        period(eps, alpha)


def test_phi_energy_examples():
    assert phi_energy(1.0, 0.6, 1.0) == pytest.approx(0.6**2 / 2 - 0.5)
    assert phi_energy(1.0, 0.0, 2.0) == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        phi_energy(0.0, 1.0)


def test_turning_points_root_solve():
    lo, hi = turning_points(0.6)
    f = lambda p: -1 / p + 1 / (2 * p * p) + 0.32
    assert lo == pytest.approx(brentq(f, 0.3, 1.0), abs=1e-12)
    assert hi == pytest.approx(brentq(f, 1.0, 5.0), abs=1e-12)
    for p in (lo, hi):
        assert phi_energy(p, 0.0) == pytest.approx(-0.32, abs=1e-12)


@pytest.mark.parametrize("alpha, eps", [(1.0, 0.6), (2.0, 0.9), (0.5, 0.3)])
def test_phi_stays_in_bracket(alpha, eps):
    lo, hi = turning_points(eps, alpha)
    traj = integrate_phi(alpha, eps)
    phi = traj.phi(np.linspace(0, traj.t_end, 5000))
    assert phi.min() >= lo - 1e-8 and phi.max() <= hi + 1e-8


def test_time_reversal():
    from scipy.integrate import solve_ivp
    from kurth.phi import phi_rhs

    eps = 0.6
    traj = integrate_phi(1.0, eps)
    half = period(eps) / 2
    y = traj.state(half)
    back = solve_ivp(lambda t, y: [y[1], phi_rhs(y[0])], (half, 0.0), [float(y[0]), float(y[1])],
                     method="DOP853", rtol=1e-11, atol=1e-11)
    assert abs(back.y[0, -1] - 1) < 100 * TOL
    assert abs(back.y[1, -1] - eps) < 100 * TOL


def test_table_columns():
    traj = integrate_phi(1.0, 0.3)
    tab = traj.table(11)
    assert tab.shape == (11, 5)
    np.testing.assert_allclose(tab[:, 4], -0.5 + 0.045, atol=1e-9)


def test_argument_errors():
    with pytest.raises(ValueError):
        integrate_phi(alpha=0.0)
    with pytest.raises(ValueError):
        integrate_phi(tol=0.0)
    traj = integrate_phi(1.0, 0.3, t_end=1.0)
    with pytest.raises(ValueError):
        traj.phi(2.0)


def test_integration_error_type():
    assert issubclass(PhiIntegrationError, RuntimeError)
