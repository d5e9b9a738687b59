"""Scale-factor dynamics ``phi'' = alpha (-1/phi^2 + 1/phi^3)``.

The breathing family is driven by ``phi(t)`` with ``phi(0) = 1`` and
``phi'(0) = epsilon``.  For ``alpha = 1`` and ``|epsilon| < 1`` the orbit is
periodic with period ``2 pi / (1 - epsilon^2)^{3/2}``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10


class PhiIntegrationError(RuntimeError):
    """Integration of the scale factor failed; ``t_last`` is the last valid time."""

    def __init__(self, msg, t_last):
        super().__init__(f"{msg} (last valid t = {t_last:.17g})")
        self.t_last = t_last


class NoPeriodError(ValueError):
    pass


def phi_rhs(phi, alpha=1.0):
    return alpha * (-1.0 / phi**2 + 1.0 / phi**3)


def phi_energy(phi, phidot, alpha=1.0):
    """First integral ``phidot^2/2 + alpha(-1/phi + 1/(2 phi^2))``."""
    phi = np.asarray(phi, dtype=float)
    if np.any(phi <= 0):
        raise ValueError("phi must be positive")
    return 0.5 * np.asarray(phidot) ** 2 + alpha * (-1.0 / phi + 0.5 / phi**2)


def period(epsilon, alpha=1.0):
    """Closed-form period of the scale factor.

    For ``alpha = 1`` this is ``2 pi / (1 - eps^2)^{3/2}``.  Other ``alpha``
    follow from the time rescaling ``tau = sqrt(alpha) t``, which maps the
    problem to ``alpha = 1`` with initial velocity ``eps / sqrt(alpha)``.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    eps = epsilon / np.sqrt(alpha)
    if abs(eps) >= 1:
        raise NoPeriodError(f"no periodic orbit for epsilon={epsilon}, alpha={alpha}")
    return 2.0 * np.pi / (1.0 - eps * eps) ** 1.5 / np.sqrt(alpha)


def turning_points(epsilon, alpha=1.0):
    """Roots of ``alpha(-1/phi + 1/(2 phi^2)) = E`` for the orbit energy ``E``.

    Returns ``(phi_min, phi_max)``; only defined for bound orbits (``E < 0``).
    """
    E = float(phi_energy(1.0, epsilon, alpha))
    if E >= 0:
        raise NoPeriodError("unbound orbit has no upper turning point")
    # E phi^2 + alpha phi - alpha/2 = 0
    disc = np.sqrt(alpha * alpha + 2.0 * alpha * E)
    roots = sorted(((-alpha + disc) / (2 * E), (-alpha - disc) / (2 * E)))
    return roots[0], roots[1]


@dataclass(frozen=True)
class PhiTrajectory:
    """Dense solution of the scale-factor ODE on ``[0, t_end]``."""

    alpha: float
    epsilon: float
    t_end: float
    tol: float
    sol: object = field(repr=False)
    period: float | None = None
    energy0: float = 0.0

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        span = 1e-12 * max(1.0, self.t_end)
        if np.any(t < -span) or np.any(t > self.t_end + span):
            raise ValueError(f"t outside trajectory range [0, {self.t_end}]")
        return t

    def state(self, t):
        """``(phi, phidot)`` at ``t``."""
        t = self._check(t)
        y = self.sol(t)
        return y[0], y[1]

    def phi(self, t):
        return self.state(t)[0]

    def phidot(self, t):
        return self.state(t)[1]

    def phiddot(self, t):
        return phi_rhs(self.phi(t), self.alpha)

    def energy(self, t):
        phi, phidot = self.state(t)
        return phi_energy(phi, phidot, self.alpha)

    def table(self, n=1001):
        """Columns ``(t, phi, phidot, phiddot, E)`` on a uniform grid."""
        t = np.linspace(0.0, self.t_end, n)
        phi, phidot = self.state(t)
        return np.column_stack(
            [t, phi, phidot, phi_rhs(phi, self.alpha), phi_energy(phi, phidot, self.alpha)]
        )


def integrate_phi(alpha=1.0, epsilon=0.0, t_end=None, tol=DEFAULT_TOL) -> PhiTrajectory:
    """Integrate the scale factor from ``phi(0) = 1, phi'(0) = epsilon``.

    Parameters
    ----------
    alpha : float
        Coupling constant, must be positive.
    epsilon : float
        Initial velocity.  ``|epsilon| >= sqrt(alpha)`` gives an unbound orbit;
        it is integrated but carries no period.
    t_end : float, optional
        Final time.  Defaults to 2.5 periods for bound orbits, 50 otherwise.
    tol : float
        Target accuracy.  The embedded Dormand-Prince 8(5,3) pair is run with
        ``rtol = atol = tol / 10`` so that dense output and the energy drift
        stay below ``tol``-scale bounds.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if tol <= 0:
        raise ValueError("tol must be positive")
    try:
        T = period(epsilon, alpha)
    except NoPeriodError:
        T = None
        logger.info("epsilon=%g alpha=%g: unbound orbit, no period", epsilon, alpha)
    if t_end is None:
        t_end = 2.5 * T if T is not None else 50.0
    if t_end <= 0:
        raise ValueError("t_end must be positive")

    def rhs(t, y):
        return [y[1], phi_rhs(y[0], alpha)]

    def collapse(t, y):
        return y[0] - 1e-8

    collapse.terminal = True

    # rtol floor of DOP853 is 100 * machine epsilon
    rtol = max(tol / 10.0, 2.3e-14)
    sol = solve_ivp(
        rhs, (0.0, t_end), [1.0, epsilon], method="DOP853",
        rtol=rtol, atol=rtol, dense_output=True, events=collapse,
    )
    if sol.status != 0 or sol.t[-1] < t_end:
        raise PhiIntegrationError(sol.message or "phi collapsed to zero", float(sol.t[-1]))
    return PhiTrajectory(
        alpha=float(alpha), epsilon=float(epsilon), t_end=float(t_end), tol=float(tol),
        sol=sol.sol, period=T, energy0=float(phi_energy(1.0, epsilon, alpha)),
    )


def _zero_crossings(traj: PhiTrajectory, samples_per_period=400):
    scale = traj.period if traj.period is not None else 2 * np.pi / np.sqrt(traj.alpha)
    n = max(int(samples_per_period * traj.t_end / scale), 16)
    t = np.linspace(0.0, traj.t_end, n + 1)
    pd = traj.phidot(t)
    roots, directions = [], []
    idx = np.nonzero(np.sign(pd[:-1]) * np.sign(pd[1:]) < 0)[0]
    for i in idx:
        # quadratic through three neighbouring samples gives the starting estimate
        j = min(max(i, 1), n - 1)
        tt, yy = t[j - 1:j + 2], pd[j - 1:j + 2]
        c = np.polyfit(tt - tt[1], yy, 2)
        cand = [z.real + tt[1] for z in np.roots(c) if abs(z.imag) < 1e-14]
        cand = [z for z in cand if t[i] <= z <= t[i + 1]]
        guess = cand[0] if cand else 0.5 * (t[i] + t[i + 1])
        # polish on the dense interpolant
        h = 0.25 * (t[i + 1] - t[i])
        a, b = max(t[i], guess - h), min(t[i + 1], guess + h)
        if np.sign(traj.phidot(a)) == np.sign(traj.phidot(b)):
            a, b = t[i], t[i + 1]
        root = brentq(lambda s: float(traj.phidot(s)), a, b, xtol=1e-14, rtol=1e-15)
        roots.append(root)
        directions.append(np.sign(pd[i + 1] - pd[i]))
    return np.array(roots), np.array(directions)


def detect_period(traj: PhiTrajectory) -> float:
    """Numerical period from the zeros of ``phidot``.

    Uses two successive same-direction crossings when available, otherwise
    doubles the spacing of two consecutive crossings (the orbit is symmetric
    about its turning points).
    """
    roots, dirs = _zero_crossings(traj)
    if len(roots) >= 3 and dirs[0] == dirs[2]:
        return float(roots[2] - roots[0])
    if len(roots) >= 2:
        return float(2.0 * (roots[1] - roots[0]))
    raise NoPeriodError("fewer than two turning points in trajectory")
