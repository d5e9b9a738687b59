"""Time-periodic breathing family generated from the Kurth steady state.

``f_eps(t, x, v) = Q(x / phi, phi v - phidot x)`` where ``phi`` is the scale
factor from :mod:`kurth.phi`.  Besides evaluation of ``f_eps`` and its
macroscopic fields, this module assembles the residuals of every identity
the family is supposed to satisfy: the Vlasov equation, the Hamiltonian
flow of ``(R, P)``, the unit Jacobian, the field identity relating the
breathing force to the steady one, and the coefficient equations of the
``beta``-power splitting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .core import (
    RHO_0,
    eval_Q,
    eval_Q_tilde,
    energy,
    grad_Q,
    potential_dU,
    potential_U,
    support_F,
)
from .phi import DEFAULT_TOL, PhiTrajectory, integrate_phi


class VlasovResidual(NamedTuple):
    raw: np.ndarray
    relative: np.ndarray
    scale: np.ndarray


class AnsatzResidual(NamedTuple):
    beta0: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray

    def max_abs(self):
        return float(max(np.max(np.abs(c)) for c in self))


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def _central(fn, args, k):
    """Central difference of ``fn`` in argument ``k`` with ``h = 1e-6 max(1, |arg|)``."""
    a = np.asarray(args[k], dtype=float)
    h = 1e-6 * np.maximum(1.0, np.abs(a))
    up = list(args)
    dn = list(args)
    up[k] = a + h
    dn[k] = a - h
    return (fn(*up) - fn(*dn)) / (2.0 * h)


@dataclass
class TransformFields:
    """Candidate ``(R, P)`` fields with ``B = beta`` held fixed.

    ``R(t, r, p_r)`` and ``P(t, r, p_r)`` are vectorised callables.  The
    derivative maps ``dR`` / ``dP`` return ``(d_t, d_r, d_p)`` triples; when
    omitted they are replaced by central differences.
    """

    R: Callable
    P: Callable
    dR: Callable | None = None
    dP: Callable | None = None

    def grad_R(self, t, r, p_r):
        if self.dR is not None:
            return self.dR(t, r, p_r)
        return tuple(_central(self.R, (t, r, p_r), k) for k in range(3))

    def grad_P(self, t, r, p_r):
        if self.dP is not None:
            return self.dP(t, r, p_r)
        return tuple(_central(self.P, (t, r, p_r), k) for k in range(3))

    def jacobian_det(self, t, r, p_r):
        _, Rr, Rp = self.grad_R(t, r, p_r)
        _, Pr, Pp = self.grad_P(t, r, p_r)
        return Rr * Pp - Rp * Pr


def separation_constant(a, adot, addot):
    """``(2 adot^2 - a addot) / (a^5 (a - 1))``.

    Evaluated along ``a = 1/phi`` of a scale-factor orbit this returns the
    coupling constant of the orbit's ODE.
    """
    a = np.asarray(a, dtype=float)
    if np.any(a == 1.0) or np.any(a == 0.0):
        raise ValueError("separation constant is singular at a = 0 or a = 1")
    return (2.0 * np.asarray(adot) ** 2 - a * np.asarray(addot)) / (a**5 * (a - 1.0))


def reconstruct_P(tf: TransformFields, t, r, p_r):
    """Rebuild ``P`` from ``R`` alone for a unit-Jacobian point transformation.

    ``P = p_r / (2 R_r) + R_r (r/R)^3 (R_t + p_r R_r / 2)``.
    """
    R = tf.R(t, r, p_r)
    Rt, Rr, _ = tf.grad_R(t, r, p_r)
    return p_r / (2.0 * Rr) + Rr * (r / R) ** 3 * (Rt + 0.5 * p_r * Rr)


def ansatz_residual(tf: TransformFields, t, r, p_r, beta=None, force=None, dU=potential_dU):
    """Residuals of the three ``beta``-power coefficient equations.

    Parameters
    ----------
    tf : TransformFields
        Candidate fields.
    t, r, p_r : array_like
        Evaluation points, ``r > 0``.
    beta : array_like, optional
        Unused by the coefficients themselves (they are the ``beta^0``,
        ``beta^1`` and ``beta^2`` parts); accepted for call-site symmetry.
    force : callable, optional
        ``d_r U_f(t, r)`` of the evolving state.  Defaults to the field
        identity ``(R/r)^2 U'(R)``.
    dU : callable
        Radial derivative of the steady potential.
    """
    r = np.asarray(r, dtype=float)
    p_r = np.asarray(p_r, dtype=float)
    R = tf.R(t, r, p_r)
    P = tf.P(t, r, p_r)
    Rt, Rr, Rp = tf.grad_R(t, r, p_r)
    Pt, Pr, Pp = tf.grad_P(t, r, p_r)
    dUR = dU(R)
    Uf = (R / r) ** 2 * dUR if force is None else force(t, r)
    transport_R = Rt + p_r * Rr - Uf * Rp
    transport_P = Pt + p_r * Pr - Uf * Pp
    c0 = P * transport_P + dUR * transport_R
    c1 = (P * Pp + dUR * Rp) / r**3 - transport_R / R**3
    c2 = Rp / (r**3 * R**3)
    return AnsatzResidual(c0, c1, c2)


@dataclass(frozen=True)
class KurthFamily:
    """Breathing Kurth solution driven by a scale-factor trajectory."""

    traj: PhiTrajectory

    @classmethod
    def from_epsilon(cls, epsilon, alpha=1.0, t_end=None, tol=DEFAULT_TOL):
        return cls(integrate_phi(alpha, epsilon, t_end=t_end, tol=tol))

    @property
    def epsilon(self):
        return self.traj.epsilon

    @property
    def period(self):
        return self.traj.period

    def _coeffs(self, t):
        phi, phidot = self.traj.state(t)
        return phi, phidot, self.traj.phiddot(t)

    # -- transformation ---------------------------------------------------

    def lambda_map(self, t, x, v):
        """Cartesian map ``(x, v) -> (x/phi, phi v - phidot x)``."""
        phi, phidot = self.traj.state(t)
        phi = np.asarray(phi)[..., None]
        phidot = np.asarray(phidot)[..., None]
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        return x / phi, phi * v - phidot * x

    def lambda_radial(self, t, r, p_r):
        """Radial form ``(r, p_r) -> (r/phi, phi p_r - phidot r)``; beta is unchanged."""
        phi, phidot = self.traj.state(t)
        return r / phi, phi * p_r - phidot * r

    def transform_fields(self) -> TransformFields:
        traj = self.traj

        def R(t, r, p_r):
            return r / traj.phi(t) + 0.0 * p_r

        def P(t, r, p_r):
            phi, phidot = traj.state(t)
            return phi * p_r - phidot * r

        def dR(t, r, p_r):
            phi, phidot = traj.state(t)
            return -phidot * r / phi**2, 1.0 / phi + 0.0 * r, 0.0 * p_r

        def dP(t, r, p_r):
            phi, phidot = traj.state(t)
            phiddot = traj.phiddot(t)
            return phidot * p_r - phiddot * r, -phidot + 0.0 * r, phi + 0.0 * p_r

        return TransformFields(R, P, dR, dP)

    def jacobian_det(self, t, r, p_r):
        return self.transform_fields().jacobian_det(t, r, p_r)

    # -- distribution and fields ------------------------------------------

    def eval_f(self, t, x, v):
        X, W = self.lambda_map(t, x, v)
        return eval_Q(X, W)

    def eval_f_radial(self, t, r, p_r, beta):
        R, P = self.lambda_radial(t, r, p_r)
        info = support_F(R, P, beta)
        return eval_Q_tilde(energy(R, P, beta), beta) * info.inside

    def rho(self, t, r):
        phi = self.traj.phi(t)
        r = np.asarray(r, dtype=float)
        return np.where(r < phi, RHO_0 / phi**3, 0.0)

    def potential(self, t, r):
        phi = self.traj.phi(t)
        return potential_U(np.asarray(r, dtype=float) / phi) / phi

    def force(self, t, r):
        """``d_r U_eps``: ``r/phi^3`` inside the breathing ball, ``1/r^2`` outside."""
        phi = self.traj.phi(t)
        return potential_dU(np.asarray(r, dtype=float) / phi) / phi**2

    # -- Hamiltonian structure ----------------------------------------------

    def hamiltonian(self, t, r, p_r):
        """``H(t, r, p_r)`` and its gradient ``(dH/dr, dH/dp_r)``."""
        phi, phidot, phiddot = self._coeffs(t)
        k = phidot / phi
        m = phidot**2 - phi * phiddot
        H = -k * r * p_r - 0.5 * m * r**2
        return H, -k * p_r - m * r, -k * r

    def flow_velocity(self, t, r, p_r):
        """Analytic ``d/dt (R, P)`` at fixed ``(r, p_r)``."""
        phi, phidot, phiddot = self._coeffs(t)
        return -phidot * r / phi**2, phidot * p_r - phiddot * r

    def hamiltonian_flow_residual(self, t, r, p_r):
        """``d/dt (R, P) - J grad H(t, R, P)`` with ``J = [[0, 1], [-1, 0]]``."""
        R, P = self.lambda_radial(t, r, p_r)
        dR, dP = self.flow_velocity(t, r, p_r)
        _, Hr, Hp = self.hamiltonian(t, R, P)
        return np.stack([dR - Hp, dP + Hr], axis=-1)

    # -- Vlasov residual ----------------------------------------------------

    def vlasov_terms(self, t, x, v):
        """``(d_t f, v . grad_x f, -grad_x U . grad_v f)`` from the analytic gradients."""
        phi, phidot, phiddot = self._coeffs(t)
        X, W = self.lambda_map(t, x, v)
        gx, gv = grad_Q(X, W)
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        xgx, xgv, vgx, vgv = _dot(x, gx), _dot(x, gv), _dot(v, gx), _dot(v, gv)
        dt = -phidot / phi**2 * xgx - phiddot * xgv + phidot * vgv
        transport = vgx / phi - phidot * vgv
        # grad_x U_eps = x / phi^3 on the support, grad_v f = phi grad_v Q
        forcing = -xgv / phi**2
        return dt, transport, forcing

    def vlasov_residual(self, t, x, v) -> VlasovResidual:
        terms = self.vlasov_terms(t, x, v)
        raw = terms[0] + terms[1] + terms[2]
        scale = np.max(np.abs(np.stack(terms)), axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.where(scale > 0, np.abs(raw) / np.where(scale > 0, scale, 1.0), 0.0)
        return VlasovResidual(raw, rel, scale)

    def vlasov_terms_fd(self, t, x, v, h=1e-5, ht=1e-4):
        """Finite-difference counterpart of :meth:`vlasov_terms` from ``eval_f`` alone."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        t = np.asarray(t, dtype=float)
        dt = (self.eval_f(t + ht, x, v) - self.eval_f(t - ht, x, v)) / (2 * ht)
        gx = np.zeros_like(x)
        gv = np.zeros_like(v)
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            gx[..., i] = (self.eval_f(t, x + e, v) - self.eval_f(t, x - e, v)) / (2 * h)
            gv[..., i] = (self.eval_f(t, x, v + e) - self.eval_f(t, x, v - e)) / (2 * h)
        # on the support grad_x U_eps = x / phi^3
        phi = np.asarray(self.traj.phi(t))[..., None]
        return dt, _dot(v, gx), -_dot(x / phi**3, gv)

    # -- field identity -----------------------------------------------------

    def umd_check(self, t, r, phi_scale=1.0):
        """``|d_r U_eps(t, r) - (R/r)^2 U'(R)|`` with ``R = r / (phi_scale * phi)``.

        ``phi_scale != 1`` deliberately mismatches the scale factor and is
        used as a sensitivity probe.
        """
        r = np.asarray(r, dtype=float)
        R = r / (phi_scale * self.traj.phi(t))
        return np.abs(self.force(t, r) - (R / r) ** 2 * potential_dU(R))
