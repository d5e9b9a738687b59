"""Kurth steady state: distribution function, potential and phase-space gradients.

All functions are vectorised over leading array axes.  Cartesian phase-space
points are passed as ``x, v`` arrays of shape ``(..., 3)``; spherically
symmetric points as ``(r, p_r, beta)`` with ``beta = |x ^ v|**2``.
Units are the dimensionless model units in which the steady state has unit
mass and its density is supported on the unit ball.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

#: Normalisation of the distribution function, ``3 / (4 pi^3)``.
Q_NORM = 3.0 / (4.0 * np.pi**3)

#: Uniform mass density inside the unit ball, ``3 / (4 pi)``.
RHO_0 = 3.0 / (4.0 * np.pi)


class PhaseVec(NamedTuple):
    x: np.ndarray
    v: np.ndarray


class RadialState(NamedTuple):
    r: np.ndarray
    p_r: np.ndarray
    beta: np.ndarray


class SupportInfo(NamedTuple):
    F: np.ndarray
    inside: np.ndarray


def _as_vec3(a):
    a = np.asarray(a, dtype=float)
    if a.shape[-1:] != (3,):
        raise ValueError(f"expected trailing dimension 3, got shape {a.shape}")
    return a


def _check_radius(r, beta):
    r = np.asarray(r, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be non-negative")
    if np.any((r == 0) & (beta > 0)):
        raise ValueError("r = 0 with beta > 0 is a centrifugal singularity")
    return r, beta


def to_radial(x, v) -> RadialState:
    """Map Cartesian ``(x, v)`` to ``(r, p_r, beta)``.

    ``beta`` is clamped at zero to absorb roundoff in
    ``|x|^2 |v|^2 - (x.v)^2``.
    """
    x = _as_vec3(x)
    v = _as_vec3(v)
    r2 = np.einsum("...i,...i->...", x, x)
    if np.any(r2 == 0):
        raise ValueError("to_radial is undefined at |x| = 0")
    r = np.sqrt(r2)
    xv = np.einsum("...i,...i->...", x, v)
    v2 = np.einsum("...i,...i->...", v, v)
    beta = np.maximum(r2 * v2 - xv * xv, 0.0)
    return RadialState(r, xv / r, beta)


def support_F(r, p_r, beta) -> SupportInfo:
    """Support function ``F = 1 - r^2 - p_r^2 - beta/r^2 + beta``.

    ``inside`` is the strict predicate ``F > 0 and beta < 1``; the boundary
    ``F = 0`` counts as outside.
    """
    r, beta = _check_radius(r, beta)
    p_r = np.asarray(p_r, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        cent = np.where(beta > 0, beta / np.where(r > 0, r * r, 1.0), 0.0)
    F = 1.0 - r * r - p_r * p_r - cent + beta
    return SupportInfo(F, (F > 0) & (beta < 1))


def potential_U(r):
    """Potential of the uniform unit ball of unit mass."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be non-negative")
    with np.errstate(divide="ignore"):
        return np.where(r <= 1.0, 0.5 * r * r - 1.5, -1.0 / np.where(r > 0, r, 1.0))


def potential_dU(r):
    """Radial derivative of :func:`potential_U`: ``r`` inside, ``1/r^2`` outside."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(r <= 1.0, r, 1.0 / np.where(r > 0, r * r, 1.0))


def effective_potential(r, beta):
    r, beta = _check_radius(r, beta)
    with np.errstate(divide="ignore", invalid="ignore"):
        cent = np.where(beta > 0, 0.5 * beta / np.where(r > 0, r * r, 1.0), 0.0)
    return potential_U(r) + cent


def energy(r, p_r, beta):
    """Particle energy ``p_r^2/2 + U(r) + beta/(2 r^2)``."""
    p_r = np.asarray(p_r, dtype=float)
    return 0.5 * p_r * p_r + effective_potential(r, beta)


def eval_Q_tilde(e, beta):
    """Distribution as a function of energy and squared angular momentum.

    Returns ``Q_NORM / sqrt(-2(1+e) + beta)`` where the radicand is positive
    and ``beta < 1``, zero elsewhere.
    """
    e = np.asarray(e, dtype=float)
    beta = np.asarray(beta, dtype=float)
    F = -2.0 * (1.0 + e) + beta
    inside = (F > 0) & (beta < 1)
    out = np.zeros(np.broadcast(e, beta).shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = Q_NORM / np.sqrt(F)
    out[...] = np.where(inside, vals, 0.0)
    return out if out.ndim else float(out)


def _cartesian_F(x, v):
    x2 = np.einsum("...i,...i->...", x, x)
    v2 = np.einsum("...i,...i->...", v, v)
    xv = np.einsum("...i,...i->...", x, v)
    beta = np.maximum(x2 * v2 - xv * xv, 0.0)
    return 1.0 - x2 - v2 + beta, beta, x2, v2, xv


def eval_Q(x, v):
    """Kurth distribution function at Cartesian phase-space points.

    Uses ``1 - |x|^2 - |v|^2 + |x ^ v|^2`` directly, so ``x = 0`` is allowed.
    """
    x = _as_vec3(x)
    v = _as_vec3(v)
    F, beta, *_ = _cartesian_F(x, v)
    inside = (F > 0) & (beta < 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(inside, Q_NORM / np.sqrt(np.where(inside, F, 1.0)), 0.0)
    return out if out.ndim else float(out)


def grad_Q(x, v):
    """Analytic ``(grad_x Q, grad_v Q)`` on the open support.

    Both gradients share the factor ``(4 pi^3 / 3)^2 Q^3 = Q_NORM / F^{3/2}``.
    """
    x = _as_vec3(x)
    v = _as_vec3(v)
    F, beta, x2, v2, xv = _cartesian_F(x, v)
    if np.any(~((F > 0) & (beta < 1))):
        raise ValueError("grad_Q requires points strictly inside the support")
    q = Q_NORM / np.sqrt(F)
    pref = (q**3 / Q_NORM**2)[..., None]
    gx = pref * ((1.0 - v2)[..., None] * x + xv[..., None] * v)
    gv = pref * ((1.0 - x2)[..., None] * v + xv[..., None] * x)
    return gx, gv
