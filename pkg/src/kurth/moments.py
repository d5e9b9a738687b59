"""Velocity moments and radial fields of spherically symmetric distributions.

In spherical symmetry ``dv = (pi / r^2) dp_r dbeta``, so

    rho(r) = (pi / r^2) int dp_r int dbeta  Qt(p_r^2/2 + U(r) + beta/(2 r^2), beta)

and the radial field follows from the enclosed mass,
``d_r U(r) = M(r) / r^2`` with ``M(r) = 4 pi int_0^r s^2 rho(s) ds``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import Q_NORM, eval_Q_tilde, potential_dU, potential_U

DEFAULT_NODES = 64


@lru_cache(maxsize=None)
def gauss_legendre(n):
    return np.polynomial.legendre.leggauss(n)


def _gl_interval(a, b, n):
    """Nodes and weights of an ``n``-point Gauss-Legendre rule on ``[a, b]``."""
    x, w = gauss_legendre(n)
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def _kurth_beta_integral(A, c):
    """``int dbeta (A - c beta)^{-1/2}`` over ``{0 <= beta < 1, A - c beta > 0}``.

    This is the inner integral of the Kurth distribution at fixed
    ``(r, p_r)``: its radicand ``-2(1+e) + beta`` is linear in ``beta``.
    """
    A, c = np.broadcast_arrays(np.asarray(A, float), np.asarray(c, float))
    out = np.zeros(A.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        cut = np.where(c != 0, A / np.where(c != 0, c, 1.0), 0.0)
        lo = np.where(c < 0, np.clip(cut, 0.0, 1.0), 0.0)
        hi = np.where(c > 0, np.clip(cut, 0.0, 1.0), 1.0)
        # the radicand vanishes exactly at an interior cut; sqrt of its roundoff would not
        top = np.where((c < 0) & (lo == cut), 0.0, np.sqrt(np.maximum(A - c * lo, 0.0)))
        bot = np.where((c > 0) & (hi == cut), 0.0, np.sqrt(np.maximum(A - c * hi, 0.0)))
        val = np.where(c != 0, 2.0 * (top - bot) / np.where(c != 0, c, 1.0),
                       (hi - lo) / np.sqrt(np.where(A > 0, A, 1.0)))
    ok = (hi > lo) & np.where(c == 0, A > 0, True)
    out[ok] = val[ok]
    return out


def kurth_density(r, U=potential_U, n_nodes=DEFAULT_NODES):
    """Density of the Kurth distribution in a prescribed potential ``U``.

    The ``beta`` integral is done in closed form; the remaining ``p_r``
    integral is mapped to ``theta`` by ``p_r = p_max sin(theta)`` and done by
    Gauss-Legendre quadrature.  With the self-consistent potential this is
    ``3 / (4 pi)`` inside the unit ball.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r <= 0):
        raise ValueError("density requires r > 0")
    c = 1.0 / r**2 - 1.0
    a0 = -2.0 * (1.0 + U(r))
    pmax2 = a0 + np.maximum(0.0, -c)
    rho = np.zeros_like(r)
    ok = pmax2 > 0
    if np.any(ok):
        pmax = np.sqrt(pmax2[ok])
        th, w = _gl_interval(-0.5 * np.pi, 0.5 * np.pi, n_nodes)
        th = np.broadcast_to(th, (ok.sum(), n_nodes))
        p = pmax[:, None] * np.sin(th)
        jac = pmax[:, None] * np.cos(th)
        inner = _kurth_beta_integral(a0[ok, None] - p * p, c[ok, None])
        rho[ok] = np.pi / r[ok] ** 2 * Q_NORM * np.sum(w * jac * inner, axis=-1)
    return rho


def generic_density(Qt, U, r, e_max=0.0, n_nodes=DEFAULT_NODES):
    """Tensor Gauss-Legendre quadrature for an arbitrary ``Qt(e, beta)``.

    ``Qt`` must vanish for ``e >= e_max``.  The substitution
    ``beta = beta_max (1 - s^2)`` absorbs an inverse-square-root edge at
    ``e = e_max``.  Interior discontinuities of ``Qt`` limit the accuracy.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r <= 0):
        raise ValueError("density requires r > 0")
    rho = np.zeros_like(r)
    th, wt = gauss_legendre(n_nodes)
    th = 0.5 * np.pi * th
    wt = 0.5 * np.pi * wt
    s, ws = _gl_interval(0.0, 1.0, n_nodes)
    for i, ri in enumerate(r):
        Ui = float(U(ri))
        pmax2 = 2.0 * (e_max - Ui)
        if pmax2 <= 0:
            continue
        pmax = np.sqrt(pmax2)
        p = pmax * np.sin(th)
        jp = pmax * np.cos(th)
        bmax = 2.0 * ri * ri * (e_max - Ui - 0.5 * p * p)
        beta = bmax[:, None] * (1.0 - s**2)
        jb = bmax[:, None] * 2.0 * s
        e = 0.5 * p[:, None] ** 2 + Ui + beta / (2.0 * ri * ri)
        vals = Qt(e, beta)
        rho[i] = np.pi / ri**2 * np.sum(wt[:, None] * jp[:, None] * ws * jb * vals)
    return rho


def density_from_distribution(Qt, U, r, n_nodes=DEFAULT_NODES, e_max=0.0):
    """Density ``int Q dv`` at radii ``r`` for ``Q = Qt(e, beta)`` in potential ``U``.

    The Kurth distribution (:func:`kurth.core.eval_Q_tilde`) is routed to the
    closed-form inner integral; any other ``Qt`` goes through
    :func:`generic_density`.
    """
    if Qt is eval_Q_tilde:
        return kurth_density(r, U, n_nodes)
    return generic_density(Qt, U, r, e_max=e_max, n_nodes=n_nodes)


# -- radial fields -------------------------------------------------------------


@dataclass(frozen=True)
class RadialField:
    """Enclosed mass and ``d_r U = M / r^2`` on grid nodes.

    Node ``i`` closes the shell ``[grid[i-1], grid[i]]`` (with ``grid[-1] = 0``).
    Between nodes the density is taken constant within each shell, so the
    enclosed mass grows like ``r^3`` inside a shell.
    """

    grid: np.ndarray
    enclosed_mass: np.ndarray
    dU: np.ndarray

    @property
    def total_mass(self):
        return float(self.enclosed_mass[-1])

    def mass_at(self, r):
        r = np.asarray(r, dtype=float)
        g = self.grid
        M = self.enclosed_mass
        i = shell_index(g, r)
        inside = i < len(g)
        ic = np.minimum(i, len(g) - 1)
        g_lo = np.concatenate([[0.0], g[:-1]])
        m_lo = np.concatenate([[0.0], M[:-1]])
        lo3 = g_lo[ic] ** 3
        frac = np.clip((r**3 - lo3) / (g[ic] ** 3 - lo3), 0.0, 1.0)
        m = m_lo[ic] + (M[ic] - m_lo[ic]) * frac
        return np.where(inside, m, M[-1])

    def dU_at(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(r > 0, self.mass_at(r) / np.where(r > 0, r * r, 1.0), 0.0)

    def table(self):
        """Columns ``(r, rho, M, dU)`` with shell-averaged ``rho``."""
        lo = np.concatenate([[0.0], self.grid[:-1]])
        vol = 4.0 / 3.0 * np.pi * (self.grid**3 - lo**3)
        rho = np.diff(np.concatenate([[0.0], self.enclosed_mass])) / vol
        return np.column_stack([self.grid, rho, self.enclosed_mass, self.dU])


def shell_index(grid, r):
    """Index ``i`` of the shell ``(grid[i-1], grid[i]]`` holding each ``r``.

    Uniform grids starting at ``grid[0] = dr`` use direct arithmetic; others
    fall back to a binary search.  Radii beyond the grid map to ``len(grid)``.
    """
    n = len(grid)
    dr = grid[0]
    if n > 1 and abs(grid[-1] - n * dr) <= 1e-12 * grid[-1] and np.allclose(np.diff(grid), dr, rtol=1e-12, atol=0):
        i = np.clip(np.ceil(r / dr).astype(np.intp) - 1, 0, n)
        # nodes are not exact multiples of dr; fix the one-off cases next to them
        gi = np.append(grid, np.inf)
        i += r > gi[i]
        i -= (i > 0) & (r <= gi[np.maximum(i - 1, 0)])
        return np.minimum(i, n)
    return np.searchsorted(grid, r, side="left")


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise ValueError("grid must be a non-empty 1-d array")
    if grid[0] <= 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing and start at r > 0")
    return grid


def shell_volumes(grid):
    grid = _check_grid(grid)
    lo = np.concatenate([[0.0], grid[:-1]])
    return 4.0 / 3.0 * np.pi * (grid**3 - lo**3)


def radial_field_from_density(rho, grid, breakpoints=(), n_nodes=16) -> RadialField:
    """Build a :class:`RadialField` from a density.

    Parameters
    ----------
    rho : callable or array_like
        Either a vectorised ``rho(r)`` or shell-averaged densities, one per
        grid node (shell ``[grid[i-1], grid[i]]``).  Shell data is integrated
        exactly.
    grid : array_like
        Strictly increasing radii, ``grid[0] > 0``.
    breakpoints : sequence of float
        Radii where a callable ``rho`` is discontinuous; intervals are split
        there so the Gauss-Legendre rule sees smooth pieces.
    """
    grid = _check_grid(grid)
    if callable(rho):
        edges = np.concatenate([[0.0], grid])
        masses = np.empty(len(grid))
        for i in range(len(grid)):
            a, b = edges[i], edges[i + 1]
            cuts = [a] + sorted(x for x in breakpoints if a < x < b) + [b]
            total = 0.0
            for lo, hi in zip(cuts[:-1], cuts[1:]):
                x, w = _gl_interval(lo, hi, n_nodes)
                vals = np.asarray(rho(x), dtype=float)
                if np.any(vals < 0):
                    raise ValueError("negative density")
                total += float(np.sum(w * 4.0 * np.pi * x * x * vals))
            masses[i] = total
    else:
        rho = np.asarray(rho, dtype=float)
        if rho.shape != grid.shape:
            raise ValueError("shell densities must match the grid")
        if np.any(rho < 0):
            raise ValueError("negative density bins")
        masses = rho * shell_volumes(grid)
    M = np.cumsum(masses)
    return RadialField(grid, M, M / grid**2)


def shell_masses(r, weight, grid, threads=1):
    """Mass per shell ``(grid[i-1], grid[i]]``; particles beyond the grid are dropped.

    With ``threads > 1`` the particles are split into contiguous chunks whose
    partial histograms are summed in chunk order.
    """
    grid = np.asarray(grid, dtype=float)
    r = np.asarray(r, dtype=float)
    weight = np.asarray(weight, dtype=float)

    def part(sl):
        idx = shell_index(grid, r[sl])
        return np.bincount(idx, weights=weight[sl], minlength=len(grid) + 1)[: len(grid)]

    if threads <= 1 or len(r) < 2 * threads:
        return part(slice(None))
    from concurrent.futures import ThreadPoolExecutor

    bounds = np.linspace(0, len(r), threads + 1).astype(int)
    slices = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        parts = list(ex.map(part, slices))
    out = np.zeros(len(grid))
    for p in parts:
        out += p
    return out


def radial_field_from_particles(r, weight, grid, threads=1) -> RadialField:
    grid = _check_grid(grid)
    return radial_field_from_density(shell_masses(r, weight, grid, threads) / shell_volumes(grid), grid)


def hat_volumes(nodes):
    """``4 pi int hat_j(r) r^2 dr`` for linear hat functions on ``nodes`` (``nodes[0] = 0``)."""
    nodes = np.asarray(nodes, dtype=float)
    a, b = nodes[:-1], nodes[1:]
    h = b - a
    rising = ((b**4 - a**4) / 4.0 - a * (b**3 - a**3) / 3.0) / h
    falling = (b * (b**3 - a**3) / 3.0 - (b**4 - a**4) / 4.0) / h
    vol = np.zeros(len(nodes))
    vol[:-1] += falling
    vol[1:] += rising
    return 4.0 * np.pi * vol


def deposit_linear(r, weight, nodes):
    """Mass-conserving linear deposition of particle mass onto radial nodes.

    Returns ``(node_mass, node_density)``.  ``nodes`` must start at 0 and be
    increasing; particles beyond the last node are assigned to it.  The node
    density divides by the exact ``r^2``-weighted hat volume, which at the
    centre is the volume ``pi h^3 / 3`` of the innermost half-hat.
    """
    nodes = np.asarray(nodes, dtype=float)
    if nodes[0] != 0 or np.any(np.diff(nodes) <= 0):
        raise ValueError("nodes must start at 0 and increase strictly")
    r = np.asarray(r, dtype=float)
    weight = np.asarray(weight, dtype=float)
    k = np.clip(np.searchsorted(nodes, r, side="right") - 1, 0, len(nodes) - 2)
    frac = np.clip((r - nodes[k]) / (nodes[k + 1] - nodes[k]), 0.0, 1.0)
    mass = np.bincount(k, weights=weight * (1.0 - frac), minlength=len(nodes))
    mass += np.bincount(k + 1, weights=weight * frac, minlength=len(nodes))
    return mass, mass / hat_volumes(nodes)


# -- change of variables -------------------------------------------------------


def family_density(fam, t, r, n_nodes=DEFAULT_NODES):
    """Density of the breathing family by quadrature in the original ``(p_r, beta)``.

    At fixed ``(t, r)`` the radicand is ``A - c beta`` with
    ``A = 1 - R^2 - P^2``, ``c = 1/R^2 - 1``, ``R = r/phi``,
    ``P = phi p_r - phidot r``; the ``p_r`` range is centred on
    ``phidot r / phi``.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r <= 0):
        raise ValueError("density requires r > 0")
    phi, phidot = fam.traj.state(t)
    R = r / phi
    c = 1.0 / R**2 - 1.0
    pmax2 = 1.0 - R**2 + np.maximum(0.0, -c)
    rho = np.zeros_like(r)
    ok = pmax2 > 0
    if np.any(ok):
        th, w = _gl_interval(-0.5 * np.pi, 0.5 * np.pi, n_nodes)
        half = np.sqrt(pmax2[ok]) / phi
        centre = phidot * r[ok] / phi
        p = centre[:, None] + half[:, None] * np.sin(th)
        jac = half[:, None] * np.cos(th)
        P = phi * p - phidot * r[ok, None]
        inner = _kurth_beta_integral(1.0 - R[ok, None] ** 2 - P * P, c[ok, None])
        rho[ok] = np.pi / r[ok] ** 2 * Q_NORM * np.sum(w * jac * inner, axis=-1)
    return rho


def change_of_variables_check(fam, t, r_tilde, n_nodes=DEFAULT_NODES):
    """Difference of two evaluations of ``d_r U_f(t, r_tilde)``.

    The direct route integrates ``4 pi r^2 rho_f`` over ``[0, r_tilde]`` with
    ``rho_f`` from :func:`family_density`.  The transformed route integrates
    the steady distribution over ``[0, R(t, r_tilde)]`` in ``(R, P, beta)``
    after the unit-Jacobian substitution ``(r, p_r) -> (R, P)``.
    """
    r_tilde = float(r_tilde)
    phi = float(fam.traj.phi(t))
    b = min(r_tilde, phi)
    x, w = _gl_interval(0.0, b, n_nodes)
    direct = np.sum(w * 4.0 * np.pi * x**2 * family_density(fam, t, x, n_nodes)) / r_tilde**2
    Rt = min(r_tilde / phi, 1.0)
    X, W = _gl_interval(0.0, Rt, n_nodes)
    transformed = np.sum(W * 4.0 * np.pi * X**2 * kurth_density(X, potential_U, n_nodes)) / r_tilde**2
    return float(direct - transformed)
