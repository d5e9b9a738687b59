"""Convergence studies: Monte-Carlo density error, leapfrog order, quadrature."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import RHO_0, eval_Q_tilde, potential_dU, potential_U
from .ensemble import (
    ParticleEnsemble,
    PicConfig,
    density_profile,
    evolve_selfconsistent,
    push_particles,
    sample_family,
)
from .moments import density_from_distribution
from .phi import integrate_phi


@dataclass
class ConvergenceTable:
    axis: str
    levels: np.ndarray
    errors: np.ndarray
    order: float

    def rows(self):
        return list(zip(self.levels.tolist(), self.errors.tolist()))


def fit_order(levels, errors):
    """Least-squares slope of ``log(error)`` against ``log(level)``."""
    levels = np.asarray(levels, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(levels) < 3:
        raise ValueError("a convergence fit needs at least 3 levels")
    return float(np.polyfit(np.log(levels), np.log(errors), 1)[0])


def mc_density_error(n, seed, epsilon=0.3, t_frac=0.25, steps_per_period=2000, bins=20):
    """RMS relative density error of an evolved breathing ensemble.

    The family sample is evolved self-consistently for ``t_frac`` of a
    period and binned into ``bins`` equal-volume shells spanning the exact
    support radius ``phi(t)``; the reference is ``RHO_0 / phi(t)^3``.
    """
    traj = integrate_phi(1.0, epsilon)
    T = traj.period
    steps = int(round(t_frac * steps_per_period))
    ens = sample_family(n, epsilon, seed)
    if steps:
        cfg = PicConfig(dt=T / steps_per_period, steps=steps, diag_every=0)
        ens = evolve_selfconsistent(ens, cfg).final
    phi = float(traj.phi(steps * T / steps_per_period))
    rho, _ = density_profile(ens, phi * np.linspace(0.0, 1.0, bins + 1) ** (1.0 / 3.0))
    exact = RHO_0 / phi**3
    return float(np.sqrt(np.mean((rho / exact - 1.0) ** 2)))


def density_convergence(levels=(1000, 10000, 100000), seeds=3, **kw) -> ConvergenceTable:
    errs = [np.mean([mc_density_error(int(n), seed=s, **kw) for s in range(seeds)]) for n in levels]
    return ConvergenceTable("n", np.asarray(levels, float), np.asarray(errs), fit_order(levels, errs))


def harmonic_orbit(r0, p0, beta, t):
    """Exact ``(r, p_r)`` in the interior field ``dU = r`` (isotropic oscillator)."""
    x0 = np.array([r0, 0.0, 0.0])
    v0 = np.array([p0, np.sqrt(beta) / r0, 0.0])
    x = x0 * np.cos(t) + v0 * np.sin(t)
    v = -x0 * np.sin(t) + v0 * np.cos(t)
    r = np.linalg.norm(x)
    return r, float(x @ v) / r


def leapfrog_error(dt, t_end=10.0, r0=0.5, p0=0.3, beta=0.05):
    """Phase error of kick-drift-kick in the frozen steady field after ``t_end``.

    The default orbit stays inside the unit ball, where the exact solution
    is the isotropic harmonic oscillator.
    """
    steps = int(round(t_end / dt))
    ens = ParticleEnsemble([r0], [p0], [beta], [1.0])
    out = push_particles(ens, potential_dU, t_end / steps, steps)
    r, p = harmonic_orbit(r0, p0, beta, t_end)
    return float(np.hypot(out.r[0] - r, out.p_r[0] - p))


def dt_convergence(levels=(0.1, 0.05, 0.025, 0.0125), **kw) -> ConvergenceTable:
    errs = [leapfrog_error(dt, **kw) for dt in levels]
    return ConvergenceTable("dt", np.asarray(levels, float), np.asarray(errs), fit_order(levels, errs))


def quad_error(n_nodes, radii=(0.1, 0.3, 0.5, 0.7, 0.9)):
    rho = density_from_distribution(eval_Q_tilde, potential_U, np.asarray(radii), n_nodes=n_nodes)
    return float(np.max(np.abs(rho - RHO_0)))


def quad_convergence(levels=(2, 4, 8, 16), floor=1e-15) -> ConvergenceTable:
    # errors at roundoff are clamped so the log fit stays finite
    errs = [max(quad_error(int(n)), floor) for n in levels]
    return ConvergenceTable("quad", np.asarray(levels, float), np.asarray(errs), fit_order(levels, errs))
