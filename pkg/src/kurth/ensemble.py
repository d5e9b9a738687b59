"""Particle sampling of the Kurth state and self-consistent radial evolution.

Particles carry ``(r, p_r, beta, weight)``.  ``beta`` is the squared angular
momentum and is never recomputed, so it is conserved exactly.  The field is
the shell-theorem force ``M(r) / r^2`` computed from a radial mass histogram.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import qmc

from .moments import RadialField, deposit_linear, radial_field_from_particles

logger = logging.getLogger(__name__)


class PicCollapseError(RuntimeError):
    pass


@dataclass
class ParticleEnsemble:
    r: np.ndarray
    p_r: np.ndarray
    beta: np.ndarray
    weight: np.ndarray
    total_mass: float = 1.0
    seed: int | None = None
    source: str = ""

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.p_r = np.asarray(self.p_r, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        self.weight = np.asarray(self.weight, dtype=float)
        n = len(self.r)
        if not (len(self.p_r) == len(self.beta) == len(self.weight) == n):
            raise ValueError("particle arrays must have equal length")
        if np.any(self.r <= 0):
            raise ValueError("all radii must be positive")
        if np.any(self.beta < 0):
            raise ValueError("beta must be non-negative")
        if np.any(self.weight <= 0):
            raise ValueError("weights must be positive")

    def __len__(self):
        return len(self.r)

    def copy(self, **changes):
        arrays = {k: getattr(self, k).copy() for k in ("r", "p_r", "beta", "weight")}
        arrays.update(changes)
        return replace(self, **arrays)

    def kinetic_energy(self):
        return float(0.5 * np.sum(self.weight * (self.p_r**2 + self.beta / self.r**2)))

    def potential_energy(self):
        """Self-gravity ``-sum_i w_i M_i / r_i`` with ``M_i`` the mass strictly inside
        plus half the particle's own weight (spherical shells)."""
        order = np.argsort(self.r, kind="stable")
        w = self.weight[order]
        M = np.cumsum(w) - 0.5 * w
        return float(-np.sum(w * M / self.r[order]))

    def to_cartesian(self, rng=None):
        """Random isotropic embedding ``x = r n``, ``v = p_r n + (sqrt(beta)/r) t``."""
        rng = np.random.default_rng(rng)
        n = len(self)
        nhat = rng.normal(size=(n, 3))
        nhat /= np.linalg.norm(nhat, axis=1, keepdims=True)
        # unit vector orthogonal to nhat, uniform on that circle
        a = rng.normal(size=(n, 3))
        a -= np.einsum("ij,ij->i", a, nhat)[:, None] * nhat
        a /= np.linalg.norm(a, axis=1, keepdims=True)
        x = self.r[:, None] * nhat
        v = self.p_r[:, None] * nhat + (np.sqrt(self.beta) / self.r)[:, None] * a
        return x, v

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "p_r", "beta", "weight"])
            for row in zip(self.r, self.p_r, self.beta, self.weight):
                w.writerow([f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path, **meta):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], data[:, 2], data[:, 3], **meta)


def sample_semicircle(n, rng):
    """Rejection sampling of the density ``(2/pi) sqrt(1 - w^2)`` on ``[-1, 1]``."""
    out = np.empty(0)
    while len(out) < n:
        m = int(1.35 * (n - len(out))) + 16
        w = rng.uniform(-1.0, 1.0, m)
        y = rng.uniform(0.0, 1.0, m)
        out = np.concatenate([out, w[y * y < 1.0 - w * w]])
    return out[:n]


def semicircle_ppf(u, iters=60):
    """Inverse CDF of the semicircle law on ``[-1, 1]``.

    With ``w = sin(a/2)`` the CDF is ``1/2 + (a + sin a) / (2 pi)``, so
    ``a + sin a = pi (2u - 1)`` is solved by bisection on ``[-pi, pi]``.
    """
    y = np.pi * (2.0 * np.asarray(u, dtype=float) - 1.0)
    lo = np.full_like(y, -np.pi)
    hi = np.full_like(y, np.pi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = mid + np.sin(mid) < y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return np.sin(0.25 * (lo + hi))


def _uniforms(n, rng, method, seed):
    if method == "random":
        return None
    if method == "sobol":
        with warnings.catch_warnings():
            # n need not be a power of two for our use
            warnings.simplefilter("ignore", UserWarning)
            return qmc.Sobol(d=3, scramble=True, seed=seed).random(n)
    raise ValueError(f"unknown sampling method {method!r}")


def sample_kurth(n, seed=None, method="random") -> ParticleEnsemble:
    """Exact equal-weight sample of the Kurth steady state.

    Radius: uniform in the unit ball.  Radial momentum given ``r``:
    ``p_r = sqrt(1 - r^2) w`` with ``w`` semicircle distributed.  Angular
    momentum given ``(r, p_r)``: inverse of the conditional CDF
    ``1 - sqrt(1 - beta / beta_max)`` with ``beta_max = A / c``,
    ``A = 1 - r^2 - p_r^2``, ``c = (1 - r^2) / r^2``.

    ``method="sobol"`` drives the three inverse transforms with a scrambled
    Sobol sequence (a quiet start); ``"random"`` uses independent draws and
    rejection for ``w``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    U = _uniforms(n, rng, method, seed)
    u_r = rng.uniform(0.0, 1.0, n) if U is None else U[:, 0]
    r = u_r ** (1.0 / 3.0)
    # a zero draw would put a particle exactly at the centre
    r = np.where(r > 0, r, np.finfo(float).tiny ** (1 / 3))
    w = sample_semicircle(n, rng) if U is None else semicircle_ppf(U[:, 1])
    p_r = np.sqrt(1.0 - r * r) * w
    u = rng.uniform(0.0, 1.0, n) if U is None else U[:, 2]
    A = 1.0 - r * r - p_r * p_r
    c = (1.0 - r * r) / (r * r)
    beta = A * (1.0 - (1.0 - u) ** 2) / c
    src = "kurth" if method == "random" else f"kurth({method})"
    return ParticleEnsemble(r, p_r, beta, np.full(n, 1.0 / n), 1.0, seed, src)


def sample_family(n, epsilon, seed=None, method="random") -> ParticleEnsemble:
    """Sample of the breathing family at ``t = 0``: ``p_r -> p_r + epsilon r``."""
    ens = sample_kurth(n, seed, method)
    ens.p_r = ens.p_r + epsilon * ens.r
    ens.source = f"family(eps={epsilon:g})"
    return ens


# -- time stepping -------------------------------------------------------------


def drift(r, p_r, beta, tau):
    """Exact flow of ``p_r^2/2 + beta/(2 r^2)`` over time ``tau``.

    This is straight-line motion in Cartesian space; a particle with
    ``beta = 0`` passing the centre comes out with ``(r, p_r) -> (-r, -p_r)``
    reflected back to ``r > 0``.
    """
    L2 = beta / (r * r)
    v2 = p_r * p_r + L2
    s = r + p_r * tau
    r_new = np.sqrt(s * s + L2 * tau * tau)
    r_new = np.maximum(r_new, np.finfo(float).tiny)
    return r_new, (r * p_r + v2 * tau) / r_new


def _field_fn(field):
    return field.dU_at if isinstance(field, RadialField) else field


def push_particles(ens: ParticleEnsemble, field, dt, steps=1) -> ParticleEnsemble:
    """Kick-drift-kick steps in a frozen field.

    ``field`` is a :class:`RadialField` or a vectorised ``dU(r)``.  The
    kicks apply ``-dU(r)``; the centrifugal ``beta / r^3`` part of the
    acceleration is integrated exactly inside the drift.
    """
    dU = _field_fn(field)
    r, p, beta = ens.r.copy(), ens.p_r.copy(), ens.beta
    h = 0.5 * dt
    for _ in range(steps):
        p -= h * dU(r)
        r, p = drift(r, p, beta, dt)
        p -= h * dU(r)
    return ens.copy(r=r, p_r=p, beta=beta.copy())


@dataclass
class PicConfig:
    dt: float
    steps: int
    r_max: float = 2.0
    n_cells: int = 400
    deposition: str = "shell"
    snapshot_every: int = 0
    diag_every: int = 10
    quantile: float = 0.95
    profile_bins: int = 20
    threads: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.deposition != "shell":
            raise ValueError(f"unsupported deposition scheme {self.deposition!r}")
        if self.n_cells < 1 or self.r_max <= 0:
            raise ValueError("grid needs r_max > 0 and at least one cell")

    def grid(self):
        return np.linspace(self.r_max / self.n_cells, self.r_max, self.n_cells)


@dataclass
class PicRun:
    config: PicConfig
    times: np.ndarray
    radius_quantile: np.ndarray
    kinetic: np.ndarray
    potential: np.ndarray
    snapshots: list = field(default_factory=list)
    final: ParticleEnsemble | None = None
    final_field: RadialField | None = None

    @property
    def total_energy(self):
        return self.kinetic + self.potential


def density_profile(ens: ParticleEnsemble, edges):
    """Shell-averaged density and its binomial standard error on ``edges``."""
    edges = np.asarray(edges, dtype=float)
    mass, _ = np.histogram(ens.r, bins=edges, weights=ens.weight)
    vol = 4.0 / 3.0 * np.pi * np.diff(edges**3)
    n = len(ens)
    frac = mass / ens.total_mass
    err = ens.total_mass * np.sqrt(np.maximum(frac * (1 - frac), 0.0) / n) / vol
    return mass / vol, err


def _ensure_grid(grid, r_top):
    if r_top < grid[-1]:
        return grid
    dr = grid[1] - grid[0] if len(grid) > 1 else grid[0]
    extra = int(np.ceil((1.25 * r_top - grid[-1]) / dr))
    logger.debug("extending radial grid by %d cells to cover r=%g", extra, r_top)
    return np.concatenate([grid, grid[-1] + dr * np.arange(1, extra + 1)])


def evolve_selfconsistent(ens: ParticleEnsemble, cfg: PicConfig) -> PicRun:
    """Self-consistent kick-drift-kick evolution.

    Each step deposits particle mass into radial shells, builds the enclosed
    mass field, and pushes.  The field from the post-drift positions closes
    the current step and opens the next one, so there is one field solve per
    step.
    """
    grid = _ensure_grid(cfg.grid(), ens.r.max())
    r, p, beta, w = ens.r.copy(), ens.p_r.copy(), ens.beta.copy(), ens.weight
    h = 0.5 * cfg.dt

    def solve(r, grid):
        grid = _ensure_grid(grid, r.max())
        fld = radial_field_from_particles(r, w, grid, cfg.threads)
        if fld.enclosed_mass[0] >= 0.999999 * fld.total_mass and len(grid) > 1:
            raise PicCollapseError("all mass collapsed into the innermost cell")
        return fld, grid

    fld, grid = solve(r, grid)
    times, rq, kin, pot = [], [], [], []
    snaps = []

    def due(every, step):
        return bool(every) and (step % every == 0 or step == cfg.steps)

    def record(step, r, p):
        diag, snap = due(cfg.diag_every, step), due(cfg.snapshot_every, step)
        if not (diag or snap):
            return
        cur = ens.copy(r=r.copy(), p_r=p.copy(), beta=beta)
        t = step * cfg.dt
        if diag:
            times.append(t)
            rq.append(np.quantile(r, cfg.quantile))
            kin.append(cur.kinetic_energy())
            pot.append(cur.potential_energy())
        if snap:
            snaps.append((t, cur, fld))

    record(0, r, p)
    acc = fld.dU_at(r)
    for step in range(1, cfg.steps + 1):
        p -= h * acc
        r, p = drift(r, p, beta, cfg.dt)
        fld, grid = solve(r, grid)
        acc = fld.dU_at(r)
        p -= h * acc
        record(step, r, p)

    return PicRun(
        config=cfg,
        times=np.array(times),
        radius_quantile=np.array(rq),
        kinetic=np.array(kin),
        potential=np.array(pot),
        snapshots=snaps,
        final=ens.copy(r=r, p_r=p, beta=beta),
        final_field=fld,
    )


def linear_density(ens: ParticleEnsemble, nodes):
    """Node densities from :func:`kurth.moments.deposit_linear`."""
    return deposit_linear(ens.r, ens.weight, nodes)[1]
