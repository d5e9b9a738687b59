"""Residual and identity suites run by ``kurth verify``.

Every suite returns a list of :class:`Check` records and a table of
per-point residuals for the CSV report.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import core
from .family import KurthFamily, TransformFields, ansatz_residual, reconstruct_P, separation_constant
from .moments import change_of_variables_check, density_from_distribution, family_density
from .phi import NoPeriodError, detect_period, integrate_phi, period

SUITES = ("core", "phi", "family", "moments", "theorem")


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    # "below": pass iff value < threshold; "above": the probe must exceed it
    mode: str = "below"

    @property
    def passed(self):
        if self.mode == "above":
            return bool(self.value > self.threshold)
        return bool(self.value < self.threshold)

    def as_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        d["expected_nonzero"] = self.mode == "above"
        return d


def interior_points(fam, n, rng, t_range=None, margin=0.05):
    """Random ``(t, x, v)`` whose image under the family map lies inside the support.

    Points are drawn in the image variables with ``F > margin`` and mapped
    back with ``x = phi X``, ``v = (W + phidot x) / phi``.
    """
    lo, hi = t_range if t_range is not None else (0.0, fam.traj.t_end)
    X = np.empty((0, 3))
    W = np.empty((0, 3))
    while len(X) < n:
        Xc = rng.uniform(-1, 1, (4 * n, 3))
        Wc = rng.uniform(-1, 1, (4 * n, 3))
        x2 = np.sum(Xc**2, 1)
        w2 = np.sum(Wc**2, 1)
        xw = np.sum(Xc * Wc, 1)
        F = 1 - x2 - w2 + x2 * w2 - xw**2
        beta = x2 * w2 - xw**2
        keep = (F > margin) & (beta < 1) & (x2 > 1e-6)
        X = np.vstack([X, Xc[keep]])
        W = np.vstack([W, Wc[keep]])
    X, W = X[:n], W[:n]
    t = rng.uniform(lo, hi, n)
    phi, phidot = fam.traj.state(t)
    x = phi[:, None] * X
    v = (W + phidot[:, None] * x) / phi[:, None]
    return t, x, v


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def suite_core(rng, tol=1e-12, n=1000, **_):
    x = rng.uniform(-1, 1, (n, 3))
    v = rng.uniform(-1, 1, (n, 3))
    s = core.to_radial(x, v)
    beta_cross = np.sum(np.cross(x, v) ** 2, axis=1)
    F = core.support_F(*s).F
    e = core.energy(*s)
    A = random_rotation(rng)
    q = core.eval_Q(x, v)
    qrot = core.eval_Q(x @ A.T, v @ A.T)
    # the energy form uses the inner branch of U, so it is checked for r <= 1
    gap = np.where(s.r <= 1, F - (-2 * (1 + e) + s.beta), 0.0)
    rows = np.column_stack([np.zeros(n), s.r, s.p_r, s.beta, gap])
    checks = [
        Check("beta vs cross product", float(np.max(np.abs(s.beta - beta_cross))), tol),
        Check("F = -2(1+e) + beta (r <= 1)", float(np.max(np.abs(gap))), tol),
        Check("F from Cartesian form", float(np.max(np.abs(
            F - (1 - np.sum(x**2, 1) - np.sum(v**2, 1) + beta_cross)))), tol),
        # Q is unbounded near F = 0, so compare relative to its value
        Check("rotation invariance of Q (rel)", float(np.max(np.abs(q - qrot) / np.maximum(q, core.Q_NORM))), tol),
        Check("U continuity at r=1", float(abs(core.potential_U(1.0) + 1.0)), tol),
        Check("|U(1000)|", float(abs(core.potential_U(1e3))), 1.1e-3),
    ]
    return checks, rows


def suite_phi(rng, eps=0.6, alpha=1.0, tol=1e-6, ode_tol=1e-10, **_):
    rows = []
    checks = []
    try:
        T = period(eps, alpha)
    except NoPeriodError:
        T = None
    traj = integrate_phi(alpha, eps, tol=ode_tol)
    tt = np.linspace(0, traj.t_end, 2001)
    drift = float(np.max(np.abs(traj.energy(tt) - traj.energy0)))
    checks.append(Check("energy drift", drift, 10 * ode_tol))
    rows = traj.table(201)
    if T is None:
        return checks, rows
    if eps == 0:
        # the equilibrium has no turning points; compare the small-amplitude period
        checks.append(Check("period at eps=0 vs 2 pi/sqrt(alpha)",
                            abs(T - 2 * np.pi / np.sqrt(alpha)), tol))
        checks.append(Check("equilibrium phi == 1", float(np.max(np.abs(traj.phi(tt) - 1))), ode_tol))
        return checks, rows
    Tn = detect_period(traj)
    checks.append(Check("detected vs closed-form period (rel)", abs(Tn / T - 1), tol))
    phiT, phidotT = traj.state(T)
    checks.append(Check("orbit closure", float(max(abs(phiT - 1), abs(phidotT - eps))), 100 * ode_tol))
    return checks, rows


def suite_family(rng, eps=0.6, tol=1e-9, n=1000, ode_tol=1e-10, **_):
    fam = KurthFamily.from_epsilon(eps, tol=ode_tol)
    T = fam.period
    t, x, v = interior_points(fam, n, rng, (0.0, T))
    res = fam.vlasov_residual(t, x, v)
    r = rng.uniform(0.05, 2.0, n)
    p = rng.uniform(-1.5, 1.5, n)
    flow = fam.hamiltonian_flow_residual(t, r, p)
    jac = fam.jacobian_det(t, r, p)
    A = random_rotation(rng)
    rot = np.max(np.abs(fam.eval_f(t, x, v) - fam.eval_f(t, x @ A.T, v @ A.T)))
    # closure error of phi scales with the ODE tolerance, so periodicity
    # is checked on a tighter trajectory
    tight = KurthFamily.from_epsilon(eps, tol=min(ode_tol, 1e-12))
    xs, vs = x[:100], v[:100]
    per = np.max(np.abs(tight.eval_f(tight.period, xs, vs) - tight.eval_f(0.0, xs, vs)))
    umd = np.max(fam.umd_check(t, r))
    s = core.to_radial(x, v)
    rows = np.column_stack([t, s.r, s.p_r, s.beta, res.raw, res.relative])
    checks = [
        Check("Vlasov residual (relative)", float(np.max(res.relative)), tol),
        Check("Hamiltonian flow residual", float(np.max(np.abs(flow))), tol),
        Check("Jacobian determinant - 1", float(np.max(np.abs(jac - 1))), 1e-12),
        Check("rotation invariance of f", float(rot), 1e-12),
        Check("periodicity f(T) - f(0)", float(per), 1e-8),
        Check("field identity residual", float(umd), 1e-12),
    ]
    return checks, rows


def suite_moments(rng, eps=0.6, tol=1e-8, ode_tol=1e-10, **_):
    radii = np.array([0.1, 0.3, 0.5, 0.7, 0.9])
    rho = density_from_distribution(core.eval_Q_tilde, core.potential_U, radii)
    fam = KurthFamily.from_epsilon(eps, tol=ode_tol)
    ts = rng.uniform(0, fam.period, 5)
    fam_err = 0.0
    cov = 0.0
    rows = []
    for t in ts:
        phi = float(fam.traj.phi(t))
        rr = radii * phi
        fam_err = max(fam_err, float(np.max(np.abs(family_density(fam, t, rr) - fam.rho(t, rr)))))
        for rt in (0.5 * phi, 0.9 * phi, 1.5 * phi):
            d = change_of_variables_check(fam, t, rt)
            cov = max(cov, abs(d))
            rows.append([t, rt, 0.0, 0.0, d])
    checks = [
        Check("density of Q = 3/(4 pi) inside", float(np.max(np.abs(rho - core.RHO_0))), tol),
        Check("density zero outside", float(density_from_distribution(
            core.eval_Q_tilde, core.potential_U, [1.5])[0]), 1e-300),
        Check("family density vs analytic", fam_err, tol),
        Check("change of variables residual", cov, 1e-6),
    ]
    return checks, np.array(rows)


def suite_theorem(rng, eps=0.6, tol=1e-9, perturb=0.01, n=200, ode_tol=1e-10, **_):
    checks = []
    for alpha in (0.5, 1.0, 2.0):
        traj = integrate_phi(alpha, eps if abs(eps) < np.sqrt(alpha) else 0.5, tol=ode_tol)
        t = np.linspace(0, traj.t_end, 400)
        phi, phidot = traj.state(t)
        keep = np.abs(phi - 1) > 0.05
        phi, phidot = phi[keep], phidot[keep]
        phiddot = traj.phiddot(t[keep])
        a = 1 / phi
        adot = -phidot / phi**2
        addot = -phiddot / phi**2 + 2 * phidot**2 / phi**3
        alpha_hat = separation_constant(a, adot, addot)
        checks.append(Check(f"separation constant alpha={alpha:g}",
                            float(np.max(np.abs(alpha_hat - alpha))), 1e-8))

    fam = KurthFamily.from_epsilon(eps, tol=ode_tol)
    tf = fam.transform_fields()
    t = rng.uniform(0.01, fam.period, n)
    phi = fam.traj.phi(t)
    r = phi * rng.uniform(0.05, 0.95, n)
    p = rng.uniform(-1, 1, n)
    res = ansatz_residual(tf, t, r, p, force=fam.force)
    checks.append(Check("ansatz residual (Kurth fields)", res.max_abs(), tol))
    checks.append(Check("P rebuilt from R", float(np.max(np.abs(reconstruct_P(tf, t, r, p) - tf.P(t, r, p)))), 1e-10))
    checks.append(Check("unit Jacobian", float(np.max(np.abs(tf.jacobian_det(t, r, p) - 1))), 1e-12))
    rows = np.column_stack([t, r, p, np.zeros(n), res.beta0, res.beta1, res.beta2])
    if perturb:
        bent = TransformFields(lambda t, r, p: tf.R(t, r, p) + perturb * r**2, tf.P)
        pres = ansatz_residual(bent, t, r, p, force=fam.force)
        checks.append(Check(f"ansatz residual, R + {perturb:g} r^2 (must be detected)",
                            pres.max_abs(), 1e-4, mode="above"))
    return checks, rows


RUNNERS = {
    "core": suite_core,
    "phi": suite_phi,
    "family": suite_family,
    "moments": suite_moments,
    "theorem": suite_theorem,
}


def run_suite(name, seed=0, **kw):
    if name not in RUNNERS:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    rng = np.random.default_rng(seed)
    kw = {k: v for k, v in kw.items() if v is not None}
    return RUNNERS[name](rng, **kw)

