"""Command line entry point: ``kurth {verify,simulate,convergence,phi,sample}``.

Every run writes ``manifest.json`` into ``--out`` (also when it fails).
Defaults of the common flags can be overridden with ``KURTH_<FLAG>``
environment variables, e.g. ``KURTH_SEED=3`` or ``KURTH_OUT=/tmp/run``.

Exit codes: 0 all checks passed, 1 a check failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .ensemble import PicConfig, density_profile, evolve_selfconsistent, sample_family
from .phi import NoPeriodError, detect_period, integrate_phi, period
from .studies import density_convergence, dt_convergence, quad_convergence
from .verify import SUITES, Check, run_suite

logger = logging.getLogger("kurth")

SCHEMA = "v1"
ENV_PREFIX = "KURTH_"

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

RESIDUAL_COLUMNS = {
    "core": ["t", "r", "p_r", "beta", "F_energy_gap"],
    "phi": ["t", "phi", "phidot", "phiddot", "E"],
    "family": ["t", "r", "p_r", "beta", "vlasov_raw", "vlasov_relative"],
    "moments": ["t", "r", "p_r", "beta", "change_of_variables"],
    "theorem": ["t", "r", "p_r", "beta", "res_beta0", "res_beta1", "res_beta2"],
}

CONVERGENCE_LEVELS = {
    "n": (1000, 10000, 100000),
    "dt": (0.1, 0.05, 0.025, 0.0125),
    "quad": (2, 4, 8, 16),
}


class UsageError(ValueError):
    pass


def env_default(name, cast, fallback=None):
    raw = os.environ.get(ENV_PREFIX + name.upper())
    if raw is None:
        return fallback
    try:
        return cast(raw)
    except ValueError:
        raise UsageError(f"bad value {raw!r} in {ENV_PREFIX}{name.upper()}") from None


def write_csv(path, header, rows):
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([f"{float(v):.17g}" for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return str(path)


class Run:
    """Collects parameters, outputs and checks for the manifest."""

    def __init__(self, command, args):
        self.command = command
        self.out = Path(args.out)
        self.parameters = {k: v for k, v in vars(args).items() if k not in ("func", "out", "verbose")}
        self.seed = args.seed
        self.tolerances = {}
        self.outputs = []
        self.checks = []
        self.status = "error"
        self.error = None
        self.extra = {}

    def csv(self, name, header, rows):
        self.outputs.append(write_csv(self.out / name, header, rows))

    def check(self, c: Check):
        self.checks.append(c)
        self.tolerances[c.name] = c.threshold
        mark = "ok" if c.passed else "FAIL"
        print(f"[{mark:>4}] {c.name}: {c.value:.3e} ({'>' if c.mode == 'above' else '<'} {c.threshold:g})")

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def manifest(self):
        return {
            "schema": SCHEMA,
            "version": __version__,
            "command": self.command,
            "parameters": self.parameters,
            "seed": self.seed,
            "tolerances": self.tolerances,
            "outputs": self.outputs + [str(self.out / "manifest.json")],
            "checks": [c.as_dict() for c in self.checks],
            "status": self.status,
            "error": self.error,
            **self.extra,
        }

    def write_manifest(self):
        self.out.mkdir(parents=True, exist_ok=True)
        with open(self.out / "manifest.json", "w") as fh:
            json.dump(self.manifest(), fh, indent=2, default=_jsonable)


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


# -- commands --------------------------------------------------------------------


def cmd_verify(args, run: Run):
    kw = dict(eps=args.eps, tol=args.tol, ode_tol=args.ode_tol)
    if args.suite == "phi":
        kw["alpha"] = args.alpha
    if args.suite == "theorem":
        kw["perturb"] = args.perturb
    if args.n is not None and args.suite in ("core", "family", "theorem"):
        kw["n"] = args.n
    checks, rows = run_suite(args.suite, seed=args.seed, **kw)
    run.csv(f"verify_{args.suite}.csv", RESIDUAL_COLUMNS[args.suite], rows)
    for c in checks:
        run.check(c)


def cmd_simulate(args, run: Run):
    eps = 0.0 if args.eps is None else args.eps
    if not abs(eps) < 1:
        raise UsageError("simulate needs |eps| < 1")
    n = 100_000 if args.n is None else args.n
    T = period(eps)
    dt = T / 2000 if args.dt is None else args.dt
    if dt <= 0:
        raise UsageError("dt must be positive")
    if args.steps is None:
        # the steady state runs for two dynamical times (2 pi each), a breather for one period
        span = 4 * np.pi if eps == 0 else T
        steps = int(round(span / dt))
    else:
        steps = args.steps
    if steps < 1:
        raise UsageError("steps must be at least 1")
    run.parameters.update(eps=eps, n=n, dt=dt, steps=steps)

    ens = sample_family(n, eps, args.seed, method=args.sampler)
    cfg = PicConfig(dt=dt, steps=steps, threads=args.threads, diag_every=10)
    t0 = time.perf_counter()
    res = evolve_selfconsistent(ens, cfg)
    run.extra["runtime_s"] = time.perf_counter() - t0

    traj = integrate_phi(1.0, eps, t_end=max(res.times[-1], 1e-12) * 1.001 + 1.0)
    phi_t = traj.phi(res.times)
    q_exact = phi_t * cfg.quantile ** (1.0 / 3.0)
    E = res.total_energy
    run.csv("diagnostics.csv", ["t", "radius_quantile", "radius_quantile_exact", "kinetic", "potential", "total"],
            zip(res.times, res.radius_quantile, q_exact, res.kinetic, res.potential, E))

    t_end = steps * dt
    phi_end = float(traj.phi(t_end))
    edges = np.linspace(0.0, phi_end, cfg.profile_bins + 1)
    rho, _ = density_profile(res.final, edges)
    exact = np.full_like(rho, 3.0 / (4.0 * np.pi) / phi_end**3)
    # counting error implied by the exact profile, so empty shells stay finite
    vol = 4.0 / 3.0 * np.pi * np.diff(edges**3)
    frac = exact * vol
    err = np.sqrt(frac * (1 - frac) / n) / vol
    z = (rho - exact) / err
    run.csv("density.csv", ["r_lo", "r_hi", "rho", "stderr", "rho_exact", "z"],
            zip(edges[:-1], edges[1:], rho, err, exact, z))
    run.csv("field.csv", ["r", "rho", "M", "dU"], res.final_field.table())
    res.final.to_csv(run.out / "ensemble_final.csv")
    run.outputs.append(str(run.out / "ensemble_final.csv"))

    run.check(Check("relative energy drift", float(np.max(np.abs(E / E[0] - 1))), 1e-2))
    run.check(Check("max |z| of shell density", float(np.max(np.abs(z))), 4.0))
    if eps != 0:
        run.check(Check("support radius tracking (rel)",
                        float(np.max(np.abs(res.radius_quantile / q_exact - 1))), 0.02))


def _levels(args):
    if args.levels is None:
        return CONVERGENCE_LEVELS[args.axis]
    try:
        levels = [float(s) for s in args.levels.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"cannot parse levels {args.levels!r}") from None
    if args.axis in ("n", "quad"):
        levels = [int(v) for v in levels]
    return levels


def cmd_convergence(args, run: Run):
    levels = _levels(args)
    if len(levels) < 3:
        raise UsageError("a convergence study needs at least 3 levels")
    if any(v <= 0 for v in levels):
        raise UsageError("levels must be positive")
    if args.axis == "n":
        table = density_convergence(levels, seeds=3 if args.seeds is None else args.seeds)
        run.check(Check("|order + 0.5|", abs(table.order + 0.5), 0.15))
    elif args.axis == "dt":
        table = dt_convergence(levels)
        run.check(Check("|order - 2|", abs(table.order - 2.0), 0.15))
    else:
        table = quad_convergence(levels)
        run.check(Check("quadrature error at finest level", float(table.errors[-1]), 1e-8))
    run.extra["order"] = table.order
    print(f"fitted order along {args.axis}: {table.order:.4f}")
    run.csv(f"convergence_{args.axis}.csv", [args.axis, "error"], table.rows())


def cmd_phi(args, run: Run):
    eps = 0.6 if args.eps is None else args.eps
    tol = 1e-10 if args.ode_tol is None else args.ode_tol
    traj = integrate_phi(args.alpha, eps, tol=tol)
    run.csv("phi.csv", ["t", "phi", "phidot", "phiddot", "E"], traj.table(args.samples))
    tt = np.linspace(0, traj.t_end, 2001)
    run.check(Check("energy drift", float(np.max(np.abs(traj.energy(tt) - traj.energy0))), 10 * tol))
    if traj.period is not None and eps != 0:
        try:
            Tn = detect_period(traj)
        except NoPeriodError:
            Tn = float("nan")
        run.extra["period"] = traj.period
        run.extra["period_detected"] = Tn
        print(f"period: closed form {traj.period:.15g}, detected {Tn:.15g}")
        run.check(Check("detected vs closed-form period (rel)", abs(Tn / traj.period - 1),
                        1e-6 if args.tol is None else args.tol))


def cmd_sample(args, run: Run):
    eps = 0.0 if args.eps is None else args.eps
    if not abs(eps) < 1:
        raise UsageError("sample needs |eps| < 1")
    n = 100_000 if args.n is None else args.n
    ens = sample_family(n, eps, args.seed, method=args.sampler)
    path = run.out / "sample.csv"
    ens.to_csv(path)
    run.outputs.append(str(path))
    run.check(Check("total mass - 1", abs(float(np.sum(ens.weight)) - 1.0), 1e-12))


# -- parser --------------------------------------------------------------------------


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _common(p):
    g = p.add_argument_group("common options")
    g.add_argument("--eps", type=float, default=env_default("eps", float))
    g.add_argument("--alpha", type=float, default=env_default("alpha", float, 1.0))
    g.add_argument("--n", type=_positive_int, default=env_default("n", int))
    g.add_argument("--dt", type=float, default=env_default("dt", float))
    g.add_argument("--steps", type=int, default=env_default("steps", int))
    g.add_argument("--tol", type=float, default=env_default("tol", float))
    g.add_argument("--ode-tol", type=float, default=env_default("ode_tol", float))
    g.add_argument("--seed", type=int, default=env_default("seed", int, 0))
    g.add_argument("--threads", type=_positive_int, default=env_default("threads", int, 1))
    g.add_argument("--out", default=env_default("out", str, "kurth_out"))
    g.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    ap = argparse.ArgumentParser(prog="kurth", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run an identity/residual suite")
    p.add_argument("suite", choices=SUITES)
    p.add_argument("--perturb", type=float, default=0.01, help="size of the bent-R probe (0 disables)")
    _common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="self-consistent particle run from the breathing family")
    p.add_argument("--sampler", choices=("sobol", "random"), default="sobol",
                   help="initial sample; sobol is a quiet start (default)")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("convergence", help="error-vs-level study with fitted order")
    p.add_argument("axis", choices=tuple(CONVERGENCE_LEVELS))
    p.add_argument("--levels", help="comma separated levels, at least 3")
    p.add_argument("--seeds", type=_positive_int, help="seeds averaged per level (axis n)")
    _common(p)
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("phi", help="integrate the scale factor and dump (t, phi, phidot, phiddot, E)")
    p.add_argument("--samples", type=_positive_int, default=1001)
    _common(p)
    p.set_defaults(func=cmd_phi)

    p = sub.add_parser("sample", help="draw an ensemble from the breathing family at t=0")
    p.add_argument("--sampler", choices=("random", "sobol"), default="random")
    _common(p)
    p.set_defaults(func=cmd_sample)
    return ap


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"kurth: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    run = Run(args.command + (f" {args.suite}" if args.command == "verify" else "")
              + (f" {args.axis}" if args.command == "convergence" else ""), args)
    code = EXIT_FAIL
    try:
        run.out.mkdir(parents=True, exist_ok=True)
        args.func(args, run)
        run.status = "pass" if run.passed else "fail"
        code = EXIT_OK if run.passed else EXIT_FAIL
    except UsageError as exc:
        run.error = str(exc)
        print(f"kurth: error: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    except Exception as exc:
        run.error = f"{type(exc).__name__}: {exc}"
        print(f"kurth: {run.error}", file=sys.stderr)
        code = EXIT_FAIL
    finally:
        try:
            run.write_manifest()
        except OSError as exc:
            print(f"kurth: cannot write manifest in {run.out}: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
