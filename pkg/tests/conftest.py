import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def interior_xv(rng, n, margin=0.05):
    """Cartesian points with F > margin, beta < 1."""
    out_x, out_v = [], []
    while sum(len(a) for a in out_x) < n:
        x = rng.uniform(-1, 1, (4 * n, 3))
        v = rng.uniform(-1, 1, (4 * n, 3))
        x2, v2, xv = (x * x).sum(1), (v * v).sum(1), (x * v).sum(1)
        beta = x2 * v2 - xv**2
        keep = (1 - x2 - v2 + beta > margin) & (beta < 1)
        out_x.append(x[keep])
        out_v.append(v[keep])
    return np.concatenate(out_x)[:n], np.concatenate(out_v)[:n]


ACCEPTANCE_LINES = []


@pytest.fixture
def accept():
    """Record and print one acceptance line; returns whether it passed."""

    def report(idx, title, ok, detail, elapsed=None, limit=None):
        if limit is not None:
            ok = ok and elapsed < limit
        timing = "" if elapsed is None else f"  [{elapsed:.2f} s" + ("" if limit is None else f" < {limit:g} s") + "]"
        line = f"criterion {idx:>2}: {'PASS' if ok else 'FAIL'}  {title}: {detail}{timing}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
