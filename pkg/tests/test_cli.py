import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from kurth.cli import main


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    manifest = json.loads((out / "manifest.json").read_text())
    return code, manifest, out


def test_verify_family(tmp_path):
    code, man, out = run(tmp_path, "verify", "family", "--eps", "0.6", "--tol", "1e-9")
    assert code == 0 and man["status"] == "pass"
    assert man["schema"] == "v1"
    assert all(c["passed"] for c in man["checks"])
    assert all("threshold" in c for c in man["checks"])
    header = (out / "verify_family.csv").read_text().splitlines()[0]
    assert header == "t,r,p_r,beta,vlasov_raw,vlasov_relative"


def test_verify_phi_equilibrium(tmp_path):
    code, man, _ = run(tmp_path, "verify", "phi", "--eps", "0")
    assert code == 0
    names = [c["name"] for c in man["checks"]]
    assert any("2 pi" in n for n in names)


def test_verify_theorem_probe_expected_nonzero(tmp_path):
    code, man, _ = run(tmp_path, "verify", "theorem", "--perturb", "0.01")
    assert code == 0
    probe = [c for c in man["checks"] if c["expected_nonzero"]]
    assert len(probe) == 1 and probe[0]["value"] > 1e-4


@pytest.mark.parametrize("suite", ["core", "moments"])
def test_verify_other_suites(tmp_path, suite):
    code, man, _ = run(tmp_path, "verify", suite)
    assert code == 0 and man["checks"]


def test_failing_check_exit_code(tmp_path):
    # an impossible tolerance makes the suite fail, and the manifest records it
    code, man, _ = run(tmp_path, "verify", "family", "--tol", "1e-300")
    assert code == 1 and man["status"] == "fail"


def test_unknown_suite_is_usage_error(tmp_path, capsys):
    assert main(["verify", "nope", "--out", str(tmp_path / "x")]) == 2


def test_n_zero_is_usage_error(tmp_path):
    assert main(["simulate", "--n", "0", "--out", str(tmp_path / "x")]) == 2


def test_simulate_eps_out_of_range_writes_manifest(tmp_path):
    code, man, _ = run(tmp_path, "simulate", "--eps", "1.5")
    assert code == 2 and man["status"] == "error" and "eps" in man["error"]


def test_convergence_needs_three_levels(tmp_path):
    code, man, _ = run(tmp_path, "convergence", "dt", "--levels", "0.1,0.05")
    assert code == 2 and "3 levels" in man["error"]


def test_convergence_dt(tmp_path):
    code, man, out = run(tmp_path, "convergence", "dt")
    assert code == 0
    assert abs(man["order"] - 2) < 0.15
    rows = list(csv.reader(open(out / "convergence_dt.csv")))
    assert rows[0] == ["dt", "error"] and len(rows) == 5


def test_convergence_quad(tmp_path):
    code, man, _ = run(tmp_path, "convergence", "quad")
    assert code == 0 and man["checks"][0]["value"] < 1e-8


def test_phi_table(tmp_path):
    code, man, out = run(tmp_path, "phi", "--eps", "0.6", "--samples", "101")
    assert code == 0
    data = np.loadtxt(out / "phi.csv", delimiter=",", skiprows=1)
    assert data.shape == (101, 5)
    np.testing.assert_allclose(data[:, 4], -0.32, atol=1e-9)
    assert man["period"] == pytest.approx(2 * np.pi / 0.512)


def test_simulate_small(tmp_path):
    code, man, out = run(tmp_path, "simulate", "--eps", "0.3", "--n", "20000", "--steps", "200")
    assert code == 0
    for f in ("diagnostics.csv", "density.csv", "field.csv", "ensemble_final.csv"):
        assert str(out / f) in man["outputs"]
    assert (out / "field.csv").read_text().startswith("r,rho,M,dU\n")


def test_same_seed_same_bytes(tmp_path):
    for name in ("a", "b"):
        main(["simulate", "--eps", "0.3", "--n", "2000", "--steps", "20", "--seed", "4",
              "--out", str(tmp_path / name)])
    for f in ("diagnostics.csv", "density.csv", "field.csv", "ensemble_final.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_sample_and_csv_precision(tmp_path):
    code, man, out = run(tmp_path, "sample", "--n", "50", "--seed", "1")
    assert code == 0
    from kurth.ensemble import ParticleEnsemble, sample_family

    back = ParticleEnsemble.from_csv(out / "sample.csv")
    ref = sample_family(50, 0.0, seed=1)
    np.testing.assert_array_equal(back.p_r, ref.p_r)


def test_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("KURTH_SEED", "17")
    monkeypatch.setenv("KURTH_N", "40")
    out = tmp_path / "env"
    assert main(["sample", "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 17
    assert len((out / "sample.csv").read_text().splitlines()) == 41


def test_console_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "kurth.cli", "verify", "core", "--out", str(tmp_path / "c")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
