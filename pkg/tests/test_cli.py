import subprocess
import sys

import numpy as np
import pytest

from nhqubits import cli, linalg, model, recipes
from nhqubits.model import SystemSpec
from nhqubits.trajectory import EnsembleError

BASE = """\
[system]
n_qubits = 2
J = 0.1
Gamma = 1.1, 0.5
gamma = 0.3, 0.3

[run]
dt = 2e-3
t_max = 2.0
n_traj = 8
sample_stride = 100

[recipe]
name = populations
"""

SPECTRUM = """\
[system]
n_qubits = 2
J = 0.1
Gamma = 0.0, 0.5
gamma = 0, 0

[recipe]
name = spectrum

[spectrum]
start = 0.0
stop = 1.2
step = 0.01
"""

SWEEP = BASE + """
[sweep]
parameter = Gamma1
values = 0.5, 1.1
"""

NOISELESS = """\
[system]
n_qubits = 2
J = 0.1
Gamma = 1.1, 0.5
gamma = 0, 0

[run]
dt = 1e-4
t_max = 1.0
n_traj = 1
sample_stride = 2500

[recipe]
name = populations
"""

PHOTONIC = """\
[system]
n_qubits = 2
J = 0.1
Gamma = 1.1, 0.5
gamma = 0.01, 0.01

[recipe]
name = compile-photonic

[photonic]
tau = 2
n_steps = 3
"""


def _write(tmp_path, text, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_validate_echoes_every_resolved_parameter(tmp_path, capsys):
    assert cli.main(["validate", _write(tmp_path, BASE)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[-1] == "ok"
    assert "recipe = populations" in out
    assert "system.Gamma = 1.1, 0.5" in out
    assert "run.master_seed = 0" in out
    assert "run.scheme = sse" in out
    assert "run.dt = 0.002" in out
    assert "output.prefix = out" in out


def test_validate_echoes_photonic_parameters(tmp_path, capsys):
    assert cli.main(["validate", _write(tmp_path, PHOTONIC)]) == 0
    out = capsys.readouterr().out
    assert "photonic.tau = 2.0" in out
    assert "photonic.n_steps = 3" in out
    assert "photonic.v_as_loss = False" in out


@pytest.mark.parametrize("mangle,needle", [
    (lambda s: s.replace("Gamma = 1.1, 0.5\n", ""), "Gamma"),
    (lambda s: s.replace("Gamma = 1.1, 0.5", "Gamma = -1.1, 0.5"), "Gamma"),
    (lambda s: s + "\n[plotting]\nstyle = dark\n", "unknown section [plotting]"),
    (lambda s: s.replace("dt = 2e-3", "dt = 2e-3\nturbo = yes"), "unknown key(s) in [run]: turbo"),
    (lambda s: s.replace("name = populations", "name = fig1"), "name must be one of"),
    (lambda s: s.replace("dt = 2e-3", "dt = fast"), "expected a number"),
])
def test_invalid_configs_exit_with_code_2(tmp_path, capsys, mangle, needle):
    rc = cli.main(["validate", _write(tmp_path, mangle(BASE))])
    err = capsys.readouterr().err
    assert rc == 2
    assert err.startswith("config error:")
    assert needle in err


def test_missing_config_file(tmp_path, capsys):
    assert cli.main(["validate", str(tmp_path / "nope.ini")]) == 2
    assert "cannot read" in capsys.readouterr().err


def test_recipe_requiring_two_qubits_rejects_a_star(tmp_path, capsys):
    text = """\
[system]
n_qubits = 3
J = 0.1
Gamma = 1, 0.5, 0.5
gamma = 0, 0, 0

[recipe]
name = concurrence
"""
    assert cli.main(["validate", _write(tmp_path, text)]) == 2
    assert "requires n_qubits = 2" in capsys.readouterr().err


def test_spectrum_run_writes_the_eigenvalue_grid(tmp_path, capsys):
    cfg = _write(tmp_path, SPECTRUM)
    rc = cli.main(["run", cfg, "--out", str(tmp_path / "spec")])
    assert rc == 0
    assert "outputs=" in capsys.readouterr().out
    data = np.genfromtxt(tmp_path / "spec-spectrum.csv", delimiter=",", names=True)
    assert data.shape == (121,)
    assert data.dtype.names == ("gamma1", "re_lambda_plus", "im_lambda_plus",
                                "re_lambda_minus", "im_lambda_minus")
    # eigenvalues coalesce at both branch points of the scanned interval
    for g_star in (0.3, 0.7):
        row = data[np.argmin(np.abs(data["gamma1"] - g_star))]
        gap = np.hypot(row["re_lambda_plus"] - row["re_lambda_minus"],
                       row["im_lambda_plus"] - row["im_lambda_minus"])
        assert gap < 1e-6


def test_runs_are_reproducible_across_worker_counts(tmp_path, capsys):
    cfg = _write(tmp_path, BASE)
    blobs = []
    for tag, extra in [("a", []), ("b", ["--workers", "3"]), ("c", ["--workers", "1"])]:
        assert cli.main(["run", cfg, "--out", str(tmp_path / tag)] + extra) == 0
        blobs.append((tmp_path / f"{tag}-populations.csv").read_bytes())
    assert blobs[0] == blobs[1] == blobs[2]
    assert cli.main(["run", cfg, "--out", str(tmp_path / "d"), "--seed", "123"]) == 0
    assert (tmp_path / "d-populations.csv").read_bytes() != blobs[0]
    capsys.readouterr()


def test_sweep_prepends_the_swept_column(tmp_path, capsys):
    cfg = _write(tmp_path, SWEEP)
    assert cli.main(["run", cfg, "--out", str(tmp_path / "sw")]) == 0
    assert "n_traj=16" in capsys.readouterr().out
    path = tmp_path / "sw-populations.csv"
    header = path.read_text(encoding="utf-8").splitlines()[0]
    assert header == ("Gamma1,time,pop_00,pop_01,pop_10,pop_11,"
                      "stderr_00,stderr_01,stderr_10,stderr_11")
    data = np.genfromtxt(path, delimiter=",", names=True)
    assert set(np.unique(data["Gamma1"])) == {0.5, 1.1}


def test_noiseless_single_trajectory_matches_the_propagator(tmp_path, capsys):
    cfg = _write(tmp_path, NOISELESS)
    assert cli.main(["run", cfg, "--out", str(tmp_path / "nl")]) == 0
    capsys.readouterr()
    data = np.genfromtxt(tmp_path / "nl-populations.csv", delimiter=",", names=True)
    assert data.shape == (5,)
    spec = SystemSpec(2, 0.1, (1.1, 0.5), (0.0, 0.0))
    psi = linalg.mat_exp(-1j * model.build_hamiltonian(spec) * 1.0) @ model.initial_state(spec)
    psi /= np.linalg.norm(psi)
    last = data[-1]
    assert last["time"] == pytest.approx(1.0)
    assert last["pop_10"] == pytest.approx(abs(psi[2]) ** 2, abs=1e-3)
    assert last["pop_01"] == pytest.approx(abs(psi[1]) ** 2, abs=1e-3)
    assert last["stderr_10"] == 0.0


def test_unknown_bundled_recipe(tmp_path, capsys):
    assert cli.main(["recipe", "fig99", "--out", str(tmp_path / "x")]) == 2
    assert "unknown recipe" in capsys.readouterr().err


def test_bundled_photonic_recipe_emits_a_program(tmp_path, capsys):
    rc = cli.main(["recipe", "compile-photonic", "--out", str(tmp_path / "ph")])
    out = capsys.readouterr().out
    assert rc == 0
    assert out.startswith("recipe=compile-photonic")
    text = (tmp_path / "ph-program.txt").read_text(encoding="utf-8")
    assert sum(1 for ln in text.splitlines() if ln.startswith("step index=")) == 10


def test_run_compiles_a_photonic_config(tmp_path, capsys):
    cfg = _write(tmp_path, PHOTONIC)
    assert cli.main(["run", cfg, "--out", str(tmp_path / "px")]) == 0
    capsys.readouterr()
    text = (tmp_path / "px-program.txt").read_text(encoding="utf-8")
    assert text.splitlines()[1] == "tau=2 n_steps=3 seed=0 v_mode=identity"
    assert sum(1 for ln in text.splitlines() if ln.startswith("step index=")) == 3


def test_ensemble_failures_map_to_exit_code_3(tmp_path, capsys, monkeypatch):
    def boom(cfg, workers=None):
        raise EnsembleError("12/1000 trajectories failed (> 1%)")

    monkeypatch.setattr(recipes, "execute", boom)
    rc = cli.main(["run", _write(tmp_path, BASE)])
    err = capsys.readouterr().err
    assert rc == 3
    assert err.startswith("ensemble failure:")
    assert "12/1000" in err


def test_console_entry_point_is_wired():
    proc = subprocess.run([sys.executable, "-m", "nhqubits.cli", "--help"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert "usage: simulate" in proc.stdout
    for sub in ("run", "validate", "recipe"):
        assert sub in proc.stdout
