import json
import subprocess
import sys

import numpy as np
import pytest

from martinbench import cli


TOY_CFG = {
    "schema_version": 1,
    "seed": 0,
    "real_spectrum": True,
    "system": {
        "base": {"kind": "bernoulli", "alphabet": 4},
        "group": {"kind": "free", "rank": 2},
        "kappa": ["a", "A", "b", "B"],
    },
    "truncation": {"depth_m": 1, "radius": 4},
    "r_grid": [1.0],
    "scans": {"green": {}},
    "rho": {"radii": [2, 3, 4]},
}


@pytest.fixture()
def cfg_path(tmp_path):
    p = tmp_path / "toy.json"
    p.write_text(json.dumps(TOY_CFG))
    return str(p)


def run_cli(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr().out
    return code, json.loads(out.strip().splitlines()[-1]) if out.strip() else None


def test_cli_run(cfg_path, tmp_path, capsys):
    code, out = run_cli(["run", cfg_path, "--output-dir", str(tmp_path / "o")], capsys)
    assert code == 0
    assert "fitted" in out


def test_cli_green(cfg_path, capsys):
    code, out = run_cli(["green", cfg_path, "--r", "1.0"], capsys)
    assert code == 0
    assert out["value"] == pytest.approx(1.494, abs=2e-3)


def test_cli_rho(cfg_path, capsys):
    code, out = run_cli(["rho", cfg_path], capsys)
    assert code == 0
    assert out["rho_hat"] == pytest.approx(np.sqrt(3) / 2, abs=0.03)


def test_cli_kernel(cfg_path, capsys):
    code, out = run_cli(["kernel", cfg_path, "--h", "a", "--state", "|aaa",
                         "--r", "1.0"], capsys)
    assert code == 0
    assert out["value"] == pytest.approx(3.0, abs=0.1)


def test_cli_boundary_measure(cfg_path, capsys):
    code, out = run_cli(["boundary-measure", cfg_path, "--ray", ":a",
                         "--depths", "2,3", "--r", "1.0"], capsys)
    assert code == 0
    assert out["conformality_residual"] < 0.1


def test_cli_martin_metric(cfg_path, capsys):
    code, out = run_cli(["martin-metric", cfg_path, "--ray", ":a", "--ray2", ":b",
                         "--depths", "2,3", "--r", "1.0"], capsys)
    assert code == 0
    assert out["value"] > 0


def test_cli_holder_fit(capsys):
    pairs = [[np.exp(-n), 2.0 * np.exp(-1.5 * n)] for n in range(1, 8)]
    code, out = run_cli(["holder-fit", "unused-config",
                         "--pairs", json.dumps(pairs),
                         "--lam-gl", "0.4", "--growth", "3.0"], capsys)
    assert code == 0
    assert out["slope"] == pytest.approx(1.5, abs=1e-9)


def test_cli_scans(cfg_path, capsys):
    code, out = run_cli(["ancona-scan", cfg_path, "--r", "1.0"], capsys)
    assert code == 0
    assert out["C_max"]["1.0"] <= 1.0
    code, out = run_cli(["gl-scan", cfg_path, "--r", "1.0"], capsys)
    assert code == 0
    code, out = run_cli(["decay-scan", cfg_path, "--r", "1.0"], capsys)
    assert code == 0


def _potential_spec(r=0.9):
    """Atom->value map of the Green potential of a delta at (0-cyl, id)."""
    import martinbench as mb
    from martinbench import fixtures as fx
    from martinbench import potential as pt

    srw = fx.srw_f2()
    op = mb.build_truncated_operator(srw, 1, 4)
    nu = np.zeros(op.n_atoms)
    nu[op.atom(op.words[0], 0)] = 1.0
    mu = pt.green_adjoint_apply(op, nu, r)
    spec = {}
    model = srw.group
    for a in np.flatnonzero(mu > 0):
        word, gi = op.atom_info(int(a))
        key = "".join(str(s) for s in word) + "|" + model.spell(op.ball.words[gi])
        spec[key] = float(mu[a])
    return spec


def test_cli_potential_subcommands(cfg_path, capsys):
    mu_potential = json.dumps(_potential_spec())
    code, out = run_cli(["riesz", cfg_path, "--measure", mu_potential,
                         "--r", "0.9"], capsys)
    assert code == 0
    assert out["reconstruction_residual"] < 1e-9
    charge = np.asarray(out["charge"])
    assert charge.sum() == pytest.approx(1.0, abs=1e-9)  # recovers the delta

    code, out = run_cli(["reduce", cfg_path, "--measure", mu_potential,
                         "--atoms", ",a", "--r", "0.9"], capsys)
    assert code == 0
    assert out["excessive"]

    code, out = run_cli(["dominate", cfg_path, "--measure", mu_potential,
                         "--charge", json.dumps({"0|": 0.0}),
                         "--atoms", "", "--r", "0.9"], capsys)
    assert code == 0
    assert out["dominates"]


def test_cli_entrypoint_subprocess(cfg_path):
    """The installed console script parses and runs."""
    proc = subprocess.run([sys.executable, "-m", "martinbench.cli", "green",
                           cfg_path, "--r", "0.5"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["value"] > 1.0
