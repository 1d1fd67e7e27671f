import csv
import json
from pathlib import Path

import numpy as np
import pytest

from psido import cli, grid
from psido.cli import ConfigError, RunConfig

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def in_root(monkeypatch):
    monkeypatch.chdir(ROOT)


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def write_config(tmp_path, data):
    p = tmp_path / "run.json"
    p.write_text(json.dumps(data))
    return str(p)


def test_verify_shipped_config(in_root, tmp_path, capsys):
    code = cli.main(["verify", "--config", "configs/verify_poissest.json", "--out", str(tmp_path)])
    assert code == 0
    summary = read_rows(tmp_path / "poissest_summary.csv")[0]
    assert summary["passed"] == "1" and float(summary["value"]) <= 0.1
    assert "PASS poissest" in capsys.readouterr().out
    assert len(read_rows(tmp_path / "poissest.csv")) == 2


def test_verify_reports_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli.main(["verify", "symbolcut", "--seed", "5", "--out", str(out)]) == 0
    for name in ("symbolcut.csv", "symbolcut_summary.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_tolerance_violation_exit_code(tmp_path):
    assert cli.main(["verify", "sobint", "--tolerance", "-5", "--out", str(tmp_path)]) == 3
    assert read_rows(tmp_path / "sobint_summary.csv")[0]["passed"] == "0"


@pytest.mark.parametrize("argv", [["verify", "nonsense"], ["verify"], ["norm"],
                                  ["verify", "sobint", "--seed", "-1"]])
def test_validation_exit_code(argv, tmp_path):
    assert cli.main(argv + ["--out", str(tmp_path)]) == 1


def test_missing_config_file(tmp_path):
    assert cli.main(["norm", "--config", str(tmp_path / "missing.json")]) == 1


@pytest.mark.parametrize("data", [
    {"function": "x", "bogus": 1},
    {"function": "x", "N": [48], "L": [1.0]},
    {"function": "x", "N": [64], "L": [-1.0]},
    {"function": "x", "input": "fixtures/zero.psig"},
    {"function": "xi"},
    {"function": "x", "norm": {"alpha": 1, "weight": 2}},
    {"function": "x(", "N": [64], "L": [1.0]},
])
def test_config_rejections(data):
    with pytest.raises((ConfigError, ValueError)):
        RunConfig.from_dict({"command": "norm", "N": [64], "L": [1.0], **data})


def test_quantize_needs_symbol():
    with pytest.raises(ConfigError):
        RunConfig(command="quantize", function="x", N=(64,), L=(1.0,))


def test_norm_of_zero_grid(in_root, tmp_path):
    cfg = write_config(tmp_path, {"input": "fixtures/zero.psig", "norm": {"alpha": 1.5}})
    assert cli.main(["norm", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert float(read_rows(tmp_path / "norm.csv")[0]["norm"]) == 0.0


def test_green_on_manufactured_fixture(in_root, tmp_path):
    assert cli.main(["green", "--config", "configs/green_manufactured.json", "--out", str(tmp_path)]) == 0
    row = read_rows(tmp_path / "green.csv")[0]
    assert float(row["relative_w1_error"]) <= 1e-3
    assert float(row["trace_norm"]) <= 1e-10
    u = grid.load(tmp_path / "green.psig")
    assert u.shape == (64, 256)


def test_dno_writes_grid(tmp_path):
    cfg = write_config(tmp_path, {"function": "cos(3*x)", "N": [64], "L": [3.141592653589793]})
    assert cli.main(["dno", "--config", cfg, "--out", str(tmp_path)]) == 0
    out = grid.load(tmp_path / "dno.psig")
    assert np.allclose(out.values, 3 * np.cos(3 * out.coords(0)), atol=1e-12)


def test_poisson_and_quantize(tmp_path):
    cfg = write_config(tmp_path, {"function": "cos(2*x)", "N": [32, 128], "L": [3.141592653589793, 8.0]})
    assert cli.main(["poisson", "--config", cfg, "--out", str(tmp_path)]) == 0
    row = read_rows(tmp_path / "poisson.csv")[0]
    assert float(row["trace_error"]) < 1e-12 and float(row["harmonicity_residual"]) < 1e-6
    cfg = write_config(tmp_path, {"function": "cos(x)*cos(rho)", "symbol": "1/(1+xi^2+eta^2)",
                                  "N": [16, 16], "L": [3.141592653589793, 3.141592653589793]})
    assert cli.main(["quantize", "--config", cfg, "--out", str(tmp_path)]) == 0
    row = read_rows(tmp_path / "quantize.csv")[0]
    assert float(row["l2_out"]) == pytest.approx(float(row["l2_in"]) / 3, abs=1e-9)


def test_numerical_failure_exit_code(tmp_path):
    # constant data on the face makes the massless Green problem singular
    cfg = write_config(tmp_path, {"function": "exp(rho)", "N": [16, 64], "L": [3.141592653589793, 8.0]})
    assert cli.main(["green", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "psido", "verify", "errint", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "PASS errint" in r.stdout


def test_shipped_configs_are_valid():
    for path in sorted((ROOT / "configs").glob("*.json")):
        data = cli.load_config(path)
        command = {"verify_poissest": "verify"}.get(path.stem, path.stem.split("_")[0])
        RunConfig.from_dict({"command": command, **data})
