import csv
import io
import json
import math
import subprocess
import sys

import pytest

from geofair.cli import main
from geofair.experiments import CSV_HEADER

BASE = """\
p_x: [0.25, 0.75]
p_s_given_x: [[0.275, 0.725], [0.32, 0.68]]
p_t_given_x: [[0.25, 0.75], [0.4, 0.6]]
eps: 0.05
rate: 0.75
"""
SWEEP = BASE + """\
sweep:
  eps_grid: [0.0, 0.01, 0.05]
  rate_grid: [0.75]
oracle:
  grid_resolution: 41
"""


@pytest.fixture
def write(tmp_path):
    def _write(text, name="inst.yaml"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return _write


def test_verify_bundled(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert "W_xy signs" in out and "(1, 0)" in out


def test_verify_perturbed_instance(write, capsys):
    path = write(BASE.replace("[0.25, 0.75]", "[0.3, 0.7]", 1))
    assert main(["verify", path]) == 1
    lines = capsys.readouterr().out.splitlines()
    status = {line.split("  ", 1)[1].split(":")[0]: line.split()[0] for line in lines}
    assert status["W_ty"] == "FAIL" and status["|W_xy|"] == "FAIL"
    assert status["unit singular pair of W_ty"] == "PASS"
    assert status["unit singular pair of W_xy"] == "PASS"


def test_design_feasible(write, tmp_path, capsys):
    out = tmp_path / "d.json"
    assert main(["design", write(BASE), "--eps", "0.02", "-o", str(out), "--log-base", "bits"]) == 0
    text = capsys.readouterr().out
    assert "bits" in text and "P(X|Y) cols" in text
    data = json.loads(out.read_text())
    assert data["k_factor"] == 1.0
    assert data["p2_value_nats"] == pytest.approx(0.5 * 0.02 ** 2 * 3.20336 ** 2, rel=1e-5)
    assert len(data["joint_stxy"]) == 2


def test_design_infeasible_exit_4(write, capsys):
    assert main(["design", write(BASE)]) == 4
    out = capsys.readouterr().out
    assert "INFEASIBLE" in out and "K              1" in out


def test_parse_error_exit_2(write, capsys):
    assert main(["design", write(BASE.replace("eps: 0.05", "eps: [1"))]) == 2
    assert main(["verify", write("nope: 1\n", "x.yaml")]) == 2
    assert "x.yaml" in capsys.readouterr().err


def test_validation_error_exit_3(write):
    assert main(["design", write(BASE.replace("[0.25, 0.75]", "[0.5, 0.75]", 1))]) == 3
    assert main(["design", write(BASE), "--eps", "-1"]) == 3


def test_singular_channel_exit_5(write):
    assert main(["design", write(BASE.replace("[[0.275, 0.725], [0.32, 0.68]]", "[[0.3, 0.7], [0.3, 0.7]]"))]) == 5


def test_oracle_command(write, tmp_path, capsys):
    out = tmp_path / "o.json"
    args = ["oracle", write(BASE), "--eps", "0.02", "--grid-resolution", "41", "--measure", "mi", "-o", str(out)]
    assert main(args) == 0
    data = json.loads(out.read_text())
    assert data["measure"] == "mi"
    assert data["best_value_bits"] == pytest.approx(data["best_value_nats"] / math.log(2))
    assert "evaluated" in capsys.readouterr().out


def test_sweep_csv_deterministic(write, tmp_path):
    path = write(SWEEP)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    plot = tmp_path / "p.dat"
    assert main(["sweep", path, "-o", str(a), "--plot-data", str(plot)]) == 0
    assert main(["sweep", path, "-o", str(b), "--workers", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.reader(io.StringIO(a.read_text())))
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == 4
    zero = dict(zip(CSV_HEADER, rows[1]))
    assert float(zero["p2_approx_nats"]) == 0.0 and float(zero["oracle_chi2_nats"]) == 0.0
    # eps = 0.05 has no realisable designed channel: recorded as NaN
    assert dict(zip(CSV_HEADER, rows[3]))["exact_mi_of_design_nats"] == "nan"
    assert plot.read_text().startswith("# eps rate")


def test_sweep_to_stdout(write, capsys):
    assert main(["sweep", write(SWEEP), "--no-refine"]) == 0
    assert capsys.readouterr().out.startswith(",".join(CSV_HEADER))


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "geofair", "verify"], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
