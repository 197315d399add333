import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from srcurv import zoo
from srcurv.cli import SCHEMA, dumps, main


def run(args, capsys):
    code = main(args)
    return code, capsys.readouterr().out


def test_lq_single_cell(capsys):
    code, out = run(["lq", "--rows", "1", "--q", "4"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["schema"] == SCHEMA
    assert doc["aggregate"]["conjugate_time"] == pytest.approx(np.pi / 2, abs=1e-9)
    assert doc["aggregate"]["polynomial_check"]["has_root"]


@pytest.mark.parametrize("cmd", [
    ["ricci", "--model", "heisenberg", "--samples", "4"],
    ["classify", "--model", "martinet", "--samples", "5", "--window", "0.3"],
    ["validate", "--model", "se2", "--samples", "3", "--connection", "group"],
    ["bonnet-myers", "--model", "contact3d", "--samples", "6"],
])
def test_deterministic_bytes(cmd, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(cmd + ["--out", str(a)]) == 0
    assert main(cmd + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert doc["command"] == cmd[0] and "aggregate" in doc


def test_ricci_values_and_csv(capsys):
    code, out = run(["ricci", "--model", "heisenberg", "--x", "0,0,0", "--H", "0.6,0.8,2"], capsys)
    rec = json.loads(out)["records"][0]
    assert rec["ricci"]["Ric(1,1)"] == pytest.approx(4.0)
    code, out = run(["ricci", "--model", "heisenberg", "--samples", "3", "--format", "csv"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 3 and "ricci.Ric(1,1)" in rows[0]


def test_bonnet_myers_contact(capsys):
    code, out = run(["bonnet-myers", "--model", "contact3d", "--samples", "10"], capsys)
    assert json.loads(out)["aggregate"]["bound"] == pytest.approx(2 * np.pi, abs=1e-6)


def test_classify_census(capsys):
    code, out = run(["classify", "--model", "quaternionic_heisenberg1", "--samples", "4"], capsys)
    agg = json.loads(out)["aggregate"]
    assert agg["census"] == {"Y(4,3)": 4} and agg["sigma_fraction"] == 1.0


def test_model_file(tmp_path, capsys):
    path = tmp_path / "model.json"
    path.write_text(json.dumps(zoo.heisenberg().to_dict()))
    code, out = run(["validate", "--model", str(path), "--samples", "3"], capsys)
    assert code == 0 and json.loads(out)["aggregate"]["ok"]


def test_degenerate_covector_is_recorded(capsys):
    code, out = run(["ricci", "--model", "heisenberg", "--x", "0,0,0", "--H", "0,0,1"], capsys)
    assert code == 0
    assert json.loads(out)["records"][0]["error"]["type"] == "DegenerateCovectorError"


@pytest.mark.parametrize("cmd", [
    ["ricci", "--model", "nosuch"],
    ["ricci", "--model", "heisenberg", "--x", "0,0,0"],
    ["lq", "--rows", "2", "--q", "1"],
    ["ricci", "--model", "heisenberg", "--x", "99,0,0", "--H", "1,0,0"],
])
def test_errors_exit_2(cmd, capsys):
    code, out = run(cmd, capsys)
    doc = json.loads(out)
    assert code == 2 and doc["error"]["message"]


def test_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["ricci"])
    assert exc.value.code == 2


def test_float_format():
    text = dumps({"a": 0.1, "b": 1.0, "c": np.float64(2.5e-20), "d": np.nan, "e": np.int64(3), "f": True})
    doc = json.loads(text)
    assert "0.10000000000000001" in text and doc["b"] == 1.0 and doc["d"] is None and doc["e"] == 3


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "srcurv.cli", "lq", "--q", "1"], capture_output=True, text=True)
    assert out.returncode == 0 and json.loads(out.stdout)["aggregate"]["found"]
