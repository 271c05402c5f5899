import json
import subprocess
import sys

import pytest

from flatline.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def report(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    assert code == 0
    doc = json.loads(out)
    assert doc["tool"] == "flatline" and "version" in doc and "config" in doc
    return doc["result"]


def test_selftest(capsys):
    res = report(capsys, "selftest")
    assert res["passed"]


def test_validate(capsys):
    res = report(capsys, "validate", "--surface", "slit:1/2")
    assert res["genus"] == 2


def test_validate_file(capsys, tmp_path):
    f = tmp_path / "torus.json"
    f.write_text(json.dumps({"polygons": [[[0, 0], [1, 0], [1, 1], [0, 1]]],
                             "gluings": [[[0, 0], [0, 2]], [[0, 1], [0, 3]]]}))
    res = report(capsys, "validate", "--surface", str(f))
    assert res["genus"] == 1


def test_bad_surface_exit_1(capsys, tmp_path):
    f = tmp_path / "bad.json"
    f.write_text(json.dumps({"polygons": [[[0, 0], [2, 0], [2, 1], [0, 1]]],
                             "gluings": [[[0, 0], [0, 1]], [[0, 2], [0, 3]]]}))
    code, _, err = run(capsys, "validate", "--surface", str(f))
    assert code == 1 and "error" in err


def test_slit_analyze_decimal_golden(capsys):
    res = report(capsys, "slit", "analyze", "--lambda", "0.5", "--theta", "1.6180339887",
                 "--J", "30")
    assert res["verdict"] == "UE"


def test_slit_analyze_rational(capsys):
    res = report(capsys, "slit", "analyze", "--lambda", "1/2", "--theta", "2/3")
    assert res["verdict"] == "PERIODIC"


def test_slit_strict_inconclusive(capsys):
    code, _, _ = run(capsys, "slit", "analyze", "--lambda", "sqrt2-1", "--theta", "golden",
                     "--J", "2", "--strict")
    assert code == 2


def test_slit_plant(capsys):
    plant = ",".join(str(2 ** j) for j in range(2, 21))
    res = report(capsys, "slit", "analyze", "--lambda", "sqrt2-1", "--plant", plant)
    assert res["verdict"] == "NONERGODIC_EVIDENCE"


def test_profile_csv(capsys):
    code, out, _ = run(capsys, "profile", "--surface", "slit:1/2", "--theta", "golden",
                       "--t1", "2", "--format", "csv")
    assert code == 0
    assert out.splitlines()[0].startswith("t,")


def test_delaunay(capsys):
    res = report(capsys, "delaunay", "--surface", "slit:1/2:normalized", "--eps", "0.01",
                 "--delta", "0.2")
    assert isinstance(res, dict) and res


def test_network(capsys):
    res = report(capsys, "network", "--surface", "slit:0.45:normalized", "--samples", "500")
    assert res["connected"] and res["coverage"] == 1.0


def test_network_hypothesis_exit_2(capsys):
    code, out, _ = run(capsys, "network", "--surface", "slit:1/2:normalized", "--eps", "0.25",
                       "--delta", "0.6", "--samples", "10")
    assert code == 2
    assert json.loads(out)["result"]["error"] == "HypothesisFailure"


def test_strips(capsys):
    res = report(capsys, "strips", "--surface", "slit:1/2", "--theta", "golden")
    assert res["m"] == 5
    assert res["area_sum"] == pytest.approx(2.0)


def test_strips_gamma_range(capsys):
    code, _, _ = run(capsys, "strips", "--surface", "torus", "--gamma", "99")
    assert code == 1


def test_pz_deterministic(capsys):
    args = ["pz", "--surface", "slit:1/2", "--theta", "golden", "--n", "3", "--samples", "2000",
            "--seed", "7"]
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args)
    assert a == b
    assert json.loads(a)["config"]["seed"] == 7


def test_out_file(capsys, tmp_path):
    f = tmp_path / "r.json"
    assert main(["validate", "--surface", "torus", "--out", str(f)]) == 0
    assert json.loads(f.read_text())["result"]["genus"] == 1


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "flatline", "selftest"], capture_output=True,
                         text=True, check=False)
    assert out.returncode == 0
    assert json.loads(out.stdout)["result"]["passed"]
