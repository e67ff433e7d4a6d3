import csv
import io
import json
import math

import pytest

from tiltedchsh import bell, sos
from tiltedchsh.cli import main

from pathlib import Path

DATA = Path(__file__).parent / "data"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    assert code == 0
    return json.loads(out)


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_bounds_chsh(capsys):
    res = run_json(capsys, "bounds", "--alpha", "1", "--beta", "0")
    assert res["classical"] == 2
    assert res["quantum"] == pytest.approx(2 * math.sqrt(2), abs=1e-11)


def test_bounds_biased(capsys):
    res = run_json(capsys, "bounds", "--alpha", "1.3333", "--beta", "0")
    assert res["classical"] == pytest.approx(2.6666, abs=1e-4)
    assert res["quantum"] == pytest.approx(3.3333, abs=1e-4)


def test_bounds_rejects_small_alpha(capsys):
    code, _, err = run(capsys, "bounds", "--alpha", "0.5", "--beta", "0")
    assert code == 2 and "error" in err


def test_sos_verify_exact(capsys):
    for beta in ("3/2", "0"):
        res = run_json(capsys, "sos-verify", "--alpha", "4/3", "--beta", beta)
        assert res["passed"] and all(r["exact_zero"] for r in res["reports"])
        assert len(res["reports"]) == 2


def test_sos_verify_float_grid(capsys):
    res = run_json(capsys, "sos-verify", "--mode", "float", "--grid", "10")
    assert res["passed"] and len(res["reports"]) == 20


def test_sos_verify_corrupted_certificate(capsys, tmp_path):
    from fractions import Fraction

    fam = bell.BellFamily(Fraction(4, 3), Fraction(3, 2))
    good = json.loads(sos.build_certificate(fam, "SOS1").to_json())
    path = tmp_path / "good.json"
    path.write_text(json.dumps(good))
    code, out, _ = run(capsys, "sos-verify", "--certificate", str(path))
    assert code == 0 and json.loads(out)["passed"]

    bad = dict(good)
    bad["terms"] = [dict(t) for t in good["terms"]]
    bad["terms"][0]["scale"] = str(Fraction(bad["terms"][0]["scale"]) * Fraction(101, 100))
    path.write_text(json.dumps(bad))
    code, out, _ = run(capsys, "sos-verify", "--certificate", str(path))
    rep = json.loads(out)["reports"][0]
    assert code == 1
    assert not rep["passed"] and rep["residual"]


@pytest.mark.parametrize(
    "case,value",
    [("biased", 10 / 3), ("tilted", 16 / 5), ("generalized", 28 / (5 * math.sqrt(3)))],
)
def test_simulate_cases(capsys, case, value):
    res = run_json(capsys, "simulate", "--case", case)
    assert res["bell_value"] == pytest.approx(value, abs=1e-10)
    assert res["swap_fidelity"] == pytest.approx(1.0, abs=1e-10)
    assert res["z_residual"] < 1e-10 and res["x_residual"] < 1e-10


def test_simulate_random_angles(capsys):
    res = run_json(capsys, "simulate", "--theta", "0.5", "--mu", "0.6")
    assert res["bell_value"] == pytest.approx(res["quantum_bound"], abs=1e-10)
    for table in res["behavior"].values():
        assert sum(map(sum, table)) == pytest.approx(1.0, abs=1e-10)


def test_simulate_product_state_rejected(capsys):
    code, _, _ = run(capsys, "simulate", "--theta", "0", "--mu", "0.5")
    assert code == 2


def test_robustness_golden(capsys, tmp_path):
    out = tmp_path / "rob.csv"
    code, _, _ = run(capsys, "robustness", "--case", "biased", "--grid", "0,0.25,0.5,0.75,1", "--out", str(out))
    assert code == 0
    got, want = rows(out.read_text()), rows((DATA / "robustness_biased_5pt.csv").read_text())
    assert [r["V"] for r in got] == [r["V"] for r in want]
    for g, w in zip(got, want):
        assert float(g["fidelity_bound"]) == pytest.approx(float(w["fidelity_bound"]), abs=1e-6)
    fid = [float(r["fidelity_bound"]) for r in got]
    assert all(b >= a for a, b in zip(fid, fid[1:]))
    meta = json.loads((tmp_path / "rob.csv.meta.json").read_text())
    assert meta["config"]["case"] == "biased" and meta["basis_size"] == len(meta["basis"])


def test_randomness_biased_at_maximal_violation(capsys):
    code, out, _ = run(capsys, "randomness", "--case", "biased", "--grid", "1")
    assert code == 0
    (row,) = rows(out)
    assert float(row["entropy_bits"]) == pytest.approx(1.1519, abs=5e-3)


def test_violation_grid_out_of_range(capsys):
    code, _, _ = run(capsys, "randomness", "--case", "biased", "--grid", "1.5")
    assert code == 2


def test_bound_curve(capsys):
    code, out, _ = run(capsys, "bound-curve", "--tan-mu", "0.75", "--points", "25")
    assert code == 0
    table = rows(out)
    assert table and all(float(r["classical"]) < float(r["quantum"]) for r in table)


def test_bound_curve_empty_grid(capsys):
    code, out, _ = run(capsys, "bound-curve", "--tan-mu", "0.75", "--points", "0")
    assert code == 0 and out.strip() == "beta,alpha,classical,quantum"


def test_app_params(capsys):
    res = run_json(capsys, "app-params", "--theta", "0.3", "--protocol", "QKD")
    assert res["alpha"] == pytest.approx(1 / math.tan(0.6), abs=1e-11)
    assert res["quantum"] > res["classical"]
    code, _, _ = run(capsys, "app-params", "--theta", "0.5", "--protocol", "QKD")
    assert code == 2


def test_config_precedence(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"alpha": "2", "beta": "0.5", "tol": 1e-6}))
    res = run_json(capsys, "bounds", "--config", str(cfg))
    assert res["classical"] == 4.5 and res["config"]["tol"] == 1e-6
    res = run_json(capsys, "bounds", "--config", str(cfg), "--beta", "0")
    assert res["classical"] == 4 and res["config"]["beta"] == "0"


def test_missing_config_file(capsys):
    code, _, _ = run(capsys, "bounds", "--config", "/nonexistent.json")
    assert code == 2


def test_outputs_are_deterministic(capsys, tmp_path):
    texts = []
    for threads in ("1", "3", "1"):
        out = tmp_path / f"r{len(texts)}.csv"
        argv = ["randomness", "--case", "tilted", "--points", "4", "--threads", threads, "--out", str(out)]
        assert main(argv) == 0
        texts.append(out.read_text())
    assert texts[0] == texts[1] == texts[2]
