import csv
import io
import json
import math

import numpy as np
import pytest
from scipy.special import ai_zeros

from hille_atlas import cli
from hille_atlas.config import SCHEMA_VERSION
from hille_atlas.zeros import ZeroLocationError

AIRY = "[[0,0],[1,0]]"
SHIFTED = "[[0,1],[1,0]]"
AIRY_ZEROS = -ai_zeros(60)[0]


def call(capsys, *argv):
    code = cli.run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_rays_example(capsys):
    code, out, _ = call(capsys, "rays", "--poly", AIRY)
    assert code == 0
    rep = json.loads(out)
    assert rep["theta"] == pytest.approx([0, 2.0944, 4.1888], abs=1e-4)
    assert rep["c"] == [0, 0] and rep["q"] == 1.5
    assert rep["d"] == pytest.approx([2 / 3, 0])
    assert rep["schema_version"] == SCHEMA_VERSION
    assert rep["config"]["lambda_C"] == 10 and rep["command"] == "rays"


def test_normalize_reports_pairs(capsys):
    code, out, _ = call(capsys, "normalize", "--poly", "[[0,0],[8,0],[4,0]]")
    rep = json.loads(out)
    assert code == 0
    assert rep["mu"] == pytest.approx([2 ** -0.5, 0])
    assert np.allclose(rep["Q"], [[-2, 0], [0, 0], [1, 0]], atol=1e-12)


def test_liouville_json_and_csv(capsys):
    code, out, _ = call(capsys, "liouville", "--poly", "[[-2,0],[0,0],[1,0]]", "--sector", "1")
    rep = json.loads(out)
    assert code == 0 and rep["sector"] == 1
    assert rep["max_rel_diff"] < 1e-8 and len(rep["rows"]) == 75
    code, out, _ = call(capsys, "liouville", "--poly", AIRY, "--format", "csv")
    assert code == 0 and out.splitlines()[0].startswith("z_re,z_im")


def test_asymptote_recovers_the_inverse_square_constant(capsys):
    code, out, _ = call(capsys, "asymptote", "--poly", AIRY)
    rep = json.loads(out)
    assert code == 0
    # zeta is measured from the base point, so the last plateau sample sits just below 5/36
    assert rep["beta"] == pytest.approx(5 / 36, rel=1e-4)
    assert rep["converged"]
    for row in rep["rows"]:
        assert row["bound"] <= math.exp(5 / (36 * row["x"])) - 1 + 1e-12


def test_zeros_csv_lies_on_the_shifted_line(capsys):
    code, out, _ = call(capsys, "zeros", "--poly", SHIFTED, "--rmax", "30")
    assert code == 0
    assert "\r" not in out and out.endswith("\n")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == cli.ZERO_HEADER
    assert len(rows) == np.sum(np.hypot(AIRY_ZEROS, 1) <= 30)
    for r in rows:
        assert abs(float(r["im"]) + 1) < 1e-9 and float(r["re"]) > 0
        assert r["winding"] == "1" and r["refined"] == "1"


def test_zeros_json_round_trips(capsys):
    code, out, _ = call(capsys, "zeros", "--poly", AIRY, "--rmax", "12", "--format", "json")
    rep = json.loads(out)
    assert code == 0 and rep["count"] == len(rep["zeros"]) == np.sum(AIRY_ZEROS <= 12)
    assert rep["solution"]["kind"] == "decaying" and rep["solution"]["decay_sector"] == 2
    assert all(len(z["z"]) == 2 for z in rep["zeros"])
    assert json.loads(json.dumps(rep)) == rep


def test_svg_is_byte_identical(tmp_path, capsys):
    paths = [tmp_path / "a.svg", tmp_path / "b.svg"]
    for p in paths:
        assert cli.run(["zeros", "--poly", AIRY, "--rmax", "15", "--format", "svg", "--out", str(p)]) == 0
    a, b = (p.read_bytes() for p in paths)
    assert a == b and a.count(b"<circle") == np.sum(AIRY_ZEROS <= 15)


def test_thread_setting_does_not_change_output(capsys, monkeypatch):
    _, one, _ = call(capsys, "zeros", "--poly", AIRY, "--rmax", "15")
    monkeypatch.setenv("HILLE_ATLAS_THREADS", "4")
    _, four, _ = call(capsys, "zeros", "--poly", AIRY, "--rmax", "15")
    assert one == four


def test_classify_csv(capsys):
    code, out, _ = call(capsys, "classify", "--poly", AIRY, "--rmax", "30", "--format", "csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["kind", "index", "tag"]
    assert ["sector", "2", "decay"] in rows and ["ray", "0", "non_shortage"] in rows


def test_classify_random_solution(capsys):
    code, out, _ = call(capsys, "classify", "--poly", "[[1,0],[0,0],[0,0],[1,0]]", "--seed", "3",
                        "--rmax", "20")
    rep = json.loads(out)
    assert code == 0 and rep["solution"] == {"kind": "random", "seed": 3}
    assert set(rep["sector_tags"]) == {"blow_up"}


def test_verify_airy_passes(capsys):
    code, out, _ = call(capsys, "verify", "--poly", AIRY, "--rmax", "40")
    rep = json.loads(out)
    assert code == 0 and rep["passed"]
    first = rep["checks"][0]
    assert first["predicted"][-1] == pytest.approx(2 / (3 * math.pi) * 40 ** 1.5)
    assert abs(first["ratio"] - 1) <= 0.05


def test_verify_exit_code_follows_checks(capsys):
    # a vanishing Lambda width leaves no zeros to count, so the count check must fail
    code, out, _ = call(capsys, "verify", "--poly", AIRY, "--rmax", "20", "--C", "1e-30")
    rep = json.loads(out)
    assert code == 1 and not rep["passed"]
    assert any(not c["passed"] for c in rep["checks"])


def test_out_file(tmp_path, capsys):
    p = tmp_path / "rays.json"
    assert cli.run(["rays", "--poly", AIRY, "--out", str(p)]) == 0
    assert capsys.readouterr().out == ""
    assert json.loads(p.read_text())["n"] == 1


@pytest.mark.parametrize("argv", [
    ["bogus", "--poly", AIRY],
    [],
    ["rays"],
    ["rays", "--poly", "[[3,0]]"],
    ["rays", "--poly", "[[0,0],[1,0]"],
    ["zeros", "--poly", AIRY, "--rmin", "5", "--rmax", "4"],
    ["zeros", "--poly", AIRY, "--rmax", "-1"],
    ["liouville", "--poly", AIRY, "--tol", "0"],
    ["zeros", "--poly", AIRY, "--sector", "7"],
    ["rays", "--poly", AIRY, "--format", "svg"],
    ["rays", "--poly", AIRY, "--format", "csv"],
])
def test_validation_errors_exit_2(argv, capsys):
    assert cli.run(argv) == 2
    assert capsys.readouterr().err


def test_numeric_failure_exits_3(capsys, monkeypatch):
    def boom(args, spec):
        raise ZeroLocationError("subdivision did not resolve")
    monkeypatch.setitem(cli.HANDLERS, "zeros", boom)
    code, _, err = call(capsys, "zeros", "--poly", AIRY)
    assert code == 3 and "subdivision" in err
