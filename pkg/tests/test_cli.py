import json
import math

import pytest

from flatmod.cli import main
from flatmod.surface import FlatSurface


def run(capsys, *args):
    with pytest.raises(SystemExit) as info:
        main([str(a) for a in args])
    out, err = capsys.readouterr()
    return info.value.code, out, err


def payload(capsys, *args):
    code, out, err = run(capsys, *args)
    assert code == 0, err
    return json.loads(out)


def fixture_file(capsys, tmp_path, *args):
    path = tmp_path / "surface.json"
    assert run(capsys, "surface", "fixture", *args, "-o", path)[0] == 0
    return path


def test_square_torus_invariants(capsys, tmp_path):
    path = fixture_file(capsys, tmp_path, "square-torus")
    rep = payload(capsys, "surface", "invariants", path)
    assert rep["schema"] == 1
    assert rep["systole"] == pytest.approx(1.0)
    assert rep["diameter"] == pytest.approx(math.sqrt(2) / 2, abs=1e-5)
    assert all(rep["inequalities"].values())


def test_hexagon_pattern2_check(capsys, tmp_path):
    path = fixture_file(capsys, tmp_path, "hexagon", "--pattern", 2)
    rep = payload(capsys, "surface", "check", path)
    assert rep["ok"] and rep["genus"] == 1
    angles = list(rep["cone_angles"].values())
    assert len(angles) == 2 and sum(angles) == pytest.approx(4 * math.pi)


def test_build_normalizes(capsys, tmp_path):
    src = fixture_file(capsys, tmp_path, "lattice-torus", "--tau", "0.3,2")
    out = tmp_path / "norm.json"
    assert run(capsys, "surface", "build", src, "-o", out)[0] == 0
    S = FlatSurface.from_json(json.loads(out.read_text()))
    assert S.area() == pytest.approx(1.0)


def test_malformed_inputs_exit_2(capsys, tmp_path):
    path = fixture_file(capsys, tmp_path, "square-torus")
    data = json.loads(path.read_text())
    data["triangles"] = data["triangles"][:1]
    path.write_text(json.dumps(data))
    code, _, err = run(capsys, "surface", "check", path)
    assert code == 2 and "error" in json.loads(err)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "surface", "check", bad)[0] == 2
    assert run(capsys, "strata", "--angles", "x/y", "--M", 2)[0] == 2
    assert run(capsys, "strata")[0] == 2
    assert run(capsys, "--format", "xml", "strata", "--y1")[0] == 2


def test_strata_examples(capsys):
    rep = payload(capsys, "strata", "--angles", "3/2,1/2", "--M", 5)
    assert len(rep["P"]) == 2
    assert rep["cusps"] == 2 and rep["punctures"] == 4
    rep = payload(capsys, "strata", "--angles", "3/2,1/2", "--M", 2)
    assert rep["punctures"] == 2
    assert run(capsys, "strata", "--angles", "3/4,1/4", "--M", 5)[0] == 3


def test_strata_tables(capsys):
    code, out, _ = run(capsys, "strata", "--table1")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) - 1 == 17
    code, out, _ = run(capsys, "--format", "csv", "strata", "--y1", "--max-M", 12)
    rows = [r.split(",") for r in out.strip().splitlines()]
    assert rows[0] == ["M", "cone_points", "cusps", "punctures"]
    assert rows[-1][0] == "12" and rows[-1][3] == "10"
    code2, out2, _ = run(capsys, "--jobs", 2, "--format", "csv", "strata", "--y1", "--max-M", 12)
    assert out2 == out


def test_s4_apply(capsys, tmp_path):
    spec = tmp_path / "s4.json"
    spec.write_text(json.dumps({"kind": "S4", "split": [[3, 2], [3, 4], [3, 4]], "z0": [0.15, 0.05],
                                "tau": [0, 1]}))
    out = tmp_path / "out.json"
    rep = payload(capsys, "surgery", "apply", spec, "-o", out, "--reverse")
    S = FlatSurface.from_json(json.loads(out.read_text()))
    assert S.genus == 1 and len(S.cone_angles()) == 3
    assert rep["result"]["defect"] == pytest.approx(abs(0.15 + 0.05j) ** 2 / 2)
    assert rep["reverse"]["status"] == "ok" and rep["reverse"]["isometric"]


def test_s1_apply_with_stratum_angle(capsys, tmp_path):
    path = fixture_file(capsys, tmp_path, "triangle-sphere", "--angles", "1/8,1/8")
    S = FlatSurface.from_json(json.loads(path.read_text()))
    target = next(k for k, v in S.cone_angles().items() if abs(v - math.pi / 2) < 1e-9)
    spec = tmp_path / "s1.json"
    spec.write_text(json.dumps({"kind": "S1", "target": target, "split": [[3, 8]], "z0": [0.02, 0.01]}))
    rep = payload(capsys, "surgery", "apply", spec, path, "--reverse")
    assert rep["stratum_cone_angle"] is not None
    assert rep["reverse"]["isometric"]
    spec.write_text(json.dumps({"kind": "S1", "target": target, "split": [[3, 16]], "z0": [0.02, 0]}))
    assert run(capsys, "surgery", "apply", spec, path)[0] == 3


def test_invalid_split_exit_3(capsys, tmp_path):
    spec = tmp_path / "s4.json"
    spec.write_text(json.dumps({"kind": "S4", "split": [[3, 2], [3, 4], [3, 4]], "z0": [1.2, 0], "tau": [0, 1]}))
    assert run(capsys, "surgery", "apply", spec)[0] == 3


def test_chyp_commands(capsys):
    rep = payload(capsys, "chyp", "distance", "--form", "[[1,0],[0,-1]]", "--x", "[1,0]", "--y", "[1,0.1]")
    assert rep["distance"] == pytest.approx(2 * math.atanh(0.1))
    assert run(capsys, "chyp", "distance", "--form", "[[1,0],[0,1]]", "--x", "[1,0]", "--y", "[1,0]")[0] == 3
    rep = payload(capsys, "chyp", "volume", "--K", 1, "--lambda", 1, "--umax", 8)
    assert rep["increments_decrease"]
    assert rep["density_ratio_at_doubled_u"] == pytest.approx(0.25)
    assert payload(capsys, "chyp", "metric-check", "--samples", 20)["ok"]
    assert run(capsys, "chyp", "volume", "--n", 3, "--lambda", 2, "--rtol", 1e-6)[0] == 4


def test_deterministic_and_table_format(capsys):
    a = run(capsys, "--seed", 5, "chyp", "metric-check", "--samples", 5)[1]
    b = run(capsys, "--seed", 5, "chyp", "metric-check", "--samples", 5)[1]
    assert a == b
    code, out, _ = run(capsys, "--format", "table", "strata", "--y1", "--max-M", 3)
    assert code == 0 and out.split()[:4] == ["M", "cone_points", "cusps", "punctures"]
