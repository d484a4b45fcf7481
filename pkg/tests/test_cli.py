import json
import subprocess
import sys

import pytest

from refold import cli, samples
from refold.manifold import double_cover, manifold_to_json

SQ = [[0, 0], [1, 0], [1, 1], [0, 1]]
TRI = [[0, 0], [2, 0], [0, 1]]  # area 1


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    lines = [json.loads(x) for x in capsys.readouterr().out.splitlines() if x.strip()]
    return code, lines


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


def test_planar_then_verify(tmp_path, capsys):
    sq, tri = write(tmp_path, "sq.json", SQ), write(tmp_path, "tri.json", TRI)
    out, svg = tmp_path / "plan.json", tmp_path / "plan.svg"
    code, recs = run(capsys, "planar", sq, tri, "--out", out, "--svg", svg)
    assert code == 0 and recs[-1]["ok"]
    assert svg.read_text().startswith("<svg")
    code, recs = run(capsys, "verify", out)
    assert code == 0 and recs[-1]["ok"]


def test_planar_area_mismatch_is_an_error(tmp_path, capsys):
    sq = write(tmp_path, "sq.json", SQ)
    big = write(tmp_path, "big.json", [[0, 0], [3, 0], [0, 3]])
    code, recs = run(capsys, "planar", sq, big)
    assert code == 2
    assert recs[-1]["event"] == "error" and recs[-1]["code"] == "AreaMismatch"


def test_empty_plan_is_identity(tmp_path, capsys):
    m = write(tmp_path, "m.json", manifold_to_json(double_cover([tuple(p) for p in SQ])))
    plan = write(tmp_path, "empty.json", {"schema": "refold.plan/1", "steps": []})
    code, recs = run(capsys, "verify", plan, "--manifold", m)
    assert code == 0
    assert any("0 steps, identity" in json.dumps(r) for r in recs)


def test_dissect_outputs(tmp_path, capsys):
    sq, tri = write(tmp_path, "sq.json", SQ), write(tmp_path, "tri.json", TRI)
    js, svg = tmp_path / "d.json", tmp_path / "d.svg"
    code, recs = run(capsys, "dissect", sq, tri, "--json", js, "--svg", svg)
    assert code == 0 and recs[-1]["ok"]
    assert json.loads(js.read_text())["schema"] == "refold.dissection/1"
    code, _ = run(capsys, "render", js, "--out", tmp_path / "again.svg")
    assert code == 0


def test_polycube_and_render_obj(tmp_path, capsys):
    a = write(tmp_path, "a.json", {"cells": [[0, 0, 0], [1, 0, 0], [1, 1, 0]]})
    b = write(tmp_path, "b.json", {"cells": [[0, 0, 0], [1, 0, 0], [2, 0, 0]]})
    out = tmp_path / "pc.json"
    code, recs = run(capsys, "polycube", a, b, "--out", out)
    assert code == 0 and recs[-1]["ok"]
    code, recs = run(capsys, "verify", out)
    assert code == 0 and recs[-1]["ok"]
    obj = tmp_path / "a.obj"
    code, _ = run(capsys, "render", a, "--out", obj)
    assert code == 0 and obj.read_text().count("\nf ") == 14


def test_intermediate_bipyramid_hexagon_then_verify(tmp_path, capsys):
    bip = samples.bipyramid()
    a = write(tmp_path, "bip.json", manifold_to_json(bip))
    h = write(tmp_path, "hex.json", [list(p) for p in samples.flat_hexagon_matching(bip)])
    out = tmp_path / "two.json"
    code, recs = run(capsys, "intermediate", a, h, "--out", out)
    assert code == 0 and recs[-1]["ok"]
    code, recs = run(capsys, "verify", out, "--manifold", a)
    assert code == 0 and recs[-1]["ok"]


def test_verify_detects_wrong_start(tmp_path, capsys):
    sq, tri = write(tmp_path, "sq.json", SQ), write(tmp_path, "tri.json", TRI)
    out = tmp_path / "plan.json"
    run(capsys, "planar", sq, tri, "--out", out)
    other = write(tmp_path, "o.json", manifold_to_json(double_cover([(0, 0), (2, 0), (2, 0.5), (0, 0.5)])))
    code, recs = run(capsys, "verify", out, "--manifold", other)
    assert code == 1 and not recs[-1]["ok"]


@pytest.mark.parametrize("argv,code", [
    (["--schema-version", "2", "render", "x.json"], "InputError"),
    (["render", "does-not-exist.json"], "InputError"),
])
def test_bad_input_errors(capsys, argv, code):
    rc, recs = run(capsys, *argv)
    assert rc == 2 and recs[-1]["code"] == code


def test_bad_tolerance(capsys):
    rc, recs = run(capsys, "--tolerance", "-1", "render", "x.json")
    assert rc == 2 and "tolerance" in recs[-1]["message"]


def test_console_entry_point(tmp_path):
    sq = write(tmp_path, "sq.json", SQ)
    r = subprocess.run([sys.executable, "-m", "refold.cli", "render", str(sq), "--out", str(tmp_path / "s.svg")],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stdout + r.stderr
    rec = json.loads(r.stdout.splitlines()[-1])
    assert rec["event"] == "render" and rec["format"] == "svg" and rec["bytes"] > 0
