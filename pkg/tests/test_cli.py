import argparse
import json
import subprocess
import sys
from importlib import resources

import jsonschema
import numpy as np
import pytest

from nhbands.cli import number, parse_loop, parse_region, run
from nhbands.models import LatticeModel, sample_grid_model, write_grid_model


def schema(name):
    return json.loads(resources.files("nhbands").joinpath(f"schemas/{name}.schema.json").read_text())


def invoke(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_classify_example(capsys):
    code, out, _ = invoke(capsys, "classify", "--n", "2", "--sigma1", "(1 2)", "--sigma2", "")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "Z_2"
    doc = json.loads(lines[1])
    jsonschema.validate(doc, schema("classify"))
    assert doc == {"group": "Z_2", "torsion": [2], "free_rank": 0}


@pytest.mark.parametrize("n,s1,s2,expected", [
    (2, "", "", "Z"), (5, "(1 2 3 4 5)", "", "Z_5"), (4, "(1 2)", "(3 4)", "Z"), (3, "(1 2)", "", "Z"),
])
def test_classify_table(capsys, n, s1, s2, expected):
    code, out, _ = invoke(capsys, "classify", "--n", str(n), "--sigma1", s1, "--sigma2", s2)
    assert code == 0 and out.splitlines()[0] == expected


def test_kp_weyl_example(capsys):
    code, out, _ = invoke(capsys, "kp-weyl", "--alpha", "1.5707963")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schema("kp_weyl"))
    pts = sorted(doc["points"], key=lambda p: p[1])
    np.testing.assert_allclose(pts, [[0, -0.7071068, 0], [0, 0.7071068, 0]], atol=1e-7)


def test_kp_weyl_outside_window(capsys):
    code, out, _ = invoke(capsys, "kp-weyl", "--alpha", "0")
    assert code == 0 and json.loads(out)["points"] == []


def test_braid(capsys):
    code, out, _ = invoke(capsys, "braid", "--model", "lattice-main:m=2", "--loop", "axis=z", "at=pi/2,pi/2")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schema("braid"))
    assert doc["permutation"] == [2, 1] and doc["half_twists"] == 1


def test_wilson_flow(capsys, tmp_path):
    out_csv = tmp_path / "flow.csv"
    code, out, _ = invoke(capsys, "wilson-flow", "--model", "lattice-main:m=2", "--center", "0,0",
                          "--radius", "1", "--out", str(out_csv))
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schema("wilson_flow"))
    assert (doc["n_zero"], doc["n_pi"], doc["nu"]) == (2, 1, 1)
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "kz,phi1,phi2,mod1,mod2" and len(lines) == 402


def test_nodes(capsys):
    code, out, _ = invoke(capsys, "nodes", "--model", "lattice-main:m=2")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schema("nodes"))
    assert len(doc) == 4
    assert all(d["kind"] == "WeylPoint" and d["chirality"] in (-1, 1) for d in doc)


def test_nodes_kp_region(capsys):
    code, out, _ = invoke(capsys, "nodes", "--model", "kp:alpha=pi/2", "--region=-1:1,-1:1,0",
                          "--ball", "1", "--exclude-tube", "0.1", "--coarse", "101", "--no-classify")
    assert code == 0
    pts = sorted(d["position"] for d in json.loads(out))
    np.testing.assert_allclose(pts, [[0, -2**-0.5, 0], [0, 2**-0.5, 0]], atol=1e-6)


def test_chern(capsys):
    code, out, _ = invoke(capsys, "chern", "--model", "lattice-supp:m=2", "--center", "0,0,0", "--radius", "0.3")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schema("chern"))
    assert doc["charges"] == [-1, 1]


@pytest.fixture
def grid_file(tmp_path):
    path = tmp_path / "lattice.bin"
    write_grid_model(sample_grid_model(LatticeModel(2.0, "main"), (8, 8, 64)), path)
    return path


def test_grid_misaligned_loop(capsys, grid_file):
    code, _, err = invoke(capsys, "braid", "--model", f"grid:{grid_file}", "--loop", "axis=z", "at=0.1,0.2")
    assert code == 2
    assert "grid node" in err


def test_grid_aligned_loop(capsys, grid_file):
    code, out, _ = invoke(capsys, "braid", "--model", f"grid:{grid_file}", "--loop", "axis=z",
                          "at=pi/2,pi/2", "--resolution", "64")
    assert code == 0
    assert json.loads(out)["permutation"] == [2, 1]


def test_exit_codes(capsys, tmp_path):
    assert invoke(capsys, "classify", "--n", "2")[0] == 2
    assert invoke(capsys, "classify", "--n", "3", "--sigma1", "(1 4)", "--sigma2", "")[0] == 2
    assert invoke(capsys, "nodes", "--model", "nonsense")[0] == 2
    assert invoke(capsys, "braid", "--model", f"grid:{tmp_path / 'missing.bin'}", "--loop", "axis=z",
                  "at=0,0")[0] == 4
    # a loop straight through the Weyl point at the origin
    code, out, err = invoke(capsys, "braid", "--model", "lattice-main:m=2", "--loop", "axis=z", "at=0,0")
    assert code == 3 and out == "" and "numerical failure" in err
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NHGRID1 N=2 D=3 AXES=3,3,3 PERIODIC=1,1,1\n" + bytes(16 * 8))
    code, _, err = invoke(capsys, "braid", "--model", f"grid:{bad}", "--loop", "axis=z", "at=0,0")
    assert code == 2 and "offset" in err


def test_deterministic_output(capsys, tmp_path):
    outs = []
    for threads in ("1", "4", "4"):
        code, out, _ = invoke(capsys, "--threads", threads, "wilson-flow", "--model", "lattice-main:m=2",
                              "--center", "1.2,1.2", "--radius", "1", "--flow-samples", "64",
                              "--out", str(tmp_path / f"f{threads}.csv"))
        assert code == 0
        outs.append((out, (tmp_path / f"f{threads}.csv").read_bytes()))
    assert outs[0] == outs[1] == outs[2]
    a = invoke(capsys, "--threads", "1", "nodes", "--model", "lattice-supp:m=0.25", "--no-classify")[1]
    b = invoke(capsys, "--threads", "4", "nodes", "--model", "lattice-supp:m=0.25", "--no-classify")[1]
    assert a == b


def test_threads_env(capsys, monkeypatch, tmp_path):
    monkeypatch.setenv("NHB_THREADS", "3")
    code, _, _ = invoke(capsys, "kp-weyl", "--alpha", "1")
    assert code == 0


def test_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nhbands.cli", "classify", "--n", "5",
                           "--sigma1", "(1 2 3 4 5)", "--sigma2", ""], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == "Z_5"


def test_argument_helpers():
    assert number("pi/2") == pytest.approx(np.pi / 2)
    assert number("-2*pi/3") == pytest.approx(-2 * np.pi / 3)
    with pytest.raises(argparse.ArgumentTypeError):
        number("__import__('os')")
    loop = parse_loop(["axis=x", "at=0.5,1"])
    assert np.allclose(loop(np.array([0.0]))[0], [0.0, 0.5, 1.0])
    with pytest.raises(ValueError):
        parse_loop(["axis=w", "at=0,0"])
    r = parse_region("-1:1,-1:1,0")
    assert r.lo == (-1.0, -1.0, 0.0) and r.hi == (1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        parse_region("1:-1,0,0")
