import json
import subprocess
import sys

import numpy as np
import pytest

from moranifs import cli
from moranifs.attractor import read_binary, read_csv

CANTOR = {
    "schema_version": 1, "dimension": 1, "ambient": {"lo": [0.0], "hi": [1.0]}, "provider": "explicit",
    "cycle": [[{"kind": "similarity", "ratio": 1 / 3, "translation": [0.0]},
               {"kind": "similarity", "ratio": 1 / 3, "translation": [2.0]}]],
}


@pytest.fixture
def cantor_file(tmp_path):
    p = tmp_path / "cantor.json"
    p.write_text(json.dumps(CANTOR))
    return str(p)


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_info(capsys, cantor_file):
    code, out, _ = run(capsys, "info", "--system", cantor_file)
    doc = json.loads(out)
    assert code == 0 and doc["schema_version"] == 1 and doc["report"] == "info"
    assert doc["layers"][0]["maps"] == 2


def test_cutset_words(capsys, cantor_file):
    code, out, _ = run(capsys, "cutset", "--system", cantor_file, "--b", "0.12", "--words")
    doc = json.loads(out)
    assert code == 0 and doc["count_words"] == 4
    assert doc["words"] == [[1, 1], [1, 2], [2, 1], [2, 2]]


def test_cutset_limit_exit_code(capsys):
    code, _, err = run(capsys, "cutset", "--family", "constant", "--b", "1e-9", "--limit", "50")
    assert code == 3
    assert json.loads(err)["guard"] == "cutset_limit"


def test_ratio_above_one_names_field(capsys, tmp_path):
    bad = json.loads(json.dumps(CANTOR))
    bad["cycle"][0][0]["ratio"] = 1.2
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(bad))
    code, _, err = run(capsys, "dim", "--system", str(p))
    doc = json.loads(err)
    assert code == 2 and doc["error"] == "config"
    assert doc["pointer"].endswith("/ratio")


def test_bad_family_param(capsys):
    code, _, err = run(capsys, "info", "--family", "ex55", "--param", "a_rule=sideways")
    assert code == 2 and json.loads(err)["pointer"] == "/family/params/a_rule"


def test_missing_system(capsys):
    code, _, _ = run(capsys, "info")
    assert code == 2


def test_cover_and_render(capsys, tmp_path):
    pts = tmp_path / "c.csv"
    code, out, _ = run(capsys, "cover", "--family", "ex51", "--b", "0.01", "--out", str(pts))
    assert code == 0 and json.loads(out)["points"] == len(read_csv(pts))
    img = tmp_path / "c.ppm"
    assert run(capsys, "render", "--input", str(pts), "--out", str(img), "--width", "64", "--height", "32")[0] == 0
    assert img.read_bytes().startswith(b"P6\n64 32\n255\n")
    svg = tmp_path / "c.svg"
    assert run(capsys, "render", "--input", str(pts), "--out", str(svg))[0] == 0
    assert "<svg" in svg.read_text()


def test_sample_binary_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    for p, threads in ((a, "1"), (b, "3")):
        code, _, _ = run(capsys, "--threads", threads, "sample", "--family", "ex55", "--param", "a_rule=down",
                         "--count", "70000", "--seed", "9", "--out", str(p), "--format", "bin")
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
    assert read_binary(a, 1).shape == (70000, 1)


def test_render_binary_needs_dim(capsys, tmp_path):
    p = tmp_path / "x.bin"
    np.zeros(4).tofile(p)
    assert run(capsys, "render", "--input", str(p), "--out", str(tmp_path / "x.ppm"))[0] == 2


def test_dim_report_is_byte_identical(capsys, cantor_file):
    _, first, _ = run(capsys, "dim", "--system", cantor_file, "--kmax", "300", "--nmax", "1024")
    _, second, _ = run(capsys, "dim", "--system", cantor_file, "--kmax", "300", "--nmax", "1024")
    assert first == second
    doc = json.loads(first)
    assert doc["dimH_est"] == pytest.approx(np.log(2) / np.log(3))
    assert doc["measure_class"] == "PositiveFinite"


def test_dim_explicit_grid(capsys, cantor_file):
    code, out, _ = run(capsys, "dim", "--system", cantor_file, "--bgrid", "0.1,0.01,0.001", "--kmax", "64")
    assert code == 0 and len(json.loads(out)["samples"]) == 3


@pytest.mark.parametrize("cond", ["mosc", "mwsc", "mssc", "mwhp", "mbdp", "gamma4", "near-id"])
def test_check_sep(capsys, cond):
    code, out, _ = run(capsys, "check-sep", "--family", "ex53", "--param", "rho=0.5", "--param", "form=phi",
                       "--cond", cond, "--depth", "6")
    doc = json.loads(out)
    assert code == 0 and doc["condition"] == cond


def test_check_sep_with_box_file(capsys, tmp_path):
    V = tmp_path / "v.json"
    V.write_text(json.dumps({"boxes": [{"lo": [0.0], "hi": [0.4]}]}))
    code, out, _ = run(capsys, "check-sep", "--family", "constant", "--cond", "mosc", "--V", str(V))
    assert code == 0
    assert json.loads(out)["result"]["verdict"]["status"] == "FailsAt"


@pytest.mark.parametrize("target", ["ex55-zero", "ex57", "cantor", "ex58-endpoints"])
def test_repro(capsys, target):
    code, out, _ = run(capsys, "repro", target)
    doc = json.loads(out)
    assert code == 0 and doc["pass"]
    if target == "ex55-zero":
        assert doc["checks"]["measure_class"]["observed"] == "Zero"
    if target == "ex57":
        assert doc["checks"]["box_lower_est"]["observed"] == pytest.approx(0.71944, abs=0.01)
        assert doc["checks"]["box_upper_est"]["observed"] == pytest.approx(0.83659, abs=0.01)


def test_repro_mismatch_exit_code(capsys, monkeypatch):
    fixtures = cli.load_fixtures()
    fixtures["targets"]["ex56"]["expected"]["dimH_est"]["value"] = 1.5
    monkeypatch.setattr(cli, "load_fixtures", lambda: fixtures)
    code, out, _ = run(capsys, "repro", "ex56")
    assert code == 1 and not json.loads(out)["pass"]


def test_every_target_has_tagged_fixtures():
    fixtures = cli.load_fixtures()["targets"]
    assert set(fixtures) == set(cli.REPRO)
    for t in fixtures.values():
        for check in t["expected"].values():
            assert check["provenance"] in {"closed_form", "derived", "trivial"}


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "moranifs.cli", "repro", "ex56"], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["pass"]
