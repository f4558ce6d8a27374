import csv
import json
import subprocess
import sys

import pytest

from drcc.cli import EXIT_CAP, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, main
from drcc.lpformat import parse_lp, parse_mps


def _csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh, strict=True))
    header, body = rows[0], rows[1:]
    assert all(len(r) == len(header) for r in body)
    return [dict(zip(header, r)) for r in body]


@pytest.fixture
def toy(tmp_path):
    path = tmp_path / "toy.json"
    assert main(["gen", "toy", "--out", str(path)]) == EXIT_OK
    return path


def test_solve_finite_root(toy, tmp_path):
    out = tmp_path / "f"
    assert main(["solve", str(toy), "--model", "finite", "--cuts", "ordering,star", "--out", str(out)]) == EXIT_OK
    rows = _csv(out / "report.csv")
    assert len(rows) == 1
    assert rows[0]["nodes"] == "1"
    assert float(rows[0]["objective"]) == pytest.approx(6.8, abs=1e-6)
    alphas = _csv(out / "alphas.csv")
    assert len(alphas) == 1 and float(alphas[0]["alpha"]) == pytest.approx(0.8, abs=1e-9)
    sol = json.loads((out / "solution.json").read_text())
    assert sol["periods"][0]["x"]["x_1_1"] == pytest.approx(6.0)


def test_solve_continuous_matches_oracle(toy, tmp_path):
    assert main(["solve", str(toy), "--model", "continuous", "--gap", "1e-4", "--out", str(tmp_path / "c")]) == EXIT_OK
    assert main(["oracle", str(toy), "--model", "continuous", "--out", str(tmp_path / "o")]) == EXIT_OK
    z = float(_csv(tmp_path / "c" / "report.csv")[0]["objective"])
    ref = json.loads((tmp_path / "o" / "oracle.json").read_text())["periods"][0]["objective"]
    assert z == pytest.approx(ref, rel=1e-5)


def test_config_errors(tmp_path, toy, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    assert main(["solve", str(bad), "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert "line 1" in capsys.readouterr().err
    assert main(["solve", str(tmp_path / "missing.json"), "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["solve", str(toy), "--cuts", "bogus", "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["solve", str(toy), "--model", "milp-binary", "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["compare", str(toy), "--models", "finite", "--out", str(tmp_path / "x")]) == EXIT_CONFIG


def test_infeasible_exit(tmp_path):
    path = tmp_path / "tight.json"
    assert main(["gen", "toy", "--out", str(path)]) == EXIT_OK
    doc = json.loads(path.read_text())
    doc["capacities"] = [3.0]
    path.write_text(json.dumps(doc))
    assert main(["solve", str(path), "--out", str(tmp_path / "o")]) == EXIT_INFEASIBLE
    assert _csv(tmp_path / "o" / "report.csv")[0]["status"] == "infeasible"


def test_oracle_cap(tmp_path):
    path = tmp_path / "big.json"
    assert main(["gen", "transportation", "--I", "5", "--D", "100", "--N", "50", "--out", str(path)]) == EXIT_OK
    assert main(["oracle", str(path), "--out", str(tmp_path / "o")]) == EXIT_CAP


def test_export_round_trip(toy, tmp_path):
    lp = tmp_path / "m.lp"
    assert main(["export", str(toy), "--model", "finite", "--format", "lp", "--out", str(lp)]) == EXIT_OK
    m = parse_lp(lp.read_bytes())
    assert len(m.binary_indices) == 2
    mps = tmp_path / "m.mps"
    assert main(["export", str(toy), "--model", "continuous", "--format", "mps", "--out", str(mps)]) == EXIT_CONFIG
    assert main(["export", str(toy), "--model", "continuous", "--format", "mps", "--linearize-oa", "--out", str(mps)]) == EXIT_OK
    assert not parse_mps(mps.read_bytes()).cones


def test_deterministic_reports_are_byte_identical(tmp_path):
    inst = tmp_path / "b.json"
    assert main(["gen", "building", "--n", "3", "--T", "3", "--N", "8", "--seeds", "2", "--out", str(inst)]) == EXIT_OK
    blobs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["solve", str(inst), "--model", "continuous", "--deterministic", "--manifest", "--out", str(out)]) == EXIT_OK
        blobs.append({f: (out / f).read_bytes() for f in ("report.csv", "alphas.csv", "solution.json")})
        rows = _csv(out / "report.csv")
        assert len(rows) == 3 and [r["period"] for r in rows] == ["1", "2", "3"]
        assert len(_csv(out / "alphas.csv")) == 3
        assert len(_csv(out / "timings.csv")) == 3
        assert json.loads((out / "manifest.json").read_text())["model"] == "continuous"
    assert blobs[0] == blobs[1]


def test_compare_and_gen(tmp_path):
    d = tmp_path / "tr"
    assert main(["gen", "transportation", "--seeds", "0-1", "--N", "20,40", "--I", "3", "--D", "2", "--out", str(d)]) == EXIT_OK
    files = sorted(str(p) for p in d.glob("*.json"))
    assert len(files) == 4
    assert main(["compare", *files, "--out", str(tmp_path / "cmp"), "--deterministic"]) == EXIT_OK
    rows = _csv(tmp_path / "cmp" / "compare.csv")
    assert len(rows) == 4
    assert all(r["dominance"] == "ok" for r in rows)
    assert all(float(r["diff_continuous"]) >= 0.0 for r in rows)


def test_entry_point_version():
    out = subprocess.run([sys.executable, "-m", "drcc.cli", "--version"], capture_output=True, text=True, check=True)
    assert out.stdout.startswith("drcc ")
