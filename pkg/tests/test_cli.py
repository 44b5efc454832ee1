import csv
import json

import pytest

from mahlerlab.bodies import Ball, Ellipsoid, LpBall, cube
from mahlerlab.bodyio import dump
from mahlerlab.cli import RunConfig, baseline_rows, main

from oracles import unit_ball_volume


def _rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# mahlerlab ")
    return list(csv.DictReader(lines[1:]))


@pytest.fixture
def body_files(tmp_path):
    files = {}
    for name, K in [("disk", Ball(2)), ("cube", cube(3)), ("ellipse", Ellipsoid.from_axes([2.0, 1.0])), ("lp", LpBall(2, 3.0))]:
        files[name] = tmp_path / f"{name}.json"
        dump(K, files[name])
    return files


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(samples=10)
    with pytest.raises(ValueError):
        RunConfig(dim=7)
    with pytest.raises(ValueError):
        RunConfig(delta_grid=[1e-3, 1e-2])
    with pytest.raises(ValueError):
        RunConfig(format="xml")
    assert RunConfig(seed=3, samples=5000).header() == "# mahlerlab 0.1.0 seed=3 samples=5000"


def test_baseline_values_in_three_dimensions():
    rows = {r[0]: r for r in baseline_rows(RunConfig(dim=3, samples=20_000))}
    assert rows["cube"][2] == pytest.approx(32 / 3, rel=1e-12)
    assert rows["cross_polytope"][2] == pytest.approx(32 / 3, rel=1e-12)
    assert rows["simplex"][2] == pytest.approx(64 / 9, rel=1e-12)
    assert rows["ball"][2] == pytest.approx(unit_ball_volume(3) ** 2, rel=1e-12)
    assert rows["hanner"][2] == pytest.approx(32 / 3, rel=1e-12)
    assert rows["ball"][3] == pytest.approx(1.0)


def test_baseline_command_writes_csv(tmp_path):
    assert main(["baseline", "--dim", "2", "--samples", "5000", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "baseline.csv")
    assert list(rows[0]) == ["body", "dim", "vp", "normalized_vp", "stderr", "method"]
    by_name = {r["body"]: r for r in rows}
    assert float(by_name["simplex"]["vp"]) == pytest.approx(6.75, rel=1e-12)
    assert float(by_name["cube"]["vp"]) == pytest.approx(8.0, rel=1e-12)


def test_vp_command_json(tmp_path, body_files):
    assert main(["vp", str(body_files["cube"]), "--format", "json", "--samples", "5000", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "vp.json").read_text())
    assert doc["schema_version"] == 1
    assert doc["vp_at_santalo"] == pytest.approx(32 / 3, rel=1e-12)
    assert doc["normalized_vp"] == pytest.approx(0.607927, abs=1e-6)


def test_theorem_command_on_disk(tmp_path, body_files):
    code = main(["theorem", str(body_files["disk"]), "--point", "0,1", "--dim", "2", "--out", str(tmp_path)])
    assert code == 0
    rows = _rows(tmp_path / "theorem.csv")
    assert [r["winner"] for r in rows] == ["both"] * 3
    assert list(rows[0])[:3] == ["delta", "vp_base", "vp_cap"]
    doc = json.loads((tmp_path / "theorem.json").read_text())
    assert doc["passed"] is True


def test_theorem_output_is_deterministic(tmp_path, body_files):
    outs = []
    for i, jobs in enumerate((1, 3)):
        out = tmp_path / f"run{i}"
        args = ["theorem", str(body_files["lp"]), "--point", f"{2 ** (-1 / 3)},{2 ** (-1 / 3)}", "--dim", "2",
                "--deltas", "0.01,0.001", "--samples", "20000", "--seed", "5", "--jobs", str(jobs), "--out", str(out)]
        assert main(args) == 0
        outs.append((out / "theorem.csv").read_bytes())
    assert outs[0] == outs[1]


def test_moduli_and_dual_identity_commands(tmp_path, body_files):
    assert main(["moduli", str(body_files["disk"]), "--point", "0,1", "--dim", "2", "--samples", "20000", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "moduli_g_ratio.csv")
    assert list(rows[0]) == ["t", "measured", "leading", "ratio"]
    assert abs(float(rows[-1]["ratio"]) - 1) < 0.01
    assert main(["dual-identity", str(body_files["disk"]), "--point", "0,1", "--dim", "2", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "dual_identity.csv")
    assert max(float(r["discrepancy"]) for r in rows) < 1e-9


def _error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_exit_code_for_flat_point(tmp_path, body_files, capsys):
    code = main(["theorem", str(body_files["cube"]), "--point", "0,0,1", "--out", str(tmp_path)])
    assert code == 4
    assert _error(capsys)["exit_code"] == 4


def test_exit_code_for_bad_input(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    assert main(["vp", str(bad), "--out", str(tmp_path)]) == 2
    assert _error(capsys)["error"] == "BodyFormatError"
    assert main(["vp", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2
    assert main(["baseline", "--samples", "5", "--out", str(tmp_path)]) == 2


def test_exit_code_for_point_off_the_boundary(tmp_path, body_files, capsys):
    assert main(["theorem", str(body_files["disk"]), "--point", "0,0.5", "--dim", "2", "--out", str(tmp_path)]) == 3


def test_exit_code_for_unresolvable_noise(tmp_path, body_files, capsys):
    args = ["theorem", str(body_files["disk"]), "--point", "0,1", "--dim", "2", "--method", "mc",
            "--deltas", "1e-9,1e-10", "--samples", "2000", "--out", str(tmp_path)]
    assert main(args) == 5
    assert _error(capsys)["error"] == "InconclusiveError"
