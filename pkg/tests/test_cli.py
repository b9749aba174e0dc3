import json

import pytest

from daecanon.cli import main

from .test_pipeline import SMALL


@pytest.fixture
def problem_file(tmp_path):
    def write(document, name="problem.json"):
        path = tmp_path / name
        path.write_text(json.dumps(document))
        return str(path)

    return write


def run(capsys, *argv):
    code = main([*argv, "--samples", "9"])
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


def test_analyze(capsys, problem_file):
    code, report = run(capsys, "analyze", problem_file(SMALL))
    assert code == 0
    assert report["status"] == "ok"
    assert report["characteristics"]["d"] == 1
    assert report["blocks"]["sizes"] == [1, 1]
    assert report["diagnosis"]["passed"]


def test_canon_to_scf(capsys, problem_file, tmp_path):
    out = tmp_path / "stages"
    code, report = run(capsys, "canon", problem_file(SMALL), "--stage", "scf", "--out", str(out))
    assert code == 0
    assert report["reached"] == "step3"
    assert [s["stage"] for s in report["stages"]] == ["step0", "step1", "step2", "step3"]
    assert all(c["passed"] for c in report["checks"])
    assert out.is_dir() and any(out.iterdir())


def test_canon_failure_reports_completed_stages(capsys, problem_file):
    document = dict(SMALL, F=[["-1", "1", "0"], ["t", "0", "t"], ["0", "0", "1"]])
    code, report = run(capsys, "canon", problem_file(document))
    assert code == 1
    assert report["status"] == "error"
    assert report["completed"] == ["step0"]


def test_projector(capsys, problem_file):
    code, report = run(capsys, "projector", problem_file(SMALL), "--at", "0.5")
    assert code == 0
    assert report["d"] == 1
    assert len(report["samples"]) == 1


def test_solve(capsys, problem_file, tmp_path):
    csv = tmp_path / "trajectory.csv"
    code, report = run(capsys, "solve", problem_file(SMALL), "--t0", "0", "--u0", "1", "--grid", "11", "--out", str(csv))
    assert code == 0
    assert report["points"] == 11
    assert report["max_residual"] < 1e-7
    assert csv.exists()


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "{file}", "--t0", "0", "--u0", "1,2"],
        ["solve", "{file}", "--t0", "0", "--u0", "one"],
        ["canon", "{file}", "--stage", "nope"],
        ["analyze", "{missing}"],
        ["reproduce", "unknown"],
    ],
)
def test_input_errors(capsys, problem_file, tmp_path, argv):
    values = {"file": problem_file(SMALL), "missing": str(tmp_path / "missing.json")}
    code = main([a.format(**values) for a in argv])
    capsys.readouterr()
    assert code == 2


def test_invalid_problem_document(capsys, problem_file):
    code, report = run(capsys, "analyze", problem_file({"name": "broken", "E": [["1"]]}))
    assert code == 2
    assert report["code"] == "problem_file"


def test_help_exits_cleanly(capsys):
    assert main(["--help"]) == 0
    assert "daecanon" in capsys.readouterr().out
