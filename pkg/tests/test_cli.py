import json
import subprocess
import sys
from pathlib import Path

import pytest

from condlab import cli
from condlab import scenario as sc
from condlab.errors import SchemaError

SCENARIOS = Path(__file__).resolve().parents[1] / "demos" / "scenarios"


def write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=2) if not isinstance(data, str) else data)
    return str(path)


HYPERBOLIC = {
    "task": "classify",
    "conductivity": {"zoo": "w_lambda_alpha", "params": {"lam": 2, "alpha": 1}},
    "criterion": {"theorem": "MainComparison", "q": 1, "theta": {"b": 2}, "side": "UpperBound",
                  "horizon": 8, "budget": 256},
}


# ---------------------------------------------------------------------------
# exit codes
# ---------------------------------------------------------------------------


def test_classify_decisive_exits_zero(tmp_path, capsys):
    assert cli.main(["classify", write(tmp_path, "h.json", HYPERBOLIC)]) == cli.EXIT_OK
    assert "verdict: WHyperbolic" in capsys.readouterr().out


def test_classify_undecided_exits_three(tmp_path, capsys):
    data = {"task": "classify", "manifold": {"builder": "euclidean", "dim": 2},
            "criterion": {"theorem": "KappaBalance", "side": "LowerBound", "horizon": 8, "budget": 64}}
    assert cli.main(["classify", write(tmp_path, "u.json", data)]) == cli.EXIT_UNDECIDED
    assert "verdict: Undecided" in capsys.readouterr().out


def test_contradiction_is_an_error(tmp_path, capsys):
    data = dict(HYPERBOLIC)
    data["criterion"] = [HYPERBOLIC["criterion"],
                         {"theorem": "BoundedEigen", "horizon": 2, "budget": 64, "reference_verdict": "WParabolic"}]
    assert cli.main(["classify", write(tmp_path, "c.json", data)]) == cli.EXIT_ERROR
    assert "ContradictoryVerdicts" in capsys.readouterr().err


def test_error_names_module_and_type(tmp_path, capsys):
    data = {"task": "classify", "conductivity": {"zoo": "w_lambda_alpha", "params": {"lam": -1, "alpha": 0}},
            "criterion": {"theorem": "MainComparison"}}
    assert cli.main(["classify", write(tmp_path, "e.json", data)]) == cli.EXIT_ERROR
    assert capsys.readouterr().err.startswith("[conductivity_zoo] NotPositiveDefinite:")


def test_unknown_example_is_an_error(capsys):
    assert cli.main(["verify-example", "no-such-example"]) == cli.EXIT_ERROR
    assert "UnknownExample" in capsys.readouterr().err


def test_missing_file_is_an_error(capsys):
    assert cli.main(["classify", "/nonexistent/scenario.json"]) == cli.EXIT_ERROR
    assert "FileNotFoundError" in capsys.readouterr().err


def test_task_mismatch(tmp_path, capsys):
    assert cli.main(["capacity", write(tmp_path, "h.json", HYPERBOLIC)]) == cli.EXIT_ERROR
    assert "command expects 'capacity'" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# schema errors carry line numbers
# ---------------------------------------------------------------------------


def test_schema_error_reports_line_and_field(tmp_path, capsys):
    text = json.dumps(dict(HYPERBOLIC, criterion=dict(HYPERBOLIC["criterion"], budget=-4)), indent=2)
    path = write(tmp_path, "bad.json", text)
    assert cli.main(["classify", path]) == cli.EXIT_ERROR
    err = capsys.readouterr().err
    line = next(i + 1 for i, ln in enumerate(text.splitlines()) if '"budget"' in ln)
    assert f"line {line}, field criterion/budget" in err
    assert "SchemaError" in err


def test_json_syntax_error_reports_position():
    with pytest.raises(SchemaError, match=r"line 3, column"):
        sc.loads('{\n  "task": "classify",\n  oops\n}')


@pytest.mark.parametrize(
    "data,fragment",
    [
        ({"task": "fly"}, "field task"),
        ({"task": "classify", "conductivity": {"zoo": "identity"}}, "criterion"),
        ({"task": "capacity", "manifold": {"builder": "euclidean"}}, "solver"),
        ({"task": "classify", "conductivity": {"zoo": "identity"}, "criterion": {"theorem": "Nope"}},
         "field criterion/theorem"),
        ({"task": "verify-example", "example": "r6", "extra": 1}, "'extra' was unexpected"),
        ({"task": "capacity", "manifold": {"builder": "euclidean"}, "solver": {"rho": 1, "R": 2, "ladder": [[4, 4]]}},
         "field solver/ladder/0/1: 4 is less than the minimum of 8"),
    ],
)
def test_schema_rejections(data, fragment):
    with pytest.raises(SchemaError, match=fragment):
        sc.loads(json.dumps(data))


def test_bad_expression_is_a_schema_error(tmp_path, capsys):
    data = {"task": "curvature-report", "manifold": {"metric": [["1", "0"], ["0", "__import__('os')"]],
                                                     "box": [[0, 1], [0, 1]]}}
    assert cli.main(["report", write(tmp_path, "x.json", data), "--out", str(tmp_path / "o")]) == cli.EXIT_ERROR
    assert "[expr] SchemaError" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# outputs, determinism and replay
# ---------------------------------------------------------------------------


def test_report_writes_json_and_csv(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["report", write(tmp_path, "h.json", HYPERBOLIC), "--out", str(out), "--replay"]) == cli.EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["verdict"] == "WHyperbolic"
    assert report["replay"] is True
    cert = report["reports"][0]["certificate"]
    assert cert["theorem"] == "MainComparison" and cert["parameters"]["q"] == 1.0
    header = (out / "margins.csv").read_text().splitlines()[0]
    assert header == "theorem,condition,worst,slack,satisfied,x1,x2"


def test_report_is_byte_identical(tmp_path):
    path = write(tmp_path, "h.json", HYPERBOLIC)
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["report", path, "--out", str(a)])
    cli.main(["report", path, "--out", str(b)])
    for name in ("report.json", "margins.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_capacity_command(tmp_path, capsys):
    data = {"task": "capacity", "manifold": {"builder": "euclidean", "dim": 2},
            "solver": {"rho": 1, "R": 2, "ladder": [[16, 16], [32, 32], [64, 64]]}}
    out = tmp_path / "cap"
    assert cli.main(["capacity", write(tmp_path, "c.json", data), "--out", str(out)]) == cli.EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["value"] == pytest.approx(9.06472, rel=1e-3)
    assert len((out / "ladder.csv").read_text().splitlines()) == 4


def test_curvature_report_of_hyperbolic_plane(tmp_path):
    data = {"task": "curvature-report",
            "manifold": {"metric": [["4/(1 - x1^2 - x2^2)^2", "0"], ["0", "4/(1 - x1^2 - x2^2)^2"]],
                         "box": [[-0.5, 0.5], [-0.5, 0.5]]},
            "sampling": {"budget": 16}}
    out = tmp_path / "curv"
    assert cli.main(["report", write(tmp_path, "p.json", data), "--out", str(out)]) == cli.EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["scalar"]["min"] == pytest.approx(-2.0, abs=1e-6)
    assert report["scalar"]["max"] == pytest.approx(-2.0, abs=1e-6)


def test_verify_example_command(tmp_path, capsys):
    assert cli.main(["verify-example", "intro-cylinder", "--out", str(tmp_path / "v")]) == cli.EXIT_OK
    assert "intro-cylinder: 3/3 claims pass" in capsys.readouterr().out
    assert (tmp_path / "v" / "checks.csv").exists()


def test_schema_and_list(capsys):
    assert cli.main(["schema"]) == cli.EXIT_OK
    schema = json.loads(capsys.readouterr().out)
    assert schema["$schema"].endswith("2020-12/schema")
    assert cli.main(["list"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "w_lambda_alpha" in out and "paraboloid" in out


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.json")), ids=lambda p: p.stem)
def test_demo_scenarios_validate(path):
    data = sc.load(path)
    assert data["task"] in sc.TASKS


@pytest.mark.parametrize("name", ["wlambda_alpha_hyperbolic", "wlambda_alpha_parabolic", "paraboloid_extrinsic",
                                  "annulus_capacity", "hyperbolic_plane_curvature"])
def test_demo_scenarios_run(name, tmp_path, capsys):
    assert cli.main(["report", str(SCENARIOS / f"{name}.json"), "--out", str(tmp_path), "--replay"]) == cli.EXIT_OK


def test_console_entry_point_runs_as_module():
    proc = subprocess.run([sys.executable, "-m", "condlab", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("condlab ")
