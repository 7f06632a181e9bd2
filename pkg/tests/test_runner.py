import json

import pytest

from diracflow.cli import main
from diracflow.runner import (
    Scenario,
    ScenarioError,
    emit,
    load_suite,
    run,
    run_suite,
)


def circle_scenario(name="c", k=1, expected=None):
    return Scenario(
        name=name,
        kind="circle_sf",
        params={"n_theta": 17, "gauge": {"k": k}},
        expected=expected,
    )


def test_scenario_validation():
    with pytest.raises(ScenarioError):
        Scenario(name="x", kind="nope", params={})
    with pytest.raises(ScenarioError):
        Scenario(name="x", kind="circle_sf", params="bad")
    with pytest.raises(ScenarioError):
        Scenario.from_dict({"name": "x"})


def test_run_circle_scenario():
    rec = run(circle_scenario(k=2))
    assert rec.passed
    assert rec.values["sf"] == rec.values["winding"] == 2
    assert rec.conventions == {"sigma1": 1, "sigma2": 1}
    assert rec.resolution["n_theta"] == 17


def test_expected_mismatch_fails():
    rec = run(circle_scenario(k=2, expected=5))
    assert not rec.passed


def test_determinism():
    r1 = run(circle_scenario(k=-1))
    r2 = run(circle_scenario(k=-1))
    assert r1.canonical() == r2.canonical()
    assert r1.wall_time != 0.0


def test_suite_order_with_workers():
    scenarios = [circle_scenario(name=f"s{k}", k=k, expected=k) for k in (2, -1, 0, 1)]
    serial = run_suite(scenarios, workers=1)
    parallel = run_suite(scenarios, workers=3)
    assert [r.scenario for r in parallel] == [f"s{k}" for k in (2, -1, 0, 1)]
    assert [r.canonical() for r in serial] == [r.canonical() for r in parallel]


def test_load_suite_errors():
    with pytest.raises(ScenarioError):
        load_suite('{"not_scenarios": []}')
    suite = load_suite(
        '{"scenarios": [{"name": "a", "kind": "circle_sf", '
        '"params": {"n_theta": 17, "gauge": {"k": 1}}}]}'
    )
    assert len(suite) == 1 and suite[0].name == "a"


def test_emit_json_roundtrip(tmp_path):
    recs = run_suite([circle_scenario(name="a", k=1)], workers=1)
    out = tmp_path / "out.json"
    text = emit(recs, "json", str(out))
    loaded = json.loads(out.read_text())
    assert loaded == json.loads(text)
    assert loaded[0]["scenario"] == "a"
    assert loaded[0]["values"] == recs[0].values
    assert emit([], "json") == "[]"


def test_emit_csv_schema():
    recs = [run(circle_scenario(name="a", k=2))]
    text = emit(recs, "csv")
    lines = text.splitlines()
    assert lines[0] == "scenario,lhs,rhs,pass"
    assert lines[1] == "a,2,2,1"
    with pytest.raises(ScenarioError):
        emit(recs, "xml")


def test_getzler_scenario_record():
    rec = run(
        Scenario(
            name="g",
            kind="getzler_sweep",
            params={"n_theta": 17, "gauge": {"k": 1}, "eps_grid": [1, 4, 9]},
        )
    )
    assert rec.passed
    assert rec.values["sf_estimate"] == 1
    assert len(rec.values["sweep"]) == 3


def test_cli_pass_and_formats(tmp_path, capsys):
    out = tmp_path / "res.csv"
    code = main(["circle-sf", "--n-theta", "17", "--k", "2",
                 "--format", "csv", "--out", str(out)])
    assert code == 0
    assert out.read_text().splitlines()[0] == "scenario,lhs,rhs,pass"


def test_cli_suite_and_exit_codes(tmp_path):
    good = tmp_path / "suite.json"
    good.write_text(json.dumps({"scenarios": [
        {"name": "a", "kind": "circle_sf",
         "params": {"n_theta": 17, "gauge": {"k": 1}}, "expected": 1},
    ]}))
    assert main(["suite", str(good), "--workers", "2"]) == 0

    failing = tmp_path / "failing.json"
    failing.write_text(json.dumps({"scenarios": [
        {"name": "a", "kind": "circle_sf",
         "params": {"n_theta": 17, "gauge": {"k": 1}}, "expected": 3},
    ]}))
    assert main(["suite", str(failing)]) == 1

    assert main(["suite", str(tmp_path / "missing.json")]) == 2
    assert main(["circle-sf", "--badflag"]) == 2
