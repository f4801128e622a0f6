import json

import numpy as np
import pytest

from mimolib.experiments import VALIDATION_COLUMNS, TargetSpec, run_power_experiment
from mimolib.reportwriter import write_csv, write_json, write_output
from mimolib.strategy import ExperimentKind, ExperimentOutput


def test_write_csv_column_order(tmp_path, snapshot):
    rows = [
        {
            "drop": 0,
            "cell": np.int64(1),
            "user": 0,
            "SE_closed_form": 1.5,
            "SE_monte_carlo": np.float64(1.25),
            "stderr": 0.01,
            "signal": 2.0,
            "NI": 0.5,
            "CI": 0.25,
            "NO": 0.125,
        },
        {
            "NO": 1.0,
            "CI": 0.0,
            "NI": 0.0,
            "signal": 1.0,
            "stderr": float("nan"),
            "SE_monte_carlo": 0.5,
            "SE_closed_form": 0.75,
            "user": 1,
            "cell": 0,
            "drop": 1,
        },
    ]
    path = write_csv(tmp_path / "validation.csv", rows, VALIDATION_COLUMNS)
    snapshot.assert_match(path.read_text(encoding="utf-8"), "validation.csv")


def test_write_csv_rejects_unknown_columns(tmp_path):
    with pytest.raises(ValueError):
        write_csv(tmp_path / "bad.csv", [{"drop": 0, "extra": 1}], ["drop"])


def test_write_json_plain_values(tmp_path):
    path = write_json(tmp_path / "out" / "report.json", {"b": np.array([1.0, np.inf]), "a": np.bool_(True)})
    assert json.loads(path.read_text()) == {"a": True, "b": [1.0, None]}
    assert path.read_text().startswith('{\n  "a"')


def test_write_output_layout(tmp_path):
    output = ExperimentOutput(
        kind=ExperimentKind.Convergence,
        records=[{"variant": "alg1"}],
        summary={"alg1": {"iterations": 3}},
        tables={"convergence": [{"variant": "alg1", "n": 0, "P_tot": 4.0, "gamma": None}]},
    )
    written = write_output(output, tmp_path)
    assert [p.name for p in written] == ["convergence.csv", "convergence_report.json"]
    report = json.loads((tmp_path / "convergence_report.json").read_text())
    assert report == {
        "converged": True,
        "kind": "convergence",
        "records": [{"variant": "alg1"}],
        "summary": {"alg1": {"iterations": 3}},
    }
    assert (tmp_path / "convergence.csv").read_text() == "variant,n,P_tot,gamma\nalg1,0,4.0,\n"


def test_write_output_is_byte_identical_across_runs(tmp_path, small_scenario):
    for name in ("first", "second"):
        output = run_power_experiment(small_scenario, TargetSpec(low=0.5, high=1.0), ["alg1", "alg2"], num_drops=2)
        write_output(output, tmp_path / name)
    for path in sorted((tmp_path / "first").iterdir()):
        assert path.read_bytes() == (tmp_path / "second" / path.name).read_bytes()
