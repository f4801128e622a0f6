import json
from pathlib import Path

import pytest

from mimolib.errors import ScenarioValidationError
from mimolib.scenario import PRESETS, NetworkScenario, dump_scenario, load_scenario, preset

SCENARIOS = Path(__file__).parent.parent / "scenarios"


def test_defaults_match_reference_setup():
    scenario = NetworkScenario()
    assert (scenario.num_cells, scenario.users_per_cell, scenario.antennas) == (4, 5, 100)
    assert scenario.num_scatterers == 21
    assert scenario.cell_side_km == pytest.approx(0.5)
    assert scenario.grid_columns == 2
    assert scenario.noise_mw == pytest.approx(10 ** (-9.6))
    assert scenario.pilots.tau_c == 200 and scenario.pilots.tau_p == 5
    assert scenario.power_control.p_max_mw == 200.0
    assert scenario.pilot_config().prelog == pytest.approx(0.975)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_preset_files_match_presets(name):
    assert (SCENARIOS / f"{name}.json").read_text(encoding="utf-8") == dump_scenario(preset(name))


def test_desk_preset_shrinks_the_run():
    desk = preset("desk")
    assert desk.antennas == 32
    assert desk.experiment.num_drops == 100
    assert desk.experiment.monte_carlo_realizations == 1000
    assert desk.num_users == 20


def test_unknown_preset():
    with pytest.raises(ScenarioValidationError):
        preset("lab")


def test_partial_file_keeps_preset_values():
    scenario = load_scenario(SCENARIOS / "penetration.json", "desk")
    assert scenario.penetration_loss_db == 20.0
    assert scenario.pilots.pilot_power_mw == 50.0
    assert scenario.pilots.tau_p == 5
    assert scenario.power_control.p_max_mw == 50.0
    assert scenario.power_control.epsilon == 1e-3
    assert scenario.antennas == 32


def test_overrides_apply_last(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"antennas": 64, "seed": 3}))
    scenario = load_scenario(path, "paper", {"seed": 11, "experiment.num_drops": 7})
    assert scenario.antennas == 64
    assert scenario.seed == 11
    assert scenario.experiment.num_drops == 7


def test_explicit_pilot_table():
    scenario = NetworkScenario().with_overrides(
        {"num_cells": 2, "users_per_cell": 2, "pilots.tau_p": 3, "pilots.assignment": [[0, 1], [2, 0]]}
    )
    config = scenario.pilot_config()
    assert config.pilot_of((1, 0)) == 2
    assert config.pilot_of((1, 1)) == 0


@pytest.mark.parametrize(
    "overrides",
    [
        {"pilots.tau_p": 200},
        {"users_per_cell": 6},
        {"antennas": 0},
        {"min_distance_km": 0.01},
        {"min_distance_km": 0.3},
        {"covariance.correlation": 1.0},
        {"covariance.model": "kronecker"},
        {"power_control.update_order": "random"},
        {"pilots.assignment": [[0, 1, 2, 3, 4]]},
        {"pilots.assignment": [[0, 1, 2, 3, 9]] * 4},
        {"unknown_field": 1},
    ],
)
def test_invalid_scenarios(overrides):
    with pytest.raises(ScenarioValidationError):
        NetworkScenario().with_overrides(overrides)


def test_unreadable_scenario_file(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ScenarioValidationError):
        load_scenario(broken)
    listing = tmp_path / "list.json"
    listing.write_text("[1, 2]")
    with pytest.raises(ScenarioValidationError):
        load_scenario(listing)
    with pytest.raises(ScenarioValidationError):
        load_scenario(tmp_path / "missing.json")


def test_scenario_is_frozen():
    scenario = NetworkScenario()
    with pytest.raises(Exception):
        scenario.antennas = 10
