import json

import numpy as np
import pytest

from mimolib.scenario import NetworkScenario, preset

from .mocks import mock_network, toy_network, toy_scenario_overrides


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_network(rng):
    return mock_network(rng, num_cells=2, users_per_cell=2, antennas=8, scatterers=4)


@pytest.fixture
def toy():
    return toy_network()


@pytest.fixture
def small_scenario() -> NetworkScenario:
    return preset("desk").with_overrides(toy_scenario_overrides())


@pytest.fixture
def small_scenario_file(tmp_path, small_scenario):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(small_scenario.model_dump(), indent=2))
    return path


@pytest.fixture
def mock_env(monkeypatch, tmp_path):
    monkeypatch.delenv("MIMOSIM_SEED", raising=False)
    monkeypatch.setenv("MIMOSIM_OUT_DIR", str(tmp_path / "env_results"))
    monkeypatch.chdir(tmp_path)
    yield
