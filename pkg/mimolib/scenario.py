import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ScenarioValidationError
from .estimation import PilotConfig
from .units import dbm_to_mw

logger = logging.getLogger("mimosim")

CovarianceModelName = Literal["local_scattering", "exponential", "identity"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class CovarianceSettings(_Section):
    """BS-side (R) and scatterer-side (Rtilde) covariance builders."""

    model: CovarianceModelName = "local_scattering"
    angular_std_deg: float = Field(default=5.0, gt=0.0)
    antenna_spacing: float = Field(default=0.5, gt=0.0)
    correlation: float = Field(default=0.9, ge=0.0, lt=1.0)
    # identity keeps the effective scatterer count at S
    scatterer_model: CovarianceModelName = "identity"
    scatterer_angular_std_deg: float = Field(default=20.0, gt=0.0)
    scatterer_spacing: float = Field(default=0.5, gt=0.0)


class PilotSettings(_Section):
    tau_c: int = Field(default=200, gt=1)
    tau_p: int = Field(default=5, ge=1)
    pilot_power_mw: float = Field(default=200.0, gt=0.0)
    # "same_index", or one row of pilot indices per cell
    assignment: Union[Literal["same_index"], List[List[int]]] = "same_index"

    @model_validator(mode="after")
    def _check_lengths(self):
        if self.tau_p >= self.tau_c:
            raise ValueError(f"tau_p={self.tau_p} must be smaller than tau_c={self.tau_c}")
        return self


class PowerControlSettings(_Section):
    p_max_mw: float = Field(default=200.0, gt=0.0)
    epsilon: float = Field(default=1e-3, gt=0.0)
    max_iter: int = Field(default=500, ge=1)
    update_order: Literal["jacobi", "gauss-seidel"] = "jacobi"
    satisfaction_tolerance: float = Field(default=1e-6, ge=0.0)


class ExperimentSettings(_Section):
    num_drops: int = Field(default=500, ge=1)
    monte_carlo_realizations: int = Field(default=10_000, ge=1)
    batch_size: int = Field(default=250, ge=1)
    xi: float = Field(default=1.0, ge=0.0)
    xi_high: Optional[float] = Field(default=None, ge=0.0)


class NetworkScenario(_Section):
    """
    Every input of a simulation run. Defaults reproduce the reference multi-cell setup:
    4 square cells in 1 km^2, 5 users per cell, 100 antennas, 21 scatterers per link.
    """

    num_cells: int = Field(default=4, ge=1)
    users_per_cell: int = Field(default=5, ge=1)
    antennas: int = Field(default=100, ge=1)
    area_km2: float = Field(default=1.0, gt=0.0)
    min_distance_km: float = Field(default=0.035, ge=0.035)
    shadow_std_db: float = Field(default=7.0, ge=0.0)
    noise_dbm: float = -96.0
    bandwidth_mhz: float = Field(default=20.0, gt=0.0)
    num_scatterers: int = Field(default=21, ge=1)
    penetration_loss_db: float = Field(default=0.0, ge=0.0)
    seed: int = Field(default=0, ge=0)
    covariance: CovarianceSettings = CovarianceSettings()
    pilots: PilotSettings = PilotSettings()
    power_control: PowerControlSettings = PowerControlSettings()
    experiment: ExperimentSettings = ExperimentSettings()

    @model_validator(mode="after")
    def _check_layout(self):
        assignment = self.pilots.assignment
        if assignment == "same_index":
            if self.users_per_cell > self.pilots.tau_p:
                raise ValueError(
                    f"same_index pilots need tau_p >= users_per_cell, got {self.pilots.tau_p} < {self.users_per_cell}"
                )
        else:
            if len(assignment) != self.num_cells or any(len(row) != self.users_per_cell for row in assignment):
                raise ValueError(f"Pilot table must be {self.num_cells} rows of {self.users_per_cell} indices")
            if any(not 0 <= index < self.pilots.tau_p for row in assignment for index in row):
                raise ValueError(f"Pilot indices must lie in [0, {self.pilots.tau_p})")
        if self.min_distance_km >= self.cell_side_km / 2.0:
            raise ValueError(
                f"min_distance_km={self.min_distance_km} leaves no room in cells of side {self.cell_side_km:.4f} km"
            )
        return self

    @property
    def cell_side_km(self) -> float:
        return math.sqrt(self.area_km2 / self.num_cells)

    @property
    def grid_columns(self) -> int:
        return int(math.ceil(math.sqrt(self.num_cells)))

    @property
    def noise_mw(self) -> float:
        return float(dbm_to_mw(self.noise_dbm))

    @property
    def num_users(self) -> int:
        return self.num_cells * self.users_per_cell

    def pilot_config(self) -> PilotConfig:
        pilots = self.pilots
        if pilots.assignment == "same_index":
            return PilotConfig.same_index(
                self.num_cells, self.users_per_cell, pilots.tau_p, pilots.tau_c, pilots.pilot_power_mw
            )
        return PilotConfig.from_table(pilots.assignment, pilots.tau_p, pilots.tau_c, pilots.pilot_power_mw)

    def with_overrides(self, overrides: Dict[str, Any]) -> "NetworkScenario":
        """Copy with dotted-key overrides such as {"antennas": 32, "experiment.num_drops": 10}."""
        return _validate(_merge(self.model_dump(), overrides))


PRESETS: Dict[str, Dict[str, Any]] = {
    "paper": {},
    "desk": {
        "antennas": 32,
        "experiment.num_drops": 100,
        "experiment.monte_carlo_realizations": 1000,
    },
}


def _merge(data: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = json.loads(json.dumps(data))
    for key, value in overrides.items():
        target = merged
        *parents, leaf = key.split(".")
        for parent in parents:
            target = target.setdefault(parent, {})
        target[leaf] = value
    return merged


def _validate(data: Dict[str, Any]) -> NetworkScenario:
    try:
        return NetworkScenario.model_validate(data)
    except ValidationError as e:
        raise ScenarioValidationError(str(e)) from e


def preset(name: str) -> NetworkScenario:
    if name not in PRESETS:
        raise ScenarioValidationError(f"Unknown preset {name!r}, expected one of {sorted(PRESETS)}")
    return NetworkScenario().with_overrides(PRESETS[name])


def load_scenario(
    path: Optional[Union[str, Path]] = None,
    preset_name: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> NetworkScenario:
    """
    Build a scenario from a preset, then a JSON scenario file on top of it, then explicit overrides.

    Missing keys in the file keep the preset value.
    """
    data = preset(preset_name or "paper").model_dump()
    if path is not None:
        try:
            content = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ScenarioValidationError(f"Cannot read scenario file {path}: {e}") from e
        if not isinstance(content, dict):
            raise ScenarioValidationError(f"Scenario file {path} must hold a JSON object")
        logger.info("Loading scenario from %s", path)
        data = _merge_nested(data, content)
    scenario = _validate(data)
    if overrides:
        scenario = scenario.with_overrides(overrides)
    return scenario


def _merge_nested(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge_nested(merged[key], value)
        else:
            merged[key] = value
    return merged


def dump_scenario(scenario: NetworkScenario) -> str:
    return json.dumps(scenario.model_dump(), indent=2, sort_keys=True) + "\n"
