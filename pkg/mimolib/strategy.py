from abc import ABC
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List

from .scenario import NetworkScenario


class ExperimentKind(Enum):
    Validation = "validation"
    Power = "power"
    Convergence = "convergence"
    Asymptotic = "asymptotic"
    Satisfaction = "satisfaction"
    ModelComparison = "model_comparison"


@dataclass
class ExperimentOutput:
    """
    Everything an experiment produces, ready to be written out.

    Attributes:
        kind (ExperimentKind): Which experiment produced it
        records (List[Dict[str, Any]]): One entry per drop (and variant, where relevant)
        summary (Dict[str, Any]): Aggregates over all drops
        tables (Dict[str, List[Dict[str, Any]]]): Named per-user or CDF tables, written as CSV
        converged (bool): False if any fixed-point run hit max_iter
    """

    kind: ExperimentKind
    records: List[Dict[str, Any]] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    tables: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)
    converged: bool = True


class Experiment(ABC):
    """
    Abstract experiment over a scenario. It has a single setup step to validate and prepare its inputs,
    and then a run step that simulates every drop and aggregates the results.
    """

    kind: ExperimentKind

    def __init__(self, scenario: NetworkScenario):
        self.scenario = scenario

    def setup(self):
        raise NotImplementedError

    def run(self) -> ExperimentOutput:
        raise NotImplementedError
