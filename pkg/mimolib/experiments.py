import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .channel import keyed_stream
from .errors import InvalidParameterError
from .montecarlo import monte_carlo_sinr
from .powerctl import FeasibilityVerdict, FixedPointReport, QosTargets, Variant, solve_fixed_point
from .scenario import NetworkScenario, PowerControlSettings
from .sefficiency import AsymptoticCase, SinrModel, asymptotic_rate, orthogonality_measure
from .strategy import Experiment, ExperimentKind, ExperimentOutput
from .topology import MONTE_CARLO_STREAM, TARGET_STREAM, drop_for_index, drop_seed

logger = logging.getLogger("mimosim")

CDF_QUANTILES = np.round(np.linspace(0.0, 1.0, 21), 2)

VALIDATION_COLUMNS = [
    "drop",
    "cell",
    "user",
    "SE_closed_form",
    "SE_monte_carlo",
    "stderr",
    "signal",
    "NI",
    "CI",
    "NO",
]

SWEEP_FIELDS = {"antennas": "antennas", "scatterers": "num_scatterers"}


def cdf_rows(series: Dict[str, Sequence[float]]) -> List[Dict[str, Any]]:
    """Empirical quantiles of every series on a fixed grid, one row per quantile."""
    arrays = {name: np.asarray(values, dtype=float) for name, values in series.items()}
    rows = []
    for q in CDF_QUANTILES:
        row: Dict[str, Any] = {"quantile": float(q)}
        for name, values in arrays.items():
            row[name] = float(np.quantile(values, q)) if values.size else None
        rows.append(row)
    return rows


@dataclass(frozen=True)
class TargetSpec:
    """SE targets: uniform `low` for every user, or uniform random in [low, high]."""

    low: float
    high: Optional[float] = None

    @classmethod
    def parse(cls, text: str) -> "TargetSpec":
        try:
            if ":" in text:
                low, high = (float(part) for part in text.split(":", 1))
                return cls(low=low, high=high)
            return cls(low=float(text))
        except ValueError as e:
            raise InvalidParameterError(f"Cannot parse SE target {text!r}, expected <val> or <lo>:<hi>") from e

    def __post_init__(self):
        if self.low < 0.0 or (self.high is not None and self.high < self.low):
            raise InvalidParameterError(f"Invalid SE target range {self.label}")

    @property
    def label(self) -> str:
        return f"{self.low}" if self.high is None else f"{self.low}:{self.high}"

    def draw(self, scenario: NetworkScenario, rng: np.random.Generator) -> QosTargets:
        pilots = scenario.pilots
        p_max = scenario.power_control.p_max_mw
        if self.high is None:
            return QosTargets.uniform(self.low, scenario.num_users, pilots.tau_p, pilots.tau_c, p_max)
        return QosTargets.random_uniform(
            self.low, self.high, scenario.num_users, pilots.tau_p, pilots.tau_c, p_max, rng
        )


def full_power(scenario: NetworkScenario) -> np.ndarray:
    return np.full(scenario.num_users, scenario.power_control.p_max_mw)


def solve(variant: Variant, model: SinrModel, targets: QosTargets, settings: PowerControlSettings) -> FixedPointReport:
    return solve_fixed_point(
        variant,
        model,
        targets,
        epsilon=settings.epsilon,
        max_iter=settings.max_iter,
        order=settings.update_order,
        tolerance=settings.satisfaction_tolerance,
    )


class ValidationExperiment(Experiment):
    """Closed-form SE against Monte-Carlo SE at full power, optionally over a sweep of antennas or scatterers."""

    kind = ExperimentKind.Validation

    def __init__(
        self,
        scenario: NetworkScenario,
        num_drops: int,
        num_mc: int,
        sweep: Optional[Tuple[str, Sequence[int]]] = None,
    ):
        super().__init__(scenario)
        self.num_drops = num_drops
        self.num_mc = num_mc
        self.sweep = sweep
        self.variants: List[Tuple[str, NetworkScenario]] = []

    def setup(self):
        if self.num_drops < 1:
            raise InvalidParameterError(f"Need at least one drop, got {self.num_drops}")
        if self.num_mc < 1000:
            logger.warning("Only %d Monte-Carlo realizations, estimates will be noisy", self.num_mc)
        if self.sweep is None:
            self.variants = [("base", self.scenario)]
            return
        name, values = self.sweep
        if name not in SWEEP_FIELDS:
            raise InvalidParameterError(f"Cannot sweep {name!r}, expected one of {sorted(SWEEP_FIELDS)}")
        key = SWEEP_FIELDS[name]
        self.variants = [(f"{key}={value}", self.scenario.with_overrides({key: value})) for value in values]

    def run(self) -> ExperimentOutput:
        output = ExperimentOutput(kind=self.kind)
        for label, scenario in self.variants:
            rows: List[Dict[str, Any]] = []
            for drop_index in range(self.num_drops):
                logger.info("Validation %s: drop %d/%d", label, drop_index + 1, self.num_drops)
                drop = drop_for_index(scenario, drop_index)
                model = SinrModel.from_network(drop.network)
                powers = full_power(scenario)
                closed_se = model.se(powers)
                signal, ni, ci, no = model.components(powers)
                estimates = monte_carlo_sinr(
                    drop.network,
                    powers,
                    self.num_mc,
                    np.random.SeedSequence(scenario.seed, spawn_key=(drop_index, MONTE_CARLO_STREAM)),
                    batch_size=scenario.experiment.batch_size,
                )
                for i, user in enumerate(model.users):
                    estimate = estimates[user]
                    rows.append(
                        {
                            "drop": drop_index,
                            "cell": user[0],
                            "user": user[1],
                            "SE_closed_form": float(closed_se[i]),
                            "SE_monte_carlo": estimate.se,
                            "stderr": estimate.se_stderr,
                            "signal": float(signal[i]),
                            "NI": float(ni[i]),
                            "CI": float(ci[i]),
                            "NO": float(no[i]),
                        }
                    )
            closed = np.array([row["SE_closed_form"] for row in rows])
            simulated = np.array([row["SE_monte_carlo"] for row in rows])
            gaps = np.abs(closed - simulated) / np.maximum(closed, 1e-12)
            output.tables[f"validation_{label}"] = rows
            output.tables[f"validation_cdf_{label}"] = cdf_rows({"closed_form": closed, "monte_carlo": simulated})
            output.summary[label] = {
                "drops": self.num_drops,
                "monte_carlo_realizations": self.num_mc,
                "max_relative_gap": float(np.max(gaps)),
                "mean_relative_gap": float(np.mean(gaps)),
                "mean_se_closed_form": float(np.mean(closed)),
                "mean_se_monte_carlo": float(np.mean(simulated)),
            }
        return output


class PowerExperiment(Experiment):
    """Both fixed-point algorithms over many drops, with satisfaction and power statistics per variant."""

    kind = ExperimentKind.Power

    def __init__(
        self,
        scenario: NetworkScenario,
        targets: TargetSpec,
        variants: Sequence[Union[Variant, str]],
        num_drops: int,
        keep_tables: bool = True,
    ):
        super().__init__(scenario)
        self.targets = targets
        self.variants = [Variant(v) for v in variants]
        self.num_drops = num_drops
        self.keep_tables = keep_tables

    def setup(self):
        if not self.variants:
            raise InvalidParameterError("Need at least one algorithm variant")
        if self.num_drops < 1:
            raise InvalidParameterError(f"Need at least one drop, got {self.num_drops}")

    def run(self) -> ExperimentOutput:
        output = ExperimentOutput(kind=self.kind)
        settings = self.scenario.power_control
        p_max = settings.p_max_mw
        user_rows: List[Dict[str, Any]] = []
        per_variant: Dict[Variant, Dict[str, List[Any]]] = {
            v: {"satisfied": [], "all_satisfied": [], "feasible_powers": [], "congested_totals": [], "powers": []}
            for v in self.variants
        }

        for drop_index in range(self.num_drops):
            drop = drop_for_index(self.scenario, drop_index)
            model = SinrModel.from_network(drop.network)
            targets = self.targets.draw(self.scenario, keyed_stream(drop_seed(self.scenario, drop_index), TARGET_STREAM))
            reports = {v: solve(v, model, targets, settings) for v in self.variants}
            # a drop counts as feasible when the capped update satisfies everyone
            reference = reports.get(Variant.Alg1) or solve(Variant.Alg1, model, targets, settings)
            feasible = reference.verdict == FeasibilityVerdict.FeasibleAllSatisfied
            logger.info(
                "Power drop %d/%d: %s", drop_index + 1, self.num_drops, "feasible" if feasible else "congested"
            )

            for variant, report in reports.items():
                output.converged = output.converged and report.converged
                stats = per_variant[variant]
                stats["satisfied"].extend(report.satisfied.tolist())
                stats["all_satisfied"].append(report.verdict == FeasibilityVerdict.FeasibleAllSatisfied)
                stats["powers"].extend(report.powers.tolist())
                if feasible:
                    stats["feasible_powers"].extend(report.powers.tolist())
                else:
                    stats["congested_totals"].append(report.total_power)
                output.records.append(
                    {
                        "drop": drop_index,
                        "variant": variant.value,
                        "feasible": feasible,
                        "verdict": report.verdict.value,
                        "converged": report.converged,
                        "iterations": report.iterations,
                        "total_power_mW": report.total_power,
                        "satisfied_users": int(np.count_nonzero(report.satisfied)),
                    }
                )
                if self.keep_tables:
                    for i, user in enumerate(report.users):
                        user_rows.append(
                            {
                                "drop": drop_index,
                                "variant": variant.value,
                                "cell": user[0],
                                "user": user[1],
                                "xi": float(targets.xi[i]),
                                "p_star_mW": float(report.powers[i]),
                                "sinr": float(report.sinr[i]),
                                "target": float(targets.nu[i]),
                                "satisfied": bool(report.satisfied[i]),
                            }
                        )

        for variant, stats in per_variant.items():
            feasible_powers = np.asarray(stats["feasible_powers"], dtype=float)
            mean_feasible = float(np.mean(feasible_powers)) if feasible_powers.size else None
            output.summary[variant.value] = {
                "targets": self.targets.label,
                "drops": self.num_drops,
                "satisfaction_probability": float(np.mean(stats["satisfied"])),
                "all_satisfied_probability": float(np.mean(stats["all_satisfied"])),
                "feasible_drops": int(len(feasible_powers) // self.scenario.num_users),
                "mean_power_feasible_mW": mean_feasible,
                "full_power_ratio": p_max / mean_feasible if mean_feasible else None,
                "mean_total_power_congested_mW": (
                    float(np.mean(stats["congested_totals"])) if stats["congested_totals"] else None
                ),
                "mean_power_mW": float(np.mean(stats["powers"])),
            }
        capped = per_variant.get(Variant.Alg1, {}).get("congested_totals")
        removed = per_variant.get(Variant.Alg2, {}).get("congested_totals")
        if capped and removed:
            output.summary["alg2_saving_congested"] = relative_saving(float(np.mean(capped)), float(np.mean(removed)))
        if self.keep_tables:
            output.tables["power_users"] = user_rows
            output.tables["power_cdf"] = cdf_rows(
                {variant.value: per_variant[variant]["powers"] for variant in self.variants}
            )
        return output


class ConvergenceExperiment(Experiment):
    """Per-iteration total power and convergence ratio of every variant on one drop."""

    kind = ExperimentKind.Convergence

    def __init__(
        self,
        scenario: NetworkScenario,
        targets: TargetSpec,
        variants: Sequence[Union[Variant, str]],
        drop_index: int = 0,
    ):
        super().__init__(scenario)
        self.targets = targets
        self.variants = [Variant(v) for v in variants]
        self.drop_index = drop_index
        self.model: Optional[SinrModel] = None
        self.qos: Optional[QosTargets] = None

    def setup(self):
        drop = drop_for_index(self.scenario, self.drop_index)
        self.model = SinrModel.from_network(drop.network)
        stream = keyed_stream(drop_seed(self.scenario, self.drop_index), TARGET_STREAM)
        self.qos = self.targets.draw(self.scenario, stream)

    def run(self) -> ExperimentOutput:
        if self.model is None or self.qos is None:
            self.setup()
        assert self.model is not None and self.qos is not None
        output = run_convergence_trace(self.model, self.qos, self.variants, self.scenario.power_control)
        output.summary["drop"] = self.drop_index
        output.summary["targets"] = self.targets.label
        return output


def run_convergence_trace(
    model: SinrModel,
    targets: QosTargets,
    variants: Sequence[Union[Variant, str]],
    settings: PowerControlSettings,
) -> ExperimentOutput:
    output = ExperimentOutput(kind=ExperimentKind.Convergence)
    rows: List[Dict[str, Any]] = []
    for variant in (Variant(v) for v in variants):
        report = solve(variant, model, targets, settings)
        output.converged = output.converged and report.converged
        for record in report.history:
            rows.append(
                {"variant": variant.value, "n": record.n, "P_tot": record.total_power, "gamma": record.gamma}
            )
        output.records.append(report.to_dict())
        output.summary[variant.value] = {
            "iterations": report.iterations,
            "converged": report.converged,
            "verdict": report.verdict.value,
            "total_power_mW": report.total_power,
        }
    output.tables["convergence"] = rows
    return output


class AsymptoticExperiment(Experiment):
    """Closed-form SE of one drop as the array grows, next to the large-array limits."""

    kind = ExperimentKind.Asymptotic

    def __init__(self, scenario: NetworkScenario, antennas: Sequence[int], drop_index: int = 0):
        super().__init__(scenario)
        self.antennas = list(antennas)
        self.drop_index = drop_index

    def setup(self):
        if not self.antennas or min(self.antennas) < 1:
            raise InvalidParameterError(f"Invalid antenna grid {self.antennas}")

    def run(self) -> ExperimentOutput:
        output = ExperimentOutput(kind=self.kind)
        rows: List[Dict[str, Any]] = []
        powers = full_power(self.scenario)
        for antennas in self.antennas:
            logger.info("Asymptotic sweep: M=%d", antennas)
            drop = drop_for_index(self.scenario, self.drop_index, antennas=antennas)
            model = SinrModel.from_network(drop.network)
            rich = SinrModel.from_network(drop.network, finite_scatterers=False)
            se = model.se(powers)
            gaps = []
            for i, user in enumerate(model.users):
                case_a = asymptotic_rate(AsymptoticCase.CoherentInterference, model, powers, user)
                case_b = asymptotic_rate(AsymptoticCase.FiniteScatterers, model, powers, user)
                case_c = asymptotic_rate(AsymptoticCase.PilotContamination, rich, powers, user)
                own = drop.network.link(user, user[0]).R
                sharers = [v for v in drop.network.estimator_of(user).sharers if v != user]
                overlap = max(
                    (orthogonality_measure(own, drop.network.link(v, user[0]).R) for v in sharers), default=0.0
                )
                gap = abs(se[i] - case_a.se) / case_a.se if case_a.se else None
                if gap is not None:
                    gaps.append(gap)
                rows.append(
                    {
                        "M": antennas,
                        "cell": user[0],
                        "user": user[1],
                        "SE": float(se[i]),
                        "SE_case_a": case_a.se,
                        "SE_case_b": case_b.se,
                        "SE_case_c": case_c.se,
                        "max_overlap": overlap,
                        "gap_case_a": gap,
                    }
                )
            output.summary[f"M={antennas}"] = {"mean_gap_case_a": float(np.mean(gaps)) if gaps else None}
        output.tables["asymptotic"] = rows
        return output


class SatisfactionExperiment(Experiment):
    """Satisfaction probability of every variant over a grid of uniform SE targets."""

    kind = ExperimentKind.Satisfaction

    def __init__(
        self,
        scenario: NetworkScenario,
        xi_grid: Sequence[float],
        variants: Sequence[Union[Variant, str]],
        num_drops: int,
    ):
        super().__init__(scenario)
        self.xi_grid = list(xi_grid)
        self.variants = [Variant(v) for v in variants]
        self.num_drops = num_drops

    def setup(self):
        if not self.xi_grid:
            raise InvalidParameterError("Empty SE target grid")

    def run(self) -> ExperimentOutput:
        output = ExperimentOutput(kind=self.kind)
        rows: List[Dict[str, Any]] = []
        for xi in self.xi_grid:
            logger.info("Satisfaction sweep: xi=%s", xi)
            experiment = PowerExperiment(self.scenario, TargetSpec(low=xi), self.variants, self.num_drops, False)
            experiment.setup()
            result = experiment.run()
            output.converged = output.converged and result.converged
            for variant in self.variants:
                summary = result.summary[variant.value]
                rows.append(
                    {
                        "xi": xi,
                        "variant": variant.value,
                        "satisfaction_probability": summary["satisfaction_probability"],
                        "all_satisfied_probability": summary["all_satisfied_probability"],
                        "mean_power_mW": summary["mean_power_mW"],
                    }
                )
        output.tables["satisfaction"] = rows
        output.summary["xi_grid"] = self.xi_grid
        return output


class ModelComparisonExperiment(Experiment):
    """
    Full-power SE under the double-scattering channel against correlated Rayleigh fading with the same
    local-scattering covariances, and with exponential correlation.
    """

    kind = ExperimentKind.ModelComparison

    def __init__(self, scenario: NetworkScenario, num_drops: int):
        super().__init__(scenario)
        self.num_drops = num_drops

    def setup(self):
        if self.num_drops < 1:
            raise InvalidParameterError(f"Need at least one drop, got {self.num_drops}")

    def run(self) -> ExperimentOutput:
        output = ExperimentOutput(kind=self.kind)
        local = self.scenario.with_overrides({"covariance.model": "local_scattering"})
        exponential = self.scenario.with_overrides({"covariance.model": "exponential"})
        powers = full_power(self.scenario)
        series: Dict[str, List[float]] = {"double_scattering": [], "rayleigh_local": [], "rayleigh_exponential": []}
        for drop_index in range(self.num_drops):
            logger.info("Model comparison: drop %d/%d", drop_index + 1, self.num_drops)
            network = drop_for_index(local, drop_index).network
            series["double_scattering"].extend(SinrModel.from_network(network).se(powers).tolist())
            series["rayleigh_local"].extend(
                SinrModel.from_network(network, finite_scatterers=False).se(powers).tolist()
            )
            exponential_network = drop_for_index(exponential, drop_index).network
            series["rayleigh_exponential"].extend(
                SinrModel.from_network(exponential_network, finite_scatterers=False).se(powers).tolist()
            )
        output.tables["model_cdf"] = cdf_rows(series)
        output.summary = {name: {"mean_se": float(np.mean(values))} for name, values in series.items()}
        return output


def _run(experiment: Experiment) -> ExperimentOutput:
    experiment.setup()
    return experiment.run()


def run_validation(
    scenario: NetworkScenario,
    num_drops: int,
    num_mc: int,
    sweep: Optional[Tuple[str, Sequence[int]]] = None,
) -> ExperimentOutput:
    return _run(ValidationExperiment(scenario, num_drops, num_mc, sweep))


def run_power_experiment(
    scenario: NetworkScenario,
    targets: TargetSpec,
    variants: Sequence[Union[Variant, str]],
    num_drops: int,
) -> ExperimentOutput:
    return _run(PowerExperiment(scenario, targets, variants, num_drops))


def run_asymptotic_sweep(scenario: NetworkScenario, antennas: Sequence[int], drop_index: int = 0) -> ExperimentOutput:
    return _run(AsymptoticExperiment(scenario, antennas, drop_index))


def run_satisfaction_sweep(
    scenario: NetworkScenario,
    xi_grid: Sequence[float],
    variants: Sequence[Union[Variant, str]],
    num_drops: int,
) -> ExperimentOutput:
    return _run(SatisfactionExperiment(scenario, xi_grid, variants, num_drops))


def run_model_comparison(scenario: NetworkScenario, num_drops: int) -> ExperimentOutput:
    return _run(ModelComparisonExperiment(scenario, num_drops))


def relative_saving(alg1_total: float, alg2_total: float) -> float:
    if alg1_total <= 0.0 or not math.isfinite(alg1_total):
        raise InvalidParameterError(f"Reference total power must be positive, got {alg1_total}")
    return (alg1_total - alg2_total) / alg1_total
