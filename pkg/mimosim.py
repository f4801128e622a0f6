import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from rich.logging import RichHandler

from mimolib.errors import EXIT_NOT_CONVERGED, EXIT_OK, MimoError, report_error
from mimolib.experiments import (
    AsymptoticExperiment,
    ConvergenceExperiment,
    ModelComparisonExperiment,
    PowerExperiment,
    SatisfactionExperiment,
    TargetSpec,
    ValidationExperiment,
)
from mimolib.loadenv import env_out_dir, env_seed, load_mimosim_env
from mimolib.powerctl import Variant
from mimolib.reportwriter import write_output
from mimolib.scenario import PRESETS, NetworkScenario, load_scenario
from mimolib.strategy import Experiment

logger = logging.getLogger("mimosim")

DEFAULT_SWEEPS = {
    "antennas": [50, 100, 150],
    "scatterers": [11, 21, 31],
    "xi": [1.0, 1.25, 1.5, 1.75, 2.0],
}
DEFAULT_ASYMPTOTIC_ANTENNAS = [64, 128, 256, 512]


def parse_list(text: str, cast=float) -> List[Any]:
    return [cast(part) for part in text.split(",") if part.strip()]


def setup_variants(variant: str) -> List[Variant]:
    if variant == "both":
        return [Variant.Alg1, Variant.Alg2]
    return [Variant(variant)]


def setup_scenario(args: argparse.Namespace) -> NetworkScenario:
    overrides: Dict[str, Any] = {}
    seed = args.seed if args.seed is not None else env_seed()
    if seed is not None:
        overrides["seed"] = seed
    if args.drops is not None:
        overrides["experiment.num_drops"] = args.drops
    if args.mc is not None:
        overrides["experiment.monte_carlo_realizations"] = args.mc
    return load_scenario(args.scenario, args.preset, overrides)


def setup_targets(args: argparse.Namespace, scenario: NetworkScenario) -> TargetSpec:
    if args.xi is not None:
        return TargetSpec.parse(args.xi)
    return TargetSpec(low=scenario.experiment.xi, high=scenario.experiment.xi_high)


def setup_experiment(args: argparse.Namespace, scenario: NetworkScenario) -> Experiment:
    drops = scenario.experiment.num_drops
    variants = setup_variants(args.variant)
    if args.command == "validate":
        return ValidationExperiment(scenario, drops, scenario.experiment.monte_carlo_realizations)
    if args.command == "power":
        return PowerExperiment(scenario, setup_targets(args, scenario), variants, drops)
    if args.command == "converge":
        return ConvergenceExperiment(scenario, setup_targets(args, scenario), variants, args.drop)
    if args.command == "asymptotic":
        antennas = parse_list(args.antennas, int) if args.antennas else DEFAULT_ASYMPTOTIC_ANTENNAS
        return AsymptoticExperiment(scenario, antennas, args.drop)
    if args.kind == "models":
        return ModelComparisonExperiment(scenario, drops)
    if args.kind == "xi":
        grid = parse_list(args.values) if args.values else DEFAULT_SWEEPS["xi"]
        return SatisfactionExperiment(scenario, grid, variants, drops)
    values = parse_list(args.values, int) if args.values else DEFAULT_SWEEPS[args.kind]
    return ValidationExperiment(scenario, drops, scenario.experiment.monte_carlo_realizations, (args.kind, values))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="JSON scenario file, applied on top of the preset")
    common.add_argument("--preset", choices=sorted(PRESETS), default="paper", help="Base scenario preset")
    common.add_argument("--seed", type=int, help="Seed of every random stream (default: MIMOSIM_SEED or the scenario)")
    common.add_argument("--out", help="Output directory (default: MIMOSIM_OUT_DIR or ./results)")
    common.add_argument("--variant", choices=["alg1", "alg2", "both"], default="both", help="Power control update")
    common.add_argument("--xi", help="SE target in b/s/Hz, either <val> or <lo>:<hi> for per-user uniform targets")
    common.add_argument("--mc", type=int, help="Monte-Carlo realizations per drop")
    common.add_argument("--drops", type=int, help="Number of random user drops")
    common.add_argument("--verbose", "-v", action="store_true", help="Verbose output")

    parser = argparse.ArgumentParser(
        description="Simulate uplink Massive MIMO under double-scattering fading and minimize transmit power under SE targets."
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("validate", parents=[common], help="Closed-form SE against Monte-Carlo at full power")
    commands.add_parser("power", parents=[common], help="Fixed-point power control over many drops")
    converge = commands.add_parser("converge", parents=[common], help="Per-iteration trace on one drop")
    converge.add_argument("--drop", type=int, default=0, help="Drop index")
    asymptotic = commands.add_parser("asymptotic", parents=[common], help="SE against large-array limits")
    asymptotic.add_argument("--antennas", help="Comma-separated antenna counts")
    asymptotic.add_argument("--drop", type=int, default=0, help="Drop index")
    sweep = commands.add_parser("sweep", parents=[common], help="Parameter sweeps")
    sweep.add_argument("--kind", choices=["antennas", "scatterers", "xi", "models"], default="antennas")
    sweep.add_argument("--values", help="Comma-separated sweep values")
    return parser


def setup_logging(verbose: bool):
    if verbose:
        logging.basicConfig(format="%(message)s", datefmt="[%X]", handlers=[RichHandler(rich_tracebacks=True)])
        logger.setLevel(logging.DEBUG)
        logger.debug("Verbose logging enabled")
    else:
        logging.basicConfig(
            level=logging.INFO, format="%(asctime)s [%(levelname)s] %(message)s", datefmt="%Y-%m-%d %H:%M:%S"
        )
        logger.setLevel(logging.INFO)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    load_mimosim_env()

    try:
        scenario = setup_scenario(args)
        experiment = setup_experiment(args, scenario)
        experiment.setup()
        output = experiment.run()
        out_dir = Path(args.out or env_out_dir())
        write_output(output, out_dir)
    except MimoError as e:
        return report_error(e, args.command)

    if not output.converged:
        logger.error("At least one fixed-point run did not converge within max_iter")
        return EXIT_NOT_CONVERGED
    logger.info("Finished %s", args.command)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
