import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .channel import LinkStatistics, keyed_stream, pathloss_db
from .covariance import CovarianceKind, CovarianceSpec, build_covariance
from .errors import GeometryError
from .network import LinkId, NetworkStatistics
from .scenario import NetworkScenario
from .units import db_to_linear

logger = logging.getLogger("mimosim")

MAX_PLACEMENT_ATTEMPTS = 1_000_000

# sub-streams of one drop
GEOMETRY_STREAM = 0
MONTE_CARLO_STREAM = 1
TARGET_STREAM = 2


@dataclass
class Drop:
    """
    One random placement of users with the resulting large-scale statistics.

    Attributes:
        bs_positions (np.ndarray): (L, 2) BS coordinates in km
        user_positions (np.ndarray): (L, K, 2) user coordinates in km, indexed by serving cell
        distances_km (np.ndarray): (L, K, L) distance from user (l', k') to BS l
        shadow_db (np.ndarray): (L, K, L) shadow fading draws
        beta (np.ndarray): (L, K, L) linear large-scale gains
        network (NetworkStatistics): Link statistics of every (cell, user, bs) triple
    """

    bs_positions: np.ndarray
    user_positions: np.ndarray
    distances_km: np.ndarray
    shadow_db: np.ndarray
    beta: np.ndarray
    network: NetworkStatistics


def bs_positions(scenario: NetworkScenario) -> np.ndarray:
    """BSs at the centers of square cells tiled row by row."""
    side = scenario.cell_side_km
    cols = scenario.grid_columns
    cells = np.arange(scenario.num_cells)
    return np.stack([(cells % cols + 0.5) * side, (cells // cols + 0.5) * side], axis=1)


def drop_seed(scenario: NetworkScenario, drop_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(scenario.seed, spawn_key=(drop_index,))


def _place_users(scenario: NetworkScenario, centers: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    half = scenario.cell_side_km / 2.0
    positions = np.empty((scenario.num_cells, scenario.users_per_cell, 2))
    attempts = 0
    for cell in range(scenario.num_cells):
        for user in range(scenario.users_per_cell):
            while True:
                if attempts >= MAX_PLACEMENT_ATTEMPTS:
                    raise GeometryError(
                        f"Placed no valid user after {MAX_PLACEMENT_ATTEMPTS} attempts "
                        f"(cell side {scenario.cell_side_km:.4f} km, min distance {scenario.min_distance_km} km)"
                    )
                attempts += 1
                candidate = centers[cell] + rng.uniform(-half, half, size=2)
                if np.hypot(*(candidate - centers[cell])) >= scenario.min_distance_km:
                    positions[cell, user] = candidate
                    break
    return positions


def _covariance_spec(
    scenario: NetworkScenario, dimension: int, angle: float, scatterer_side: bool
) -> CovarianceSpec:
    settings = scenario.covariance
    kind = CovarianceKind(settings.scatterer_model if scatterer_side else settings.model)
    return CovarianceSpec(
        kind=kind,
        dimension=dimension,
        angle=angle,
        angular_std=math.radians(settings.scatterer_angular_std_deg if scatterer_side else settings.angular_std_deg),
        correlation=settings.correlation,
        antenna_spacing=settings.scatterer_spacing if scatterer_side else settings.antenna_spacing,
    )


def drop_users(scenario: NetworkScenario, rng: np.random.Generator, antennas: Optional[int] = None) -> Drop:
    """
    Place every user uniformly in its square cell, at least the minimum distance away from its BS,
    and build the link statistics toward every BS with fresh shadow fading.
    """
    antennas = antennas or scenario.antennas
    centers = bs_positions(scenario)
    positions = _place_users(scenario, centers, rng)

    offsets = positions[:, :, None, :] - centers[None, None, :, :]
    distances = np.hypot(offsets[..., 0], offsets[..., 1])
    # users of other cells can sit closer to a BS than the serving minimum; the pathloss model floors there
    distances = np.maximum(distances, scenario.min_distance_km)
    shadow = rng.normal(0.0, scenario.shadow_std_db, size=distances.shape)
    beta = db_to_linear(pathloss_db(distances, shadow) - scenario.penetration_loss_db)
    angles = np.arctan2(offsets[..., 1], offsets[..., 0])

    links: Dict[LinkId, LinkStatistics] = {}
    for cell in range(scenario.num_cells):
        for user in range(scenario.users_per_cell):
            for bs in range(scenario.num_cells):
                angle = float(angles[cell, user, bs])
                R = build_covariance(_covariance_spec(scenario, antennas, angle, scatterer_side=False))
                Rtilde = build_covariance(
                    _covariance_spec(scenario, scenario.num_scatterers, angle + math.pi, scatterer_side=True)
                )
                links[(cell, user, bs)] = LinkStatistics(beta=float(beta[cell, user, bs]), R=R, Rtilde=Rtilde)

    network = NetworkStatistics(
        num_cells=scenario.num_cells,
        users_per_cell=scenario.users_per_cell,
        links=links,
        pilots=scenario.pilot_config(),
        noise_mw=scenario.noise_mw,
    )
    logger.debug("Dropped %d users over %d cells", network.num_users, scenario.num_cells)
    return Drop(
        bs_positions=centers,
        user_positions=positions,
        distances_km=distances,
        shadow_db=shadow,
        beta=beta,
        network=network,
    )


def drop_for_index(scenario: NetworkScenario, drop_index: int, antennas: Optional[int] = None) -> Drop:
    """The drop with the given index, reproducible on its own from the scenario seed."""
    return drop_users(scenario, keyed_stream(drop_seed(scenario, drop_index), GEOMETRY_STREAM), antennas)
