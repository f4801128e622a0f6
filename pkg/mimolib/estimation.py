import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Mapping, Set, Tuple

import numpy as np
from scipy import linalg

from .channel import LinkStatistics
from .errors import DegenerateStatisticsError, DimensionMismatchError, InvalidParameterError, UnknownUserError

logger = logging.getLogger("mimosim")

# (cell, user), both 0-indexed
UserId = Tuple[int, int]


@dataclass(frozen=True, eq=False)
class PilotConfig:
    """
    Pilot bookkeeping for one network.

    Attributes:
        tau_p (int): Pilot length in symbols
        tau_c (int): Coherence block length in symbols
        assignment (Dict[UserId, int]): Pilot index of every user
        pilot_powers (Dict[UserId, float]): Pilot power per symbol in mW
    """

    tau_p: int
    tau_c: int
    assignment: Dict[UserId, int] = field(repr=False)
    pilot_powers: Dict[UserId, float] = field(repr=False)

    def __post_init__(self):
        if self.tau_p < 1 or self.tau_p >= self.tau_c:
            raise InvalidParameterError(f"Need 1 <= tau_p < tau_c, got tau_p={self.tau_p}, tau_c={self.tau_c}")
        if set(self.assignment) != set(self.pilot_powers):
            raise InvalidParameterError("Every user needs both a pilot index and a pilot power")
        for user, index in self.assignment.items():
            if not 0 <= index < self.tau_p:
                raise InvalidParameterError(f"Pilot index {index} of user {user} is outside [0, {self.tau_p})")
        for user, power in self.pilot_powers.items():
            if not power > 0.0:
                raise InvalidParameterError(f"Pilot power of user {user} must be positive, got {power}")

    @classmethod
    def same_index(
        cls, num_cells: int, users_per_cell: int, tau_p: int, tau_c: int, pilot_power: float
    ) -> "PilotConfig":
        """User k of every cell transmits pilot k."""
        if users_per_cell > tau_p:
            raise InvalidParameterError(f"{users_per_cell} users per cell need at least as many pilots, got {tau_p}")
        users = [(cell, user) for cell in range(num_cells) for user in range(users_per_cell)]
        return cls(
            tau_p=tau_p,
            tau_c=tau_c,
            assignment={u: u[1] for u in users},
            pilot_powers={u: pilot_power for u in users},
        )

    @classmethod
    def from_table(cls, table: List[List[int]], tau_p: int, tau_c: int, pilot_power: float) -> "PilotConfig":
        """Explicit assignment given as one row of pilot indices per cell."""
        assignment = {(cell, user): index for cell, row in enumerate(table) for user, index in enumerate(row)}
        return cls(
            tau_p=tau_p,
            tau_c=tau_c,
            assignment=assignment,
            pilot_powers={u: pilot_power for u in assignment},
        )

    @property
    def prelog(self) -> float:
        return 1.0 - self.tau_p / self.tau_c

    @property
    def users(self) -> List[UserId]:
        return sorted(self.assignment)

    def pilot_of(self, user: UserId) -> int:
        try:
            return self.assignment[user]
        except KeyError:
            raise UnknownUserError(f"User {user} has no pilot assignment")

    def pilot_power(self, user: UserId) -> float:
        self.pilot_of(user)
        return self.pilot_powers[user]


def pilot_reuse_set(config: PilotConfig, cell: int, user: int) -> Set[UserId]:
    """All users sharing the pilot of (cell, user), the query user included."""
    pilot = config.pilot_of((cell, user))
    return {u for u, index in config.assignment.items() if index == pilot}


def pilot_sequences(tau_p: int) -> np.ndarray:
    """tau_p mutually orthogonal DFT pilot sequences as columns, each with squared norm tau_p."""
    n = np.arange(tau_p)
    return np.exp(-2j * np.pi * np.outer(n, n) / tau_p)


def received_pilot(
    channels: Mapping[UserId, np.ndarray], config: PilotConfig, noise: np.ndarray, target: UserId
) -> np.ndarray:
    """
    Project the received pilot block of one BS onto the pilot of `target`.

    `channels` maps every transmitting user to its channel toward the BS, either a length-M vector
    or a (batch, M) array. `noise` has shape (M, tau_p) or (batch, M, tau_p).
    """
    sequences = pilot_sequences(config.tau_p)
    noise = np.asarray(noise, dtype=complex)
    antennas, length = noise.shape[-2:]
    if length != config.tau_p:
        raise DimensionMismatchError(f"Noise block has {length} columns, expected tau_p={config.tau_p}")
    phi = sequences[:, config.pilot_of(target)]

    block = noise.copy()
    for user, h in channels.items():
        h = np.asarray(h)
        if h.shape[-1] != antennas:
            raise DimensionMismatchError(f"Channel of user {user} has length {h.shape[-1]}, expected {antennas}")
        sequence = sequences[:, config.pilot_of(user)]
        block = block + np.sqrt(config.pilot_power(user)) * h[..., :, None] * sequence
    return block @ phi.conj()


@dataclass(frozen=True, eq=False)
class EstimateStatistics:
    """
    Realization-independent estimation statistics of one pilot at one BS.

    Attributes:
        bs (int): Index of the observing BS
        pilot (int): Pilot index
        sharers (Tuple[UserId, ...]): Users transmitting this pilot
        a_coeffs (Dict[UserId, float]): tau_p * p_hat * beta * d of every sharer toward `bs`
        psi_inverse (np.ndarray): sum(a R) + sigma^2 I, the inverse of Psi
        est_cov (Dict[UserId, np.ndarray]): Covariance of the estimate of every sharer
    """

    bs: int
    pilot: int
    sharers: Tuple[UserId, ...]
    a_coeffs: Dict[UserId, float] = field(repr=False)
    psi_inverse: np.ndarray = field(repr=False)
    est_cov: Dict[UserId, np.ndarray] = field(repr=False, default_factory=dict)

    @cached_property
    def _factor(self):
        try:
            return linalg.cho_factor(self.psi_inverse, lower=True)
        except linalg.LinAlgError as e:
            raise DegenerateStatisticsError(f"Psi^-1 of pilot {self.pilot} at BS {self.bs} is not definite") from e

    @property
    def antennas(self) -> int:
        return self.psi_inverse.shape[0]

    def apply_psi(self, matrix: np.ndarray) -> np.ndarray:
        """Psi @ matrix through the Cholesky factor of Psi^-1."""
        return linalg.cho_solve(self._factor, matrix)

    @cached_property
    def psi(self) -> np.ndarray:
        return self.apply_psi(np.eye(self.antennas, dtype=complex))


def build_estimate_statistics(
    links: Mapping[UserId, LinkStatistics], config: PilotConfig, bs: int, pilot: int, noise_mw: float
) -> EstimateStatistics:
    """`links` holds the statistics toward `bs` of at least every user transmitting `pilot`."""
    if noise_mw <= 0.0:
        raise InvalidParameterError(f"Noise power must be positive, got {noise_mw}")
    sharers = tuple(sorted(u for u, index in config.assignment.items() if index == pilot))
    if not sharers:
        raise InvalidParameterError(f"No user transmits pilot {pilot}")
    missing = [u for u in sharers if u not in links]
    if missing:
        raise UnknownUserError(f"No link statistics toward BS {bs} for users {missing}")
    antennas = {links[u].antennas for u in sharers}
    if len(antennas) != 1:
        raise DimensionMismatchError(f"Links toward BS {bs} disagree on the antenna count: {sorted(antennas)}")

    a_coeffs = {u: config.tau_p * config.pilot_powers[u] * links[u].beta * links[u].d for u in sharers}
    psi_inverse = noise_mw * np.eye(antennas.pop(), dtype=complex)
    for u in sharers:
        psi_inverse = psi_inverse + a_coeffs[u] * links[u].R
    psi_inverse = 0.5 * (psi_inverse + psi_inverse.conj().T)

    stats = EstimateStatistics(bs=bs, pilot=pilot, sharers=sharers, a_coeffs=a_coeffs, psi_inverse=psi_inverse)
    for u in sharers:
        stats.est_cov[u] = estimate_covariance(links[u], stats, config.pilot_powers[u], config.tau_p)
    logger.debug("Built estimation statistics of pilot %d at BS %d for %d sharers", pilot, bs, len(sharers))
    return stats


def lmmse_estimate(
    stats: LinkStatistics, est_stats: EstimateStatistics, y_p: np.ndarray, pilot_power: float
) -> np.ndarray:
    """sqrt(p_hat) beta d R Psi y_p for a length-M vector or a (batch, M) array."""
    y_p = np.asarray(y_p, dtype=complex)
    if y_p.shape[-1] != est_stats.antennas or stats.antennas != est_stats.antennas:
        raise DimensionMismatchError(
            f"Received pilot has length {y_p.shape[-1]}, link has {stats.antennas} antennas, "
            f"estimator has {est_stats.antennas}"
        )
    whitened = est_stats.apply_psi(np.atleast_2d(y_p).T).T
    estimate = np.sqrt(pilot_power) * stats.beta * stats.d * (whitened @ stats.R.T)
    return estimate.reshape(y_p.shape)


def estimate_covariance(
    stats: LinkStatistics, est_stats: EstimateStatistics, pilot_power: float, tau_p: int
) -> np.ndarray:
    """p_hat beta^2 d^2 tau_p R Psi R."""
    covariance = stats.R @ est_stats.apply_psi(np.asarray(stats.R))
    covariance = pilot_power * stats.beta**2 * stats.d**2 * tau_p * covariance
    return 0.5 * (covariance + covariance.conj().T)
