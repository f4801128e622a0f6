import logging
from typing import Dict, List, Mapping, Tuple

from .channel import LinkStatistics
from .errors import DimensionMismatchError, InvalidParameterError, UnknownUserError
from .estimation import EstimateStatistics, PilotConfig, UserId, build_estimate_statistics

logger = logging.getLogger("mimosim")

# (serving cell, user, observing BS)
LinkId = Tuple[int, int, int]


class NetworkStatistics:
    """
    Large-scale statistics of a whole multi-cell network.

    Attributes:
        num_cells (int): Number of cells, one BS each
        users_per_cell (int): Users served in every cell
        links (Dict[LinkId, LinkStatistics]): Statistics of every (cell, user, bs) triple
        pilots (PilotConfig): Pilot bookkeeping
        noise_mw (float): Noise power per symbol in mW
    """

    def __init__(
        self,
        num_cells: int,
        users_per_cell: int,
        links: Mapping[LinkId, LinkStatistics],
        pilots: PilotConfig,
        noise_mw: float,
    ):
        if num_cells < 1 or users_per_cell < 1:
            raise InvalidParameterError(f"Need at least one cell and one user, got {num_cells}x{users_per_cell}")
        if noise_mw <= 0.0:
            raise InvalidParameterError(f"Noise power must be positive, got {noise_mw}")
        self.num_cells = num_cells
        self.users_per_cell = users_per_cell
        self.links: Dict[LinkId, LinkStatistics] = dict(links)
        self.pilots = pilots
        self.noise_mw = noise_mw
        self._estimators: Dict[Tuple[int, int], EstimateStatistics] = {}

        missing = [
            (cell, user, bs)
            for (cell, user) in self.users()
            for bs in range(num_cells)
            if (cell, user, bs) not in self.links
        ]
        if missing:
            raise UnknownUserError(f"Missing link statistics for {len(missing)} triples, first {missing[0]}")
        if set(pilots.assignment) != set(self.users()):
            raise InvalidParameterError("Pilot assignment does not cover exactly the users of the network")
        antennas = {stats.antennas for stats in self.links.values()}
        if len(antennas) != 1:
            raise DimensionMismatchError(f"Links disagree on the antenna count: {sorted(antennas)}")
        self.antennas = antennas.pop()

    @property
    def num_users(self) -> int:
        return self.num_cells * self.users_per_cell

    def users(self) -> List[UserId]:
        """Users in stacked order: index = cell * users_per_cell + user."""
        return [(cell, user) for cell in range(self.num_cells) for user in range(self.users_per_cell)]

    def index(self, user: UserId) -> int:
        cell, k = user
        if not (0 <= cell < self.num_cells and 0 <= k < self.users_per_cell):
            raise UnknownUserError(f"User {user} is not part of the network")
        return cell * self.users_per_cell + k

    def link(self, user: UserId, bs: int) -> LinkStatistics:
        try:
            return self.links[(user[0], user[1], bs)]
        except KeyError:
            raise UnknownUserError(f"No link statistics from user {user} to BS {bs}")

    def links_toward(self, bs: int) -> Dict[UserId, LinkStatistics]:
        return {user: self.link(user, bs) for user in self.users()}

    def estimate_statistics(self, bs: int, pilot: int) -> EstimateStatistics:
        """Estimation statistics of one pilot at one BS, built once and cached."""
        key = (bs, pilot)
        if key not in self._estimators:
            self._estimators[key] = build_estimate_statistics(
                self.links_toward(bs), self.pilots, bs, pilot, self.noise_mw
            )
        return self._estimators[key]

    def estimator_of(self, user: UserId) -> EstimateStatistics:
        """Estimation statistics used by the serving BS of `user`."""
        return self.estimate_statistics(user[0], self.pilots.pilot_of(user))
