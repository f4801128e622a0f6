"""Total uplink power minimization under per-user SE targets.

The SINR constraint of user u, p_u signal_u >= nu_u (NI_u(p) + CI_u(p) + NO_u), is rearranged with every
own-power term moved to the left, which gives the fixed-point map

    I_u(p) = nu_u (sum_{v != u} p_v (NI_uv + CI_uv) + NO_u) / (signal_u - nu_u (NI_uu + CI_uu))

I_u does not depend on p_u, so a user without interferers reaches its fixed point in one update.

Algorithm 1 caps the update at P_max, Algorithm 2 backs unsatisfiable users off to P_max^2 / I_u.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Union

import numpy as np

from .errors import DegenerateStatisticsError, DimensionMismatchError, InvalidParameterError, UnknownUserError
from .estimation import UserId
from .sefficiency import SinrModel

logger = logging.getLogger("mimosim")

DEFAULT_EPSILON = 1e-3
DEFAULT_MAX_ITER = 500
SATISFACTION_TOLERANCE = 1e-6


def sinr_target(xi, tau_p: int, tau_c: int):
    """SINR needed for an SE of `xi` b/s/Hz: 2^(xi tau_c/(tau_c - tau_p)) - 1."""
    if not 0 < tau_p < tau_c:
        raise InvalidParameterError(f"Need 0 < tau_p < tau_c, got tau_p={tau_p}, tau_c={tau_c}")
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0.0):
        raise InvalidParameterError("SE targets must be non-negative")
    value = np.exp2(xi * tau_c / (tau_c - tau_p)) - 1.0
    return float(value) if value.ndim == 0 else value


@dataclass(frozen=True, eq=False)
class QosTargets:
    """
    Per-user QoS requirements in stacked user order.

    Attributes:
        xi (np.ndarray): SE targets in b/s/Hz
        nu (np.ndarray): Equivalent SINR targets
        p_max (np.ndarray): Power caps in mW
    """

    xi: np.ndarray
    nu: np.ndarray
    p_max: np.ndarray

    def __post_init__(self):
        if not (self.xi.shape == self.nu.shape == self.p_max.shape):
            raise DimensionMismatchError("xi, nu and p_max must have one entry per user")
        if np.any(self.p_max <= 0.0):
            raise InvalidParameterError("Power caps must be positive")
        if np.any((self.xi > 0.0) != (self.nu > 0.0)):
            raise InvalidParameterError("A positive SE target must map to a positive SINR target")

    @classmethod
    def from_xi(cls, xi, tau_p: int, tau_c: int, p_max) -> "QosTargets":
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        p_max = np.broadcast_to(np.asarray(p_max, dtype=float), xi.shape).copy()
        return cls(xi=xi, nu=np.atleast_1d(sinr_target(xi, tau_p, tau_c)), p_max=p_max)

    @classmethod
    def uniform(cls, xi: float, num_users: int, tau_p: int, tau_c: int, p_max: float) -> "QosTargets":
        return cls.from_xi(np.full(num_users, xi), tau_p, tau_c, p_max)

    @classmethod
    def random_uniform(
        cls, low: float, high: float, num_users: int, tau_p: int, tau_c: int, p_max: float, rng: np.random.Generator
    ) -> "QosTargets":
        """Targets drawn independently and uniformly in [low, high]."""
        if high < low:
            raise InvalidParameterError(f"Empty target range [{low}, {high}]")
        return cls.from_xi(rng.uniform(low, high, size=num_users), tau_p, tau_c, p_max)

    @property
    def num_users(self) -> int:
        return self.xi.shape[0]


class InterferenceFunction:
    """
    The standard interference function of every user, evaluated on stacked power vectors.

    Users whose own-power NI and CI terms eat the whole signal coefficient can never reach their target;
    `degenerate` marks them and `evaluate` returns +inf for them.
    """

    def __init__(self, model: SinrModel, targets: QosTargets):
        if targets.num_users != model.num_users:
            raise DimensionMismatchError(f"{targets.num_users} targets for {model.num_users} users")
        self.model = model
        self.targets = targets
        nu = targets.nu
        own = model.self_interference
        coupling = model.ni_gain + model.ci_gain - np.diag(own)
        self.coupling = nu[:, None] * coupling
        self.constant = nu * model.noise
        self.denominator = model.signal_gain - nu * own
        self.degenerate = (model.signal_gain <= 0.0) | (self.denominator <= 0.0)
        if np.any(self.degenerate):
            logger.warning(
                "%d users cannot reach their SINR target at any power", int(np.count_nonzero(self.degenerate))
            )

    @property
    def p_max(self) -> np.ndarray:
        return self.targets.p_max

    def _check(self, powers) -> np.ndarray:
        powers = np.asarray(powers, dtype=float)
        if powers.shape != (self.model.num_users,):
            raise DimensionMismatchError(f"Expected {self.model.num_users} powers, got shape {powers.shape}")
        if np.any(powers < 0.0):
            raise InvalidParameterError("Data powers must be non-negative")
        return powers

    def evaluate(self, powers) -> np.ndarray:
        powers = self._check(powers)
        numerator = self.coupling @ powers + self.constant
        with np.errstate(divide="ignore", invalid="ignore"):
            values = numerator / self.denominator
        return np.where(self.degenerate, np.inf, values)

    def evaluate_user(self, index: int, powers: np.ndarray) -> float:
        if self.degenerate[index]:
            return math.inf
        return float((self.coupling[index] @ powers + self.constant[index]) / self.denominator[index])


def interference_function(
    user: Union[UserId, int], powers, model: SinrModel, targets: QosTargets
) -> float:
    """I_u(p) in mW for one user, raising on statistics that leave no positive denominator."""
    function = InterferenceFunction(model, targets)
    powers = function._check(powers)
    if isinstance(user, int):
        index = user
    else:
        try:
            index = model.users.index(user)
        except ValueError:
            raise UnknownUserError(f"User {user} is not part of the model")
    if model.signal_gain[index] <= 0.0:
        raise DegenerateStatisticsError(f"User {model.users[index]} has a zero signal coefficient")
    if function.denominator[index] <= 0.0:
        raise DegenerateStatisticsError(
            f"Own-user interference of {model.users[index]} exceeds its signal at SINR target {targets.nu[index]:.4g}"
        )
    return function.evaluate_user(index, powers)


class UpdateOrder(str, Enum):
    Jacobi = "jacobi"
    GaussSeidel = "gauss-seidel"


class Variant(str, Enum):
    # spend maximum power on unsatisfied users
    Alg1 = "alg1"
    # softly remove unsatisfied users
    Alg2 = "alg2"


def _constrained(value: float, p_max: float) -> float:
    return min(value, p_max)


def _soft_removal(value: float, p_max: float) -> float:
    return value if value <= p_max else p_max**2 / value


def _step(powers, function: InterferenceFunction, update, order: UpdateOrder) -> np.ndarray:
    powers = function._check(powers)
    p_max = function.p_max
    if order == UpdateOrder.Jacobi:
        values = function.evaluate(powers)
        return np.array([update(value, cap) for value, cap in zip(values, p_max)])
    updated = powers.copy()
    for i in range(updated.shape[0]):
        updated[i] = update(function.evaluate_user(i, updated), p_max[i])
    return updated


def algorithm1_step(powers, function: InterferenceFunction, order: UpdateOrder = UpdateOrder.Jacobi) -> np.ndarray:
    """p(n) = min(I(p(n-1)), P_max)."""
    return _step(powers, function, _constrained, UpdateOrder(order))


def algorithm2_step(powers, function: InterferenceFunction, order: UpdateOrder = UpdateOrder.Jacobi) -> np.ndarray:
    """p(n) = I(p(n-1)) where I <= P_max, P_max^2 / I otherwise."""
    return _step(powers, function, _soft_removal, UpdateOrder(order))


class FeasibilityVerdict(str, Enum):
    FeasibleAllSatisfied = "feasible_all_satisfied"
    CongestedPartial = "congested_partial"


@dataclass
class IterationRecord:
    n: int
    total_power: float
    gamma: Optional[float]


@dataclass
class FixedPointReport:
    """
    Outcome of one fixed-point run.

    Attributes:
        variant (Variant): Update rule used
        powers (np.ndarray): Final power vector in mW, stacked user order
        iterations (int): Updates performed
        history (List[IterationRecord]): Total power and convergence ratio per iteration, n=0 is p(0)
        converged (bool): Whether the ratio fell to epsilon within max_iter
        sinr (np.ndarray): Closed-form SINR at the final powers
        targets (QosTargets): Targets the run was solved for
        satisfied (np.ndarray): Per-user flag, SINR >= nu within the relative tolerance
        slack (np.ndarray): sinr/nu - 1, +inf for users without a target
        verdict (FeasibilityVerdict): Whether every user is satisfied
    """

    variant: Variant
    powers: np.ndarray
    iterations: int
    history: List[IterationRecord]
    converged: bool
    sinr: np.ndarray
    targets: QosTargets
    satisfied: np.ndarray
    slack: np.ndarray
    verdict: FeasibilityVerdict
    users: List[UserId] = field(default_factory=list)

    @property
    def total_power(self) -> float:
        return float(np.sum(self.powers))

    @property
    def final_gamma(self) -> Optional[float]:
        return self.history[-1].gamma if self.history else None

    def to_dict(self) -> dict:
        def finite_or_none(value: Optional[float]):
            if value is None or not math.isfinite(value):
                return None
            return float(value)

        return {
            "variant": self.variant.value,
            "converged": self.converged,
            "iterations": self.iterations,
            "verdict": self.verdict.value,
            "history": [
                {"n": record.n, "P_tot": record.total_power, "gamma": finite_or_none(record.gamma)}
                for record in self.history
            ],
            "users": [
                {
                    "cell": user[0],
                    "user": user[1],
                    "p_star_mW": float(self.powers[i]),
                    "sinr": float(self.sinr[i]),
                    "target": float(self.targets.nu[i]),
                    "satisfied": bool(self.satisfied[i]),
                    "slack": finite_or_none(float(self.slack[i])),
                }
                for i, user in enumerate(self.users)
            ],
        }


def convergence_ratio(total: float, previous: float) -> float:
    if previous > 0.0:
        return abs(total - previous) / previous
    return 0.0 if total == 0.0 else math.inf


def solve_fixed_point(
    variant: Union[Variant, str],
    model: SinrModel,
    targets: QosTargets,
    epsilon: float = DEFAULT_EPSILON,
    max_iter: int = DEFAULT_MAX_ITER,
    order: Union[UpdateOrder, str] = UpdateOrder.Jacobi,
    tolerance: float = SATISFACTION_TOLERANCE,
) -> FixedPointReport:
    """Iterate the chosen update from p(0) = P_max until the total-power ratio drops to epsilon."""
    if epsilon <= 0.0:
        raise InvalidParameterError(f"epsilon must be positive, got {epsilon}")
    if max_iter < 1:
        raise InvalidParameterError(f"max_iter must be at least 1, got {max_iter}")
    variant = Variant(variant)
    order = UpdateOrder(order)
    function = InterferenceFunction(model, targets)
    step = algorithm1_step if variant == Variant.Alg1 else algorithm2_step

    powers = targets.p_max.astype(float).copy()
    previous = float(np.sum(powers))
    history = [IterationRecord(n=0, total_power=previous, gamma=None)]
    converged = False
    for n in range(1, max_iter + 1):
        powers = step(powers, function, order)
        total = float(np.sum(powers))
        gamma = convergence_ratio(total, previous)
        history.append(IterationRecord(n=n, total_power=total, gamma=gamma))
        logger.debug("%s iteration %d: P_tot=%.6g mW, gamma=%.3e", variant.value, n, total, gamma)
        previous = total
        if gamma <= epsilon:
            converged = True
            break
    if not converged:
        logger.warning("%s did not converge within %d iterations", variant.value, max_iter)

    sinr = model.sinr(powers)
    with np.errstate(divide="ignore", invalid="ignore"):
        slack = np.where(targets.nu > 0.0, sinr / targets.nu - 1.0, np.inf)
    satisfied = sinr >= targets.nu * (1.0 - tolerance)
    verdict = FeasibilityVerdict.FeasibleAllSatisfied if bool(np.all(satisfied)) else FeasibilityVerdict.CongestedPartial
    return FixedPointReport(
        variant=variant,
        powers=powers,
        iterations=len(history) - 1,
        history=history,
        converged=converged,
        sinr=sinr,
        targets=targets,
        satisfied=satisfied,
        slack=slack,
        verdict=verdict,
        users=list(model.users),
    )

