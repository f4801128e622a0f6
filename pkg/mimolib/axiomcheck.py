import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .powerctl import InterferenceFunction, algorithm2_step

logger = logging.getLogger("mimosim")

# float rounding allowance, relative to the compared value
ROUNDING = 64 * np.finfo(float).eps


@dataclass
class Counterexample:
    prop: str
    user: int
    alpha: float
    margin: float


@dataclass
class AxiomReport:
    """
    Outcome of randomized checks of the standard and two-sided scalable properties.

    Margins are relative: (right-hand side - left-hand side) / right-hand side for every strict inequality.
    """

    samples: int
    checked_users: int
    excluded_users: int
    min_margin: dict = field(default_factory=dict)
    counterexamples: List[Counterexample] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.counterexamples


def _record(report: AxiomReport, prop: str, margins: np.ndarray, users: np.ndarray, alpha: float):
    if margins.size == 0:
        return
    report.min_margin[prop] = min(report.min_margin.get(prop, np.inf), float(np.min(margins)))
    for i in np.flatnonzero(margins <= -ROUNDING):
        report.counterexamples.append(Counterexample(prop=prop, user=int(users[i]), alpha=alpha, margin=float(margins[i])))


def axiom_check(
    function: InterferenceFunction,
    rng: np.random.Generator,
    num_samples: int = 10_000,
    alpha_range: Tuple[float, float] = (1.0 + 1e-9, 4.0),
) -> AxiomReport:
    """
    Check positivity, monotonicity and scalability of I, and two-sided scalability of the soft-removal update.

    Users with a zero SINR target or without a reachable target are excluded, since their maps are
    identically 0 or +inf.
    """
    p_max = function.p_max
    active = ~function.degenerate & (function.targets.nu > 0.0)
    users = np.flatnonzero(active)
    report = AxiomReport(
        samples=num_samples, checked_users=int(users.size), excluded_users=int(np.count_nonzero(~active))
    )

    for _ in range(num_samples):
        alpha = float(rng.uniform(*alpha_range))
        p = rng.uniform(0.0, 1.0, size=p_max.shape) * p_max
        values = function.evaluate(p)[users]

        _record(report, "positivity", np.where(values > 0.0, 1.0, -1.0), users, alpha)

        raised = p + rng.uniform(0.0, 1.0, size=p.shape) * p_max * (rng.uniform(0.0, 1.0, size=p.shape) < 0.5)
        monotone = function.evaluate(raised)[users]
        _record(report, "monotonicity", (monotone - values) / monotone, users, alpha)

        scaled = function.evaluate(alpha * p)[users]
        _record(report, "scalability", (alpha * values - scaled) / (alpha * values), users, alpha)

        # two-sided scalability of the soft-removal update on p / alpha <= p' <= alpha p
        base = p + 1e-3 * p_max
        perturbed = base * np.exp(rng.uniform(-np.log(alpha), np.log(alpha), size=p.shape))
        f_base = algorithm2_step(base, function)[users]
        f_perturbed = algorithm2_step(perturbed, function)[users]
        _record(report, "two_sided_upper", (alpha * f_base - f_perturbed) / (alpha * f_base), users, alpha)
        _record(report, "two_sided_lower", (f_perturbed - f_base / alpha) / f_perturbed, users, alpha)

    if report.counterexamples:
        logger.warning("Axiom check found %d counterexamples", len(report.counterexamples))
    else:
        logger.info("Axiom check passed on %d samples for %d users", num_samples, report.checked_users)
    return report
