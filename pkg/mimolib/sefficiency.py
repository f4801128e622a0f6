"""Closed-form uplink SINR and spectral efficiency with MR combining over LMMSE estimates.

The SINR of user u = (l, k) at BS l splits into four parts:

    signal = p_u z_u |tr(R_u Psi R_u)|^2
    NI     = sum over every user v of p_v m_v tr(R_u Psi R_u R_v)
    CI     = sum over pilot sharers v != u of p_v z_v |tr(R_v Psi R_u)|^2
           + sum over pilot sharers v of p_v z_v (t_v / d_v^2) |tr(R_v Psi R_u)|^2
           + sum over pilot sharers v of p_v z_v (t_v / d_v^2) tr(R_v Psi R_u R_v R_u Psi)
    NO     = sigma^2 p_hat_u beta_u^2 d_u^2 tau_p tr(R_u Psi R_u)

with m_v = beta_v d_v p_hat_u beta_u^2 d_u^2 tau_p, z_v = p_hat_v beta_v^2 d_v^2 p_hat_u beta_u^2 d_u^2 tau_p^2
and t_v = tr(Rtilde_v^2) / S_v^2. Every R_v, beta_v, d_v is the statistic of the link from v toward BS l.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .channel import LinkStatistics
from .errors import DimensionMismatchError, InvalidParameterError, UnknownUserError
from .estimation import EstimateStatistics, PilotConfig, UserId
from .network import NetworkStatistics

logger = logging.getLogger("mimosim")


def spectral_efficiency(sinr, prelog: float):
    """prelog * log2(1 + sinr), elementwise for arrays."""
    value = prelog * np.log2(1.0 + np.asarray(sinr, dtype=float))
    return float(value) if value.ndim == 0 else value


@dataclass
class SinrBreakdown:
    user: UserId
    signal: float
    ni: float
    ci: float
    no: float
    sinr: float
    prelog: float
    m_coeffs: Dict[UserId, float] = field(default_factory=dict, repr=False)
    z_coeffs: Dict[UserId, float] = field(default_factory=dict, repr=False)

    @property
    def se(self) -> float:
        return spectral_efficiency(self.sinr, self.prelog)


@dataclass
class RateReport:
    se: Dict[UserId, float]
    breakdowns: Dict[UserId, SinrBreakdown]


@dataclass(frozen=True)
class SinrCoefficients:
    """
    Power-independent coefficients of one user's SINR.

    Every dict is keyed by the interfering user. The CI coefficients are split into the coherent
    pilot-contamination sum and the two finite-scatterer sums.
    """

    user: UserId
    prelog: float
    trace_signal: float
    signal_gain: float
    noise: float
    ni_gain: Dict[UserId, float]
    ci_coherent: Dict[UserId, float]
    ci_scatter_coherent: Dict[UserId, float]
    ci_scatter_spread: Dict[UserId, float]
    m_coeffs: Dict[UserId, float]
    z_coeffs: Dict[UserId, float]
    scatterer_limit: float

    def ci_sums(self, powers: Mapping[UserId, float]) -> Tuple[float, float, float]:
        return (
            sum(powers[v] * c for v, c in self.ci_coherent.items()),
            sum(powers[v] * c for v, c in self.ci_scatter_coherent.items()),
            sum(powers[v] * c for v, c in self.ci_scatter_spread.items()),
        )

    def breakdown(self, powers: Mapping[UserId, float]) -> SinrBreakdown:
        missing = [v for v in self.ni_gain if v not in powers]
        if missing:
            raise UnknownUserError(f"No data power given for users {missing}")
        if any(powers[v] < 0.0 for v in self.ni_gain):
            raise InvalidParameterError("Data powers must be non-negative")
        signal = powers[self.user] * self.signal_gain
        ni = sum(powers[v] * c for v, c in self.ni_gain.items())
        ci = sum(self.ci_sums(powers))
        sinr = signal / (ni + ci + self.noise)
        return SinrBreakdown(
            user=self.user,
            signal=signal,
            ni=ni,
            ci=ci,
            no=self.noise,
            sinr=sinr,
            prelog=self.prelog,
            m_coeffs=dict(self.m_coeffs),
            z_coeffs=dict(self.z_coeffs),
        )


def sinr_coefficients(
    target: UserId,
    links: Mapping[UserId, LinkStatistics],
    est_stats: EstimateStatistics,
    config: PilotConfig,
    noise_mw: float,
    finite_scatterers: bool = True,
) -> SinrCoefficients:
    """
    Coefficients of the SINR of `target` at its serving BS.

    `links` maps every user of the network to its link statistics toward the serving BS of `target`.
    With `finite_scatterers` off, the terms weighted by tr(Rtilde^2)/S^2 are dropped, which is the
    correlated Rayleigh limit of the same covariances.
    """
    if target not in est_stats.sharers:
        raise InvalidParameterError(f"Estimation statistics of pilot {est_stats.pilot} do not cover user {target}")
    if target not in links:
        raise UnknownUserError(f"No link statistics for user {target}")
    for v, stats in links.items():
        if stats.antennas != est_stats.antennas:
            raise DimensionMismatchError(
                f"Link of user {v} has {stats.antennas} antennas, estimator has {est_stats.antennas}"
            )

    own = links[target]
    own_scale = config.pilot_power(target) * own.beta**2 * own.d**2
    # B = Psi R_u and A = R_u Psi R_u
    B = est_stats.apply_psi(np.asarray(own.R))
    A = own.R @ B
    trace_signal = float(np.real(np.trace(A)))

    ni_gain: Dict[UserId, float] = {}
    m_coeffs: Dict[UserId, float] = {}
    for v, stats in links.items():
        m_coeffs[v] = stats.beta * stats.d * own_scale * config.tau_p
        ni_gain[v] = m_coeffs[v] * float(np.real(np.sum(A * stats.R.T)))

    ci_coherent: Dict[UserId, float] = {}
    ci_scatter_coherent: Dict[UserId, float] = {}
    ci_scatter_spread: Dict[UserId, float] = {}
    z_coeffs: Dict[UserId, float] = {}
    for v in est_stats.sharers:
        stats = links[v]
        z_coeffs[v] = config.pilot_power(v) * stats.beta**2 * stats.d**2 * own_scale * config.tau_p**2
        RvB = stats.R @ B
        coherent = abs(np.trace(RvB)) ** 2
        if v != target:
            ci_coherent[v] = z_coeffs[v] * coherent
        weight = stats.scatter_ratio / stats.d**2 if finite_scatterers else 0.0
        ci_scatter_coherent[v] = z_coeffs[v] * weight * coherent
        # tr(R_v B R_v B^H) as an elementwise product with (R_v B^H)^T
        spread = float(np.real(np.sum(RvB * (B.conj() @ stats.R.T))))
        ci_scatter_spread[v] = z_coeffs[v] * weight * spread

    return SinrCoefficients(
        user=target,
        prelog=config.prelog,
        trace_signal=trace_signal,
        signal_gain=z_coeffs[target] * trace_signal**2,
        noise=noise_mw * own_scale * config.tau_p * trace_signal,
        ni_gain=ni_gain,
        ci_coherent=ci_coherent,
        ci_scatter_coherent=ci_scatter_coherent,
        ci_scatter_spread=ci_scatter_spread,
        m_coeffs=m_coeffs,
        z_coeffs=z_coeffs,
        scatterer_limit=(own.d * own.num_scatterers) ** 2 / own.rtilde_square_trace,
    )


def closed_form_sinr(
    target: UserId,
    links: Mapping[UserId, LinkStatistics],
    est_stats: EstimateStatistics,
    config: PilotConfig,
    powers: Mapping[UserId, float],
    noise_mw: float,
    finite_scatterers: bool = True,
) -> SinrBreakdown:
    coefficients = sinr_coefficients(target, links, est_stats, config, noise_mw, finite_scatterers)
    return coefficients.breakdown(powers)


class SinrModel:
    """
    Stacked SINR coefficients of every user, so SINR(p) is a vector expression in the power vector.

    Attributes:
        users (List[UserId]): Users in stacked order
        prelog (float): 1 - tau_p/tau_c
        signal_gain (np.ndarray): Signal coefficient per user
        ni_gain (np.ndarray): NI coefficient of interferer v (column) on user u (row)
        ci_gain (np.ndarray): Every CI coefficient, own-user finite-scatterer terms on the diagonal
        noise (np.ndarray): NO term per user
        finite_scatterers (bool): Whether the finite-scatterer CI terms are included
    """

    def __init__(self, rows: Sequence[SinrCoefficients], finite_scatterers: bool = True):
        self.rows = list(rows)
        self.users: List[UserId] = [row.user for row in self.rows]
        self.finite_scatterers = finite_scatterers
        self.prelog = self.rows[0].prelog
        position = {user: i for i, user in enumerate(self.users)}
        size = len(self.users)

        self.signal_gain = np.array([row.signal_gain for row in self.rows])
        self.noise = np.array([row.noise for row in self.rows])
        self.ni_gain = np.zeros((size, size))
        self.ci_coherent = np.zeros((size, size))
        self.ci_scatter = np.zeros((size, size))
        for i, row in enumerate(self.rows):
            for v, c in row.ni_gain.items():
                self.ni_gain[i, position[v]] = c
            for v, c in row.ci_coherent.items():
                self.ci_coherent[i, position[v]] = c
            for v in row.ci_scatter_coherent:
                self.ci_scatter[i, position[v]] = row.ci_scatter_coherent[v] + row.ci_scatter_spread[v]
        self.ci_gain = self.ci_coherent + self.ci_scatter

    @classmethod
    def from_network(cls, network: NetworkStatistics, finite_scatterers: bool = True) -> "SinrModel":
        rows = []
        for user in network.users():
            rows.append(
                sinr_coefficients(
                    user,
                    network.links_toward(user[0]),
                    network.estimator_of(user),
                    network.pilots,
                    network.noise_mw,
                    finite_scatterers,
                )
            )
        logger.debug("Built SINR coefficients of %d users", len(rows))
        return cls(rows, finite_scatterers)

    @property
    def num_users(self) -> int:
        return len(self.users)

    @property
    def self_ci(self) -> np.ndarray:
        """Own-user CI coefficients, the part of CI proportional to the user's own power."""
        return np.diag(self.ci_scatter).copy()

    @property
    def self_interference(self) -> np.ndarray:
        """Every NI and CI coefficient of a user on its own power."""
        return np.diag(self.ni_gain) + self.self_ci

    def _check(self, powers) -> np.ndarray:
        powers = np.asarray(powers, dtype=float)
        if powers.shape != (self.num_users,):
            raise DimensionMismatchError(f"Expected {self.num_users} powers, got shape {powers.shape}")
        if np.any(powers < 0.0):
            raise InvalidParameterError("Data powers must be non-negative")
        return powers

    def components(self, powers) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """signal, NI, CI and NO of every user."""
        powers = self._check(powers)
        return self.signal_gain * powers, self.ni_gain @ powers, self.ci_gain @ powers, self.noise.copy()

    def sinr(self, powers) -> np.ndarray:
        signal, ni, ci, no = self.components(powers)
        return signal / (ni + ci + no)

    def se(self, powers) -> np.ndarray:
        return spectral_efficiency(self.sinr(powers), self.prelog)

    def power_map(self, powers) -> Dict[UserId, float]:
        powers = self._check(powers)
        return {user: float(p) for user, p in zip(self.users, powers)}

    def breakdown(self, user: UserId, powers) -> SinrBreakdown:
        try:
            row = self.rows[self.users.index(user)]
        except ValueError:
            raise UnknownUserError(f"User {user} is not part of the model")
        return row.breakdown(self.power_map(powers))

    def rate(self, powers) -> RateReport:
        powers_by_user = self.power_map(powers)
        return rate([row.breakdown(powers_by_user) for row in self.rows])


def orthogonality_measure(R_a: np.ndarray, R_b: np.ndarray, antennas: Optional[int] = None) -> float:
    """tr(R_a R_b)/M, which vanishes for asymptotically orthogonal covariances."""
    R_a = np.asarray(R_a)
    R_b = np.asarray(R_b)
    if R_a.shape != R_b.shape or R_a.ndim != 2 or R_a.shape[0] != R_a.shape[1]:
        raise DimensionMismatchError(f"Covariances must be square and equal in shape, got {R_a.shape}, {R_b.shape}")
    if antennas is None:
        antennas = R_a.shape[0]
    elif antennas != R_a.shape[0]:
        raise DimensionMismatchError(f"M={antennas} does not match covariances of size {R_a.shape[0]}")
    return float(np.real(np.sum(R_a * R_b.T))) / antennas


class AsymptoticCase(str, Enum):
    # pilot contamination and finite scatterers both limit the rate
    CoherentInterference = "a"
    # spatially orthogonal pilot sharers, finite scatterers
    FiniteScatterers = "b"
    # rich scattering, pilot contamination remains
    PilotContamination = "c"
    # spatially orthogonal pilot sharers, rich scattering
    Unbounded = "d"


@dataclass
class AsymptoticRate:
    case: AsymptoticCase
    se: Optional[float]
    diverges: bool


def asymptotic_rate(
    case: Union[AsymptoticCase, str], model: SinrModel, powers, user: UserId
) -> AsymptoticRate:
    """
    Large-array limit of the SE of `user`.

    The caller picks the case that matches the statistics: orthogonality of pilot sharers for "b" and "d",
    rich scattering (a model built with finite_scatterers=False) for "c" and "d".
    """
    case = AsymptoticCase(case)
    if case == AsymptoticCase.Unbounded:
        return AsymptoticRate(case=case, se=None, diverges=True)
    try:
        i = model.users.index(user)
    except ValueError:
        raise UnknownUserError(f"User {user} is not part of the model")
    row = model.rows[i]
    if case == AsymptoticCase.FiniteScatterers:
        if not math.isfinite(row.scatterer_limit) or row.scatterer_limit <= 0.0:
            raise InvalidParameterError(f"tr(Rtilde^2) of user {user} leaves no finite-scatterer limit")
        return AsymptoticRate(case=case, se=spectral_efficiency(row.scatterer_limit, model.prelog), diverges=False)

    powers = model._check(powers)
    signal = model.signal_gain[i] * powers[i]
    if case == AsymptoticCase.CoherentInterference:
        interference = float(model.ci_gain[i] @ powers)
    else:
        interference = float(model.ci_coherent[i] @ powers)
    if interference <= 0.0:
        return AsymptoticRate(case=case, se=None, diverges=signal > 0.0)
    return AsymptoticRate(case=case, se=spectral_efficiency(signal / interference, model.prelog), diverges=False)


def rate(breakdowns: Union[SinrBreakdown, Sequence[SinrBreakdown]], config: Optional[PilotConfig] = None) -> RateReport:
    """Per-user SE from SINR breakdowns, using the prelog of `config` when given."""
    if isinstance(breakdowns, SinrBreakdown):
        breakdowns = [breakdowns]
    se: Dict[UserId, float] = {}
    by_user: Dict[UserId, SinrBreakdown] = {}
    for breakdown in breakdowns:
        if breakdown.sinr < 0.0:
            raise InvalidParameterError(f"SINR of user {breakdown.user} is negative")
        prelog = config.prelog if config is not None else breakdown.prelog
        se[breakdown.user] = spectral_efficiency(breakdown.sinr, prelog)
        by_user[breakdown.user] = breakdown
    return RateReport(se=se, breakdowns=by_user)
