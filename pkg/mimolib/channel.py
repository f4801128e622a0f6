import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Union

import numpy as np

from .covariance import check_hermitian, hermitian_sqrt
from .errors import DimensionMismatchError, DistanceTooSmallError, InvalidParameterError
from .units import db_to_linear

logger = logging.getLogger("mimosim")

MIN_DISTANCE_KM = 0.035
PATHLOSS_INTERCEPT_DB = -128.1
PATHLOSS_SLOPE_DB = 37.6


def _frozen_complex(matrix, name: str) -> np.ndarray:
    array = check_hermitian(np.array(matrix, dtype=complex), name)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class LinkStatistics:
    """
    Large-scale state of the double-scattering link from one user to one BS.

    Attributes:
        beta (float): Large-scale fading gain, linear
        R (np.ndarray): M x M covariance on the BS side
        Rtilde (np.ndarray): S x S covariance on the scatterer side
    """

    beta: float
    R: np.ndarray = field(repr=False)
    Rtilde: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta > 0.0):
            raise InvalidParameterError(f"beta must be positive and finite, got {self.beta}")
        object.__setattr__(self, "R", _frozen_complex(self.R, "R"))
        object.__setattr__(self, "Rtilde", _frozen_complex(self.Rtilde, "Rtilde"))
        if self.d <= 0.0:
            raise InvalidParameterError(f"tr(Rtilde)/S must be positive, got {self.d}")

    @property
    def antennas(self) -> int:
        return self.R.shape[0]

    @property
    def num_scatterers(self) -> int:
        return self.Rtilde.shape[0]

    @cached_property
    def d(self) -> float:
        return float(np.real(np.trace(self.Rtilde))) / self.num_scatterers

    @cached_property
    def rtilde_square_trace(self) -> float:
        """tr(Rtilde^2), real for a Hermitian matrix."""
        return float(np.real(np.sum(self.Rtilde * self.Rtilde.T)))

    @cached_property
    def scatter_ratio(self) -> float:
        """tr(Rtilde^2)/S^2, the weight of the finite-scatterer terms."""
        return self.rtilde_square_trace / self.num_scatterers**2

    @cached_property
    def R_sqrt(self) -> np.ndarray:
        return hermitian_sqrt(self.R, "R")

    @cached_property
    def Rtilde_sqrt(self) -> np.ndarray:
        return hermitian_sqrt(self.Rtilde, "Rtilde")


@dataclass
class ChannelRealization:
    """
    One draw of a channel vector.

    Attributes:
        h (np.ndarray): Length-M channel vector
        G (Optional[np.ndarray]): M x S fading matrix, kept only when requested
        g (Optional[np.ndarray]): Length-S fading vector, kept only when requested
    """

    h: np.ndarray
    G: Optional[np.ndarray] = None
    g: Optional[np.ndarray] = None


def pathloss_db(distance_km: Union[float, np.ndarray], shadow_db: Union[float, np.ndarray] = 0.0):
    distance = np.asarray(distance_km, dtype=float)
    if np.any(distance < MIN_DISTANCE_KM):
        raise DistanceTooSmallError(
            f"Distance {float(np.min(distance)):.4f} km is below the {MIN_DISTANCE_KM} km minimum"
        )
    value = PATHLOSS_INTERCEPT_DB - PATHLOSS_SLOPE_DB * np.log10(distance) + np.asarray(shadow_db, dtype=float)
    return float(value) if value.ndim == 0 else value


def pathloss_linear(distance_km: Union[float, np.ndarray], shadow_db: Union[float, np.ndarray] = 0.0):
    return db_to_linear(pathloss_db(distance_km, shadow_db))


def keyed_stream(root: np.random.SeedSequence, *key: int) -> np.random.Generator:
    """Counter-based generator for one key below `root`, independent of the order streams are requested in."""
    seed = np.random.SeedSequence(root.entropy, spawn_key=tuple(root.spawn_key) + tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seed))


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian draws with unit variance per entry."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def compose_channel(stats: LinkStatistics, G: np.ndarray, g: np.ndarray) -> np.ndarray:
    """h = sqrt(beta/S) R^(1/2) G Rtilde^(1/2) g, batched over leading axes of G and g."""
    G = np.asarray(G)
    g = np.asarray(g)
    if G.shape[-2:] != (stats.antennas, stats.num_scatterers) or g.shape[-1] != stats.num_scatterers:
        raise DimensionMismatchError(
            f"Expected G of shape (..., {stats.antennas}, {stats.num_scatterers}) and g of length "
            f"{stats.num_scatterers}, got {G.shape} and {g.shape}"
        )
    scaled = g @ stats.Rtilde_sqrt.T
    through_scatterers = np.einsum("...ms,...s->...m", G, scaled)
    return np.sqrt(stats.beta / stats.num_scatterers) * (through_scatterers @ stats.R_sqrt.T)


def sample_channel(stats: LinkStatistics, rng: np.random.Generator, keep_factors: bool = False) -> ChannelRealization:
    G = complex_normal(rng, (stats.antennas, stats.num_scatterers))
    g = complex_normal(rng, stats.num_scatterers)
    h = compose_channel(stats, G, g)
    if keep_factors:
        return ChannelRealization(h=h, G=G, g=g)
    return ChannelRealization(h=h)


def sample_channels(stats: LinkStatistics, rng: np.random.Generator, count: int) -> np.ndarray:
    """Draw `count` independent channel vectors, returned as a (count, M) array."""
    G = complex_normal(rng, (count, stats.antennas, stats.num_scatterers))
    g = complex_normal(rng, (count, stats.num_scatterers))
    return compose_channel(stats, G, g)


def channel_covariance(stats: LinkStatistics) -> np.ndarray:
    return stats.beta * stats.d * np.asarray(stats.R)


def _check_square(B: np.ndarray, antennas: int) -> np.ndarray:
    B = np.asarray(B, dtype=complex)
    if B.shape != (antennas, antennas):
        raise DimensionMismatchError(f"B must be {antennas}x{antennas}, got {B.shape}")
    return B


def cross_moment(stats_a: LinkStatistics, stats_b: LinkStatistics, B: np.ndarray) -> float:
    """E|h_a^H B h_b|^2 for independent links a and b."""
    if stats_a.antennas != stats_b.antennas:
        raise DimensionMismatchError(f"Links have {stats_a.antennas} and {stats_b.antennas} antennas")
    B = _check_square(B, stats_a.antennas)
    gain = stats_a.beta * stats_a.d * stats_b.beta * stats_b.d
    return gain * float(np.real(np.trace(B @ stats_b.R @ B.conj().T @ stats_a.R)))


def self_fourth_moment(stats: LinkStatistics, B: np.ndarray) -> float:
    """E|h^H B h|^2 for a single double-scattering link."""
    B = _check_square(B, stats.antennas)
    RB = stats.R @ B
    coherent = abs(np.trace(RB)) ** 2
    spread = float(np.real(np.trace(RB @ stats.R @ B.conj().T)))
    return stats.beta**2 * (stats.d**2 + stats.scatter_ratio) * (coherent + spread)
