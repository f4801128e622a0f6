import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate, linalg

from .errors import DimensionMismatchError, InvalidParameterError, NotPositiveSemidefiniteError

logger = logging.getLogger("mimosim")

HERMITIAN_TOLERANCE = 1e-10
PSD_TOLERANCE = 1e-10
EIGEN_CLAMP = 1e-12

# Gaussian angular deviations are integrated over +/- this many standard deviations
ANGULAR_SPAN_STD = 6.0
MIN_GRID_POINTS = 257
MAX_GRID_POINTS = 40001
ROW_CHUNK = 256


class CovarianceKind(str, Enum):
    LocalScattering = "local_scattering"
    Exponential = "exponential"
    Identity = "identity"


@dataclass(frozen=True)
class CovarianceSpec:
    """
    Inputs of one covariance builder.

    Attributes:
        kind (CovarianceKind): Which builder to use
        dimension (int): Matrix size (antennas at the BS, or scatterers)
        angle (float): Nominal angle in radians (local scattering) or phase per element step (exponential)
        angular_std (float): Standard deviation of the angular spread in radians (local scattering)
        correlation (float): Correlation magnitude in [0, 1) (exponential)
        antenna_spacing (float): Element spacing in wavelengths (local scattering)
    """

    kind: CovarianceKind
    dimension: int
    angle: float = 0.0
    angular_std: float = math.radians(5.0)
    correlation: float = 0.9
    antenna_spacing: float = 0.5


def build_covariance(spec: CovarianceSpec) -> np.ndarray:
    """Build a Hermitian PSD covariance matrix whose trace equals its dimension."""
    if spec.dimension < 1:
        raise InvalidParameterError(f"Covariance dimension must be positive, got {spec.dimension}")
    if spec.kind == CovarianceKind.Identity:
        return np.eye(spec.dimension, dtype=complex)
    if spec.kind == CovarianceKind.Exponential:
        return exponential_covariance(spec.dimension, spec.correlation, spec.angle)
    if spec.kind == CovarianceKind.LocalScattering:
        return local_scattering_covariance(spec.dimension, spec.angle, spec.angular_std, spec.antenna_spacing)
    raise InvalidParameterError(f"Unknown covariance kind {spec.kind}")


def exponential_covariance(dimension: int, correlation: float, phase: float = 0.0) -> np.ndarray:
    if not 0.0 <= correlation < 1.0:
        raise InvalidParameterError(f"Correlation magnitude must lie in [0, 1), got {correlation}")
    first_column = (correlation * np.exp(1j * phase)) ** np.arange(dimension)
    return linalg.toeplitz(first_column)


def _grid_points(dimension: int, angular_std: float, antenna_spacing: float) -> int:
    # phase swing of the last element across the integration window, in cycles
    cycles = antenna_spacing * (dimension - 1) * 2.0 * ANGULAR_SPAN_STD * angular_std
    points = max(MIN_GRID_POINTS, int(math.ceil(32.0 * cycles)) + 1)
    points = min(points, MAX_GRID_POINTS)
    return points if points % 2 == 1 else points + 1


def local_scattering_covariance(
    dimension: int, angle: float, angular_std: float, antenna_spacing: float = 0.5
) -> np.ndarray:
    """
    Uniform linear array covariance under a Gaussian angular spread around a nominal angle.

    Entry (m, n) is E[exp(j 2 pi spacing (m - n) sin(angle + delta))] with delta ~ N(0, angular_std^2),
    evaluated with Simpson's rule and expanded through the Toeplitz structure.
    """
    if angular_std <= 0.0:
        raise InvalidParameterError(f"Angular standard deviation must be positive, got {angular_std}")
    if antenna_spacing <= 0.0:
        raise InvalidParameterError(f"Antenna spacing must be positive, got {antenna_spacing}")

    points = _grid_points(dimension, angular_std, antenna_spacing)
    deltas = np.linspace(-ANGULAR_SPAN_STD * angular_std, ANGULAR_SPAN_STD * angular_std, points)
    density = np.exp(-(deltas**2) / (2.0 * angular_std**2))
    mass = integrate.simpson(density, x=deltas)
    phase_step = 2.0 * np.pi * antenna_spacing * np.sin(angle + deltas)

    first_column = np.empty(dimension, dtype=complex)
    for start in range(0, dimension, ROW_CHUNK):
        rows = np.arange(start, min(start + ROW_CHUNK, dimension))
        integrand = np.exp(1j * rows[:, None] * phase_step[None, :]) * density[None, :]
        first_column[rows] = integrate.simpson(integrand, x=deltas, axis=-1) / mass

    covariance = linalg.toeplitz(first_column)
    return covariance * (dimension / np.real(np.trace(covariance)))


def check_hermitian(matrix: np.ndarray, name: str = "matrix") -> np.ndarray:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatchError(f"{name} must be square, got shape {matrix.shape}")
    scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
    asymmetry = float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0
    if asymmetry > HERMITIAN_TOLERANCE * scale:
        raise NotPositiveSemidefiniteError(f"{name} is not Hermitian (max asymmetry {asymmetry:.3e})")
    return matrix


def _hermitian_eigh(matrix: np.ndarray, name: str):
    hermitian = 0.5 * (matrix + matrix.conj().T)
    try:
        eigenvalues, eigenvectors = linalg.eigh(hermitian)
    except linalg.LinAlgError as e:
        raise NotPositiveSemidefiniteError(f"Eigendecomposition of {name} failed: {e}") from e
    largest = max(float(eigenvalues[-1]), 0.0)
    if eigenvalues[0] < -PSD_TOLERANCE * largest:
        raise NotPositiveSemidefiniteError(
            f"{name} is not positive semi-definite (min eigenvalue {eigenvalues[0]:.3e}, max {largest:.3e})"
        )
    return eigenvalues, eigenvectors, largest


def is_hermitian_psd(matrix: np.ndarray) -> bool:
    try:
        check_hermitian(matrix)
        _hermitian_eigh(np.asarray(matrix, dtype=complex), "matrix")
    except (NotPositiveSemidefiniteError, DimensionMismatchError):
        return False
    return True


def hermitian_sqrt(matrix: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Hermitian square root through an eigendecomposition, with tiny negative eigenvalues clamped to zero."""
    matrix = check_hermitian(np.asarray(matrix, dtype=complex), name)
    eigenvalues, eigenvectors, largest = _hermitian_eigh(matrix, name)
    clamped = np.where(eigenvalues < EIGEN_CLAMP * largest, 0.0, eigenvalues)
    if np.any(clamped != eigenvalues):
        logger.debug("Clamped %d eigenvalues of %s to zero", int(np.sum(clamped != eigenvalues)), name)
    return (eigenvectors * np.sqrt(clamped)) @ eigenvectors.conj().T
