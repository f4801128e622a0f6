import math

import numpy as np
import pytest
from scipy import stats as scipy_stats

from mimolib.channel import (
    MIN_DISTANCE_KM,
    LinkStatistics,
    channel_covariance,
    compose_channel,
    cross_moment,
    keyed_stream,
    pathloss_db,
    pathloss_linear,
    sample_channel,
    sample_channels,
    self_fourth_moment,
)
from mimolib.errors import DimensionMismatchError, DistanceTooSmallError, InvalidParameterError

from .mocks import mock_link, random_covariance

# z-score allowance for sample-mean checks with fixed seeds
Z_ALLOWANCE = 3.0


def identity_link(antennas=4, scatterers=3, beta=1.0):
    return LinkStatistics(beta=beta, R=np.eye(antennas), Rtilde=np.eye(scatterers))


def test_pathloss_at_one_kilometer():
    assert pathloss_db(1.0) == pytest.approx(-128.1)
    assert pathloss_db(1.0, shadow_db=7.0) == pytest.approx(-121.1)
    assert pathloss_linear(1.0) == pytest.approx(10 ** (-12.81), rel=1e-12)


def test_pathloss_decreases_with_distance():
    distances = np.array([MIN_DISTANCE_KM, 0.1, 0.25, 0.5, 1.0])
    values = pathloss_db(distances)
    assert np.all(np.diff(values) < 0)
    assert values[1] == pytest.approx(-128.1 + 37.6)


def test_pathloss_rejects_short_distance():
    with pytest.raises(DistanceTooSmallError):
        pathloss_db(0.01)
    with pytest.raises(InvalidParameterError):
        pathloss_linear(np.array([0.5, 0.02]))


def test_link_statistics_derived_values():
    Rtilde = np.diag([2.0, 1.0, 0.0])
    link = LinkStatistics(beta=0.5, R=np.eye(2), Rtilde=Rtilde)
    assert link.antennas == 2
    assert link.num_scatterers == 3
    assert link.d == pytest.approx(1.0)
    assert link.rtilde_square_trace == pytest.approx(5.0)
    assert link.scatter_ratio == pytest.approx(5.0 / 9.0)
    assert np.allclose(channel_covariance(link), 0.5 * np.eye(2))


def test_link_statistics_is_read_only():
    link = identity_link()
    with pytest.raises(ValueError):
        link.R[0, 0] = 2.0


@pytest.mark.parametrize("beta", [0.0, -1.0, float("nan"), float("inf")])
def test_link_statistics_rejects_beta(beta):
    with pytest.raises(InvalidParameterError):
        LinkStatistics(beta=beta, R=np.eye(2), Rtilde=np.eye(2))


def test_link_statistics_rejects_zero_scatterer_trace():
    with pytest.raises(InvalidParameterError):
        LinkStatistics(beta=1.0, R=np.eye(2), Rtilde=np.zeros((2, 2)))


def test_keyed_stream_is_order_independent():
    root = np.random.SeedSequence(7)
    first = keyed_stream(root, 3, 1).standard_normal(5)
    keyed_stream(root, 0, 0).standard_normal(100)
    again = keyed_stream(root, 3, 1).standard_normal(5)
    other = keyed_stream(root, 1, 3).standard_normal(5)
    assert np.array_equal(first, again)
    assert not np.array_equal(first, other)


def test_sample_channel_is_deterministic():
    link = identity_link()
    first = sample_channel(link, np.random.default_rng(11)).h
    second = sample_channel(link, np.random.default_rng(11)).h
    assert np.array_equal(first, second)


def test_compose_channel_reproduces_sample():
    link = mock_link(np.random.default_rng(3), 6, 4)
    realization = sample_channel(link, np.random.default_rng(5), keep_factors=True)
    assert realization.G.shape == (6, 4)
    assert realization.g.shape == (4,)
    assert np.allclose(compose_channel(link, realization.G, realization.g), realization.h)


def test_compose_channel_rejects_shapes():
    link = identity_link()
    with pytest.raises(DimensionMismatchError):
        compose_channel(link, np.zeros((4, 2)), np.zeros(3))


def test_tiny_beta_gives_vanishing_channel():
    link = identity_link(beta=1e-14)
    h = sample_channels(link, np.random.default_rng(0), 1000)
    assert np.max(np.sum(np.abs(h) ** 2, axis=1)) < 1e-10


def test_mean_channel_energy():
    link = identity_link(antennas=4, scatterers=3, beta=2.0)
    energy = np.sum(np.abs(sample_channels(link, np.random.default_rng(1), 100_000)) ** 2, axis=1)
    assert np.mean(energy) == pytest.approx(2.0 * 4, rel=0.02)


def test_sample_covariance_matches_statistics():
    rng = np.random.default_rng(2)
    link = mock_link(rng, 5, 3, beta=1.5)
    h = sample_channels(link, rng, 200_000)
    sample = h.T @ h.conj() / h.shape[0]
    expected = channel_covariance(link)
    assert np.linalg.norm(sample - expected) / np.linalg.norm(expected) < 0.02


def test_channel_is_circularly_symmetric():
    link = mock_link(np.random.default_rng(4), 4, 3)
    h = sample_channels(link, np.random.default_rng(8), 100_000)
    pseudo = h.T @ h / h.shape[0]
    assert np.linalg.norm(pseudo) < 0.05 * np.linalg.norm(channel_covariance(link))


def test_single_scatterer_channel_lies_in_one_direction():
    # keyhole: with one scatterer and a fixed G every h is a multiple of the same vector
    link = LinkStatistics(beta=1.0, R=random_covariance(np.random.default_rng(6), 4), Rtilde=np.eye(1))
    rng = np.random.default_rng(9)
    G = (rng.standard_normal((4, 1)) + 1j * rng.standard_normal((4, 1))) / math.sqrt(2)
    g = (rng.standard_normal((50, 1)) + 1j * rng.standard_normal((50, 1))) / math.sqrt(2)
    h = compose_channel(link, np.broadcast_to(G, (50, 4, 1)), g)
    assert np.linalg.matrix_rank(h, tol=1e-9) == 1


def test_fourth_moment_identity_closed_form():
    link = identity_link(antennas=4, scatterers=3)
    expected = (1 + 1 / 3) * (4**2 + 4)
    assert self_fourth_moment(link, np.eye(4)) == pytest.approx(expected)


def test_cross_moment_identity_closed_form():
    a = identity_link(beta=2.0)
    b = identity_link(beta=0.5)
    assert cross_moment(a, b, np.eye(4)) == pytest.approx(4.0)


def test_moments_vanish_for_zero_matrix():
    a = identity_link()
    assert self_fourth_moment(a, np.zeros((4, 4))) == 0.0
    assert cross_moment(a, a, np.zeros((4, 4))) == 0.0


def test_moments_reject_wrong_matrix_size():
    with pytest.raises(DimensionMismatchError):
        self_fourth_moment(identity_link(), np.eye(3))
    with pytest.raises(DimensionMismatchError):
        cross_moment(identity_link(antennas=4), identity_link(antennas=5), np.eye(4))


def test_fourth_moment_is_unitarily_invariant():
    rng = np.random.default_rng(12)
    link = mock_link(rng, 5, 3)
    B = random_covariance(rng, 5)
    Q, _ = np.linalg.qr(rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5)))
    rotated = LinkStatistics(beta=link.beta, R=Q @ link.R @ Q.conj().T, Rtilde=link.Rtilde)
    assert self_fourth_moment(rotated, Q @ B @ Q.conj().T) == pytest.approx(self_fourth_moment(link, B), rel=1e-9)


def sample_mean_and_stderr(samples):
    return np.mean(samples), scipy_stats.sem(samples)


@pytest.mark.parametrize("seed", [21, 22, 23])
def test_fourth_moment_matches_monte_carlo(seed):
    rng = np.random.default_rng(seed)
    link = mock_link(rng, 6, 4, beta=1.3)
    B = random_covariance(rng, 6)
    h = sample_channels(link, rng, 200_000)
    samples = np.abs(np.einsum("nm,mk,nk->n", h.conj(), B, h)) ** 2
    mean, stderr = sample_mean_and_stderr(samples)
    assert abs(mean - self_fourth_moment(link, B)) < Z_ALLOWANCE * stderr


@pytest.mark.parametrize("seed", [31, 32, 33])
def test_cross_moment_matches_monte_carlo(seed):
    rng = np.random.default_rng(seed)
    a = mock_link(rng, 6, 4, beta=0.8)
    b = mock_link(rng, 6, 2, beta=1.7)
    B = random_covariance(rng, 6) + 0.3j * np.diag(np.arange(6))
    h_a = sample_channels(a, rng, 200_000)
    h_b = sample_channels(b, rng, 200_000)
    samples = np.abs(np.einsum("nm,mk,nk->n", h_a.conj(), B, h_b)) ** 2
    mean, stderr = sample_mean_and_stderr(samples)
    assert abs(mean - cross_moment(a, b, B)) < Z_ALLOWANCE * stderr
