import numpy as np
import pytest

from mimolib.errors import DimensionMismatchError, InvalidParameterError
from mimolib.montecarlo import monte_carlo_sinr
from mimolib.sefficiency import SinrModel

from .mocks import mock_network

TERMS = ("signal", "ni", "ci", "no")
Z_ALLOWANCE = 3.0
# share of comparisons allowed past Z_ALLOWANCE, never past HARD_LIMIT
OUTLIER_SHARE = 0.01
HARD_LIMIT = 5.0


def z_score(value, reference, stderr):
    gap = abs(value - reference)
    if stderr > 0.0:
        return gap / stderr
    return 0.0 if gap <= 1e-12 * abs(reference) else np.inf


def assert_terms_agree(network, powers, estimates, sinr_rtol=None):
    model = SinrModel.from_network(network)
    closed = dict(zip(TERMS, model.components(powers)))
    sinr = model.sinr(powers)
    scores = []
    for i, user in enumerate(model.users):
        estimate = estimates[user]
        for term in TERMS:
            scores.append(z_score(getattr(estimate, term), closed[term][i], getattr(estimate, f"{term}_stderr")))
        scores.append(z_score(estimate.sinr, sinr[i], estimate.sinr_stderr))
        if sinr_rtol is not None:
            assert estimate.sinr == pytest.approx(sinr[i], rel=sinr_rtol), user
    scores = np.array(scores)
    assert np.all(scores <= HARD_LIMIT), scores
    assert np.count_nonzero(scores > Z_ALLOWANCE) <= max(1, int(OUTLIER_SHARE * scores.size)), scores


def test_monte_carlo_matches_closed_form_terms(small_network):
    powers = np.array([1.0, 2.0, 0.5, 1.5])
    estimates = monte_carlo_sinr(small_network, powers, 20_000, seed=17, batch_size=500)
    assert set(estimates) == set(small_network.users())
    assert_terms_agree(small_network, powers, estimates)


def test_monte_carlo_single_scatterer_links(rng):
    network = mock_network(rng, num_cells=2, users_per_cell=1, antennas=6, scatterers=1)
    powers = np.array([1.0, 1.0])
    estimates = monte_carlo_sinr(network, powers, 20_000, seed=3, batch_size=1000)
    assert_terms_agree(network, powers, estimates)


def test_monte_carlo_is_deterministic(small_network):
    powers = np.ones(4)
    first = monte_carlo_sinr(small_network, powers, 1000, seed=5)
    second = monte_carlo_sinr(small_network, powers, 1000, seed=5)
    other = monte_carlo_sinr(small_network, powers, 1000, seed=6)
    for user in small_network.users():
        assert first[user] == second[user]
        assert first[user].sinr != other[user].sinr


def test_monte_carlo_user_subset_matches_full_run(small_network):
    powers = np.ones(4)
    full = monte_carlo_sinr(small_network, powers, 1500, seed=9, batch_size=400)
    subset = monte_carlo_sinr(small_network, powers, 1500, seed=9, batch_size=400, users=[(1, 1)])
    assert list(subset) == [(1, 1)]
    assert subset[(1, 1)] == full[(1, 1)]


def test_monte_carlo_stderr_shrinks_with_realizations(small_network):
    powers = np.ones(4)
    few = monte_carlo_sinr(small_network, powers, 2000, seed=1)[(0, 0)]
    many = monte_carlo_sinr(small_network, powers, 8000, seed=1)[(0, 0)]
    assert 0.3 < many.ni_stderr / few.ni_stderr < 0.7
    assert many.num_realizations == 8000


def test_monte_carlo_silent_user(small_network):
    powers = np.array([0.0, 1.0, 1.0, 1.0])
    estimate = monte_carlo_sinr(small_network, powers, 500, seed=2)[(0, 0)]
    assert estimate.signal == 0.0
    assert estimate.sinr == 0.0
    assert estimate.se == 0.0


def test_monte_carlo_rejects_invalid_input(small_network):
    with pytest.raises(InvalidParameterError):
        monte_carlo_sinr(small_network, np.ones(4), 0, seed=0)
    with pytest.raises(InvalidParameterError):
        monte_carlo_sinr(small_network, np.ones(4), 10, seed=0, batch_size=0)
    with pytest.raises(DimensionMismatchError):
        monte_carlo_sinr(small_network, np.ones(3), 10, seed=0)
    with pytest.raises(InvalidParameterError):
        monte_carlo_sinr(small_network, -np.ones(4), 10, seed=0)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(20))
def test_monte_carlo_matches_closed_form_desk_scale(seed):
    network = mock_network(np.random.default_rng(seed), num_cells=2, users_per_cell=3, antennas=16, scatterers=6)
    powers = np.random.default_rng(100 + seed).uniform(0.5, 2.0, size=network.num_users)
    estimates = monte_carlo_sinr(network, powers, 100_000, seed=seed, batch_size=1000)
    assert_terms_agree(network, powers, estimates, sinr_rtol=0.02)
