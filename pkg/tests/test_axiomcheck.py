import numpy as np
import pytest

from mimolib.axiomcheck import axiom_check
from mimolib.powerctl import InterferenceFunction, QosTargets
from mimolib.sefficiency import SinrModel
from mimolib.topology import drop_for_index

from .mocks import MOCK_TAU_C, mock_network

PROPERTIES = {"positivity", "monotonicity", "scalability", "two_sided_upper", "two_sided_lower"}


def function_for(network, xi, p_max=10.0):
    model = SinrModel.from_network(network)
    targets = QosTargets.from_xi(xi, network.pilots.tau_p, network.pilots.tau_c, p_max)
    return InterferenceFunction(model, targets)


def test_axioms_hold_on_random_network(small_network):
    function = function_for(small_network, np.full(4, 0.5))
    report = axiom_check(function, np.random.default_rng(0), num_samples=2000)
    assert report.passed
    assert report.checked_users == 4
    assert report.excluded_users == 0
    assert set(report.min_margin) == PROPERTIES
    assert report.min_margin["scalability"] > 0.0


def test_axioms_near_unit_scaling(small_network):
    function = function_for(small_network, np.full(4, 0.5))
    report = axiom_check(function, np.random.default_rng(1), num_samples=500, alpha_range=(1 + 1e-9, 1 + 2e-9))
    assert report.passed
    assert report.min_margin["scalability"] > 0.0


def test_axioms_with_congested_targets(small_network):
    # targets above what the caps can deliver exercise the soft-removal branch
    function = function_for(small_network, np.full(4, 1.2), p_max=0.01)
    report = axiom_check(function, np.random.default_rng(2), num_samples=1000)
    assert report.passed


def test_axioms_exclude_idle_and_degenerate_users(toy):
    function = function_for(toy, np.array([10.0, 0.0]))
    report = axiom_check(function, np.random.default_rng(3), num_samples=50)
    assert report.checked_users == 0
    assert report.excluded_users == 2
    assert report.passed


def test_axioms_without_pilot_sharing(rng):
    network = mock_network(rng, num_cells=2, users_per_cell=2, tau_p=4, assignment=[[0, 1], [2, 3]])
    function = function_for(network, np.linspace(0.2, 0.8, 4))
    assert network.pilots.tau_c == MOCK_TAU_C
    assert axiom_check(function, np.random.default_rng(4), num_samples=1000).passed


@pytest.mark.slow
def test_axioms_on_reference_drop(small_scenario):
    scenario = small_scenario.with_overrides(
        {"num_cells": 4, "users_per_cell": 5, "antennas": 100, "num_scatterers": 21, "area_km2": 1.0, "pilots.tau_p": 5}
    )
    network = drop_for_index(scenario, 0).network
    function = function_for(network, np.full(network.num_users, 1.5), p_max=200.0)
    report = axiom_check(function, np.random.default_rng(5), num_samples=10_000)
    assert report.passed
