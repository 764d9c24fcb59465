import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from plapgraph import calculus as calc
from plapgraph.energy import ConvergenceWarning, EnergyModel, energy, nehari_residual
from plapgraph.graph import grid_graph, path_graph, random_connected_graph
from plapgraph.nehari import (ProjectionError, SolveError, SolverConfig, brute_force_ground_state,
                              fiber_energy, gamma, ground_state_solve, nehari_descent, nehari_project,
                              pure_power_t0, spike_seeds, verify_positivity)
from plapgraph.nonlinearity import pure_power, sum_of_powers, weighted_power

from strategies import graphs


def test_gamma_closed_form(k2_model):
    assert gamma(k2_model, [1.0, 1.0], 1.0) == pytest.approx(2.0, rel=1e-15)
    assert gamma(k2_model, [1.0, 1.0], 2.0) == pytest.approx(8.0, rel=1e-15)
    g = path_graph(3).with_measure([0.5, 2.0, 3.0])
    m = EnergyModel(g, 2.5, 1.0, pure_power(4.0))
    u = np.array([1.3, -1.0, 0.0])
    t = 1.7
    assert gamma(m, u, t) == pytest.approx(t ** 1.5 * 0.5 * 1.3 ** 4, rel=1e-14)


def test_projection_examples(k2_model):
    pr = nehari_project(k2_model, [1.0, 1.0])
    assert pr.t0 == pytest.approx(1.0, rel=1e-10)
    assert fiber_energy(k2_model, [1.0, 1.0], pr.t0) == pytest.approx(0.5, rel=1e-12)
    pr = nehari_project(k2_model, [0.0, 1.0])
    assert pr.t0 == pytest.approx(np.sqrt(2), rel=1e-10)
    assert fiber_energy(k2_model, [0.0, 1.0], pr.t0) == pytest.approx(1.0, rel=1e-12)


def test_projection_rejects_nonpositive(k2_model):
    with pytest.raises(ProjectionError):
        nehari_project(k2_model, [-1.0, 0.0])


@given(graphs(2, 15), st.floats(1.2, 4.0), st.floats(0.2, 3.0), st.integers(0, 2**31))
def test_root_finder_matches_closed_form(g, p, dq, seed):
    rng = np.random.default_rng(seed)
    m = EnergyModel(g, p, rng.uniform(0.1, 2.0, g.n_vertices), pure_power(p + dq))
    u = rng.normal(size=g.n_vertices)
    u[0] = abs(u[0]) + 0.1
    pr = nehari_project(m, u)
    assert pr.t0 == pytest.approx(pure_power_t0(m, u), rel=1e-10)
    assert pr.sign_changes == 1
    c = float(rng.uniform(0.1, 10.0))
    assert nehari_project(m, c * u).t0 == pytest.approx(pr.t0 / c, rel=1e-10)


@given(graphs(2, 12), st.floats(1.2, 4.0), st.integers(0, 2**31))
def test_gamma_strictly_increasing(g, p, seed):
    rng = np.random.default_rng(seed)
    nl = sum_of_powers([p + 0.3, p + 1.7], [1.0, rng.uniform(0.1, 2, g.n_vertices)])
    m = EnergyModel(g, p, 1.0, nl)
    u = rng.normal(size=g.n_vertices)
    u[0] = abs(u[0]) + 0.05
    vals = np.array([gamma(m, u, t) for t in np.geomspace(1e-3, 1e3, 40)])
    assert np.all(np.diff(vals) > 0)


@given(graphs(2, 12), st.floats(1.2, 4.0), st.integers(0, 2**31))
def test_projection_is_fibre_maximum(g, p, seed):
    rng = np.random.default_rng(seed)
    m = EnergyModel(g, p, rng.uniform(0.2, 2, g.n_vertices),
                    sum_of_powers([p + 0.5, p + 2.0], [1.0, 0.3]))
    u = rng.normal(size=g.n_vertices)
    u[0] = abs(u[0]) + 0.05
    t0 = nehari_project(m, u).t0
    top = fiber_energy(m, u, t0)
    for t in (t0 / 4, t0 / 2, 0.75 * t0, 1.5 * t0, 2 * t0, 4 * t0):
        assert top >= fiber_energy(m, u, t) - 1e-10


def test_k2_ground_state(k2_model):
    r = ground_state_solve(k2_model)
    assert r.converged
    assert r.energy == pytest.approx(0.5, abs=1e-6)
    # the reduced functional is flat to fourth order at (1, 1): energy is sharp, u only to ~1e-2
    assert np.allclose(r.u, [1.0, 1.0], atol=1e-2)
    assert r.equation_residual <= 1e-8


BUNDLE_LIKE = [
    (path_graph(3), 2.0, pure_power(4.0)),
    (grid_graph(3, 3), 2.0, pure_power(4.0)),
    (random_connected_graph(12, np.random.default_rng(1)), 3.0, pure_power(5.0)),
    (random_connected_graph(10, np.random.default_rng(2)), 1.5, pure_power(3.0)),
    (path_graph(4).with_measure([1.0, 1.0, 1.0, 50.0]), 2.0, weighted_power(3.5, [1, 2, 1, 1])),
]


@pytest.mark.parametrize("g,p,nl", BUNDLE_LIKE)
def test_converged_solutions_are_positive_nehari_points(g, p, nl):
    m = EnergyModel(g, p, 1.0, nl)
    r = ground_state_solve(m)
    assert r.converged and r.energy >= 1e-12
    assert r.equation_residual <= 1e-8
    assert verify_positivity(g, r.u)
    norm = calc.hp_norm_p(g, r.u, m.rho, p)
    assert nehari_residual(m, r.u) <= 1e-10 * (1 + norm)
    # on the Nehari manifold J >= (1/p - 1/alpha) ||u||^p
    assert r.energy >= (1 / p - 1 / nl.alpha) * norm - 1e-12


def test_oracle_equivalence_small_models():
    for n, step in ((2, 1e-3), (3, 1e-2)):
        m = EnergyModel(path_graph(n), 2.0, 1.0, pure_power(4.0))
        _, brute = brute_force_ground_state(m, step=step)
        assert abs(ground_state_solve(m).energy - brute) <= 1e-4


def test_brute_force_k2(k2_model):
    u, J = brute_force_ground_state(k2_model, step=1e-3)
    assert J == pytest.approx(0.5, abs=1e-12)
    assert np.allclose(u, [1.0, 1.0], atol=1e-9)


def test_brute_force_asymmetric_measure_below_symmetric_ansatz():
    g = path_graph(2).with_measure([1.0, 10.0])
    m = EnergyModel(g, 2.0, 1.0, pure_power(4.0))
    _, J = brute_force_ground_state(m, step=1e-2)
    assert J <= fiber_energy(m, [1.0, 1.0], nehari_project(m, [1.0, 1.0]).t0) + 1e-15


def test_brute_force_size_limit():
    m = EnergyModel(path_graph(5), 2.0, 1.0, pure_power(4.0))
    with pytest.raises(ValueError):
        brute_force_ground_state(m)


def test_positivity_examples(k2):
    assert verify_positivity(k2, np.array([1.0, 1.0]))
    assert verify_positivity(k2, np.zeros(2))
    assert not verify_positivity(k2, np.array([1e-16, 1.0]), strict_tol=1e-12)


def test_spike_seeds_one_per_orbit():
    seeds = spike_seeds(EnergyModel(path_graph(5), 2.0, 1.0, pure_power(4.0)))
    assert [int(np.flatnonzero(s)[0]) for s in seeds] == [0, 1, 2]


def test_iteration_cap_raises_with_best(k2_model):
    cfg = SolverConfig(max_iter=1, polish=False, n_random=1, spikes=False)
    m = EnergyModel(path_graph(3), 2.0, 1.0, pure_power(4.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        with pytest.raises(SolveError) as info:
            ground_state_solve(m, cfg)
    assert info.value.best is not None and not info.value.best.converged


def test_descent_energy_non_increasing():
    m = EnergyModel(grid_graph(3, 3), 2.5, 1.0, pure_power(4.0))
    u0 = np.random.default_rng(0).random(9) + 0.05
    r = nehari_descent(m, u0, SolverConfig(polish=False))
    energies = np.array([e for e, _ in r.trace])
    assert np.all(np.diff(energies) <= 1e-12 * np.abs(energies[1:]) + 1e-15)


def test_worker_count_does_not_change_result():
    m = EnergyModel(random_connected_graph(15, np.random.default_rng(9)), 2.5, 1.0, pure_power(4.0))
    a = ground_state_solve(m, SolverConfig(workers=1))
    b = ground_state_solve(m, SolverConfig(workers=4))
    assert a.u.tobytes() == b.u.tobytes() and a.seed_index == b.seed_index


def test_energy_of_solution_consistent(k2_model):
    r = ground_state_solve(k2_model)
    assert energy(k2_model, r.u) == r.energy
