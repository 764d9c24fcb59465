import numpy as np
import pytest
from hypothesis import given, strategies as st

from plapgraph import calculus as calc
from plapgraph.energy import (BatchOperators, EnergyModel, ModelError, SolveResult, dense_lambda_2,
                              diagonal_scaling, energy, energy_gradient, equation_residual,
                              estimate_lambda_p, nehari_residual, rayleigh_quotient,
                              residual_jacobian, truncated_model)
from plapgraph.graph import grid_graph, path_graph
from plapgraph.nonlinearity import pure_power, sum_of_powers, weighted_power
from plapgraph.verify import finite_difference_error

from strategies import graphs


def test_energy_examples(k2_model):
    assert energy(k2_model, [1.0, 1.0]) == pytest.approx(0.5, abs=1e-15)
    assert energy(k2_model, [0.0, 0.0]) == 0.0
    assert energy(k2_model, [0.0, 3.0]) == pytest.approx(-11.25, abs=1e-13)


@pytest.mark.parametrize("t", [0.0, 0.5, 1.0, 1.7])
def test_gradient_on_constants(k2_model, t):
    assert np.allclose(energy_gradient(k2_model, [t, t]), t - t ** 3, atol=1e-14)


def test_gradient_zero_at_origin_for_every_family(k2):
    for nl in (pure_power(3.0), weighted_power(4.0, [1.0, 2.0]), sum_of_powers([3.0, 5.0], [1, 1])):
        m = EnergyModel(k2, 2.0, 1.0, nl)
        assert energy(m, np.zeros(2)) == 0.0
        assert np.array_equal(energy_gradient(m, np.zeros(2)), np.zeros(2))


def test_residual_examples(k2_model):
    assert equation_residual(k2_model, [1.0, 1.0]) == pytest.approx(0.0, abs=1e-15)
    assert equation_residual(k2_model, [0.0, 0.0]) == 0.0
    assert equation_residual(k2_model, [0.0, 1.0]) == pytest.approx(1.0, abs=1e-15)


def test_gradient_matches_finite_differences_on_grid():
    rng = np.random.default_rng(5)
    g = grid_graph(5, 5).with_measure(rng.uniform(0.5, 2.0, 25))
    for p in (2.0, 3.0, 4.0):
        m = EnergyModel(g, p, rng.uniform(0.1, 2.0, 25), pure_power(p + 1.5))
        assert finite_difference_error(m, rng.normal(size=25), rng.normal(size=25)) <= 1e-6


@given(graphs(2, 15), st.sampled_from([1.2, 1.5, 1.8]), st.integers(0, 2**31))
def test_gradient_fd_singular_range(g, p, seed):
    rng = np.random.default_rng(seed)
    # continuous random values: no vanishing edge difference, no vanishing u
    u = rng.uniform(0.2, 2.0, g.n_vertices) * rng.choice([-1, 1], g.n_vertices)
    m = EnergyModel(g, p, 1.0, pure_power(p + 1.0))
    i, j, _ = g.edges
    if np.min(np.abs(u[i] - u[j])) < 1e-3:
        return
    assert finite_difference_error(m, u, rng.normal(size=g.n_vertices)) <= 1e-6


@given(graphs(2, 15), st.sampled_from([1.5, 2.0, 3.0]), st.integers(0, 2**31))
def test_equation_residual_is_sup_of_gradient(g, p, seed):
    m = EnergyModel(g, p, 1.0, pure_power(p + 1.0))
    u = np.random.default_rng(seed).normal(size=g.n_vertices)
    assert equation_residual(m, u) == float(np.max(np.abs(energy_gradient(m, u))))


@given(graphs(2, 15), st.floats(1.2, 4.0), st.floats(0.2, 3.0), st.integers(0, 2**31))
def test_pure_power_fibre_closed_form(g, p, dq, seed):
    q = p + dq
    rng = np.random.default_rng(seed)
    rho = rng.uniform(0.0, 2.0, g.n_vertices)
    m = EnergyModel(g, p, rho, pure_power(q))
    u = rng.normal(size=g.n_vertices)
    norm = calc.hp_norm_p(g, u, rho, p)
    mass = calc.integral(g, calc.positive_part(u) ** q)
    for t in (0.3, 1.0, 2.5):
        expect = t ** p / p * norm - t ** q / q * mass
        assert energy(m, t * u) == pytest.approx(expect, rel=1e-12, abs=1e-12)


def test_model_validation(k2):
    with pytest.raises(ModelError, match="p must exceed 1"):
        EnergyModel(k2, 1.0, 1.0, pure_power(4.0))
    with pytest.raises(ModelError):
        EnergyModel(k2, 2.0, [-1.0, 1.0], pure_power(4.0))
    assert EnergyModel(k2, 2.0, 0.0, pure_power(4.0)).rho_degenerate
    assert not EnergyModel(k2, 2.0, [0.0, 1.0], pure_power(4.0)).rho_degenerate


def test_rayleigh_examples(k2_model):
    assert rayleigh_quotient(k2_model, [1.0, 1.0]) == pytest.approx(1.0, rel=1e-15)
    assert rayleigh_quotient(k2_model, [1.0, -1.0]) == pytest.approx(3.0, rel=1e-15)


@given(graphs(2, 15), st.floats(1.2, 4.0), st.floats(0.1, 3.0), st.integers(0, 2**31))
def test_rayleigh_bounded_below_by_potential(g, p, rho_min, seed):
    m = EnergyModel(g, p, rho_min, pure_power(p + 1.0))
    u = np.random.default_rng(seed).normal(size=g.n_vertices)
    assert rayleigh_quotient(m, u) >= rho_min * (1 - 1e-13)


def test_lambda_examples(k2_model):
    assert estimate_lambda_p(k2_model).value == pytest.approx(1.0, abs=1e-8)
    m = EnergyModel(path_graph(3), 2.0, 1.0, pure_power(4.0))
    ref = np.linalg.eigvalsh(np.eye(3) + path_graph(3).laplacian_matrix())[0]
    assert ref == pytest.approx(1.0, abs=1e-14)
    assert estimate_lambda_p(m).value == pytest.approx(ref, rel=1e-8)
    assert dense_lambda_2(m)[0] == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("p", [1.5, 2.5, 3.0])
def test_lambda_at_least_rho(p):
    rng = np.random.default_rng(1)
    g = grid_graph(3, 4).with_measure(rng.uniform(0.5, 2, 12))
    m = EnergyModel(g, p, rng.uniform(1.0, 2.0, 12), pure_power(p + 1))
    est = estimate_lambda_p(m, tol=1e-10)
    assert est.value >= 1 - 1e-10 and est.upper_bound
    assert est.value <= rayleigh_quotient(m, np.ones(12)) + 1e-12


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(2)
    g = grid_graph(3, 3).with_measure(rng.uniform(0.5, 2, 9))
    for p in (2.0, 2.5, 3.0, 1.5):
        m = EnergyModel(g, p, rng.uniform(0.5, 1.5, 9), pure_power(p + 1.5))
        u = rng.uniform(0.2, 1.5, 9)
        J = residual_jacobian(m, u)
        h = 1e-6
        fd = np.column_stack([(energy_gradient(m, u + h * e) - energy_gradient(m, u - h * e)) / (2 * h)
                              for e in np.eye(9)])
        assert np.allclose(J, fd, rtol=1e-5, atol=1e-6)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_batch_operators_match_single(p):
    rng = np.random.default_rng(4)
    g = grid_graph(3, 4).with_measure(rng.uniform(0.5, 2, 12))
    m = EnergyModel(g, p, rng.uniform(0.5, 1.5, 12), pure_power(p + 1.5))
    U = rng.normal(size=(5, 12))
    ops = BatchOperators(m)
    assert np.allclose(ops.energy(U), [energy(m, u) for u in U], rtol=1e-13, atol=1e-14)
    assert np.allclose(ops.gradient(U), [energy_gradient(m, u) for u in U], rtol=1e-13, atol=1e-14)
    assert np.allclose(ops.scaling(U), [diagonal_scaling(m, u) for u in U], rtol=1e-13)


def test_result_record_round_trip(k2_model):
    from plapgraph.energy import make_result
    r = make_result(k2_model, np.array([1.0, 1.0]), iterations=3, trace=[(0.5, 1e-9)], method="x")
    back = SolveResult.from_dict(r.to_dict())
    assert back.to_dict() == r.to_dict()
    bad = r.to_dict()
    bad["equation_residual"] = -1.0
    with pytest.raises(ValueError):
        SolveResult.from_dict(bad)
    assert nehari_residual(k2_model, r.u) == pytest.approx(0.0, abs=1e-14)


@given(graphs(3, 30), st.integers(0, 3), st.integers(0, 2**32 - 1), st.sampled_from([1.5, 2.0, 3.0]))
def test_truncation_is_zero_extension(g, radius, seed, p):
    rng = np.random.default_rng(seed)
    model = EnergyModel(g, p, rng.uniform(0, 2, g.n_vertices), pure_power(p + 1.5, 1.0))
    sub, keep = truncated_model(model, radius)
    v = np.where(sub.support, rng.normal(size=sub.n), 0.0)
    u = np.zeros(g.n_vertices)
    u[keep] = v
    assert energy(sub, v) == pytest.approx(energy(model, u), rel=1e-12, abs=1e-12)
    # the pointwise field agrees on the unknowns
    assert np.allclose(energy_gradient(sub, v)[sub.support], energy_gradient(model, u)[keep][sub.support],
                       rtol=1e-10, atol=1e-12)


def test_truncation_radius_zero_on_lattice():
    # one unknown t at a degree-4 centre: J = 5 t^2 / 2 - t^4 / 4, level 25/4
    from plapgraph.nehari import truncation_profile

    model = EnergyModel(grid_graph(5, 5, root=12), 2.0, 1.0, pure_power(4.0))
    rows = truncation_profile(model, [0, 1, 4])
    assert rows[0].unknowns == 1 and rows[0].energy == pytest.approx(6.25, abs=1e-10)
    assert rows[0].energy > rows[1].energy > rows[2].energy
    assert all(r.converged for r in rows)


def test_truncation_rejects_constrained_model(k2_model):
    with pytest.raises(ModelError):
        truncated_model(k2_model.with_support([True, False]), 1)
