import numpy as np
import pytest
from sklearn.base import clone

from plapgraph.estimators import (GroundStateSolver, LambdaEstimator, MountainPassSolver,
                                  PotentialWellSweep)
from plapgraph.graph import path_graph
from plapgraph.nonlinearity import pure_power


def test_params_and_clone():
    est = GroundStateSolver(p=3.0, q=5.0)
    assert est.get_params()["p"] == 3.0
    twin = clone(est).set_params(q=6.0)
    assert twin.q == 6.0 and est.q == 5.0


def test_ground_state_and_mountain_pass_agree():
    g = path_graph(3)
    gs = GroundStateSolver().fit(g)
    mp = MountainPassSolver().fit(g)
    assert gs.energy_ == pytest.approx(mp.energy_, abs=1e-6)
    assert np.array_equal(gs.transform(), gs.u_)


def test_nonlinearity_override(k2):
    a = GroundStateSolver(nonlinearity=pure_power(4.0)).fit(k2).energy_
    b = GroundStateSolver(nonlinearity={"family": "pure_power", "exponents": [4.0],
                                        "coefficients": [1.0]}).fit(k2).energy_
    assert a == b == pytest.approx(0.5, abs=1e-6)


def test_lambda_estimator(k2):
    assert LambdaEstimator().fit(k2).lambda_ == pytest.approx(1.0, abs=1e-8)


def test_well_sweep_estimator(k2):
    est = PotentialWellSweep(a=[0.0, 1.0], b=0.0, theta_schedule=(1.0, 100.0)).fit(k2)
    assert est.limit_energy_ == pytest.approx(0.25, abs=1e-8)
    assert est.table_.splitlines()[-1].startswith("inf,")


def test_unfitted_and_bad_input():
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        GroundStateSolver().transform()
    with pytest.raises(TypeError):
        GroundStateSolver().fit(np.zeros((2, 2)))
