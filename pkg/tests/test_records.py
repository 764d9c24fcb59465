import numpy as np

from plapgraph.energy import EnergyModel, LambdaEstimate
from plapgraph.graph import grid_graph
from plapgraph.nehari import ground_state_solve
from plapgraph.nonlinearity import pure_power
from plapgraph.records import read_lambda, read_result, write_lambda, write_result


def test_result_round_trip_is_exact(tmp_path):
    m = EnergyModel(grid_graph(2, 3), 2.5, 1.0, pure_power(4.0))
    r = ground_state_solve(m)
    write_result(r, tmp_path / "r.json", seed=3)
    back, meta = read_result(tmp_path / "r.json")
    assert back.u.tobytes() == r.u.tobytes() and back.energy == r.energy
    assert back.trace == [tuple(t) for t in r.trace] and meta == {"seed": 3}
    write_result(back, tmp_path / "r2.json", seed=3)
    assert (tmp_path / "r.json").read_bytes() == (tmp_path / "r2.json").read_bytes()


def test_lambda_round_trip(tmp_path):
    est = LambdaEstimate(value=1.25, minimizer=np.array([0.1, 0.2]), converged=True, restarts=4,
                         residual=1e-11)
    write_lambda(est, tmp_path / "l.json")
    back, _ = read_lambda(tmp_path / "l.json")
    assert back.value == est.value and np.array_equal(back.minimizer, est.minimizer)
