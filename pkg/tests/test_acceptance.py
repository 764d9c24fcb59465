"""Acceptance gate: one test per criterion, each at its stated tolerance.

Every test records a ``criterion N: PASS/FAIL`` line that the terminal
summary prints (see ``conftest.py``); runtime limits are part of the verdict.
Oracles are computed here independently of the solver internals: explicit
edge loops for the norm, a dense eigensolve, a grid search and the
hand-derived two-vertex values.
"""

import time
import warnings

import numpy as np
import pytest

from plapgraph import cli
from plapgraph import config as cfgmod
from plapgraph.calculus import integration_by_parts_sides
from plapgraph.energy import ConvergenceWarning, EnergyModel, estimate_lambda_p
from plapgraph.graph import path_graph, random_connected_graph
from plapgraph.mountain_pass import mpa_solve
from plapgraph.nehari import brute_force_ground_state, ground_state_solve, nehari_project
from plapgraph.nonlinearity import pure_power
from plapgraph.verify import finite_difference_error
from plapgraph.well import WellConfig, dirichlet_ground_state, read_sweep_csv, theta_sweep

REPORT = {}

MODELS = ("path5", "grid3", "complete4", "random12", "random10_p15", "lollipop", "star",
          "grid4_p4", "path8_rho", "random20")

# converged energies collected across criteria for the sign check
ENERGIES = []


def record(n, ok, detail, elapsed=None, limit=None):
    if limit is not None:
        ok = ok and elapsed < limit
        detail += f"; {elapsed:.2f} s (limit {limit:g} s)"
    REPORT[n] = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(REPORT[n])
    return ok


def oracle_norm_p(g, u, rho, p):
    """``sum_x sigma (|grad u|^p + rho |u|^p)`` by explicit loops over neighbours."""
    total = 0.0
    for x in range(g.n_vertices):
        sq = sum(w / (2 * g.measure[x]) * (u[y] - u[x]) ** 2
                 for y, w in zip(g.neighbors(x), g.neighbor_weights(x)))
        total += g.measure[x] * (sq ** (p / 2) + rho[x] * abs(u[x]) ** p)
    return total


def test_criterion_01_integration_by_parts():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    sizes = []
    for _ in range(50):
        g = random_connected_graph(int(rng.integers(2, 201)), rng)
        sizes.append(g.n_vertices)
        for p in (1.5, 2.0, 2.5, 3.0, 4.0):
            u, v = rng.normal(size=(2, g.n_vertices))
            lhs, rhs = integration_by_parts_sides(g, u, v, p)
            worst = max(worst, abs(lhs - rhs) / (1 + abs(lhs) + abs(rhs)))
    elapsed = time.perf_counter() - start
    assert max(sizes) <= 200
    assert record(1, worst <= 1e-10, f"max scaled residual {worst:.1e} (limit 1e-10)",
                  elapsed, 10)


def test_criterion_02_gradient_consistency():
    rng = np.random.default_rng(102)
    start = time.perf_counter()
    regular, singular = 0.0, 0.0
    for k in range(20):
        p = (2.0, 2.5, 3.0, 4.0)[k % 4]
        regular = max(regular, finite_difference_error(*_fd_case(rng, p)))
    for k in range(10):
        singular = max(singular, finite_difference_error(*_fd_case(rng, (1.2, 1.5)[k % 2])))
    elapsed = time.perf_counter() - start
    ok = regular <= 1e-6 and singular <= 1e-6
    assert record(2, ok, f"max rel. error {regular:.1e} (p >= 2), {singular:.1e} "
                         "(p in 1.2, 1.5) (limit 1e-6)", elapsed, 30)


def _fd_case(rng, p):
    g = random_connected_graph(int(rng.integers(3, 30)), rng)
    n = g.n_vertices
    model = EnergyModel(g, p, rng.uniform(0, 2, n), pure_power(p + rng.uniform(0.5, 2), 1.0))
    # distinct values keep every edge difference away from zero
    u = (np.arange(n) + rng.uniform(0.1, 0.9, n)) / n * rng.choice([-1.0, 1.0], n)
    u = rng.permutation(u) + 0.05 * np.sign(u)
    src, dst, _ = g.edges
    assert np.min(np.abs(u[src] - u[dst])) > 1e-3
    return model, u, rng.normal(size=n)


def test_criterion_03_closed_form_projection():
    rng = np.random.default_rng(103)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        g = random_connected_graph(int(rng.integers(2, 30)), rng)
        n = g.n_vertices
        p = rng.uniform(1.2, 4.0)
        q = p + rng.uniform(0.2, 3.0)
        rho = rng.uniform(0.0, 2.0, n)
        model = EnergyModel(g, p, rho, pure_power(q))
        u = rng.normal(size=n)
        u[int(rng.integers(n))] = abs(rng.normal()) + 0.1
        up = np.maximum(u, 0.0)
        oracle = (oracle_norm_p(g, u, rho, p) / np.sum(g.measure * up ** q)) ** (1 / (q - p))
        worst = max(worst, abs(nehari_project(model, u).t0 - oracle) / oracle)
    elapsed = time.perf_counter() - start
    assert record(3, worst <= 1e-10, f"max rel. error {worst:.1e} (limit 1e-10)", elapsed, 5)


def test_criterion_04_k2_anchor():
    start = time.perf_counter()
    model = EnergyModel(path_graph(2), 2.0, 1.0, pure_power(4.0))
    gs = ground_state_solve(model)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        mp, _ = mpa_solve(model)
    _, brute = brute_force_ground_state(model, step=1e-3)
    elapsed = time.perf_counter() - start
    ENERGIES.extend(r.energy for r in (gs, mp) if r.converged)
    # the antisymmetric direction is degenerate at (1, 1): the residual is
    # cubic in the offset, so u is only pinned to about 1e-3
    u_err = float(np.max(np.abs(gs.u - 1.0)))
    ok = (gs.converged and abs(gs.energy - 0.5) <= 1e-6 and u_err <= 1e-2
          and mp.converged and abs(mp.energy - gs.energy) <= 1e-6 and abs(brute - gs.energy) <= 1e-4)
    assert record(4, ok, f"m = {gs.energy:.12f}, |u - (1,1)| = {u_err:.1e}, "
                         f"|c - m| = {abs(mp.energy - gs.energy):.1e}, "
                         f"|grid - m| = {abs(brute - gs.energy):.1e}", elapsed, 5)


@pytest.fixture(scope="module")
def bundled_solutions():
    start = time.perf_counter()
    out = {}
    for name in MODELS:
        cfg, base = cfgmod.load_config(cli.bundled_config(name))
        model = cfgmod.build_model(cfg, base)
        gs = ground_state_solve(model, cfgmod.solver_config(cfg))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            mp, _ = mpa_solve(model, config=cfgmod.mountain_pass_config(cfg))
        out[name] = (gs, mp)
    return out, time.perf_counter() - start


def test_criterion_05_positivity(bundled_solutions):
    sols, elapsed = bundled_solutions
    worst, count = np.inf, 0
    for gs, mp in sols.values():
        for r in (gs, mp):
            if r.converged:
                count += 1
                ENERGIES.append(r.energy)
                worst = min(worst, float(np.min(r.u) / np.max(r.u)))
    ok = count >= len(MODELS) and worst > 1e-8
    assert record(5, ok, f"{count} converged solutions on {len(sols)} models, "
                         f"min(u)/max(u) >= {worst:.1e} (limit 1e-8)", elapsed, 120)


def test_criterion_07_lambda_oracle():
    rng = np.random.default_rng(107)
    start = time.perf_counter()
    worst = 0.0
    for n in (12, 50, 100, 150, 200):
        g = random_connected_graph(n, rng)
        rho = rng.uniform(0.1, 2.0, n)
        est = estimate_lambda_p(EnergyModel(g, 2.0, rho, pure_power(3.0)), seed=int(rng.integers(1000)))
        # generalized symmetric eigenproblem: (L + diag(sigma rho)) v = lambda diag(sigma) v
        src, dst, w = g.edges
        K = np.zeros((n, n))
        np.add.at(K, (src, dst), -w)
        np.add.at(K, (dst, src), -w)
        K[np.diag_indices(n)] = -K.sum(axis=1) + g.measure * rho
        s = 1 / np.sqrt(g.measure)
        ref = float(np.linalg.eigvalsh(s[:, None] * K * s[None, :])[0])
        worst = max(worst, abs(est.value - ref) / ref)
    elapsed = time.perf_counter() - start
    assert record(7, worst <= 1e-6, f"max rel. error {worst:.1e} (limit 1e-6)", elapsed, 30)


def _grid_well_sweep():
    cfg, base = cfgmod.load_config(cli.bundled_config("grid_well"))
    g = cfgmod.build_graph(cfg, base)
    well = cfgmod.build_well(cfg, g, base)
    model = EnergyModel(g, cfg.model.p, well.b, cfgmod.build_nonlinearity(cfg, g, base))
    return theta_sweep(well, model, cfgmod.solver_config(cfg))


def test_criterion_08_well_sweep():
    start = time.perf_counter()
    sweep = _grid_well_sweep()
    elapsed = time.perf_counter() - start
    rows = sweep.rows
    thetas = [r.theta for r in rows]
    m = [r.m_theta for r in rows]
    gaps = [r.w1p_gap for r in rows]
    m_omega = sweep.limit.energy
    ENERGIES.extend(m + [m_omega])
    checks = {
        "schedule": thetas == [1.0, 10.0, 100.0, 1000.0, 10000.0],
        "monotone": all(b >= a - 1e-10 for a, b in zip(m, m[1:])),
        "below limit": all(v <= m_omega + 1e-8 for v in m),
        "tail": rows[-1].tail_mass <= 0.1 * rows[0].tail_mass,
        "gap": all(b < a for a, b in zip(gaps, gaps[1:])),
    }
    failed = [k for k, v in checks.items() if not v]
    detail = (f"m_theta {m[0]:.6f}..{m[-1]:.6f} <= m_Omega {m_omega:.6f}, "
              f"tail {rows[0].tail_mass:.1e} -> {rows[-1].tail_mass:.1e}, "
              f"gap {gaps[0]:.1e} -> {gaps[-1]:.1e}" + (f"; failed: {failed}" if failed else ""))
    assert record(8, not failed, detail, elapsed, 300)


def test_criterion_09_dirichlet_anchor():
    start = time.perf_counter()
    base = EnergyModel(path_graph(2), 2.0, 0.0, pure_power(4.0))
    well = WellConfig(a=np.array([0.0, 1.0]), b=np.zeros(2), theta_schedule=(1.0,))
    res = dirichlet_ground_state(well, base)
    elapsed = time.perf_counter() - start
    # u = (t, 0): |grad u|^2 = t^2/2 at both ends, so J = t^2/2 - t^4/4, maximal at t = 1
    ENERGIES.append(res.energy)
    ok = res.converged and abs(res.energy - 0.25) <= 1e-8
    assert record(9, ok, f"m_Omega = {res.energy:.12f} (target 0.25 +- 1e-8)", elapsed, 1)


def test_criterion_10_worker_determinism(tmp_path):
    outputs = []
    for workers in (1, 8):
        out = tmp_path / f"w{workers}"
        code = cli.main(["well-sweep", "--config", "bundled:grid_well", "--out", str(out),
                         "--workers", str(workers), "--quiet"])
        assert code == 0
        outputs.append((out / "sweep.csv").read_bytes())
    same = outputs[0] == outputs[1]
    rows = read_sweep_csv(outputs[0].decode())
    assert record(10, same and len(rows) == 6,
                  f"sweep.csv {'byte-identical' if same else 'DIFFERS'} for --workers 1 and 8 "
                  f"({len(outputs[0])} bytes)")


def test_criterion_06_positive_levels():
    # runs last among the criteria (pytest keeps file order), after the solvers above
    if len(ENERGIES) < 2 * len(MODELS):
        pytest.skip("needs the solver criteria in the same session")
    low = min(ENERGIES)
    assert record(6, low >= 1e-12, f"{len(ENERGIES)} converged energies, min {low:.3e} (limit 1e-12)")
