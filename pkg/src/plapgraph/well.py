"""Steep potential wells ``rho = theta * a + b`` and the Dirichlet limit.

As ``theta`` grows, ground states concentrate on the well ``Omega = {a = 0}``
and approach the ground state of the Dirichlet problem on ``Omega``. The
sweep here tracks one warm-started branch over an increasing schedule and
tabulates the convergence diagnostics against the limit solution.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import calculus as calc
from .energy import EnergyModel, SolveResult
from .graph import DomainSubset, GraphError, boundary, is_connected_subset
from .nehari import SolverConfig, SolveError, ground_state_solve, verify_positivity

SWEEP_COLUMNS = ("theta", "m_theta", "tail_mass", "w1p_gap", "off_omega_mass",
                 "residual", "iterations")


class WellError(ValueError):
    pass


class SweepError(RuntimeError):
    def __init__(self, message, rows):
        super().__init__(message)
        self.rows = rows


@dataclass
class WellConfig:
    """Well coefficient ``a``, base potential ``b`` and the ``theta`` schedule."""

    a: np.ndarray
    b: np.ndarray
    theta_schedule: tuple
    omega: frozenset | None = None  # override; computed as {a == 0} otherwise

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.broadcast_to(np.asarray(self.b, dtype=float), self.a.shape).copy()
        if np.any(self.a < 0) or np.any(self.b < 0):
            raise WellError("a and b must be nonnegative")
        zero_set = frozenset(np.flatnonzero(self.a == 0).tolist())
        if self.omega is None:
            self.omega = zero_set
        else:
            self.omega = frozenset(int(x) for x in self.omega)
            if self.omega != zero_set:
                raise WellError("omega override disagrees with the zero set of a")
        if not self.omega:
            raise WellError("the well {a = 0} is empty")
        off = np.ones(self.a.size, dtype=bool)
        off[sorted(self.omega)] = False
        if np.any(self.a[off] < 1):
            raise WellError("a must be >= 1 off the well")
        sched = tuple(float(t) for t in self.theta_schedule)
        if not sched:
            raise WellError("theta schedule is empty")
        if any(t2 <= t1 for t1, t2 in zip(sched, sched[1:])):
            raise WellError("theta schedule must be strictly increasing")
        if sched[0] < 1:
            raise WellError("theta schedule must start at theta >= 1")
        self.theta_schedule = sched

    def domain(self, g) -> DomainSubset:
        if not is_connected_subset(g, self.omega):
            raise WellError("the well must be connected")
        return boundary(g, self.omega)

    def omega_mask(self) -> np.ndarray:
        m = np.zeros(self.a.size, dtype=bool)
        m[sorted(self.omega)] = True
        return m

    def potential(self, theta: float) -> np.ndarray:
        return theta * self.a + self.b


@dataclass
class SweepRow:
    theta: float
    m_theta: float
    tail_mass: float
    w1p_gap: float
    off_omega_mass: float
    residual: float
    iterations: int

    def as_tuple(self):
        return tuple(getattr(self, c) for c in SWEEP_COLUMNS)


@dataclass
class SweepResult:
    rows: list
    limit: SolveResult
    solutions: list = field(default_factory=list)
    caveats: list = field(default_factory=list)


def theta_model(well: WellConfig, base: EnergyModel, theta: float) -> EnergyModel:
    if not theta > 0:
        raise WellError("theta must be positive")
    return base.with_rho(well.potential(theta))


def theta_ground_state(well: WellConfig, base: EnergyModel, theta: float,
                       config: SolverConfig | None = None, warm_start=None) -> SolveResult:
    """Ground state for ``rho = theta a + b``; a warm start is tried first."""
    model = theta_model(well, base, theta)
    extra = [warm_start] if warm_start is not None else None
    return ground_state_solve(model, config, extra_seeds=extra)


def dirichlet_model(well: WellConfig, base: EnergyModel) -> EnergyModel:
    well.domain(base.graph)
    return EnergyModel(base.graph, base.p, well.b, base.nonlinearity, support=well.omega_mask())


def dirichlet_norm_p(well: WellConfig, base: EnergyModel, u) -> float:
    """``int_{closure} |grad u|^p + int_Omega b |u|^p`` with ``u`` zero-extended off the well."""
    g = base.graph
    dom = well.domain(g)
    u = np.where(well.omega_mask(), calc.as_vertex_function(g, u), 0.0)
    return calc.hp_norm_p(g, u, well.b, base.p,
                          grad_mask=dom.closure_mask(g.n_vertices), mass_mask=dom.mask(g.n_vertices))


def dirichlet_energy(well: WellConfig, base: EnergyModel, u) -> float:
    mask = well.omega_mask()
    u = np.where(mask, np.asarray(u, dtype=float), 0.0)
    pot = float(np.sum(np.where(mask, base.sigma * base.nonlinearity.Psi(calc.positive_part(u)), 0.0)))
    return dirichlet_norm_p(well, base, u) / base.p - pot


def dirichlet_ground_state(well: WellConfig, base: EnergyModel,
                           config: SolverConfig | None = None) -> SolveResult:
    """Ground state of the limit problem: unknowns on the well, zero elsewhere."""
    return ground_state_solve(dirichlet_model(well, base), config)


def _row(well, base, theta, res, u0):
    p, g = base.p, base.graph
    u = res.u
    mask = well.omega_mask()
    up = np.abs(u) ** p
    return SweepRow(
        theta=theta,
        m_theta=res.energy,
        tail_mass=float(np.sum(g.measure * theta * well.a * up)),
        w1p_gap=calc.w1p_norm(g, u - u0, p) if u0 is not None else float("nan"),
        off_omega_mass=float(np.sum(np.where(mask, 0.0, g.measure * up))),
        residual=res.equation_residual,
        iterations=res.iterations,
    )


def theta_sweep(well: WellConfig, base: EnergyModel, config: SolverConfig | None = None,
                energy_slack: float = 1e-10) -> SweepResult:
    """Warm-started ground states over the schedule, then the Dirichlet limit."""
    results = []
    warm = None
    rows = []
    for theta in well.theta_schedule:
        try:
            res = theta_ground_state(well, base, theta, config, warm_start=warm)
        except SolveError as exc:
            raise SweepError(f"solve failed at theta={theta}: {exc}", rows) from exc
        results.append(res)
        rows.append(_row(well, base, theta, res, None))
        warm = res.u
    try:
        limit = dirichlet_ground_state(well, base, config)
    except SolveError as exc:
        raise SweepError(f"Dirichlet limit solve failed: {exc}", rows) from exc
    rows = [_row(well, base, theta, res, limit.u) for theta, res in zip(well.theta_schedule, results)]
    caveats = []
    m = [r.m_theta for r in rows]
    if any(b < a - energy_slack for a, b in zip(m, m[1:])):
        caveats.append("m_theta decreases along the schedule; the branch may have switched ground states")
    if not verify_positivity(base.graph, limit.u, 1e-12, mask=well.omega_mask()):
        caveats.append("limit solution is not strictly positive on the well")
    return SweepResult(rows=rows, limit=limit, solutions=[r.u for r in results], caveats=caveats)


def sweep_csv(result: SweepResult) -> str:
    """Sweep table as CSV text; the last row (theta = inf) is the Dirichlet limit."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in result.rows:
        w.writerow([_fmt(v) for v in r.as_tuple()])
    lim = result.limit
    w.writerow(["inf", _fmt(lim.energy), _fmt(0.0), _fmt(0.0), _fmt(0.0),
                _fmt(lim.equation_residual), lim.iterations])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def read_sweep_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [{k: (int(v) if k == "iterations" else float(v)) for k, v in r.items()} for r in rows]


# -- bundled wells -------------------------------------------------------------

def grid_well(rows: int = 5, cols: int = 5, inner: int = 3, b: float = 1.0,
              schedule=(1.0, 10.0, 100.0, 1000.0, 10000.0)):
    """Lattice with a square well in the middle; ``a`` is the hop distance to the well."""
    from .graph import grid_graph, hop_distances

    g = grid_graph(rows, cols)
    r0, c0 = (rows - inner) // 2, (cols - inner) // 2
    omega = [r * cols + c for r in range(r0, r0 + inner) for c in range(c0, c0 + inner)]
    dist = np.full(g.n_vertices, np.inf)
    for x in omega:
        dist = np.minimum(dist, hop_distances(g, x))
    if not np.all(np.isfinite(dist)):
        raise GraphError("grid is disconnected")
    return g, WellConfig(a=dist.astype(float), b=np.full(g.n_vertices, float(b)),
                         theta_schedule=tuple(schedule))
