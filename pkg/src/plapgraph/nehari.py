"""Nehari-manifold ground states.

Every ``u`` with ``u+ != 0`` has a unique multiple ``t0 u`` on the Nehari
manifold, the maximum of the fibering map ``t -> J(t u)``. The ground state is
found by descending ``J`` along the scaled negative gradient and pulling each
trial point back onto the manifold with that projection.
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, sparse

from . import calculus as calc
from .energy import (EnergyModel, ModelError, SolveResult, diagonal_scaling, energy,
                     energy_gradient, make_result, residual_jacobian, truncated_model)
from .graph import color_classes

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps


class ProjectionError(ValueError):
    """No Nehari projection exists (``u+ == 0`` or zero norm)."""


class SolveError(RuntimeError):
    """Every seed failed; ``best`` holds the lowest-residual attempt."""

    def __init__(self, message, best: SolveResult | None = None):
        super().__init__(message)
        self.best = best


@dataclass
class NehariProjection:
    t0: float
    fiber_energy: float
    bracket: tuple
    residual: float
    sign_changes: int = 1


@dataclass
class SolverConfig:
    """Descent settings shared by the ground-state drivers."""

    n_random: int = 4
    spikes: bool = True
    tol_eq: float = 1e-8
    tol_n: float = 1e-10
    max_iter: int = 50000
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    seed: int = 0
    workers: int = 1
    polish: bool = True
    keep_trace: bool = True
    stall_window: int = 500


# -- fibering map ------------------------------------------------------------

def gamma(model: EnergyModel, u, t: float) -> float:
    """``t^{1-p} int psi(x, t u+) u+ dsigma``."""
    if not t > 0:
        raise ValueError("t must be positive")
    up = calc.positive_part(calc.as_vertex_function(model.graph, u))
    if not np.any(up > 0):
        raise ProjectionError("u+ vanishes identically")
    return float(np.sum(model.sigma * model.nonlinearity.psi(t * up) * up)) / t ** (model.p - 1)


def fiber_energy(model: EnergyModel, u, t: float) -> float:
    return energy(model, t * np.asarray(u, dtype=float))


def nehari_project(model: EnergyModel, u, tol: float = 4 * EPS,
                   expand: float = 4.0) -> NehariProjection:
    """Unique ``t0 > 0`` with ``||u||^p_H = gamma_u(t0)``.

    The bracket grows geometrically from ``t = 1`` until the sign of
    ``||u||^p - gamma_u(t)`` changes (it is positive near 0 and negative for
    large ``t`` because ``gamma_u`` increases strictly from 0 to infinity),
    then Brent's bracketed method narrows it to relative width ``tol``.
    """
    u = calc.as_vertex_function(model.graph, u)
    up = calc.positive_part(u)
    if not np.any(up > 0):
        raise ProjectionError("u+ vanishes identically; no Nehari projection")
    A = calc.hp_norm_p(model.graph, u, model.rho, model.p)
    if not A > 0:
        raise ProjectionError("H_p norm of u vanishes")
    sigma, psi, p = model.sigma, model.nonlinearity.psi, model.p

    def f(t):
        return 1.0 - float(np.sum(sigma * psi(t * up) * up)) / (A * t ** (p - 1))

    lo = hi = 1.0
    f_lo = f_hi = f(1.0)
    signs = [f_lo > 0]
    while f_hi > 0:
        lo, f_lo = hi, f_hi
        hi *= expand
        f_hi = f(hi)
        signs.append(f_hi > 0)
        if hi > 1e300:
            raise ProjectionError("bracket expansion overflowed")
    while f_lo <= 0:
        if f_lo == 0:
            hi = lo
            break
        hi, f_hi = lo, f_lo
        lo /= expand
        f_lo = f(lo)
        signs.append(f_lo > 0)
        if lo < 1e-300:
            raise ProjectionError("bracket contraction underflowed")
    if lo == hi:
        t0 = lo
    else:
        t0 = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=max(tol, 4 * EPS), maxiter=500)
    v = t0 * u
    G = energy_gradient(model, v)
    return NehariProjection(
        t0=t0,
        fiber_energy=energy(model, v),
        bracket=(lo, hi),
        residual=abs(float(np.sum(sigma * G * v))),
        sign_changes=sum(a != b for a, b in zip(signs, signs[1:])) or 1,
    )


def pure_power_t0(model: EnergyModel, u) -> float:
    """Closed-form projection for a single-power nonlinearity ``c(x) s^(q-1)``."""
    nl = model.nonlinearity
    if len(nl.exponents) != 1:
        raise ModelError("closed form needs a single-power nonlinearity")
    q = nl.exponents[0]
    u = calc.as_vertex_function(model.graph, u)
    up = calc.positive_part(u)
    A = calc.hp_norm_p(model.graph, u, model.rho, model.p)
    B = float(np.sum(model.sigma * nl.coefficients[0] * up ** q))
    return (A / B) ** (1.0 / (q - model.p))


def project(model: EnergyModel, u) -> np.ndarray:
    return nehari_project(model, u).t0 * np.asarray(u, dtype=float)


# -- seeds ---------------------------------------------------------------------

def spike_seeds(model: EnergyModel) -> list[np.ndarray]:
    """One indicator function per colour class of the (graph, data) structure."""
    extra = [model.rho, *model.nonlinearity.vertex_data(model.n)]
    if model.support is not None:
        extra.append(model.support.astype(float))
    colors = color_classes(model.graph, *extra)
    seeds = []
    seen = set()
    for x in range(model.n):
        if colors[x] in seen or (model.support is not None and not model.support[x]):
            continue
        seen.add(colors[x])
        e = np.zeros(model.n)
        e[x] = 1.0
        seeds.append(e)
    return seeds


def default_seeds(model: EnergyModel, config: SolverConfig) -> list[np.ndarray]:
    rng = np.random.default_rng(config.seed)
    seeds = [model.restrict(rng.random(model.n) + 0.05) for _ in range(config.n_random)]
    if config.spikes:
        seeds.extend(spike_seeds(model))
    return seeds


# -- descent -------------------------------------------------------------------

def _energy_scale(model, u):
    quad = calc.hp_norm_p(model.graph, u, model.rho, model.p) / model.p
    pot = float(np.sum(model.sigma * model.nonlinearity.Psi(calc.positive_part(u))))
    return quad + pot


def nehari_descent(model: EnergyModel, u0, config: SolverConfig | None = None,
                   seed_index: int = -1) -> SolveResult:
    """Scaled gradient descent of ``J`` restricted to the Nehari manifold.

    Trial steps start from the Barzilai-Borwein length and backtrack by
    ``config.backtrack`` until the Armijo condition (constant
    ``config.armijo_c``) holds for the re-projected point. A relative
    round-off allowance keeps the test meaningful once energy decrements
    reach machine precision.
    """
    cfg = config or SolverConfig()
    sigma = model.sigma
    u = model.restrict(calc.as_vertex_function(model.graph, u0, "seed"))
    if not np.any(u > 0):
        raise ProjectionError("seed has vanishing positive part")
    u = project(model, u)
    J = energy(model, u)
    trace = []
    prev = None
    converged = False
    it = 0
    warn = []
    best_res, best_it = np.inf, 0
    for it in range(cfg.max_iter + 1):
        G = energy_gradient(model, u)
        res = float(np.max(np.abs(G)))
        if cfg.keep_trace:
            trace.append((J, res))
        if res <= cfg.tol_eq:
            converged = True
            break
        if it == cfg.max_iter:
            break
        if res < 0.5 * best_res:
            best_res, best_it = res, it
        elif it - best_it >= cfg.stall_window:
            warn.append(f"residual stalled at {res:.3e} after {it} iterations")
            break
        D = diagonal_scaling(model, u)
        d = model.restrict(-G / D)
        slope = float(np.sum(sigma * G * d))
        step = 1.0
        if prev is not None:
            s = u - prev[0]
            y = sigma * (G - prev[1])
            sy = float(np.dot(s, y))
            if sy > 0:
                step = float(np.dot(s, sigma * D * s)) / sy
        step = min(max(step, 1e-10), 1e10)
        noise = 64 * EPS * _energy_scale(model, u)
        accepted = False
        while step > 1e-20:
            trial = u + step * d
            if np.any(trial > 0):
                try:
                    trial = project(model, trial)
                    J_new = energy(model, trial)
                except (ProjectionError, calc.NonFiniteError):
                    J_new = np.inf
                if J_new <= J + cfg.armijo_c * step * slope + noise:
                    accepted = True
                    break
            step *= cfg.backtrack
        if not accepted:
            warn.append(f"line search stalled at iteration {it} (residual {res:.3e})")
            break
        prev = (u, G)
        u, J = trial, J_new
    if not converged and cfg.polish:
        polished = newton_polish(model, u, cfg.tol_eq)
        if polished is not None:
            u = polished
            converged = True
            warn.append("finished by Newton polishing")
    return make_result(model, u, iterations=it, converged=converged, trace=trace,
                       method="nehari", seed_index=seed_index, warn=warn)


def newton_polish(model: EnergyModel, u, tol: float, max_steps: int = 30,
                  start_residual: float = 1e-3) -> np.ndarray | None:
    """Newton iteration on the residual field from a near-critical point.

    Returns the polished point when the residual drops below ``tol`` and the
    positive part stays nontrivial; ``None`` when not applicable.
    """
    u = np.array(u, dtype=float)
    G = energy_gradient(model, u)
    res = float(np.max(np.abs(G)))
    scale = max(1.0, float(np.max(np.abs(u))))
    if res > start_residual * scale:
        return None
    for _ in range(max_steps):
        if res <= tol:
            return u if np.any(u > 0) else None
        try:
            Jac = residual_jacobian(model, u)
            delta = np.linalg.solve(Jac, -G)
        except (ModelError, np.linalg.LinAlgError):
            return None
        if not np.all(np.isfinite(delta)):
            return None
        lam = 1.0
        while lam > 1e-4:
            trial = model.restrict(u + lam * delta)
            try:
                G_t = energy_gradient(model, trial)
            except calc.NonFiniteError:
                G_t = None
            if G_t is not None and float(np.max(np.abs(G_t))) < res:
                break
            lam *= 0.5
        else:
            return None
        u, G = trial, G_t
        res = float(np.max(np.abs(G)))
    return u if res <= tol and np.any(u > 0) else None


def _select(results: list[SolveResult]) -> SolveResult | None:
    best = None
    for r in results:
        if not r.converged:
            continue
        if best is None or r.energy < best.energy - 1e-12 * max(1.0, abs(best.energy)):
            best = r
    return best


def ground_state_solve(model: EnergyModel, config: SolverConfig | None = None,
                       seeds: list | None = None, extra_seeds: list | None = None) -> SolveResult:
    """Lowest-energy converged Nehari descent over all seeds.

    ``seeds`` replaces the default set (random nonnegative vectors plus one
    spike per vertex colour class); ``extra_seeds`` is tried first, ahead of
    the defaults (used for warm starts).
    """
    cfg = config or SolverConfig()
    if seeds is None:
        seeds = default_seeds(model, cfg)
    seeds = list(extra_seeds or []) + list(seeds)
    if not seeds:
        raise ValueError("at least one seed is required")
    for k, s in enumerate(seeds):
        if not np.any(model.restrict(np.asarray(s, dtype=float)) > 0):
            raise ProjectionError(f"seed {k} has vanishing positive part")

    def run(k):
        return nehari_descent(model, seeds[k], cfg, seed_index=k)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run, range(len(seeds))))
    else:
        results = [run(k) for k in range(len(seeds))]
    best = _select(results)
    if best is None:
        fallback = min(results, key=lambda r: (r.equation_residual, r.seed_index))
        raise SolveError(f"no seed converged (best residual {fallback.equation_residual:.3e})",
                         best=fallback)
    return best


# -- diagnostics -----------------------------------------------------------------

@dataclass
class TruncationRow:
    radius: int
    unknowns: int
    energy: float
    residual: float
    converged: bool


def truncation_profile(model: EnergyModel, radii, center: int | None = None,
                       config: SolverConfig | None = None) -> list[TruncationRow]:
    """Ground-state level ``m(R)`` of the zero-extension truncations to ``B_R``.

    A sensitivity diagnostic only: a flat profile suggests the truncation
    error is small, it does not bound it.
    """
    rows = []
    for R in radii:
        sub, _ = truncated_model(model, R, center)
        try:
            res = ground_state_solve(sub, config)
        except SolveError as exc:
            res = exc.best
        rows.append(TruncationRow(int(R), int(sub.support.sum()),
                                  res.energy if res is not None else float("nan"),
                                  res.equation_residual if res is not None else float("inf"),
                                  bool(res is not None and res.converged)))
    return rows

def verify_positivity(g, u, strict_tol: float = 1e-12, mask=None) -> bool:
    """Positivity dichotomy: either ``min u > strict_tol`` or ``u == 0``.

    With ``mask`` the check is made on the masked vertices only.
    """
    u = np.asarray(u, dtype=float)
    if mask is not None:
        u = u[np.asarray(mask, dtype=bool)]
    if np.all(np.abs(u) <= strict_tol):
        return True
    return bool(np.min(u) > strict_tol)


def _batch_grad_sq(g, U):
    src, dst, w = g.half_edges
    D = U[:, dst] - U[:, src]
    gather = sparse.csr_matrix((np.ones(src.size), (src, np.arange(src.size))),
                               shape=(g.n_vertices, src.size))
    return (gather @ (w * D * D).T).T / (2.0 * g.measure)


def _batch_fibers(model, U, iters=200):
    """Vectorised Nehari projection of the rows of ``U`` by bisection in log t."""
    g, p, sigma = model.graph, model.p, model.sigma
    UP = np.maximum(U, 0.0)
    A = np.sum(sigma * (_batch_grad_sq(g, U) ** (p / 2) + model.rho * np.abs(U) ** p), axis=1)

    def f(t):
        return 1.0 - np.sum(sigma * model.nonlinearity.psi(t[:, None] * UP) * UP, axis=1) / (A * t ** (p - 1))

    lo = np.ones(U.shape[0])
    hi = np.ones(U.shape[0])
    for _ in range(2000):
        pos = f(hi) > 0
        if not pos.any():
            break
        lo = np.where(pos, hi, lo)
        hi = np.where(pos, hi * 4, hi)
    for _ in range(2000):
        neg = f(lo) <= 0
        if not neg.any():
            break
        hi = np.where(neg, lo, hi)
        lo = np.where(neg, lo / 4, lo)
    for _ in range(iters):
        mid = np.sqrt(lo * hi)
        pos = f(mid) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
        if np.all(hi / lo - 1 < 4 * EPS):
            break
    t0 = np.sqrt(lo * hi)
    V = t0[:, None] * U
    Jv = (np.sum(sigma * (_batch_grad_sq(g, V) ** (p / 2) + model.rho * np.abs(V) ** p), axis=1) / p
          - np.sum(sigma * model.nonlinearity.Psi(np.maximum(V, 0.0)), axis=1))
    return t0, Jv


def brute_force_ground_state(model: EnergyModel, step: float = 1e-3, bound: float = 2.0,
                             faces_only: bool = True, max_vertices: int = 4,
                             chunk: int = 200000) -> tuple[np.ndarray, float]:
    """Exhaustive grid search of the Nehari infimum on a tiny graph.

    Grid points of ``[0, bound]^n`` (nonzero) are projected onto the Nehari
    manifold and the lowest fibre energy wins. The fibre energy only depends
    on the ray through the point, so by default only points on the outer faces
    ``max_x u(x) = bound`` are enumerated; this visits every grid ray.
    """
    n = model.n
    if n > max_vertices:
        raise ModelError(f"brute force limited to {max_vertices} vertices, got {n}")
    ticks = np.round(np.arange(0.0, bound + 0.5 * step, step), 12)
    ticks = ticks[ticks <= bound + 1e-12]
    ticks[-1] = bound
    free = np.ones(n, dtype=bool) if model.support is None else model.support.copy()
    k = int(free.sum())

    def candidates():
        if faces_only:
            for face in range(k):
                for rest in _chunks(itertools.product(ticks, repeat=k - 1), chunk):
                    R = np.array(rest, dtype=float).reshape(-1, k - 1)
                    # points whose first maximal coordinate is ``face``
                    keep = np.all(R[:, :face] < bound, axis=1) if face else np.ones(len(R), bool)
                    R = R[keep]
                    yield np.insert(R, face, bound, axis=1)
        else:
            for rest in _chunks(itertools.product(ticks, repeat=k), chunk):
                R = np.array(rest, dtype=float).reshape(-1, k)
                yield R[np.any(R > 0, axis=1)]

    best_J, best_u = np.inf, None
    for C in candidates():
        if not len(C):
            continue
        U = np.zeros((len(C), n))
        U[:, free] = C
        t0, Jv = _batch_fibers(model, U)
        j = int(np.argmin(Jv))
        if Jv[j] < best_J:
            best_J, best_u = float(Jv[j]), t0[j] * U[j]
    return best_u, best_J


def _chunks(iterable, size):
    it = iter(iterable)
    while True:
        block = list(itertools.islice(it, size))
        if not block:
            return
        yield block


def with_config(config: SolverConfig | None, **changes) -> SolverConfig:
    return replace(config or SolverConfig(), **changes)
