"""Mountain-pass critical points by path deformation.

A polygonal path from ``0`` to a negative-energy endpoint is relaxed as a
whole: every interior node moves down the scaled gradient, the highest node
instead climbs along the path tangent while descending across it, and the
nodes on each side of the highest one are then re-interpolated to equal
arclength. The highest node converges to the mountain-pass point; once its
residual is small a Newton iteration on the residual field finishes the job.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import calculus as calc
from .energy import (BatchOperators, ConvergenceWarning, EnergyModel, SolveResult, energy,
                     make_result)
from .nehari import ProjectionError, newton_polish, spike_seeds


class PathCollapseError(RuntimeError):
    pass


@dataclass
class MountainPassPath:
    """Nodes from ``0`` to the endpoint with their energies."""

    nodes: np.ndarray
    energies: np.ndarray = field(default=None)
    max_index: int = 0

    def refresh(self, ops: BatchOperators) -> None:
        self.energies = ops.energy(self.nodes)
        self.max_index = 1 + int(np.argmax(self.energies[1:-1]))

    def arclength(self, sigma=None) -> np.ndarray:
        diffs = np.diff(self.nodes, axis=0)
        wts = 1.0 if sigma is None else sigma
        steps = np.sqrt(np.sum(wts * diffs * diffs, axis=1))
        s = np.concatenate([[0.0], np.cumsum(steps)])
        return s / s[-1] if s[-1] > 0 else s


@dataclass
class MountainPassConfig:
    n_nodes: int = 32
    tol: float = 1e-8
    max_iter: int = 50000
    step: float = 0.5
    max_move: float = 0.5
    polish: bool = True
    polish_below: float = 1e-3
    max_respace: int = 10
    endpoint: str = "all_spikes"
    keep_trace: bool = True
    stall_window: int = 500


def find_negative_endpoint(model: EnergyModel, direction, level: float = -1.0,
                           max_doublings: int = 1000) -> tuple[float, np.ndarray]:
    """Smallest ``t = 2^k`` (``k >= 0``) with ``J(t * direction) < level``."""
    direction = model.restrict(calc.as_vertex_function(model.graph, direction, "direction"))
    if not np.any(direction > 0):
        raise ProjectionError("direction has vanishing positive part; J(t u) >= 0 along it")
    t = 1.0
    for _ in range(max_doublings):
        try:
            if energy(model, t * direction) < level:
                return t, t * direction
        except calc.NonFiniteError:
            break
        t *= 2.0
    raise OverflowError("energy overflowed before the fibre dropped below the target level")


def best_spike_direction(model: EnergyModel, t_probe: float = 4.0) -> np.ndarray:
    """Vertex indicator with the lowest energy at ``t_probe`` (ties: lowest index)."""
    best, best_J = None, np.inf
    for x in range(model.n):
        if model.support is not None and not model.support[x]:
            continue
        e = np.zeros(model.n)
        e[x] = 1.0
        try:
            J = energy(model, t_probe * e)
        except calc.NonFiniteError:
            J = -np.inf
        if J < best_J:
            best, best_J = e, J
    return best


def initial_path(model: EnergyModel, endpoint: np.ndarray, n_nodes: int) -> MountainPassPath:
    ts = np.linspace(0.0, 1.0, n_nodes + 1)
    return MountainPassPath(ts[:, None] * endpoint[None, :])


def _resample(P: np.ndarray, count: int, sigma) -> np.ndarray:
    """``count`` points equally spaced in arclength along the polyline ``P``."""
    if count <= 2 or len(P) <= 2:
        return P[[0, -1]] if count == 2 else P
    diffs = np.diff(P, axis=0)
    s = np.concatenate([[0.0], np.cumsum(np.sqrt(np.sum(sigma * diffs * diffs, axis=1)))])
    if s[-1] <= 0:
        raise PathCollapseError("path segment has zero length")
    s /= s[-1]
    target = np.linspace(0.0, 1.0, count)
    k = np.clip(np.searchsorted(s, target, side="right") - 1, 0, len(P) - 2)
    span = s[k + 1] - s[k]
    frac = np.where(span > 0, (target - s[k]) / np.where(span > 0, span, 1.0), 0.0)
    out = P[k] + frac[:, None] * (P[k + 1] - P[k])
    out[0], out[-1] = P[0], P[-1]
    return out


def reparametrize(path: MountainPassPath, sigma) -> None:
    """Equal-arclength nodes on each side of the highest node (which stays put)."""
    i = path.max_index
    P = path.nodes
    left = _resample(P[:i + 1], i + 1, sigma)
    right = _resample(P[i:], len(P) - i, sigma)
    path.nodes = np.vstack([left[:-1], right])


def mpa_solve(model: EnergyModel, n_nodes: int = 32, config: MountainPassConfig | None = None,
              direction=None) -> tuple[SolveResult, MountainPassPath]:
    """Mountain-pass point of ``J``; returns the result and the final path.

    Parameters
    ----------
    model : EnergyModel
    n_nodes : int
        Number of path segments, used when ``config`` is omitted.
    config : MountainPassConfig, optional
    direction : array_like, optional
        Endpoint direction. When omitted, ``config.endpoint`` decides:
        ``"best_spike"`` uses the single vertex spike with the lowest energy
        at ``t = 4``, ``"all_spikes"`` runs one path per vertex colour class
        and keeps the lowest converged pass (ties go to the earliest run).
        A single path only finds a local pass; the level itself is a minimum
        over all paths.
    """
    cfg = config or MountainPassConfig(n_nodes=n_nodes)
    if cfg.n_nodes < 8:
        raise ValueError("mountain-pass path needs at least 8 segments")
    if direction is not None:
        return _single_pass(model, cfg, direction, 0)
    if cfg.endpoint == "best_spike":
        return _single_pass(model, cfg, best_spike_direction(model), 0)
    if cfg.endpoint != "all_spikes":
        raise ValueError(f"unknown endpoint mode {cfg.endpoint!r}")
    best = None
    runs = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        for k, d in enumerate(spike_seeds(model)):
            res, path = _single_pass(model, cfg, d, k)
            runs.append((res, path))
            if res.converged and (best is None or res.energy
                                  < best[0].energy - 1e-12 * max(1.0, abs(best[0].energy))):
                best = (res, path)
    if best is None:
        best = min(runs, key=lambda rp: rp[0].equation_residual)
        warnings.warn("no mountain-pass run converged; returning the smallest residual",
                      ConvergenceWarning, stacklevel=2)
    return best


def _single_pass(model, cfg, direction, index):
    N = cfg.n_nodes
    _, endpoint = find_negative_endpoint(model, direction)
    path = initial_path(model, endpoint, N)
    ops = BatchOperators(model)
    sigma = model.sigma
    support = model.support
    path.refresh(ops)
    step = cfg.step
    trace = []
    warn = []
    converged = False
    next_polish = cfg.polish_below
    res = np.inf
    collapses = 0
    stall_ref, stall_it = np.inf, 0
    it = 0
    for it in range(cfg.max_iter + 1):
        i = path.max_index
        U = path.nodes
        G = ops.gradient(U)
        res = float(np.max(np.abs(G[i])))
        if cfg.keep_trace:
            trace.append((float(path.energies[i]), res))
        if res <= cfg.tol:
            converged = True
            break
        if it == cfg.max_iter:
            break
        if path.energies[i] <= 0:
            # every interior node fell below J(0): the samples jumped the ridge
            warn.append("path tunnelled through the ridge")
            break
        if res < 0.5 * stall_ref:
            stall_ref, stall_it = res, it
        elif it - stall_it >= cfg.stall_window:
            warn.append(f"stalled: residual did not halve in {cfg.stall_window} iterations")
            break
        if cfg.polish and res <= next_polish * max(1.0, float(np.max(np.abs(U[i])))):
            polished = newton_polish(model, U[i], cfg.tol, start_residual=np.inf)
            # reject polishes that wander off, e.g. down to the trivial point 0
            if polished is not None and (np.max(np.abs(polished - U[i]))
                                         <= 0.25 * np.max(np.abs(U[i]))):
                U = U.copy()
                U[i] = polished
                path.nodes = U
                path.refresh(ops)
                path.max_index = i
                warn.append(f"finished by Newton polishing at iteration {it}")
                converged = True
                res = float(np.max(np.abs(ops.gradient(U[i:i + 1])[0])))
                break
            next_polish *= 0.1
        Dg = ops.scaling(U)
        V = U - step * G / Dg
        # climbing node: reverse the tangential part of the scaled gradient
        tau = U[i + 1] - U[i - 1]
        metric = sigma * Dg[i]
        tau = tau / np.sqrt(np.sum(metric * tau * tau))
        gM = G[i] / Dg[i]
        V[i] = U[i] + step * (-gM + 2.0 * np.sum(metric * gM * tau) * tau)
        # cap moves at a fraction of the mean segment length; nodes past the
        # ridge would otherwise slide downhill without bound
        move = V - U
        size = np.sqrt(np.sum(sigma * move * move, axis=1))
        seg = np.diff(U, axis=0)
        h = cfg.max_move * float(np.sum(np.sqrt(np.sum(sigma * seg * seg, axis=1)))) / N
        factor = np.ones_like(size)
        big = size > h
        factor[big] = h / size[big]
        V = U + move * factor[:, None]
        V[0], V[-1] = U[0], U[-1]
        if support is not None:
            V = np.where(support, V, 0.0)
        candidate = MountainPassPath(V, max_index=i)
        try:
            reparametrize(candidate, sigma)
            candidate.refresh(ops)
        except (PathCollapseError, FloatingPointError):
            candidate = None
        if candidate is None or not np.all(np.isfinite(candidate.energies)):
            collapses += 1
            if collapses > cfg.max_respace:
                raise PathCollapseError("path update keeps failing after step reductions")
            step *= 0.5
            continue
        path = candidate
    u = path.nodes[path.max_index]
    if not converged:
        warnings.warn(f"mountain-pass iteration stopped with residual {res:.3e}",
                      ConvergenceWarning, stacklevel=2)
        if it == cfg.max_iter:
            warn.append("iteration cap reached; best-so-far returned")
    result = make_result(model, u, iterations=it, converged=converged, trace=trace,
                         method="mountain_pass", seed_index=index, warn=warn)
    return result, path


def write_path_profile(path: MountainPassPath, fh_or_path) -> None:
    """CSV with one row per node: index, arclength fraction, energy."""
    s = path.arclength()
    rows = [(k, f"{s[k]!r}", f"{float(path.energies[k])!r}") for k in range(len(path.nodes))]
    if hasattr(fh_or_path, "write"):
        _write_rows(fh_or_path, rows)
    else:
        with open(fh_or_path, "w", newline="") as fh:
            _write_rows(fh, rows)


def _write_rows(fh, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["node", "arclength", "energy"])
    w.writerows(rows)
