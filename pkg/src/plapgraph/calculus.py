"""Discrete gradients, integrals, norms and the variational p-Laplacian.

Vertex functions are plain float arrays aligned with the graph's vertex
indexing. Every operator here is matrix-free and reduces in a fixed order
(``np.bincount`` over stored half-edges, ``np.sum`` over ascending vertex
index), so repeated evaluations are bit-identical.
"""

from __future__ import annotations

import numpy as np

from .graph import WeightedGraph


class NonFiniteError(FloatingPointError):
    """A vertex function or operator output contains NaN or inf."""


def as_vertex_function(g: WeightedGraph, u, name: str = "u") -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (g.n_vertices,):
        raise ValueError(f"{name} has shape {u.shape}, expected ({g.n_vertices},)")
    if not np.all(np.isfinite(u)):
        raise NonFiniteError(f"{name} has non-finite entries")
    return u


def _check_p(p):
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")


def _finite(out, what):
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"{what} produced non-finite values")
    return out


def edge_differences(g: WeightedGraph, u: np.ndarray) -> np.ndarray:
    """``u(y) - u(x)`` for every stored half-edge ``x -> y``."""
    src, dst, _ = g.half_edges
    return u[dst] - u[src]


def gradient_vector(g: WeightedGraph, u, x: int) -> np.ndarray:
    """Components ``sqrt(w_xy / (2 sigma(x))) (u(y) - u(x))`` in stored neighbour order."""
    u = as_vertex_function(g, u)
    nb = g.neighbors(x)
    return np.sqrt(g.neighbor_weights(x) / (2.0 * g.measure[x])) * (u[nb] - u[x])


def grad_norm_squared(g: WeightedGraph, u: np.ndarray) -> np.ndarray:
    src, _, w = g.half_edges
    d = edge_differences(g, u)
    return np.bincount(src, weights=w * d * d, minlength=g.n_vertices) / (2.0 * g.measure)


def grad_norms(g: WeightedGraph, u) -> np.ndarray:
    """``|grad u|(x)`` at every vertex."""
    u = as_vertex_function(g, u)
    return np.sqrt(grad_norm_squared(g, u))


def grad_norm(g: WeightedGraph, u, x: int) -> float:
    g._check_vertex(x)
    return float(grad_norms(g, u)[x])


def integral(g: WeightedGraph, u, mask: np.ndarray | None = None) -> float:
    """``sum_x sigma(x) u(x)``, optionally restricted to ``mask``."""
    u = as_vertex_function(g, u)
    terms = g.measure * u
    if mask is not None:
        terms = np.where(mask, terms, 0.0)
    return float(np.sum(terms))


def lq_norm(g: WeightedGraph, u, q: float) -> float:
    u = as_vertex_function(g, u)
    if q == np.inf:
        return float(np.max(np.abs(u)))
    if not q >= 1:
        raise ValueError(f"q must be >= 1 or inf, got {q}")
    return float(np.sum(g.measure * np.abs(u) ** q) ** (1.0 / q))


def hp_norm_p(g: WeightedGraph, u, rho, p: float, grad_mask=None, mass_mask=None) -> float:
    """``int (|grad u|^p + rho |u|^p) dsigma`` (the p-th power of the norm).

    ``grad_mask`` / ``mass_mask`` restrict the two integrals to vertex
    subsets; the Dirichlet norm on a well uses the closure for the gradient
    part and the well itself for the potential part.
    """
    _check_p(p)
    u = as_vertex_function(g, u)
    rho = np.broadcast_to(np.asarray(rho, dtype=float), u.shape)
    if np.any(rho < 0):
        raise ValueError("potential rho must be nonnegative")
    gterm = g.measure * grad_norms(g, u) ** p
    mterm = g.measure * rho * np.abs(u) ** p
    if grad_mask is not None:
        gterm = np.where(grad_mask, gterm, 0.0)
    if mass_mask is not None:
        mterm = np.where(mass_mask, mterm, 0.0)
    return _finite(float(np.sum(gterm) + np.sum(mterm)), "hp_norm")


def hp_norm(g: WeightedGraph, u, rho, p: float, **masks) -> float:
    return hp_norm_p(g, u, rho, p, **masks) ** (1.0 / p)


def w1p_norm(g: WeightedGraph, u, p: float) -> float:
    return hp_norm(g, u, 1.0, p)


def _gradient_factor(grad: np.ndarray, p: float) -> np.ndarray:
    # |grad u|^(p-2), set to 0 where the gradient vanishes; those entries only
    # ever multiply zero differences (see p_laplacian).
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(grad > 0, grad ** (p - 2.0), 0.0)


def p_laplacian(g: WeightedGraph, u, p: float) -> np.ndarray:
    """Pointwise variational p-Laplacian.

    ``Delta_p u(x) = (1/sigma(x)) sum_y (|grad u|^{p-2}(x) + |grad u|^{p-2}(y))/2 w_xy (u(y) - u(x))``.
    A summand with ``u(y) == u(x)`` is exactly zero for every ``p > 1``.
    """
    _check_p(p)
    u = as_vertex_function(g, u)
    src, dst, w = g.half_edges
    d = u[dst] - u[src]
    gf = _gradient_factor(grad_norms(g, u), p)
    terms = np.where(d != 0, 0.5 * (gf[src] + gf[dst]) * w * d, 0.0)
    out = np.bincount(src, weights=terms, minlength=g.n_vertices) / g.measure
    return _finite(out, "p_laplacian")


def gradient_pairing(g: WeightedGraph, u, v, p: float) -> float:
    """``int |grad u|^{p-2} <grad u, grad v> dsigma`` via the gradient vectors."""
    _check_p(p)
    u = as_vertex_function(g, u)
    v = as_vertex_function(g, v, "v")
    src, dst, w = g.half_edges
    du = u[dst] - u[src]
    dv = v[dst] - v[src]
    gf = _gradient_factor(grad_norms(g, u), p)
    # sigma(x) * (1/(2 sigma(x))) sum_y w du dv
    terms = np.where(du != 0, 0.5 * gf[src] * w * du * dv, 0.0)
    per_vertex = np.bincount(src, weights=terms, minlength=g.n_vertices)
    return float(np.sum(per_vertex))


def integration_by_parts_sides(g: WeightedGraph, u, v, p: float) -> tuple[float, float]:
    """Return ``(int (Delta_p u) v dsigma, -int |grad u|^{p-2} grad u . grad v dsigma)``."""
    lhs = integral(g, p_laplacian(g, u, p) * np.asarray(v, dtype=float))
    rhs = -gradient_pairing(g, u, v, p)
    return lhs, rhs


def check_integration_by_parts(g: WeightedGraph, u, v, p: float) -> float:
    lhs, rhs = integration_by_parts_sides(g, u, v, p)
    return abs(lhs - rhs)


def positive_part(u) -> np.ndarray:
    return np.maximum(np.asarray(u, dtype=float), 0.0)


def negative_part(u) -> np.ndarray:
    return np.minimum(np.asarray(u, dtype=float), 0.0)


def write_vertex_function(g: WeightedGraph, u, path) -> None:
    u = as_vertex_function(g, u)
    with open(path, "w") as fh:
        for x in range(g.n_vertices):
            fh.write(f"{g.label_of(x)} {float(u[x])!r}\n")


def read_vertex_function(g: WeightedGraph, path, default: float | None = None) -> np.ndarray:
    """Read "v value" lines; vertices not listed take ``default`` (error if None)."""
    index = {g.label_of(x): x for x in range(g.n_vertices)}
    out = np.full(g.n_vertices, np.nan)
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2 or parts[0] not in index:
                raise ValueError(f"{path}:{lineno}: bad vertex-function line {line!r}")
            out[index[parts[0]]] = float(parts[1])
    missing = np.isnan(out)
    if missing.any():
        if default is None:
            raise ValueError(f"{path}: no value for {int(missing.sum())} vertices")
        out[missing] = default
    return as_vertex_function(g, out)
