"""Energy functional, first variation and Rayleigh-quotient estimates.

For a model ``(G, p, rho, psi)`` the functional is

    J(u) = (1/p) int (|grad u|^p + rho |u|^p) dsigma - int Psi(x, u+) dsigma

and its first variation is returned as the pointwise field

    G(u) = -Delta_p u + rho |u|^{p-2} u - psi(x, u+),

so that ``<J'(u), phi> = sum_x sigma(x) G(u)(x) phi(x)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import calculus as calc
from .graph import WeightedGraph, ball, induced_subgraph
from .nonlinearity import NonlinearitySpec


class ModelError(ValueError):
    pass


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EnergyModel:
    """Graph, exponent, potential and nonlinearity.

    ``support`` (boolean mask, optional) restricts admissible functions to
    those vanishing off the mask; this is how the Dirichlet problem on a
    potential well is posed. The pointwise residual is then only taken on
    the support.
    """

    graph: WeightedGraph
    p: float
    rho: np.ndarray
    nonlinearity: NonlinearitySpec
    support: np.ndarray | None = None
    rho_degenerate: bool = field(init=False, default=False)

    def __post_init__(self):
        if not self.p > 1:
            raise ModelError(f"p must exceed 1, got {self.p}")
        object.__setattr__(self, "p", float(self.p))
        n = self.graph.n_vertices
        rho = np.array(np.broadcast_to(np.asarray(self.rho, dtype=float), (n,)))
        if not np.all(np.isfinite(rho)) or np.any(rho < 0):
            raise ModelError("potential rho must be finite and nonnegative")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        self.nonlinearity.check(self.p, n)
        if self.support is not None:
            s = np.asarray(self.support, dtype=bool).copy()
            if s.shape != (n,) or not s.any():
                raise ModelError("support mask must be a nonempty vertex mask")
            s.setflags(write=False)
            object.__setattr__(self, "support", s)
        if not np.any(rho > 0):
            # the H_p seminorm vanishes on constants when rho == 0
            object.__setattr__(self, "rho_degenerate", True)

    @property
    def n(self) -> int:
        return self.graph.n_vertices

    @property
    def sigma(self) -> np.ndarray:
        return self.graph.measure

    def with_rho(self, rho) -> "EnergyModel":
        return EnergyModel(self.graph, self.p, rho, self.nonlinearity, self.support)

    def with_support(self, support) -> "EnergyModel":
        return EnergyModel(self.graph, self.p, self.rho, self.nonlinearity, support)

    def restrict(self, u: np.ndarray) -> np.ndarray:
        """Zero ``u`` off the support (identity when unconstrained)."""
        if self.support is None:
            return u
        return np.where(self.support, u, 0.0)


def truncated_model(model: EnergyModel, radius: int, center: int | None = None
                    ) -> tuple[EnergyModel, np.ndarray]:
    """Zero-extension truncation to the hop ball ``B_R`` around ``center``.

    Unknowns live on ``B_R``; the boundary layer is kept with ``u = 0`` so
    that edges leaving the ball still enter the gradient. Returns the model
    on the closure and the map new index -> old index.
    """
    if model.support is not None:
        raise ModelError("truncate the unconstrained model, then constrain it")
    g = model.graph
    dom = ball(g, g.root if center is None else int(center), int(radius))
    sub, keep = induced_subgraph(g, dom.closure)
    nl = model.nonlinearity
    coeffs = tuple(c[keep] if c.ndim else c for c in nl.coefficients)
    support = np.isin(keep, sorted(dom.members))
    return EnergyModel(sub, model.p, model.rho[keep], NonlinearitySpec(nl.family, nl.exponents, coeffs),
                       support=support), keep


@dataclass
class SolveResult:
    """Outcome of a ground-state or mountain-pass solve."""

    u: np.ndarray
    energy: float
    grad_norm_dual: float
    equation_residual: float
    nehari_residual: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)  # (energy, residual) per iteration
    method: str = ""
    seed_index: int = -1
    warnings: list = field(default_factory=list)

    def to_dict(self, include_trace: bool = True) -> dict:
        return {
            "method": self.method,
            "converged": bool(self.converged),
            "energy": float(self.energy),
            "grad_norm_dual": float(self.grad_norm_dual),
            "equation_residual": float(self.equation_residual),
            "nehari_residual": float(self.nehari_residual),
            "iterations": int(self.iterations),
            "seed_index": int(self.seed_index),
            "warnings": list(self.warnings),
            "u": [float(v) for v in self.u],
            "trace": [[float(a), float(b)] for a, b in self.trace] if include_trace else [],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolveResult":
        out = cls(
            u=np.asarray(d["u"], dtype=float),
            energy=float(d["energy"]),
            grad_norm_dual=float(d["grad_norm_dual"]),
            equation_residual=float(d["equation_residual"]),
            nehari_residual=float(d["nehari_residual"]),
            iterations=int(d["iterations"]),
            converged=bool(d["converged"]),
            trace=[tuple(t) for t in d.get("trace", [])],
            method=d.get("method", ""),
            seed_index=int(d.get("seed_index", -1)),
            warnings=list(d.get("warnings", [])),
        )
        if not (np.isfinite(out.equation_residual) and out.equation_residual >= 0
                and np.isfinite(out.nehari_residual) and out.nehari_residual >= 0):
            raise ValueError("result residuals must be finite and nonnegative")
        return out


# -- functional --------------------------------------------------------------

def _signed_power(u, e):
    return np.sign(u) * np.abs(u) ** e


def energy(model: EnergyModel, u) -> float:
    g = model.graph
    u = calc.as_vertex_function(g, u)
    with np.errstate(over="raise", invalid="raise"):
        try:
            quad = calc.hp_norm_p(g, u, model.rho, model.p)
            pot = float(np.sum(model.sigma * model.nonlinearity.Psi(calc.positive_part(u))))
        except FloatingPointError as exc:
            raise calc.NonFiniteError(f"energy overflow: {exc}") from None
    val = quad / model.p - pot
    if not np.isfinite(val):
        raise calc.NonFiniteError("energy is not finite")
    return val


def energy_gradient(model: EnergyModel, u) -> np.ndarray:
    """Pointwise residual field ``-Delta_p u + rho |u|^{p-2} u - psi(x, u+)``."""
    g = model.graph
    u = calc.as_vertex_function(g, u)
    out = (-calc.p_laplacian(g, u, model.p)
           + model.rho * _signed_power(u, model.p - 1.0)
           - model.nonlinearity.psi(calc.positive_part(u)))
    out = model.restrict(out)
    if not np.all(np.isfinite(out)):
        raise calc.NonFiniteError("energy gradient is not finite")
    return out


def pairing(model: EnergyModel, G: np.ndarray, phi: np.ndarray) -> float:
    """``<J'(u), phi> = sum sigma G phi``."""
    return float(np.sum(model.sigma * G * phi))


def equation_residual(model: EnergyModel, u) -> float:
    return float(np.max(np.abs(energy_gradient(model, u))))


def nehari_residual(model: EnergyModel, u) -> float:
    u = calc.as_vertex_function(model.graph, u)
    return abs(pairing(model, energy_gradient(model, u), u))


def nehari_gap(model: EnergyModel, u) -> float:
    """``||u||^p_H - int psi(x, u+) u+ dsigma`` (zero on the Nehari manifold)."""
    up = calc.positive_part(u)
    return (calc.hp_norm_p(model.graph, u, model.rho, model.p)
            - float(np.sum(model.sigma * model.nonlinearity.psi(up) * up)))


def make_result(model: EnergyModel, u, iterations=0, converged=True, trace=None,
                method="", seed_index=-1, warn=None) -> SolveResult:
    G = energy_gradient(model, u)
    return SolveResult(
        u=np.array(u, dtype=float),
        energy=energy(model, u),
        grad_norm_dual=float(np.sqrt(np.sum(G * G))),
        equation_residual=float(np.max(np.abs(G))),
        nehari_residual=abs(pairing(model, G, u)),
        iterations=iterations,
        converged=converged,
        trace=list(trace or []),
        method=method,
        seed_index=seed_index,
        warnings=list(warn or []),
    )


# -- second variation ----------------------------------------------------------

def residual_jacobian(model: EnergyModel, u) -> np.ndarray:
    """Dense Jacobian ``dG(x)/du(y)`` of the residual field.

    Requires every vertex gradient to be nonzero when ``p < 2`` (the
    functional is not twice differentiable otherwise).
    """
    g, p = model.graph, model.p
    u = calc.as_vertex_function(g, u)
    n = g.n_vertices
    S = calc.grad_norm_squared(g, u)
    if p < 2 and np.any(S == 0):
        raise ModelError("second variation undefined where the gradient vanishes for p < 2")
    H = np.zeros((n, n))
    with np.errstate(divide="ignore", invalid="ignore"):
        c1 = np.where(S > 0, 0.5 * S ** (p / 2 - 1), 0.5 if p == 2 else 0.0)
        c2 = np.where(S > 0, 0.5 * (p / 2 - 1) * S ** (p / 2 - 2), 0.0)
    for x in range(n):
        nb = g.neighbors(x)
        w = g.neighbor_weights(x)
        if c1[x]:
            H[nb, nb] += c1[x] * w
            H[x, x] += c1[x] * w.sum()
            H[x, nb] -= c1[x] * w
            H[nb, x] -= c1[x] * w
        if c2[x]:
            d = u[nb] - u[x]
            a = np.zeros(nb.size + 1)
            a[:-1] = w * d / g.measure[x]
            a[-1] = -a[:-1].sum()
            idx = np.append(nb, x)
            H[np.ix_(idx, idx)] += g.measure[x] * c2[x] * np.outer(a, a)
    Jac = H / g.measure[:, None]
    up = calc.positive_part(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        rterm = np.where(u != 0, (p - 1) * model.rho * np.abs(u) ** (p - 2), 0.0 if p > 2 else np.inf)
    if p == 2:
        rterm = model.rho.copy()
    Jac[np.diag_indices(n)] += rterm - np.where(up > 0, model.nonlinearity.dpsi(up), 0.0)
    if model.support is not None:
        off = ~model.support
        Jac[off, :] = 0.0
        Jac[:, off] = 0.0
        Jac[off, off] = 1.0
    return Jac


def diagonal_scaling(model: EnergyModel, u: np.ndarray, floor: float = 1e-12) -> np.ndarray:
    """Positive diagonal approximating the convex part of the second variation.

    Used to precondition descent steps; only positivity and rough scale
    matter, so vanishing gradients are regularised.
    """
    g, p = model.graph, model.p
    src, dst, w = g.half_edges
    S = calc.grad_norm_squared(g, u)
    scale = float(np.max(np.abs(u))) or 1.0  # any scale will do for u == 0
    eps2 = (1e-6 * scale) ** 2
    gf = (S + eps2) ** (p / 2 - 1)
    star = np.bincount(src, weights=0.5 * (gf[src] + gf[dst]) * w, minlength=g.n_vertices) / g.measure
    mass = model.rho * (u * u + eps2) ** (p / 2 - 1)
    D = max(p - 1.0, 1.0) * (star + mass)
    D = np.maximum(D, floor * max(float(D.max()), 1e-300))
    return D


# -- Rayleigh quotient and lambda_p ---------------------------------------------

def rayleigh_quotient(model: EnergyModel, u) -> float:
    u = calc.as_vertex_function(model.graph, u)
    den = float(np.sum(model.sigma * np.abs(u) ** model.p))
    if den == 0:
        raise ModelError("Rayleigh quotient undefined for the zero function")
    return calc.hp_norm_p(model.graph, u, model.rho, model.p) / den


@dataclass
class LambdaEstimate:
    value: float
    minimizer: np.ndarray
    upper_bound: bool = True
    converged: bool = True
    restarts: int = 1
    residual: float = 0.0


def _quotient_parts(model, u):
    p = model.p
    num_field = -calc.p_laplacian(model.graph, u, p) + model.rho * _signed_power(u, p - 1)
    den_field = _signed_power(u, p - 1)
    return num_field, den_field


def _normalize_lp(model, u):
    return u / np.sum(model.sigma * np.abs(u) ** model.p) ** (1.0 / model.p)


def estimate_lambda_p(model: EnergyModel, restarts: int = 4, tol: float = 1e-10,
                      max_iter: int = 20000, seed: int = 0) -> LambdaEstimate:
    """Upper bound for ``lambda_p`` by projected descent on the L^p unit sphere.

    Each restart starts from a seeded random nonnegative vector, takes
    Barzilai-Borwein trial steps along the diagonally scaled negative
    gradient of the quotient, backtracks until the Armijo condition holds
    and renormalises. The best value over restarts is returned.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    rng = np.random.default_rng(seed)
    n = model.n
    best = None
    for _ in range(restarts):
        u = model.restrict(rng.random(n) + 0.1)
        u = _normalize_lp(model, u)
        res = _lambda_descent(model, u, tol, max_iter)
        if best is None or res.value < best.value:
            best = res
    best.restarts = restarts
    if not best.converged:
        warnings.warn("lambda_p descent hit the iteration cap; returning best value so far",
                      ConvergenceWarning, stacklevel=2)
    return best


def _lambda_descent(model, u, tol, max_iter, c_armijo=1e-4):
    sigma = model.sigma
    R = rayleigh_quotient(model, u)
    prev = None
    converged = False
    for it in range(max_iter):
        num_f, den_f = _quotient_parts(model, u)
        r = model.restrict(num_f - R * den_f)  # gradient of R on the sphere, per unit sigma
        resid = float(np.max(np.abs(r)))
        if resid <= tol * max(1.0, R):
            converged = True
            break
        D = diagonal_scaling(model, u) if model.p != 2 else None
        d = -r / D if D is not None else -r
        if model.support is not None:
            d = model.restrict(d)
        slope = model.p * float(np.sum(sigma * r * d))
        step = 1.0
        if prev is not None:
            s, y = u - prev[0], model.p * sigma * (r - prev[1])
            sy = float(np.dot(s, y))
            if sy > 0:
                metric = sigma * (D if D is not None else 1.0)
                step = float(np.dot(s, metric * s)) / sy
        step = min(max(step, 1e-12), 1e12)
        noise = 64 * np.finfo(float).eps * abs(R)
        while True:
            trial = u + step * d
            if np.any(trial != 0):
                trial = _normalize_lp(model, trial)
                R_new = rayleigh_quotient(model, trial)
                if R_new <= R + c_armijo * step * slope + noise:
                    break
            step *= 0.5
            if step < 1e-30:
                return LambdaEstimate(R, u, converged=False, residual=resid)
        prev = (u, r)
        u, R = trial, R_new
    num_f, den_f = _quotient_parts(model, u)
    resid = float(np.max(np.abs(model.restrict(num_f - R * den_f))))
    return LambdaEstimate(R, u, converged=converged, residual=resid)


def dense_lambda_2(model: EnergyModel, max_vertices: int = 2000) -> tuple[float, np.ndarray]:
    """Exact ``lambda_2`` (p = 2): smallest eigenvalue of ``(L + diag(sigma rho)) v = lam diag(sigma) v``."""
    if model.p != 2:
        raise ModelError("dense eigen-oracle is only valid for p = 2")
    g = model.graph
    if g.n_vertices > max_vertices:
        raise ModelError(f"dense oracle limited to {max_vertices} vertices")
    A = g.laplacian_matrix() + np.diag(g.measure * model.rho)
    B = np.diag(g.measure)
    if model.support is not None:
        keep = np.flatnonzero(model.support)
        A, B = A[np.ix_(keep, keep)], B[np.ix_(keep, keep)]
    vals, vecs = linalg.eigh(A, B, subset_by_index=[0, 0])
    v = np.zeros(g.n_vertices)
    if model.support is not None:
        v[keep] = vecs[:, 0]
    else:
        v = vecs[:, 0]
    return float(vals[0]), v


# -- batched evaluation ----------------------------------------------------------

class BatchOperators:
    """Energy, residual field and scaling for many functions at once.

    Rows of ``U`` are vertex functions. Results agree with :func:`energy`,
    :func:`energy_gradient` and :func:`diagonal_scaling` row by row.
    """

    def __init__(self, model: EnergyModel):
        from scipy import sparse

        self.model = model
        g = model.graph
        self.src, self.dst, self.w = g.half_edges
        h = self.src.size
        self.gather = sparse.csr_matrix((np.ones(h), (self.src, np.arange(h))),
                                        shape=(g.n_vertices, h))

    def _sum_to_vertices(self, T):
        return np.asarray((self.gather @ T.T).T)

    def grad_sq(self, U):
        D = U[:, self.dst] - U[:, self.src]
        return self._sum_to_vertices(self.w * D * D) / (2.0 * self.model.sigma), D

    def energy(self, U):
        m = self.model
        S, _ = self.grad_sq(U)
        quad = np.sum(m.sigma * (S ** (m.p / 2) + m.rho * np.abs(U) ** m.p), axis=1)
        return quad / m.p - np.sum(m.sigma * m.nonlinearity.Psi(np.maximum(U, 0.0)), axis=1)

    def gradient(self, U):
        m = self.model
        S, D = self.grad_sq(U)
        grad = np.sqrt(S)
        with np.errstate(divide="ignore", invalid="ignore"):
            gf = np.where(grad > 0, grad ** (m.p - 2.0), 0.0)
        terms = np.where(D != 0, 0.5 * (gf[:, self.src] + gf[:, self.dst]) * self.w * D, 0.0)
        lap = self._sum_to_vertices(terms) / m.sigma
        out = -lap + m.rho * _signed_power(U, m.p - 1.0) - m.nonlinearity.psi(np.maximum(U, 0.0))
        if m.support is not None:
            out = np.where(m.support, out, 0.0)
        return out

    def scaling(self, U, floor: float = 1e-12):
        m = self.model
        S, _ = self.grad_sq(U)
        scale = np.max(np.abs(U), axis=1, keepdims=True)
        scale = np.where(scale > 0, scale, 1.0)
        eps2 = (1e-6 * scale) ** 2
        gf = (S + eps2) ** (m.p / 2 - 1)
        star = self._sum_to_vertices(0.5 * (gf[:, self.src] + gf[:, self.dst]) * self.w) / m.sigma
        mass = m.rho * (U * U + eps2) ** (m.p / 2 - 1)
        Dg = max(m.p - 1.0, 1.0) * (star + mass)
        return np.maximum(Dg, floor * np.maximum(Dg.max(axis=1, keepdims=True), 1e-300))
