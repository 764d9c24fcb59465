"""Power-type nonlinearities ``psi(x, s) = sum_i c_i(x) s^(q_i - 1)``.

Only this closed family is offered: with every ``q_i > p`` and positive
bounded coefficients, the growth, Ambrosetti-Rabinowitz, small-``s`` and
monotone-quotient hypotheses all hold by construction, and the
Ambrosetti-Rabinowitz inequality is additionally checked numerically when a
model is built.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FAMILIES = ("pure_power", "weighted_power", "sum_of_powers")


class NonlinearityError(ValueError):
    pass


@dataclass(frozen=True)
class NonlinearitySpec:
    family: str
    exponents: tuple
    coefficients: tuple  # one scalar or per-vertex array per exponent

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise NonlinearityError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if len(self.exponents) == 0 or len(self.exponents) != len(self.coefficients):
            raise NonlinearityError("need one coefficient per exponent")
        coeffs = []
        for c in self.coefficients:
            c = np.asarray(c, dtype=float)
            if not np.all(np.isfinite(c)) or np.any(c <= 0):
                raise NonlinearityError("coefficients must be finite and positive")
            c.setflags(write=False)
            coeffs.append(c)
        object.__setattr__(self, "coefficients", tuple(coeffs))
        object.__setattr__(self, "exponents", tuple(float(q) for q in self.exponents))

    @property
    def alpha(self) -> float:
        return min(self.exponents)

    def vertex_data(self, n: int) -> list[np.ndarray]:
        return [np.broadcast_to(c, (n,)) for c in self.coefficients]

    def psi(self, s):
        """``psi(x, s)`` for ``s >= 0`` (trailing axis indexes vertices)."""
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for q, c in zip(self.exponents, self.coefficients):
            out = out + c * s ** (q - 1.0)
        return out

    def Psi(self, s):
        """Primitive ``int_0^s psi(x, t) dt``."""
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for q, c in zip(self.exponents, self.coefficients):
            out = out + c * s ** q / q
        return out

    def dpsi(self, s):
        """``d/ds psi(x, s)``."""
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for q, c in zip(self.exponents, self.coefficients):
            out = out + c * (q - 1.0) * s ** (q - 2.0)
        return out

    def check(self, p: float, n: int) -> None:
        """Validate against exponent ``p`` on an ``n``-vertex graph."""
        if not self.alpha > p:
            raise NonlinearityError(f"every exponent must exceed p={p}; got {self.exponents}")
        for c in self.coefficients:
            if c.ndim not in (0, 1) or (c.ndim == 1 and c.shape[0] != n):
                raise NonlinearityError(f"coefficient shape {c.shape} does not match {n} vertices")
        if not ambrosetti_rabinowitz_holds(self, n):
            raise NonlinearityError("alpha * Psi <= s * psi fails on the check grid")

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "exponents": list(self.exponents),
            "coefficients": [c.tolist() for c in self.coefficients],
        }


def ambrosetti_rabinowitz_holds(spec: NonlinearitySpec, n: int,
                                s_grid=None, rtol: float = 1e-12) -> bool:
    """Check ``0 < alpha Psi(x, s) <= s psi(x, s)`` for ``s`` on a log grid."""
    if s_grid is None:
        s_grid = np.logspace(-8, 8, 161)
    s = np.asarray(s_grid, dtype=float)[:, None] * np.ones(n)
    a_Psi = spec.alpha * spec.Psi(s)
    s_psi = s * spec.psi(s)
    return bool(np.all(a_Psi > 0) and np.all(a_Psi <= s_psi * (1 + rtol)))


def pure_power(q: float, c: float = 1.0) -> NonlinearitySpec:
    """``psi(s) = c s^(q-1)``."""
    return NonlinearitySpec("pure_power", (q,), (float(c),))


def weighted_power(q: float, weights) -> NonlinearitySpec:
    """``psi(x, s) = c(x) s^(q-1)`` with positive bounded ``c``."""
    return NonlinearitySpec("weighted_power", (q,), (np.asarray(weights, dtype=float),))


def sum_of_powers(exponents, coefficients) -> NonlinearitySpec:
    return NonlinearitySpec("sum_of_powers", tuple(exponents), tuple(coefficients))


def from_dict(d: dict) -> NonlinearitySpec:
    return NonlinearitySpec(d["family"], tuple(d["exponents"]), tuple(d["coefficients"]))
