"""Estimator-style front ends.

Each class stores its settings as constructor parameters (so ``get_params``
and ``set_params`` work as in scikit-learn), takes a :class:`WeightedGraph`
in ``fit`` and exposes the outcome through trailing-underscore attributes.
``transform`` returns the fitted vertex function.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .energy import EnergyModel, estimate_lambda_p
from .graph import WeightedGraph
from .mountain_pass import MountainPassConfig, mpa_solve
from .nehari import SolverConfig, ground_state_solve
from .nonlinearity import NonlinearitySpec, from_dict, pure_power
from .well import WellConfig, sweep_csv, theta_sweep


def _nonlinearity(spec, q):
    if spec is None:
        return pure_power(q)
    if isinstance(spec, NonlinearitySpec):
        return spec
    return from_dict(spec)


def _check_graph(X):
    if not isinstance(X, WeightedGraph):
        raise TypeError(f"fit expects a WeightedGraph, got {type(X).__name__}")
    return X


class _ModelMixin:
    def _model(self, X, rho=None):
        g = _check_graph(X)
        return EnergyModel(g, self.p, self.rho if rho is None else rho,
                           _nonlinearity(self.nonlinearity, self.q))

    def transform(self, X=None):
        check_is_fitted(self, "u_")
        return self.u_.copy()


class GroundStateSolver(_ModelMixin, TransformerMixin, BaseEstimator):
    """Nehari ground state of ``-Delta_p u + rho |u|^{p-2} u = psi(x, u+)``.

    Parameters
    ----------
    p : float
    rho : float or array_like
        Potential; must be nonnegative.
    q : float
        Exponent of the default pure power ``psi(s) = s^(q-1)``.
    nonlinearity : NonlinearitySpec or dict, optional
        Overrides ``q``.
    n_random, tol_eq, tol_n, max_iter, seed, workers
        Passed to :class:`SolverConfig`.

    Attributes
    ----------
    u_ : ndarray
    energy_ : float
    result_ : SolveResult
    model_ : EnergyModel
    """

    def __init__(self, p=2.0, rho=1.0, q=4.0, nonlinearity=None, n_random=4, tol_eq=1e-8,
                 tol_n=1e-10, max_iter=50000, seed=0, workers=1):
        self.p = p
        self.rho = rho
        self.q = q
        self.nonlinearity = nonlinearity
        self.n_random = n_random
        self.tol_eq = tol_eq
        self.tol_n = tol_n
        self.max_iter = max_iter
        self.seed = seed
        self.workers = workers

    def _config(self):
        return SolverConfig(n_random=self.n_random, tol_eq=self.tol_eq, tol_n=self.tol_n,
                            max_iter=self.max_iter, seed=self.seed, workers=self.workers)

    def fit(self, X, y=None):
        self.model_ = self._model(X)
        self.result_ = ground_state_solve(self.model_, self._config())
        self.u_ = self.result_.u
        self.energy_ = self.result_.energy
        return self


class MountainPassSolver(_ModelMixin, TransformerMixin, BaseEstimator):
    """Critical point at the mountain-pass level, found by path deformation.

    Attributes
    ----------
    u_ : ndarray
    energy_ : float
    result_ : SolveResult
    path_ : MountainPassPath
    """

    def __init__(self, p=2.0, rho=1.0, q=4.0, nonlinearity=None, n_nodes=32, tol=1e-8,
                 max_iter=50000, endpoint="all_spikes", direction=None):
        self.p = p
        self.rho = rho
        self.q = q
        self.nonlinearity = nonlinearity
        self.n_nodes = n_nodes
        self.tol = tol
        self.max_iter = max_iter
        self.endpoint = endpoint
        self.direction = direction

    def fit(self, X, y=None):
        self.model_ = self._model(X)
        cfg = MountainPassConfig(n_nodes=self.n_nodes, tol=self.tol, max_iter=self.max_iter,
                                 endpoint=self.endpoint)
        self.result_, self.path_ = mpa_solve(self.model_, config=cfg, direction=self.direction)
        self.u_ = self.result_.u
        self.energy_ = self.result_.energy
        return self


class LambdaEstimator(_ModelMixin, TransformerMixin, BaseEstimator):
    """Upper estimate of ``inf (int |grad u|^p + rho |u|^p) / int |u|^p``.

    Attributes
    ----------
    lambda_ : float
    u_ : ndarray
        Minimiser, normalised in ``L^p``.
    estimate_ : LambdaEstimate
    """

    def __init__(self, p=2.0, rho=1.0, restarts=4, tol=1e-10, max_iter=20000, seed=0):
        self.p = p
        self.rho = rho
        self.restarts = restarts
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed

    def fit(self, X, y=None):
        # the quotient does not involve psi; any admissible nonlinearity will do
        g = _check_graph(X)
        self.model_ = EnergyModel(g, self.p, self.rho, pure_power(self.p + 1.0))
        self.estimate_ = estimate_lambda_p(self.model_, restarts=self.restarts, tol=self.tol,
                                           max_iter=self.max_iter, seed=self.seed)
        self.lambda_ = self.estimate_.value
        self.u_ = self.estimate_.minimizer
        return self


class PotentialWellSweep(BaseEstimator):
    """Ground states for ``rho = theta a + b`` over a ``theta`` schedule.

    Attributes
    ----------
    sweep_ : SweepResult
    limit_energy_ : float
        Dirichlet ground-state level on the well.
    table_ : str
        Sweep table as CSV text.
    """

    def __init__(self, a=None, b=0.0, theta_schedule=(1.0, 10.0, 100.0, 1000.0, 10000.0),
                 p=2.0, q=4.0, nonlinearity=None, n_random=4, tol_eq=1e-8, seed=0, workers=1):
        self.a = a
        self.b = b
        self.theta_schedule = theta_schedule
        self.p = p
        self.q = q
        self.nonlinearity = nonlinearity
        self.n_random = n_random
        self.tol_eq = tol_eq
        self.seed = seed
        self.workers = workers

    def fit(self, X, y=None):
        g = _check_graph(X)
        if self.a is None:
            raise ValueError("the well coefficient a is required")
        well = WellConfig(a=np.asarray(self.a, dtype=float),
                          b=np.broadcast_to(np.asarray(self.b, dtype=float), (g.n_vertices,)),
                          theta_schedule=tuple(self.theta_schedule))
        base = EnergyModel(g, self.p, well.b, _nonlinearity(self.nonlinearity, self.q))
        cfg = SolverConfig(n_random=self.n_random, tol_eq=self.tol_eq, seed=self.seed,
                           workers=self.workers)
        self.well_ = well
        self.sweep_ = theta_sweep(well, base, cfg)
        self.limit_energy_ = self.sweep_.limit.energy
        self.table_ = sweep_csv(self.sweep_)
        return self
