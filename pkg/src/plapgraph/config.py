"""Run configuration: a strict YAML schema.

Every block rejects unknown keys so that a misspelt tolerance fails loudly
instead of silently falling back to a default. Relative file paths are
resolved against the directory of the configuration file.

Vertex data (measure, potential, well coefficients) is given as a scalar,
an inline list ordered by vertex index, or the path of a file with
``label value`` lines.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import calculus as calc
from .energy import EnergyModel, truncated_model
from .graph import (WeightedGraph, complete_graph, grid_graph, load_edge_list, path_graph,
                    random_connected_graph, require_connected)
from .mountain_pass import MountainPassConfig
from .nehari import SolverConfig
from .nonlinearity import NonlinearitySpec
from .well import WellConfig

VertexData = Union[float, list[float], str]


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GraphBlock(_Strict):
    kind: Literal["edge_list", "path", "complete", "grid", "random"]
    file: Optional[str] = None
    n: Optional[int] = Field(default=None, ge=1)
    rows: Optional[int] = Field(default=None, ge=1)
    cols: Optional[int] = Field(default=None, ge=1)
    weight: float = Field(default=1.0, gt=0)
    measure: VertexData = 1.0
    root: Optional[int] = None
    # zero-extension truncation to the hop ball of this radius around root
    radius: Optional[int] = Field(default=None, ge=0)
    seed: int = 0  # only for kind = random

    @model_validator(mode="after")
    def _shape(self):
        need = {"edge_list": ["file"], "path": ["n"], "complete": ["n"],
                "grid": ["rows", "cols"], "random": ["n"]}[self.kind]
        missing = [k for k in need if getattr(self, k) is None]
        if missing:
            raise ValueError(f"graph kind {self.kind!r} needs {', '.join(missing)}")
        return self


class NonlinearityBlock(_Strict):
    family: Literal["pure_power", "weighted_power", "sum_of_powers"] = "pure_power"
    exponents: list[float] = [4.0]
    coefficients: list[VertexData] = [1.0]


class ModelBlock(_Strict):
    p: float
    rho: VertexData = 1.0
    nonlinearity: NonlinearityBlock = NonlinearityBlock()

    @field_validator("p")
    @classmethod
    def _p(cls, v):
        if not v > 1:
            raise ValueError("p must exceed 1")
        return v


class SolverBlock(_Strict):
    n_random: int = Field(default=4, ge=0)
    spikes: bool = True
    tol_eq: float = Field(default=1e-8, gt=0)
    tol_n: float = Field(default=1e-10, gt=0)
    max_iter: int = Field(default=50000, ge=1)
    armijo_c: float = Field(default=1e-4, gt=0, lt=1)
    backtrack: float = Field(default=0.5, gt=0, lt=1)
    polish: bool = True
    stall_window: int = Field(default=500, ge=1)


class MountainPassBlock(_Strict):
    n_nodes: int = Field(default=32, ge=8)
    tol: float = Field(default=1e-8, gt=0)
    max_iter: int = Field(default=50000, ge=1)
    step: float = Field(default=0.5, gt=0)
    polish: bool = True
    endpoint: Literal["all_spikes", "best_spike"] = "all_spikes"
    direction: Optional[VertexData] = None  # overrides the endpoint mode


class WellBlock(_Strict):
    a: VertexData
    b: VertexData = 0.0
    omega: Optional[list[int]] = None
    theta_schedule: list[float]


class LambdaBlock(_Strict):
    restarts: int = Field(default=4, ge=1)
    tol: float = Field(default=1e-10, gt=0)
    max_iter: int = Field(default=20000, ge=1)


class RunConfig(_Strict):
    graph: GraphBlock
    model: ModelBlock
    solver: SolverBlock = SolverBlock()
    mountain_pass: MountainPassBlock = MountainPassBlock()
    well: Optional[WellBlock] = None
    # 'lambda' is a Python keyword
    lambda_: LambdaBlock = Field(default=LambdaBlock(), alias="lambda")
    output: str = "out"
    seed: int = 0
    workers: int = Field(default=1, ge=1)


def load_config(path) -> tuple[RunConfig, Path]:
    """Parse and validate a YAML run configuration; returns it with its directory."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    return parse_config(raw, source=str(path)), path.resolve().parent


def parse_config(raw, source: str = "<config>") -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        lines = []
        for err in exc.errors():
            loc = ".".join(str(x) for x in err["loc"])
            msg = err["msg"].removeprefix("Value error, ")
            lines.append(f"{loc}: {msg}" if loc else msg)
        raise ConfigError(f"{source}: " + "; ".join(lines)) from None


# -- building objects ----------------------------------------------------------

def _resolve(base: Path, name: str) -> Path:
    p = Path(name)
    return p if p.is_absolute() else base / p


def vertex_data(g: WeightedGraph, spec: VertexData, base: Path, what: str) -> np.ndarray:
    n = g.n_vertices
    if isinstance(spec, str):
        try:
            return calc.read_vertex_function(g, _resolve(base, spec))
        except OSError as exc:
            raise ConfigError(f"cannot read {what} file {spec}: {exc}") from exc
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ConfigError(f"{what} lists {arr.size} values for {n} vertices")
    return arr


def build_graph(cfg: RunConfig, base: Path) -> WeightedGraph:
    gb = cfg.graph
    if gb.kind == "edge_list":
        measure = gb.measure
        if isinstance(measure, str):
            measure = _resolve(base, measure)
        elif isinstance(measure, list):
            raise ConfigError("edge-list graphs take the measure as a constant or a file")
        try:
            g = load_edge_list(_resolve(base, gb.file), measure, root=gb.root or 0)
        except OSError as exc:
            raise ConfigError(f"cannot read edge list {gb.file}: {exc}") from exc
    else:
        if gb.kind == "path":
            g = path_graph(gb.n, gb.weight)
        elif gb.kind == "complete":
            g = complete_graph(gb.n, gb.weight)
        elif gb.kind == "grid":
            g = grid_graph(gb.rows, gb.cols, gb.weight)
        else:
            g = random_connected_graph(gb.n, np.random.default_rng(gb.seed))
        if gb.kind != "random" or gb.measure != 1.0:
            g = g.with_measure(vertex_data(g, gb.measure, base, "measure"))
        if gb.root is not None:
            if not 0 <= gb.root < g.n_vertices:
                raise ConfigError(f"root {gb.root} is not a vertex")
            g = replace(g, root=gb.root)
    require_connected(g)
    return g


def build_nonlinearity(cfg: RunConfig, g: WeightedGraph, base: Path) -> NonlinearitySpec:
    nb = cfg.model.nonlinearity
    coeffs = []
    for c in nb.coefficients:
        if isinstance(c, (int, float)):
            coeffs.append(float(c))
        else:
            coeffs.append(vertex_data(g, c, base, "coefficient"))
    return NonlinearitySpec(nb.family, tuple(nb.exponents), tuple(coeffs))


def build_model(cfg: RunConfig, base: Path, g: WeightedGraph | None = None) -> EnergyModel:
    """Model on the configured graph, truncated when ``graph.radius`` is set."""
    return build_model_and_index(cfg, base, g)[0]


def build_full_model(cfg: RunConfig, base: Path, g: WeightedGraph) -> EnergyModel:
    """Model on the whole graph ``g``, ignoring ``graph.radius``."""
    rho = vertex_data(g, cfg.model.rho, base, "rho")
    return EnergyModel(g, cfg.model.p, rho, build_nonlinearity(cfg, g, base))


def build_model_and_index(cfg: RunConfig, base: Path, g: WeightedGraph | None = None):
    """Model, the full graph and the model's vertex indices in it."""
    g = g if g is not None else build_graph(cfg, base)
    model = build_full_model(cfg, base, g)
    if cfg.graph.radius is None:
        return model, g, np.arange(g.n_vertices)
    model, keep = truncated_model(model, cfg.graph.radius, center=g.root)
    return model, g, keep


def build_well(cfg: RunConfig, g: WeightedGraph, base: Path) -> WellConfig:
    if cfg.well is None:
        raise ConfigError("well-sweep needs a 'well' block")
    if cfg.graph.radius is not None:
        raise ConfigError("well-sweep takes the whole graph; drop graph.radius")
    wb = cfg.well
    return WellConfig(a=vertex_data(g, wb.a, base, "a"), b=vertex_data(g, wb.b, base, "b"),
                      theta_schedule=tuple(wb.theta_schedule),
                      omega=frozenset(wb.omega) if wb.omega is not None else None)


def solver_config(cfg: RunConfig) -> SolverConfig:
    s = cfg.solver
    return SolverConfig(n_random=s.n_random, spikes=s.spikes, tol_eq=s.tol_eq, tol_n=s.tol_n,
                        max_iter=s.max_iter, armijo_c=s.armijo_c, backtrack=s.backtrack,
                        seed=cfg.seed, workers=cfg.workers, polish=s.polish,
                        stall_window=s.stall_window)


def mountain_pass_config(cfg: RunConfig) -> MountainPassConfig:
    m = cfg.mountain_pass
    return MountainPassConfig(n_nodes=m.n_nodes, tol=m.tol, max_iter=m.max_iter, step=m.step,
                              polish=m.polish, endpoint=m.endpoint)
