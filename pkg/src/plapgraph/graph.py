"""Weighted graphs, edge-list ingestion, balls and domain boundaries.

Vertices are dense 0-based indices. Adjacency is stored in CSR form with each
undirected edge present in both directions; both halves carry the same float
object value, so ``w_xy == w_yx`` holds bit-exactly.
"""

from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph


class GraphError(ValueError):
    """Raised for malformed or invalid graph input."""


class EdgeListParseError(GraphError):
    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


@dataclass(frozen=True)
class WeightedGraph:
    """Immutable connected-or-not weighted graph with a vertex measure.

    Parameters
    ----------
    indptr, indices, weights : ndarray
        CSR adjacency. Row ``x`` holds the neighbours of ``x`` in ascending
        index order and the matching edge weights.
    measure : ndarray
        Vertex measure ``sigma(x) > 0``.
    root : int
        Reference vertex used for hop distances.
    labels : tuple of str, optional
        External vertex labels, ``labels[i]`` names vertex ``i``.
    """

    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    measure: np.ndarray
    root: int = 0
    labels: tuple | None = None
    sigma0: float = field(init=False)

    def __post_init__(self):
        for name in ("indptr", "indices", "weights", "measure"):
            arr = np.ascontiguousarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.measure.shape[0]
        if self.indptr.shape[0] != n + 1:
            raise GraphError("indptr length does not match vertex count")
        if n == 0:
            raise GraphError("graph has no vertices")
        if not np.all(np.isfinite(self.measure)) or np.any(self.measure <= 0):
            raise GraphError("vertex measure must be finite and positive")
        if np.any(self.weights <= 0) or not np.all(np.isfinite(self.weights)):
            raise GraphError("edge weights must be finite and positive")
        if not 0 <= self.root < n:
            raise GraphError(f"root {self.root} is not a vertex")
        object.__setattr__(self, "sigma0", float(self.measure.min()))
        src = np.repeat(np.arange(n), np.diff(self.indptr))
        if np.any(src == self.indices):
            raise GraphError("self-loops are not allowed")
        # symmetric storage check: the transpose must reproduce the same weights
        A = self.adjacency_matrix()
        if (A != A.T).nnz:
            raise GraphError("adjacency is not symmetric")

    # -- basic facts -----------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return int(self.measure.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.indices.shape[0] // 2)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def half_edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Directed half-edges ``(src, dst, w)`` in stored order."""
        src = np.repeat(np.arange(self.n_vertices), self.degrees)
        return src, self.indices, self.weights

    @property
    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Undirected edges ``(i, j, w)`` with ``i < j`` in ascending order."""
        src, dst, w = self.half_edges
        keep = src < dst
        return src[keep], dst[keep], w[keep]

    def neighbors(self, x: int) -> np.ndarray:
        self._check_vertex(x)
        return self.indices[self.indptr[x]:self.indptr[x + 1]]

    def neighbor_weights(self, x: int) -> np.ndarray:
        self._check_vertex(x)
        return self.weights[self.indptr[x]:self.indptr[x + 1]]

    def adjacency_matrix(self) -> sparse.csr_matrix:
        n = self.n_vertices
        return sparse.csr_matrix((self.weights, self.indices, self.indptr), shape=(n, n))

    def laplacian_matrix(self) -> np.ndarray:
        """Dense combinatorial Laplacian ``D - W`` (unnormalised)."""
        A = self.adjacency_matrix().toarray()
        return np.diag(A.sum(axis=1)) - A

    def _check_vertex(self, x):
        if not (isinstance(x, (int, np.integer)) and 0 <= x < self.n_vertices):
            raise GraphError(f"invalid vertex index {x!r}")

    def label_of(self, x: int) -> str:
        return self.labels[x] if self.labels is not None else str(x)

    def with_measure(self, measure) -> "WeightedGraph":
        return WeightedGraph(self.indptr, self.indices, self.weights,
                             np.asarray(measure, dtype=float), self.root, self.labels)


@dataclass(frozen=True)
class DomainSubset:
    """A vertex set ``Omega`` together with its exterior boundary."""

    members: frozenset
    boundary: frozenset

    @property
    def closure(self) -> frozenset:
        return self.members | self.boundary

    def mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        m[sorted(self.members)] = True
        return m

    def closure_mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        m[sorted(self.closure)] = True
        return m


# -- construction --------------------------------------------------------

def from_edges(n_vertices: int, edges: Iterable[tuple[int, int, float]],
               measure=1.0, root: int = 0, labels: Sequence[str] | None = None) -> WeightedGraph:
    """Build a graph from undirected edges.

    Each edge may be listed once or twice (mirrored). A repeated edge must
    carry exactly the same weight; anything else is rejected.
    """
    table: dict[tuple[int, int], float] = {}
    for i, j, w in edges:
        i, j, w = int(i), int(j), float(w)
        if i == j:
            raise GraphError(f"self-loop at vertex {i}")
        if not (0 <= i < n_vertices and 0 <= j < n_vertices):
            raise GraphError(f"edge ({i}, {j}) references a missing vertex")
        if not np.isfinite(w) or w <= 0:
            raise GraphError(f"edge ({i}, {j}) has nonpositive weight {w}")
        key = (min(i, j), max(i, j))
        if key in table and table[key] != w:
            raise GraphError(f"conflicting duplicate edge {key}: {table[key]} vs {w}")
        table[key] = w
    return _assemble(n_vertices, table, measure, root, labels)


def _assemble(n, table, measure, root, labels):
    rows: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for (i, j), w in table.items():
        rows[i].append((j, w))
        rows[j].append((i, w))
    indptr = np.zeros(n + 1, dtype=np.int64)
    indices, weights = [], []
    for x, row in enumerate(rows):
        row.sort()
        indices.extend(y for y, _ in row)
        weights.extend(w for _, w in row)
        indptr[x + 1] = indptr[x] + len(row)
    if np.isscalar(measure):
        measure = np.full(n, float(measure))
    measure = np.asarray(measure, dtype=float)
    if measure.shape != (n,):
        raise GraphError(f"measure has shape {measure.shape}, expected ({n},)")
    return WeightedGraph(indptr, np.asarray(indices, dtype=np.int64),
                         np.asarray(weights, dtype=float), measure, root,
                         tuple(labels) if labels is not None else None)


def read_edge_list(path) -> tuple[list[str], list[tuple[str, str, float]]]:
    """Parse an edge-list file into labels (first-seen order) and raw edges."""
    labels: dict[str, int] = {}
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise EdgeListParseError(path, lineno, f"expected 'u v w', got {line!r}")
            u, v, w = parts
            try:
                w = float(w)
            except ValueError:
                raise EdgeListParseError(path, lineno, f"weight {w!r} is not a number") from None
            if not np.isfinite(w) or w <= 0:
                raise EdgeListParseError(path, lineno, f"nonpositive weight {w}")
            if u == v:
                raise EdgeListParseError(path, lineno, f"self-loop at {u!r}")
            for lab in (u, v):
                labels.setdefault(lab, len(labels))
            edges.append((u, v, w))
    return list(labels), edges


def _label_order(labels: list[str]) -> list[str]:
    # integer labels keep their numeric order so "0 1 2" maps to indices 0 1 2
    if all(lab.lstrip("-").isdigit() for lab in labels):
        return sorted(labels, key=int)
    return labels


def read_measure(path) -> dict[str, float]:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise EdgeListParseError(path, lineno, f"expected 'v sigma', got {line!r}")
            try:
                val = float(parts[1])
            except ValueError:
                raise EdgeListParseError(path, lineno, f"measure {parts[1]!r} is not a number") from None
            if not np.isfinite(val) or val <= 0:
                raise EdgeListParseError(path, lineno, f"nonpositive measure {val}")
            out[parts[0]] = val
    return out


def load_edge_list(path, measure_source: str | os.PathLike | float | Mapping = 1.0,
                   default_measure: float = 1.0, root=0) -> WeightedGraph:
    """Read an edge-list file ("u v w" per line) into a validated graph.

    ``measure_source`` is either a constant, a mapping label -> sigma, or a
    path to a "v sigma" file; vertices missing from a file or mapping get
    ``default_measure``.
    """
    raw_labels, raw_edges = read_edge_list(path)
    labels = _label_order(raw_labels)
    index = {lab: i for i, lab in enumerate(labels)}
    if isinstance(measure_source, (int, float)):
        measure = np.full(len(labels), float(measure_source))
    else:
        table = (read_measure(measure_source)
                 if isinstance(measure_source, (str, os.PathLike)) else dict(measure_source))
        unknown = set(table) - set(index)
        if unknown:
            raise GraphError(f"measure given for unknown vertices {sorted(unknown)}")
        measure = np.array([table.get(lab, default_measure) for lab in labels], dtype=float)
    if isinstance(root, str):
        root = index[root]
    return from_edges(len(labels), ((index[u], index[v], w) for u, v, w in raw_edges),
                      measure=measure, root=root, labels=labels)


def write_edge_list(g: WeightedGraph, path) -> None:
    i, j, w = g.edges
    with open(path, "w") as fh:
        for a, b, c in zip(i, j, w):
            fh.write(f"{g.label_of(a)} {g.label_of(b)} {float(c)!r}\n")


def write_measure(g: WeightedGraph, path) -> None:
    with open(path, "w") as fh:
        for x in range(g.n_vertices):
            fh.write(f"{g.label_of(x)} {float(g.measure[x])!r}\n")


# -- standard graphs -----------------------------------------------------

def path_graph(n: int, weight: float = 1.0, measure=1.0) -> WeightedGraph:
    return from_edges(n, ((i, i + 1, weight) for i in range(n - 1)), measure=measure)


def complete_graph(n: int, weight: float = 1.0, measure=1.0) -> WeightedGraph:
    return from_edges(n, ((i, j, weight) for i in range(n) for j in range(i + 1, n)), measure=measure)


def grid_graph(rows: int, cols: int, weight: float = 1.0, measure=1.0, root=None) -> WeightedGraph:
    """Lattice graph; vertex ``(r, c)`` has index ``r * cols + c``."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            x = r * cols + c
            if c + 1 < cols:
                edges.append((x, x + 1, weight))
            if r + 1 < rows:
                edges.append((x, x + cols, weight))
    if root is None:
        root = (rows // 2) * cols + cols // 2
    return from_edges(rows * cols, edges, measure=measure, root=root)


def random_connected_graph(n: int, rng: np.random.Generator, extra_edges: float = 1.0,
                           weight_range=(0.2, 3.0), measure_range=(0.5, 2.0)) -> WeightedGraph:
    """Random spanning tree plus ``extra_edges * n`` random chords."""
    edges = {}
    order = rng.permutation(n)
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(0, k)])
        edges[(min(a, b), max(a, b))] = float(rng.uniform(*weight_range))
    for _ in range(int(extra_edges * n)):
        a, b = (int(v) for v in rng.integers(0, n, size=2))
        if a != b:
            edges.setdefault((min(a, b), max(a, b)), float(rng.uniform(*weight_range)))
    measure = rng.uniform(*measure_range, size=n)
    return from_edges(n, ((a, b, w) for (a, b), w in edges.items()), measure=measure)


# -- connectivity and domains --------------------------------------------

def validate_connectivity(g: WeightedGraph) -> tuple[bool, np.ndarray]:
    """Return ``(connected, component_labels)``."""
    ncomp, labels = csgraph.connected_components(g.adjacency_matrix(), directed=False)
    return ncomp == 1, labels


def require_connected(g: WeightedGraph) -> None:
    ok, labels = validate_connectivity(g)
    if not ok:
        raise GraphError(f"graph is disconnected ({labels.max() + 1} components)")


def hop_distances(g: WeightedGraph, source: int) -> np.ndarray:
    """Breadth-first hop distance from ``source``; -1 marks unreachable vertices."""
    g._check_vertex(source)
    dist = np.full(g.n_vertices, -1, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        x = queue.popleft()
        for y in g.neighbors(x):
            if dist[y] < 0:
                dist[y] = dist[x] + 1
                queue.append(y)
    return dist


def boundary(g: WeightedGraph, members: Iterable[int]) -> DomainSubset:
    members = frozenset(int(x) for x in members)
    if not members:
        raise GraphError("domain must be nonempty")
    for x in members:
        g._check_vertex(x)
    bdry = set()
    for x in members:
        bdry.update(int(y) for y in g.neighbors(x) if int(y) not in members)
    return DomainSubset(members, frozenset(bdry))


def ball(g: WeightedGraph, center: int, radius: int) -> DomainSubset:
    """Hop-distance ball ``B_R(center)`` with its boundary."""
    dist = hop_distances(g, center)
    members = np.flatnonzero((dist >= 0) & (dist <= radius))
    return boundary(g, members.tolist())


def is_connected_subset(g: WeightedGraph, members: Iterable[int]) -> bool:
    members = sorted(set(int(x) for x in members))
    if not members:
        return False
    sub = g.adjacency_matrix()[members][:, members]
    return csgraph.connected_components(sub, directed=False)[0] == 1


def induced_subgraph(g: WeightedGraph, members: Iterable[int]) -> tuple[WeightedGraph, np.ndarray]:
    """Induced subgraph on ``members`` and the map new index -> old index."""
    keep = np.array(sorted(set(int(x) for x in members)), dtype=np.int64)
    pos = {int(v): k for k, v in enumerate(keep)}
    i, j, w = g.edges
    edges = [(pos[a], pos[b], c) for a, b, c in zip(i.tolist(), j.tolist(), w.tolist())
             if a in pos and b in pos]
    labels = [g.label_of(int(v)) for v in keep] if g.labels is not None else None
    root = pos.get(g.root, 0)
    return from_edges(len(keep), edges, measure=g.measure[keep], root=root, labels=labels), keep


def truncate(g: WeightedGraph, radius: int, center: int | None = None) -> tuple[WeightedGraph, np.ndarray]:
    """Finite truncation to the ball of ``radius`` hops around the root."""
    center = g.root if center is None else center
    dom = ball(g, center, radius)
    return induced_subgraph(g, dom.members)


def color_classes(g: WeightedGraph, *vertex_data: np.ndarray, max_rounds: int | None = None) -> np.ndarray:
    """Colour refinement (1-WL) of the weighted graph.

    Vertices in the same automorphism orbit always share a colour, so one
    representative per colour class covers every orbit. Extra per-vertex
    arrays (measure, potential, ...) seed the initial colouring.
    """
    n = g.n_vertices
    keys = [tuple(np.round(float(d[x]), 12) for d in (g.measure, *vertex_data)) for x in range(n)]
    colors = _relabel(keys)
    for _ in range(max_rounds or n):
        new_keys = []
        for x in range(n):
            lo, hi = g.indptr[x], g.indptr[x + 1]
            nb = sorted(zip(colors[g.indices[lo:hi]].tolist(), np.round(g.weights[lo:hi], 12).tolist()))
            new_keys.append((int(colors[x]), tuple(nb)))
        new = _relabel(new_keys)
        if new.max() == colors.max():
            return new
        colors = new
    return colors


def _relabel(keys):
    table: dict = {}
    for k in sorted(set(keys)):
        table[k] = len(table)
    return np.array([table[k] for k in keys], dtype=np.int64)
