"""Hypothesis strategies shared by the property tests."""

import numpy as np
from hypothesis import strategies as st

from plapgraph.graph import random_connected_graph


@st.composite
def graphs(draw, min_n=2, max_n=25):
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_connected_graph(n, np.random.default_rng(seed))


@st.composite
def graph_and_functions(draw, k=2, min_n=2, max_n=25):
    g = draw(graphs(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return (g, *[rng.normal(size=g.n_vertices) for _ in range(k)])


exponents = st.sampled_from([1.2, 1.5, 2.0, 2.5, 3.0, 4.0])
