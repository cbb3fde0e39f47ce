"""Small-graph builders and hypothesis strategies shared by the tests."""
import numpy as np
from hypothesis import strategies as st

from mslp.graph import Graph


def edges_graph(edges, n=None):
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    return Graph.from_edges(e[:, 0], e[:, 1], n=n)


def random_graph(n, p, seed):
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    return Graph.from_edges(iu[keep], ju[keep], n=n)


@st.composite
def graphs(draw, min_n=2, max_n=30, weighted=False, min_edges=0):
    n = draw(st.integers(min_n, max_n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), min_size=min(min_edges, len(pairs)),
                           max_size=min(len(pairs), 4 * n), unique=True))
    if not chosen:
        return Graph.from_edges([], [], n=n)
    e = np.asarray(chosen, dtype=np.int64)
    w = None
    if weighted:
        w = np.asarray(draw(st.lists(st.floats(0.1, 5.0), min_size=len(chosen), max_size=len(chosen))))
    return Graph.from_edges(e[:, 0], e[:, 1], weights=w, n=n)
