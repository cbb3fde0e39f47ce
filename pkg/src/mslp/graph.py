"""Sparse undirected graphs, edge-list I/O and temporal snapshot pairs."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

CACHE_MAGIC = b"MSLPGRPH"
CACHE_VERSION = 1


class EdgeListError(ValueError):
    """Malformed or empty edge-list input."""


class Graph:
    """Immutable symmetric adjacency in CSR form plus an external-label map.

    Internal node ids are ``0..n-1``; ``labels[i]`` is the external label of
    node ``i``. Neighbor lists are strictly increasing, there are no
    self-loops, and ``A[i, j] == A[j, i]``.
    """

    def __init__(self, adj, labels=None):
        adj = sp.csr_matrix(adj, dtype=float)
        if adj.shape[0] != adj.shape[1]:
            raise ValueError(f"adjacency must be square, got {adj.shape}")
        if adj.diagonal().any():
            adj = (adj - sp.diags(adj.diagonal())).tocsr()
        adj.eliminate_zeros()
        adj.sum_duplicates()
        adj.sort_indices()
        if (abs(adj - adj.T) > 1e-12 * max(1.0, abs(adj).max() if adj.nnz else 1.0)).nnz:
            raise ValueError("adjacency is not symmetric")
        if adj.nnz and adj.data.min() < 0:
            raise ValueError("edge weights must be nonnegative")
        adj.data.setflags(write=False)
        adj.indices.setflags(write=False)
        adj.indptr.setflags(write=False)
        self._adj = adj
        n = adj.shape[0]
        if labels is None:
            labels = [str(i) for i in range(n)]
        labels = [str(x) for x in labels]
        if len(labels) != n:
            raise ValueError(f"{len(labels)} labels for {n} nodes")
        self._labels = tuple(labels)
        self._index = {lab: i for i, lab in enumerate(self._labels)}
        if len(self._index) != n:
            raise ValueError("node labels must be unique")
        self._degrees = np.diff(adj.indptr).astype(np.int64)

    @classmethod
    def from_edges(cls, src, dst, weights=None, n=None, labels=None):
        """Build from undirected edge arrays; duplicates are summed, loops dropped."""
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if weights is None:
            weights = np.ones(src.size)
        weights = np.asarray(weights, dtype=float)
        if n is None:
            n = int(max(src.max(initial=-1), dst.max(initial=-1)) + 1)
        keep = src != dst
        src, dst, weights = src[keep], dst[keep], weights[keep]
        rows = np.concatenate([src, dst])
        cols = np.concatenate([dst, src])
        data = np.concatenate([weights, weights])
        adj = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
        return cls(adj, labels)

    @property
    def adjacency(self):
        return self._adj

    @property
    def n(self):
        return self._adj.shape[0]

    @property
    def num_edges(self):
        return self._adj.nnz // 2

    @property
    def labels(self):
        return self._labels

    def index_of(self, label):
        try:
            return self._index[str(label)]
        except KeyError:
            raise KeyError(f"unknown node label {label!r}") from None

    def _check_node(self, u):
        if not (isinstance(u, (int, np.integer)) and 0 <= u < self.n):
            raise IndexError(f"node {u!r} out of range for n={self.n}")

    def neighbors(self, u):
        self._check_node(u)
        a = self._adj
        return a.indices[a.indptr[u]:a.indptr[u + 1]]

    def degree(self, u):
        self._check_node(u)
        return int(self._degrees[u])

    def degrees(self):
        return self._degrees

    def has_edge(self, u, v):
        nb = self.neighbors(u)
        i = np.searchsorted(nb, v)
        return bool(i < nb.size and nb[i] == v)

    def edges(self):
        """Undirected edges as ``(src, dst, weight)`` arrays with ``src < dst``."""
        coo = sp.triu(self._adj, k=1).tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order].astype(np.int64), coo.col[order].astype(np.int64), coo.data[order]

    def spmv(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.n:
            raise ValueError(f"vector length {x.shape[0]} does not match n={self.n}")
        return self._adj @ x

    def two_hop_candidates(self, u):
        """Nodes at shortest-path distance exactly two from ``u``, ascending."""
        nb = self.neighbors(u)
        if nb.size == 0:
            return np.zeros(0, dtype=np.int64)
        reach = np.unique(self._adj[nb].indices)
        out = np.setdiff1d(reach, nb, assume_unique=True)
        return out[out != u].astype(np.int64)

    def non_neighbors(self, u):
        """All nodes other than ``u`` that are not adjacent to it."""
        mask = np.ones(self.n, dtype=bool)
        mask[self.neighbors(u)] = False
        mask[u] = False
        return np.flatnonzero(mask)

    def without_edges(self, pairs):
        """Copy of the graph with the given undirected edges removed."""
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        drop = sp.coo_matrix(
            (np.ones(2 * len(pairs)),
             (np.concatenate([pairs[:, 0], pairs[:, 1]]), np.concatenate([pairs[:, 1], pairs[:, 0]]))),
            shape=self._adj.shape,
        ).tocsr()
        mask = self._adj.multiply(drop) != 0
        adj = self._adj - self._adj.multiply(mask)
        return Graph(adj, self._labels)

    def subgraph(self, nodes):
        """Induced subgraph on ``nodes`` (kept in the given order, labels carried over)."""
        nodes = np.asarray(nodes, dtype=np.int64)
        return Graph(self._adj[nodes][:, nodes], [self._labels[i] for i in nodes.tolist()])

    def dense(self):
        return self._adj.toarray()

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        a, b = self._adj, other._adj
        return (self._labels == other._labels
                and np.array_equal(a.indptr, b.indptr)
                and np.array_equal(a.indices, b.indices)
                and np.array_equal(a.data, b.data))

    def __hash__(self):
        return hash((self.n, self.num_edges))

    def __repr__(self):
        return f"Graph(n={self.n}, edges={self.num_edges})"


def _sort_labels(labels):
    try:
        return sorted(labels, key=lambda s: (int(s), s))
    except ValueError:
        return sorted(labels)


def parse_edge_lines(lines, weighted=False, symmetrize=True, source="<input>"):
    """Parse ``u v [w]`` lines into a :class:`Graph`.

    Repeated lines for the same ordered pair sum their weights. With
    ``symmetrize`` each line is read as an arc and the undirected weight is
    the larger of the two directions, so ``1 2`` plus ``2 1`` is one edge of
    weight 1. Without it every line is an undirected edge on its own.
    """
    us, vs, ws = [], [], []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 2 or len(parts) > 3:
            raise EdgeListError(f"{source}:{lineno}: expected 'u v [w]', got {line!r}")
        w = 1.0
        if weighted and len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise EdgeListError(f"{source}:{lineno}: bad weight {parts[2]!r}") from None
            if not np.isfinite(w) or w < 0:
                raise EdgeListError(f"{source}:{lineno}: weight must be finite and nonnegative")
        us.append(parts[0])
        vs.append(parts[1])
        ws.append(w)
    if not us:
        raise EdgeListError(f"{source}: no edges found")
    labels = _sort_labels(set(us) | set(vs))
    index = {lab: i for i, lab in enumerate(labels)}
    n = len(labels)
    src = np.fromiter((index[u] for u in us), dtype=np.int64, count=len(us))
    dst = np.fromiter((index[v] for v in vs), dtype=np.int64, count=len(vs))
    w = np.asarray(ws)
    keep = src != dst
    src, dst, w = src[keep], dst[keep], w[keep]
    arcs = sp.coo_matrix((w, (src, dst)), shape=(n, n)).tocsr()
    arcs.sum_duplicates()
    adj = arcs.maximum(arcs.T) if symmetrize else arcs + arcs.T
    return Graph(adj, labels)


def load_edge_list(path, weighted=False, symmetrize=True):
    path = Path(path)
    with path.open() as fh:
        return parse_edge_lines(fh, weighted=weighted, symmetrize=symmetrize, source=str(path))


def write_edge_list(g, path):
    src, dst, w = g.edges()
    labels = g.labels
    with Path(path).open("w") as fh:
        for u, v, x in zip(src, dst, w):
            fh.write(f"{labels[u]} {labels[v]} {float(x)!r}\n")


def save_binary(g, path):
    """Versioned little-endian CSR cache: magic, version, n, nnz, arrays, labels."""
    a = g.adjacency
    lab = "\n".join(g.labels).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<IQQQ", CACHE_VERSION, g.n, a.nnz, len(lab)))
        fh.write(a.indptr.astype("<i8").tobytes())
        fh.write(a.indices.astype("<i8").tobytes())
        fh.write(a.data.astype("<f8").tobytes())
        fh.write(lab)


def load_binary(path):
    with Path(path).open("rb") as fh:
        if fh.read(len(CACHE_MAGIC)) != CACHE_MAGIC:
            raise ValueError(f"{path}: not a graph cache file")
        version, n, nnz, nlab = struct.unpack("<IQQQ", fh.read(struct.calcsize("<IQQQ")))
        if version != CACHE_VERSION:
            raise ValueError(f"{path}: unsupported cache version {version}")
        indptr = np.frombuffer(fh.read(8 * (n + 1)), dtype="<i8")
        indices = np.frombuffer(fh.read(8 * nnz), dtype="<i8")
        data = np.frombuffer(fh.read(8 * nnz), dtype="<f8")
        labels = fh.read(nlab).decode("utf-8").split("\n") if n else []
    adj = sp.csr_matrix((data.copy(), indices.copy(), indptr.copy()), shape=(n, n))
    return Graph(adj, labels)


def load_graph(path, weighted=False):
    """Load either a binary cache or a text edge list, sniffing the magic bytes."""
    with Path(path).open("rb") as fh:
        head = fh.read(len(CACHE_MAGIC))
    if head == CACHE_MAGIC:
        return load_binary(path)
    return load_edge_list(path, weighted=weighted)


@dataclass(frozen=True)
class SnapshotPair:
    """Training graph at t1 and the edges that appear by t2."""

    train: Graph
    test_edges: np.ndarray
    discarded: int = 0
    _test_set: frozenset = field(default=frozenset(), repr=False, compare=False)

    def __post_init__(self):
        te = np.asarray(self.test_edges, dtype=np.int64).reshape(-1, 2)
        te = np.sort(te, axis=1)
        te = np.unique(te, axis=0) if len(te) else te
        object.__setattr__(self, "test_edges", te)
        object.__setattr__(self, "_test_set", frozenset(map(tuple, te.tolist())))

    def is_test_edge(self, u, v):
        return (min(u, v), max(u, v)) in self._test_set

    def test_neighbors(self):
        """Per-node sorted arrays of test-edge partners."""
        return self._test_adjacency

    @cached_property
    def _test_adjacency(self):
        n = self.train.n
        te = self.test_edges
        T = sp.coo_matrix((np.ones(2 * len(te)), (np.r_[te[:, 0], te[:, 1]], np.r_[te[:, 1], te[:, 0]])),
                          shape=(n, n)).tocsr()
        T.sort_indices()
        return [T.indices[T.indptr[u]:T.indptr[u + 1]].astype(np.int64) for u in range(n)]


def snapshot_pair(train, later):
    """Pair a t1 graph with a t2 graph (or edge list), keeping only new edges.

    Edges of ``later`` whose endpoints do not exist in ``train`` are dropped
    and counted in ``discarded``.
    """
    src, dst, _ = later.edges()
    pairs, discarded = [], 0
    for u, v in zip(src, dst):
        lu, lv = later.labels[u], later.labels[v]
        try:
            iu, iv = train.index_of(lu), train.index_of(lv)
        except KeyError:
            discarded += 1
            continue
        if not train.has_edge(iu, iv):
            pairs.append((iu, iv))
    return SnapshotPair(train, np.asarray(pairs, dtype=np.int64).reshape(-1, 2), discarded)


def load_snapshot_pair(train_path, later_path, weighted=False):
    return snapshot_pair(load_graph(train_path, weighted), load_graph(later_path, weighted))
