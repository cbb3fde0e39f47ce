"""Synthetic benchmark graphs: planted-block snapshot pairs and power-law graphs."""
from __future__ import annotations

import numpy as np

from .graph import Graph, SnapshotPair


def _block_pairs(sizes):
    starts = np.concatenate([[0], np.cumsum(sizes)])
    for a in range(len(sizes)):
        for b in range(a, len(sizes)):
            yield a, b, starts


def sbm_snapshots(sizes, p_in, p_out, flip_rate=0.0, seed=0):
    """Planted-block graph at t1 plus the links that form by t2.

    Within-block non-edges turn on with probability ``flip_rate``; cross-block
    non-edges with ``flip_rate * p_out / p_in``, so cross links stay as rare
    relative to within links as they were at t1. Returns
    ``(train_src, train_dst, test_src, test_dst, blocks)``.
    """
    for name, p in (("p_in", p_in), ("p_out", p_out), ("flip_rate", flip_rate)):
        if not 0 <= p <= 1:
            raise ValueError(f"{name} must lie in [0, 1], got {p}")
    sizes = [int(s) for s in sizes]
    rng = np.random.default_rng(seed)
    flip_out = flip_rate * (p_out / p_in) if p_in > 0 else 0.0
    tr_s, tr_d, te_s, te_d = [], [], [], []
    for a, b, starts in _block_pairs(sizes):
        p, q = (p_in, flip_rate) if a == b else (p_out, flip_out)
        ra = np.arange(starts[a], starts[a + 1])
        rb = np.arange(starts[b], starts[b + 1])
        draw = rng.random((ra.size, rb.size))
        late = rng.random((ra.size, rb.size))
        mask = np.ones_like(draw, dtype=bool)
        if a == b:
            mask = np.triu(mask, k=1)
        edge = mask & (draw < p)
        new = mask & ~edge & (late < q)
        i, j = np.nonzero(edge)
        tr_s.append(ra[i]); tr_d.append(rb[j])
        i, j = np.nonzero(new)
        te_s.append(ra[i]); te_d.append(rb[j])
    blocks = np.repeat(np.arange(len(sizes)), sizes)
    return (np.concatenate(tr_s), np.concatenate(tr_d),
            np.concatenate(te_s), np.concatenate(te_d), blocks)


def sbm_graph(sizes, p_in, p_out, seed=0):
    src, dst, _, _, blocks = sbm_snapshots(sizes, p_in, p_out, 0.0, seed)
    return Graph.from_edges(src, dst, n=int(sum(sizes))), blocks


def sbm_temporal_generator(blocks, sizes=None, p_in=0.05, p_out=0.005, flip_rate=0.05, seed=0):
    """Snapshot pair on a planted-block graph; t2 only adds edges.

    ``blocks`` is the block count; ``sizes`` defaults to equal blocks of 100.
    """
    if sizes is None:
        sizes = [100] * blocks
    if len(sizes) != blocks:
        raise ValueError(f"{len(sizes)} sizes given for {blocks} blocks")
    tr_s, tr_d, te_s, te_d, _ = sbm_snapshots(sizes, p_in, p_out, flip_rate, seed)
    n = int(sum(sizes))
    train = Graph.from_edges(tr_s, tr_d, n=n)
    return SnapshotPair(train, np.column_stack([te_s, te_d]))


def powerlaw_graph(n, avg_degree=10.0, exponent=2.5, seed=0):
    """Chung-Lu graph with expected degrees following a power law."""
    rng = np.random.default_rng(seed)
    w = (np.arange(1, n + 1, dtype=float)) ** (-1.0 / (exponent - 1.0))
    w /= w.sum()
    m = int(round(n * avg_degree / 2))
    src = rng.choice(n, size=m, p=w)
    dst = rng.choice(n, size=m, p=w)
    keep = src != dst
    g = Graph.from_edges(src[keep], dst[keep], n=n)
    # collapse multi-edges to unit weight
    A = g.adjacency.copy()
    A.data = np.ones_like(A.data)
    return Graph(A)
