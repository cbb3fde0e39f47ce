"""Divisive c-way cluster hierarchies.

The partitioner is a small multilevel scheme: heavy-edge matching to coarsen,
a spectral (Fiedler) or greedy-growing cut on the coarsest graph, then
Fiduccia-Mattheyses boundary refinement while projecting back. ``c``-way
splits are done by recursive bisection with proportional target shares.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .linalg import fiedler_vector

COARSEST_SIZE = 120
BALANCE = 0.1
FM_PASSES = 8
GROWING_TRIES = 4


class HierarchyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class HierarchyTree:
    """Per-level cluster assignments of a balanced c-ary tree.

    ``levels[p][v]`` is the cluster of node ``v`` at level ``p``, in
    ``0..c**p - 1``. Cluster ``k`` at level ``p + 1`` is a child of cluster
    ``k // c`` at level ``p``, so the whole tree follows from the leaf level.
    """

    levels: tuple
    branching: int

    @classmethod
    def from_leaf(cls, leaf, branching, depth):
        leaf = np.asarray(leaf, dtype=np.int64)
        levels = tuple(leaf // branching ** (depth - p) for p in range(depth + 1))
        tree = cls(levels, branching)
        tree.validate()
        return tree

    @classmethod
    def from_assignments(cls, assignments, branching):
        """Build from arbitrary-labelled nested level assignments (level 1 first).

        Cluster ids are renumbered so that children of cluster ``k`` are
        ``k*c .. k*c + c - 1`` (ordered by smallest member node).
        """
        assignments = [np.asarray(a, dtype=np.int64) for a in assignments]
        if not assignments:
            raise HierarchyError("need at least one level")
        n = assignments[0].size
        current = np.zeros(n, dtype=np.int64)
        levels = [current]
        for p, raw in enumerate(assignments, start=1):
            nxt = np.empty(n, dtype=np.int64)
            for parent in range(branching ** (p - 1)):
                members = np.flatnonzero(current == parent)
                labels = raw[members]
                kids = sorted(set(labels.tolist()), key=lambda k: members[labels == k].min())
                if len(kids) != branching:
                    raise HierarchyError(
                        f"level {p}: parent cluster {parent} has {len(kids)} children, expected {branching}")
                for j, k in enumerate(kids):
                    nxt[members[labels == k]] = parent * branching + j
            # every raw label must live under exactly one parent
            for k in np.unique(raw):
                if np.unique(current[raw == k]).size != 1:
                    raise HierarchyError(f"level {p}: cluster {k} straddles parents (not nested)")
            levels.append(nxt)
            current = nxt
        tree = cls(tuple(levels), branching)
        tree.validate()
        return tree

    @property
    def depth(self):
        return len(self.levels) - 1

    @property
    def n(self):
        return self.levels[0].size

    @property
    def leaf(self):
        return self.levels[-1]

    def num_clusters(self, p):
        return self.branching ** p

    def validate(self):
        c = self.branching
        if c < 2 and self.depth > 0:
            raise HierarchyError("branching must be at least 2")
        if np.any(self.levels[0] != 0):
            raise HierarchyError("level 0 must be a single cluster")
        for p in range(self.depth + 1):
            lv = self.levels[p]
            counts = np.bincount(lv, minlength=c ** p)
            if counts.size != c ** p or lv.min() < 0:
                raise HierarchyError(f"level {p}: cluster ids outside 0..{c ** p - 1}")
            if np.any(counts == 0):
                raise HierarchyError(f"level {p}: empty cluster {int(np.flatnonzero(counts == 0)[0])}")
            if p and np.any(lv // c != self.levels[p - 1]):
                raise HierarchyError(f"level {p} is not nested in level {p - 1}")

    def order(self):
        """Node permutation listing nodes cluster by cluster (stable by node id)."""
        return np.argsort(self.leaf, kind="stable")

    def offsets(self, p):
        """Start offsets of the level-``p`` clusters inside :meth:`order`."""
        counts = np.bincount(self.levels[p], minlength=self.num_clusters(p))
        return np.concatenate([[0], np.cumsum(counts)])

    def members(self, p, k):
        return np.flatnonzero(self.levels[p] == k)

    def __eq__(self, other):
        if not isinstance(other, HierarchyTree):
            return NotImplemented
        return (self.branching == other.branching and self.depth == other.depth
                and all(np.array_equal(a, b) for a, b in zip(self.levels, other.levels)))


def within_cluster_fraction(g, assignment):
    """Share of edges whose endpoints fall in the same cluster."""
    assignment = np.asarray(assignment)
    if assignment.size != g.n:
        raise ValueError(f"assignment covers {assignment.size} nodes, graph has {g.n}")
    src, dst, _ = g.edges()
    if src.size == 0:
        return 1.0
    return float(np.mean(assignment[src] == assignment[dst]))


def level_fractions(g, tree):
    return [within_cluster_fraction(g, tree.levels[p]) for p in range(tree.depth + 1)]


def _check_shape(n, depth, branching):
    if depth < 0:
        raise HierarchyError(f"depth must be >= 0, got {depth}")
    if branching < 2:
        raise HierarchyError(f"branching must be >= 2, got {branching}")
    if branching ** depth > n:
        raise HierarchyError(
            f"c^l = {branching}^{depth} = {branching ** depth} leaf clusters exceed n = {n} nodes")


# --- multilevel bisection ----------------------------------------------------


def _drop_diagonal(A):
    A = A.tocsr()
    if A.diagonal().any():
        A = (A - sp.diags(A.diagonal())).tocsr()
    A.eliminate_zeros()
    return A


def _heavy_edge_matching(A):
    n = A.shape[0]
    indptr, indices, data = A.indptr.tolist(), A.indices.tolist(), A.data.tolist()
    match = [-1] * n
    for v in range(n):
        if match[v] >= 0:
            continue
        best, best_w = -1, 0.0
        for k in range(indptr[v], indptr[v + 1]):
            u = indices[k]
            if match[u] < 0 and u != v and data[k] > best_w:
                best, best_w = u, data[k]
        if best >= 0:
            match[v], match[best] = best, v
    # leaves of a shared hub cannot match each other directly; pair them up
    groups = {}
    for v in range(n):
        if match[v] < 0 and indptr[v + 1] > indptr[v]:
            k = max(range(indptr[v], indptr[v + 1]), key=lambda k: (data[k], -indices[k]))
            hub = indices[k]
            if hub in groups:
                u = groups.pop(hub)
                match[v], match[u] = u, v
            else:
                groups[hub] = v
    cmap = np.full(n, -1, dtype=np.int64)
    nc = 0
    for v in range(n):
        if cmap[v] < 0:
            cmap[v] = nc
            if match[v] >= 0:
                cmap[match[v]] = nc
            nc += 1
    return cmap, nc


def _coarsen(A, vw, cmap, nc):
    n = A.shape[0]
    P = sp.csr_matrix((np.ones(n), (np.arange(n), cmap)), shape=(n, nc))
    Ac = _drop_diagonal(P.T @ A @ P)
    return Ac, np.bincount(cmap, weights=vw, minlength=nc)


def _cut(A, side):
    coo = A.tocoo()
    return float(coo.data[side[coo.row] != side[coo.col]].sum()) / 2.0


def _gains(A, side):
    s = side.astype(float)
    toward1 = A @ s
    total = np.asarray(A.sum(axis=1)).ravel()
    toward0 = total - toward1
    ext = np.where(side == 0, toward1, toward0)
    return ext - (total - ext), ext


def _fm_refine(A, vw, side, lo, hi, passes=FM_PASSES):
    """Boundary FM refinement; keeps the side-0 weight within ``[lo, hi]``."""
    n = A.shape[0]
    if n < 2:
        return side
    indptr, indices, data = A.indptr.tolist(), A.indices.tolist(), A.data.tolist()
    vwl = vw.tolist()
    side = side.copy()
    for _ in range(passes):
        gain_arr, ext = _gains(A, side)
        gain = gain_arr.tolist()
        w0 = float(vw[side == 0].sum())
        heaps = ([], [])
        for v in np.flatnonzero(ext > 0).tolist():
            heapq.heappush(heaps[side[v]], (-gain[v], v))
        locked = [False] * n
        moves = []
        cum, best_cum, best_len = 0.0, 0.0, 0
        since_best = 0
        limit = max(50, n // 10)
        while since_best < limit:
            pick = None
            for s in (0, 1):
                h = heaps[s]
                while h and (locked[h[0][1]] or -h[0][0] != gain[h[0][1]] or side[h[0][1]] != s):
                    heapq.heappop(h)
                if not h:
                    continue
                v = h[0][1]
                nw0 = w0 - vwl[v] if s == 0 else w0 + vwl[v]
                if lo <= nw0 <= hi and (pick is None or gain[v] > gain[pick]
                                        or (gain[v] == gain[pick] and v < pick)):
                    pick = v
            if pick is None:
                break
            v = pick
            s = side[v]
            heapq.heappop(heaps[s])
            locked[v] = True
            side[v] = 1 - s
            w0 = w0 - vwl[v] if s == 0 else w0 + vwl[v]
            cum += gain[v]
            moves.append(v)
            for k in range(indptr[v], indptr[v + 1]):
                u = indices[k]
                if locked[u]:
                    continue
                gain[u] += -2 * data[k] if side[u] == side[v] else 2 * data[k]
                heapq.heappush(heaps[side[u]], (-gain[u], u))
            if cum > best_cum + 1e-12:
                best_cum, best_len, since_best = cum, len(moves), 0
            else:
                since_best += 1
        for v in moves[best_len:]:
            side[v] = 1 - side[v]
        if best_len == 0:
            break
    return side


def _rebalance(A, vw, side, lo, hi):
    """Greedily move best-gain nodes off the heavy side until weights fit."""
    side = side.copy()
    w0 = float(vw[side == 0].sum())
    for _ in range(4 * side.size):
        if lo <= w0 <= hi:
            break
        src = 0 if w0 > hi else 1
        gain, ext = _gains(A, side)
        cand = np.flatnonzero(side == src)
        if cand.size <= 1:
            break
        boundary = cand[ext[cand] > 0]
        pool = boundary if boundary.size else cand
        need = (w0 - hi) if src == 0 else (lo - w0)
        order = pool[np.lexsort((pool, -gain[pool]))]
        moved = 0.0
        for v in order:
            side[v] = 1 - src
            moved += vw[v]
            if moved >= need:
                break
        w0 = float(vw[side == 0].sum())
    return side


def _sweep_cut(A, vw, score, lo, hi):
    order = np.lexsort((np.arange(score.size), score))
    csum = np.cumsum(vw[order])
    total = csum[-1]
    best, best_val = None, math.inf
    coo = A.tocoo()
    pos = np.empty(score.size, dtype=np.int64)
    pos[order] = np.arange(score.size)
    # cut after position i: edges whose endpoint positions straddle i
    a, b = np.minimum(pos[coo.row], pos[coo.col]), np.maximum(pos[coo.row], pos[coo.col])
    delta = np.zeros(score.size + 1)
    np.add.at(delta, a, coo.data / 2.0)
    np.add.at(delta, b, -coo.data / 2.0)
    cuts = np.cumsum(delta)[:-1]
    for i in range(score.size - 1):
        w0 = csum[i]
        if lo <= w0 <= hi:
            val = cuts[i] / (w0 * (total - w0))
            if val < best_val - 1e-15:
                best, best_val = i, val
    side = np.ones(score.size, dtype=np.int64)
    if best is None:
        k = int(np.searchsorted(csum, 0.5 * (lo + hi)))
        side[order[: k + 1]] = 0
    else:
        side[order[: best + 1]] = 0
    return side


def _grow(A, vw, target, start):
    n = A.shape[0]
    side = np.ones(n, dtype=np.int64)
    conn = np.zeros(n)
    w0 = 0.0
    heap = [(0.0, start)]
    seen_next = 0
    indptr, indices, data = A.indptr, A.indices, A.data
    while w0 < target:
        while heap and side[heap[0][1]] == 0:
            heapq.heappop(heap)
        if not heap:
            while seen_next < n and side[seen_next] == 0:
                seen_next += 1
            if seen_next >= n:
                break
            heap = [(0.0, seen_next)]
        _, v = heapq.heappop(heap)
        side[v] = 0
        w0 += vw[v]
        for k in range(indptr[v], indptr[v + 1]):
            u = indices[k]
            if side[u] == 1:
                conn[u] += data[k]
                heapq.heappush(heap, (-conn[u], int(u)))
    return side


def _initial_bisection(A, vw, lo, hi, rng):
    total = float(vw.sum())
    target = 0.5 * (lo + hi)
    L = sp.diags(np.asarray(A.sum(axis=1)).ravel()) - A
    tries = [_sweep_cut(A, vw, fiedler_vector(L), lo, hi)]
    for start in rng.choice(A.shape[0], size=min(GROWING_TRIES, A.shape[0]), replace=False):
        tries.append(_grow(A, vw, target, int(start)))
    best, best_cut = None, math.inf
    for side in tries:
        side = _rebalance(A, vw, side, lo, hi)
        side = _fm_refine(A, vw, side, lo, hi)
        w0 = float(vw[side == 0].sum())
        if not lo <= w0 <= hi or w0 <= 0 or w0 >= total:
            continue
        c = _cut(A, side)
        if c < best_cut - 1e-12:
            best, best_cut = side, c
    if best is None:
        best = _rebalance(A, vw, tries[0], lo, hi)
    return best


def bisect(A, share, min_left, min_right, rng, balance=BALANCE):
    """Split node set of ``A`` in two; side 0 gets roughly ``share`` of the nodes.

    Side weights are kept within ``share +- balance`` of the node count and
    never below ``min_left`` / ``min_right``.
    """
    A = _drop_diagonal(sp.csr_matrix(A, dtype=float))
    n = A.shape[0]
    lo = max(min_left, math.ceil((share - balance) * n))
    hi = min(n - min_right, math.floor((share + balance) * n))
    if lo > hi:
        lo, hi = min_left, n - min_right
    if lo > hi:
        raise HierarchyError(f"cannot split {n} nodes into sides of at least {min_left} and {min_right}")
    vw = np.ones(n)
    graphs, maps = [(A, vw)], []
    while graphs[-1][0].shape[0] > COARSEST_SIZE:
        Ac, vwc = graphs[-1]
        cmap, nc = _heavy_edge_matching(Ac)
        if nc > 0.95 * Ac.shape[0]:
            break
        graphs.append(_coarsen(Ac, vwc, cmap, nc))
        maps.append(cmap)
    Ac, vwc = graphs[-1]
    side = _initial_bisection(Ac, vwc, lo, hi, rng)
    for level in range(len(maps) - 1, -1, -1):
        side = side[maps[level]]
        Af, vwf = graphs[level]
        side = _rebalance(Af, vwf, side, lo, hi)
        side = _fm_refine(Af, vwf, side, lo, hi)
    return side


def partition(A, parts, min_size, rng, balance=BALANCE):
    """Split into ``parts`` groups by recursive proportional bisection.

    Returns a label array in ``0..parts-1``; every group has at least
    ``min_size`` nodes.
    """
    n = A.shape[0]
    labels = np.zeros(n, dtype=np.int64)
    if parts == 1:
        return labels
    left = parts // 2
    right = parts - left
    side = bisect(A, left / parts, left * min_size, right * min_size, rng, balance)
    A = sp.csr_matrix(A)
    for s, k, offset in ((0, left, 0), (1, right, left)):
        idx = np.flatnonzero(side == s)
        sub = A[idx][:, idx]
        labels[idx] = offset + partition(sub, k, min_size, rng, balance)
    return labels


def build_hierarchy(g, depth, branching, seed=0, balance=BALANCE):
    """Divisive ``branching``-way hierarchy of ``depth`` levels below the root.

    Each cluster is split using only its own internal edges. Every child is
    kept large enough to host its whole subtree, so no cluster is ever empty.
    """
    _check_shape(g.n, depth, branching)
    rng = np.random.default_rng(seed)
    A = g.adjacency
    leaf = np.zeros(g.n, dtype=np.int64)

    def split(nodes, p, k):
        if p == depth:
            leaf[nodes] = k
            return
        unit = branching ** (depth - p - 1)
        m = nodes.size
        min_size = unit
        if branching * math.ceil(balance * m) <= m:
            min_size = max(unit, math.ceil(balance * m))
        sub = A[nodes][:, nodes]
        labels = partition(sub, branching, min_size, rng, balance)
        for j in range(branching):
            split(nodes[labels == j], p + 1, k * branching + j)

    split(np.arange(g.n), 0, 0)
    return HierarchyTree.from_leaf(leaf, branching, depth)


def random_hierarchy(g, depth, branching, seed=0):
    """Uniformly random balanced nested hierarchy (leaf sizes differ by at most one)."""
    _check_shape(g.n, depth, branching)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(g.n)
    leaves = branching ** depth
    leaf = np.empty(g.n, dtype=np.int64)
    leaf[perm] = (np.arange(g.n) * leaves) // g.n
    return HierarchyTree.from_leaf(leaf, branching, depth)


def shuffle_leaves(tree, fraction, seed=0):
    """Move ``ceil(fraction * n)`` nodes to a different, uniformly chosen leaf.

    Upper levels follow each node's new leaf. Nodes that are the last member
    of their leaf are skipped so no cluster empties.
    """
    if not 0 <= fraction <= 1:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    leaves = tree.num_clusters(tree.depth)
    count = math.ceil(fraction * tree.n - 1e-9)
    if count == 0 or leaves < 2:
        return tree
    rng = np.random.default_rng(seed)
    leaf = tree.leaf.copy()
    sizes = np.bincount(leaf, minlength=leaves)
    moved = 0
    for v in rng.permutation(tree.n):
        if moved == count:
            break
        if sizes[leaf[v]] <= 1:
            continue
        target = rng.integers(leaves - 1)
        target += target >= leaf[v]
        sizes[leaf[v]] -= 1
        sizes[target] += 1
        leaf[v] = target
        moved += 1
    return HierarchyTree.from_leaf(leaf, tree.branching, tree.depth)


# --- assignment files ----------------------------------------------------------


def write_assignment(path, g, assignment):
    with Path(path).open("w") as fh:
        for lab, k in zip(g.labels, np.asarray(assignment).tolist()):
            fh.write(f"{lab}\t{k}\n")


def read_assignment(path, g):
    out = np.full(g.n, -1, dtype=np.int64)
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise HierarchyError(f"{path}:{lineno}: expected 'label<TAB>cluster'")
            out[g.index_of(parts[0])] = int(parts[1])
    if np.any(out < 0):
        missing = g.labels[int(np.flatnonzero(out < 0)[0])]
        raise HierarchyError(f"{path}: node {missing!r} has no cluster")
    return out


def write_tree(directory, g, tree, prefix="level"):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for p in range(1, tree.depth + 1):
        path = directory / f"{prefix}{p}.tsv"
        write_assignment(path, g, tree.levels[p])
        paths.append(path)
    return paths


def read_tree(paths, g, branching):
    return HierarchyTree.from_assignments([read_assignment(p, g) for p in paths], branching)
