"""Clustered low-rank approximations at every level of a hierarchy.

The deepest level gets a per-cluster eigendecomposition. Each upper level is
lifted from its children: sketch the parent block with the block-diagonal
child basis, orthonormalize, solve the small projected eigenproblem, and
rotate back. Every level stores its block-diagonal basis ``U`` and the dense
core ``S = U^T A U``.
"""
from __future__ import annotations

import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .hierarchy import HierarchyTree
from .linalg import EigenConvergenceError, orthonormalize, symmetric_eig_top_r

MODEL_MAGIC = b"MSLPMODL"
MODEL_VERSION = 1


class LiftError(ValueError):
    """The parent block has an empty range, so nothing can be lifted."""


@dataclass(eq=False)
class LevelApproximation:
    """Block-diagonal orthonormal basis plus dense core for one level.

    ``order`` lists node ids cluster by cluster; cluster ``i`` owns rows
    ``order[offsets[i]:offsets[i+1]]`` and basis columns
    ``col_offsets[i]:col_offsets[i+1]``.
    """

    level: int
    order: np.ndarray
    offsets: np.ndarray
    blocks: list
    S: np.ndarray
    _basis: object = field(default=None, repr=False)

    @property
    def n(self):
        return self.order.size

    @property
    def num_clusters(self):
        return len(self.blocks)

    @property
    def ranks(self):
        return np.array([b.shape[1] for b in self.blocks], dtype=np.int64)

    @property
    def col_offsets(self):
        return np.concatenate([[0], np.cumsum(self.ranks)])

    @property
    def basis_entries(self):
        return int(sum(b.size for b in self.blocks))

    def cluster_nodes(self, i):
        return self.order[self.offsets[i]:self.offsets[i + 1]]

    def basis(self):
        """Block-diagonal ``U`` as an ``n x R`` CSR matrix indexed by node id."""
        if self._basis is None:
            rows, cols, vals = [], [], []
            coff = self.col_offsets
            for i, B in enumerate(self.blocks):
                nodes = self.cluster_nodes(i)
                rr, cc = np.meshgrid(nodes, np.arange(coff[i], coff[i + 1]), indexing="ij")
                rows.append(rr.ravel())
                cols.append(cc.ravel())
                vals.append(B.ravel())
            R = int(coff[-1])
            self._basis = sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(self.n, R))
        return self._basis

    def dense_basis(self):
        return self.basis().toarray()

    def reconstruct(self):
        """Dense ``U S U^T``; small graphs only."""
        U = self.dense_basis()
        return U @ self.S @ U.T


@dataclass(eq=False)
class MultiScaleModel:
    """Level approximations for p = 0..depth, sharing one node ordering."""

    tree: HierarchyTree
    rank: int
    levels: list
    labels: tuple = ()
    beta: float = float("nan")
    power_pass: bool = False
    peak_basis_entries: int = 0

    @property
    def depth(self):
        return self.tree.depth

    @property
    def n(self):
        return self.tree.n

    @property
    def order(self):
        return self.levels[0].order

    def level(self, p):
        return self.levels[p]


def core_matrix(A, la_or_basis):
    """``U^T A U`` for a block-diagonal basis, with ``A`` kept sparse."""
    U = la_or_basis.basis() if isinstance(la_or_basis, LevelApproximation) else la_or_basis
    S = (U.T @ (A @ U))
    S = S.toarray() if sp.issparse(S) else np.asarray(S)
    return 0.5 * (S + S.T)


def _map(fn, items, threads):
    if threads is None:
        threads = int(os.environ.get("MSLP_THREADS", "1") or 1)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def clra_leaf(g, tree, r, threads=None):
    """Per-cluster top-r eigenbases at the deepest level, cores from sparse A."""
    if r < 1:
        raise ValueError(f"rank must be >= 1, got {r}")
    A = g.adjacency
    p = tree.depth
    order = tree.order()
    offsets = tree.offsets(p)

    def leaf_basis(i):
        nodes = order[offsets[i]:offsets[i + 1]]
        Aii = A[nodes][:, nodes]
        try:
            res = symmetric_eig_top_r(Aii, min(r, nodes.size))
        except EigenConvergenceError as exc:
            raise EigenConvergenceError(f"leaf cluster {i}: {exc}", exc.residuals) from exc
        return res.vectors

    blocks = _map(leaf_basis, list(range(tree.num_clusters(p))), threads)
    la = LevelApproximation(p, order, offsets, blocks, np.zeros((0, 0)))
    la.S = core_matrix(A, la)
    return la


def lift_subspace(A_parent, children, r, power_pass=False):
    """Dominant rank-r subspace of a parent block from its children's bases.

    ``A_parent`` must be ordered child by child, matching ``children``.
    Steps: Omega = diag(children); Y = A Omega; Q = orth(Y); B = Q^T A Q;
    top-r eigenvectors V of B; return Q V.
    """
    A_parent = sp.csr_matrix(A_parent)
    sizes = [c.shape[0] for c in children]
    if sum(sizes) != A_parent.shape[0]:
        raise ValueError(f"children cover {sum(sizes)} rows, parent block has {A_parent.shape[0]}")
    Omega = sp.block_diag([sp.csr_matrix(c) for c in children], format="csr")
    Y = A_parent @ Omega
    Y = Y.toarray() if sp.issparse(Y) else np.asarray(Y)
    if power_pass:
        Y = A_parent @ (A_parent.T @ Y)
    Q = orthonormalize(Y)
    if Q.shape[1] == 0:
        raise LiftError("parent block has an empty range (no internal edges reachable)")
    B = Q.T @ (A_parent @ Q)
    res = symmetric_eig_top_r(0.5 * (B + B.T), min(r, Q.shape[1]))
    return Q @ res.vectors


def _lift_level(g, tree, child, r, power_pass, threads):
    A = g.adjacency
    p = child.level - 1
    c = tree.branching
    offsets = tree.offsets(p)
    order = child.order

    def parent_basis(q):
        nodes = order[offsets[q]:offsets[q + 1]]
        kids = child.blocks[q * c:(q + 1) * c]
        A_P = A[nodes][:, nodes]
        try:
            return lift_subspace(A_P, kids, r, power_pass)
        except LiftError:
            # an edgeless parent: every basis is optimal, keep the children's leading columns
            Omega = sp.block_diag([sp.csr_matrix(k) for k in kids]).toarray()
            return Omega[:, :min(r, Omega.shape[1])]

    blocks = _map(parent_basis, list(range(tree.num_clusters(p))), threads)
    la = LevelApproximation(p, order, offsets, blocks, np.zeros((0, 0)))
    la.S = core_matrix(A, la)
    return la


def build_multiscale(g, tree, r, power_pass=False, threads=None):
    """Approximations for every level: leaf CLRA, then bottom-up lifting."""
    if tree.n != g.n:
        raise ValueError(f"tree covers {tree.n} nodes, graph has {g.n}")
    leaf = clra_leaf(g, tree, r, threads)
    levels = [leaf]
    peak = leaf.basis_entries
    for _ in range(tree.depth):
        parent = _lift_level(g, tree, levels[-1], r, power_pass, threads)
        # the child's basis storage can be recycled once its parent exists
        peak = max(peak, levels[-1].basis_entries + parent.basis_entries)
        levels.append(parent)
    levels.reverse()
    return MultiScaleModel(tree, r, levels, labels=g.labels, power_pass=power_pass,
                           peak_basis_entries=peak)


def approximation_error(g, la, S=None, chunk_entries=4_000_000):
    """Relative Frobenius error ``||A - U S U^T|| / ||A||``.

    Uses ``la.S`` unless ``S`` is given. Up to 20000 nodes the residual is
    streamed in row chunks (exact, no cancellation); above that it falls back
    to ``||A||^2 - 2<U^T A U, S> + ||S||^2``.
    """
    A = g.adjacency
    S = la.S if S is None else np.asarray(S, dtype=float)
    normA = float(np.sqrt(np.sum(A.data ** 2)))
    if normA == 0:
        return 0.0 if not np.any(S) else float("inf")
    U = la.basis()
    n = g.n
    if n <= 20000:
        total = 0.0
        step = max(1, chunk_entries // max(n, 1))
        US = np.asarray(U @ S)
        UT = U.T.tocsr()
        for start in range(0, n, step):
            stop = min(n, start + step)
            block = A[start:stop].toarray() - np.asarray(US[start:stop] @ UT)
            total += float(np.sum(block * block))
        return float(np.sqrt(total)) / normA
    M = core_matrix(A, U)
    err2 = normA ** 2 - 2.0 * float(np.sum(M * S)) + float(np.sum(S * S))
    return float(np.sqrt(max(err2, 0.0))) / normA


# --- model files ---------------------------------------------------------------


def save_model(model, path):
    """Versioned little-endian model file (header, ordering, per-level U and S)."""
    c = model.tree.branching
    lab = "\n".join(model.labels).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<IQIIIdIQ", MODEL_VERSION, model.n, model.depth, c, model.rank,
                             model.beta, int(model.power_pass), len(lab)))
        fh.write(model.order.astype("<i8").tobytes())
        for la in model.levels:
            fh.write(la.offsets.astype("<i8").tobytes())
            fh.write(la.ranks.astype("<i8").tobytes())
            for B in la.blocks:
                fh.write(np.ascontiguousarray(B, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(la.S, dtype="<f8").tobytes())
        fh.write(lab)


def load_model(path):
    with Path(path).open("rb") as fh:
        if fh.read(len(MODEL_MAGIC)) != MODEL_MAGIC:
            raise ValueError(f"{path}: not a model file")
        head = struct.calcsize("<IQIIIdIQ")
        version, n, depth, c, r, beta, power, nlab = struct.unpack("<IQIIIdIQ", fh.read(head))
        if version != MODEL_VERSION:
            raise ValueError(f"{path}: unsupported model version {version}")

        def read(count, dtype):
            return np.frombuffer(fh.read(8 * count), dtype=dtype).copy()

        order = read(n, "<i8")
        levels = []
        for p in range(depth + 1):
            k = c ** p
            offsets = read(k + 1, "<i8")
            ranks = read(k, "<i8")
            blocks = []
            for i in range(k):
                m = int(offsets[i + 1] - offsets[i])
                blocks.append(read(m * int(ranks[i]), "<f8").reshape(m, int(ranks[i])))
            R = int(ranks.sum())
            S = read(R * R, "<f8").reshape(R, R)
            levels.append(LevelApproximation(p, order, offsets, blocks, S))
        labels = tuple(fh.read(nlab).decode("utf-8").split("\n")) if nlab else ()
    leaf = np.empty(n, dtype=np.int64)
    off = levels[-1].offsets
    for i in range(c ** depth):
        leaf[order[off[i]:off[i + 1]]] = i
    tree = HierarchyTree.from_leaf(leaf, c, depth)
    return MultiScaleModel(tree, r, levels, labels=labels, beta=beta, power_pass=bool(power))
