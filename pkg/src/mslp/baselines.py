"""Classical unsupervised link predictors: CN, AA, PA, RWR and truncated Katz.

CN, AA and PA use the unweighted neighbor sets. RWR walks the weighted,
column-normalized adjacency.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .proximity import default_beta, exact_katz, katz_row, spectral_norm


class BaselineKind(str, enum.Enum):
    CN = "cn"
    AA = "aa"
    PA = "pa"
    RWR = "rwr"
    KATZ_TRUNC = "katz"


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


def _check_candidates(g, u, candidates):
    candidates = np.asarray(candidates, dtype=np.int64)
    if not 0 <= u < g.n:
        raise IndexError(f"node {u} out of range for n={g.n}")
    if candidates.size and (candidates.min() < 0 or candidates.max() >= g.n):
        raise IndexError("candidate node out of range")
    if np.any(candidates == u):
        raise ValueError("candidates must not contain the query node")
    if np.intersect1d(candidates, g.neighbors(u)).size:
        raise ValueError("candidates must not contain existing neighbors")
    return candidates


def rwr_vector(g, u, alpha=0.15, tol=1e-10, max_iter=1000):
    """Stationary visit probabilities of a walk restarting at ``u`` with prob. ``alpha``.

    Mass that reaches a node without neighbors goes back to ``u``.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"restart probability must lie in (0, 1), got {alpha}")
    A = g.adjacency
    colsum = np.asarray(A.sum(axis=0)).ravel()
    dangling = colsum == 0
    inv = np.where(dangling, 0.0, 1.0 / np.where(dangling, 1.0, colsum))
    P = A @ sp.diags(inv)
    x = np.zeros(g.n)
    x[u] = 1.0
    delta = np.inf
    for _ in range(max_iter):
        nxt = (1 - alpha) * (P @ x)
        nxt[u] += alpha + (1 - alpha) * x[dangling].sum()
        delta = np.abs(nxt - x).sum()
        x = nxt
        if delta <= tol:
            return x
    raise ConvergenceError(f"RWR did not converge in {max_iter} iterations", delta)


@dataclass
class BaselineScorer:
    """Scores candidate links of one graph with a classical predictor."""

    g: object
    kind: BaselineKind
    alpha: float = 0.15
    beta: float | None = None

    def __post_init__(self):
        self.kind = BaselineKind(self.kind)
        if not 0 < self.alpha < 1:
            raise ValueError(f"restart probability must lie in (0, 1), got {self.alpha}")
        pattern = self.g.adjacency.copy()
        pattern.data = np.ones_like(pattern.data)
        self._pattern = pattern.tocsr()
        self._deg = np.asarray(pattern.sum(axis=1)).ravel()
        if self.kind is BaselineKind.KATZ_TRUNC:
            if self.beta is None:
                self.beta = default_beta(self.g)
            self._rho = spectral_norm(self.g)
        if self.kind is BaselineKind.AA:
            w = 1.0 / np.log(np.maximum(self._deg, 2))
            self._aa = sp.diags(w)

    def scores(self, u, candidates):
        candidates = np.asarray(candidates, dtype=np.int64)
        if candidates.size == 0:
            return np.zeros(0)
        B = self._pattern
        kind = self.kind
        if kind is BaselineKind.CN:
            row = B[u] @ B
            return np.asarray(row[:, candidates].todense()).ravel()
        if kind is BaselineKind.AA:
            row = (B[u] @ self._aa) @ B
            return np.asarray(row[:, candidates].todense()).ravel()
        if kind is BaselineKind.PA:
            return self._deg[u] * self._deg[candidates]
        if kind is BaselineKind.RWR:
            return rwr_vector(self.g, u, self.alpha)[candidates]
        return katz_row(self.g, self.beta, u, rho=self._rho)[candidates]

    def score_matrix(self):
        """Dense ``n x n`` scores; small graphs only."""
        B = self._pattern
        kind = self.kind
        if kind is BaselineKind.CN:
            return (B @ B).toarray()
        if kind is BaselineKind.AA:
            return (B @ self._aa @ B).toarray()
        if kind is BaselineKind.PA:
            return np.outer(self._deg, self._deg)
        if kind is BaselineKind.RWR:
            return np.vstack([rwr_vector(self.g, u, self.alpha) for u in range(self.g.n)])
        return exact_katz(self.g, self.beta)


def baseline_scores(g, kind, u, candidates, alpha=0.15, beta=None):
    """One-shot baseline scores; candidates must exclude ``u`` and its neighbors."""
    candidates = _check_candidates(g, u, candidates)
    return BaselineScorer(g, kind, alpha, beta).scores(u, candidates)
