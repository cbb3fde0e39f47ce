"""Proximity functions on low-rank cores and exact small-scale Katz oracles."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import symmetric_eig_top_r

KATZ = "katz"
CN = "cn"
MAX_CONDITION = 1e12


class ProximityError(ValueError):
    pass


@dataclass(frozen=True)
class ProximityConfig:
    """Which proximity to evaluate on each core.

    ``beta=None`` means "pick the default damping for the graph"; see
    :func:`default_beta`.
    """

    measure: str = KATZ
    beta: float | None = None
    tol: float = 1e-12

    def __post_init__(self):
        if self.measure not in (KATZ, CN):
            raise ProximityError(f"unknown measure {self.measure!r}")
        if self.beta is not None and not self.beta > 0:
            raise ProximityError(f"beta must be positive, got {self.beta}")

    def resolved(self, g):
        if self.measure == KATZ and self.beta is None:
            return ProximityConfig(self.measure, default_beta(g), self.tol)
        return self


def power_norm_estimate(g, iters=20):
    """Lower estimate of ``||A||_2`` from power iteration started at all-ones."""
    x = np.ones(g.n)
    est = 0.0
    for _ in range(iters):
        y = g.spmv(x)
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0
        est = ny / np.linalg.norm(x)
        x = y / ny
    return est


def default_beta(g):
    """Half the reciprocal of a 20-step power-method estimate of ``||A||_2``."""
    lam = power_norm_estimate(g, 20)
    if lam == 0:
        return 0.5
    return 0.5 / lam


def spectral_norm(g):
    if g.num_edges == 0:
        return 0.0
    if g.n <= 2000:
        return float(np.max(np.abs(np.linalg.eigvalsh(g.dense()))))
    return float(abs(symmetric_eig_top_r(g.adjacency, 1).values[0]))


def katz_core(S, beta):
    """``(I - beta S)^{-1} - I`` for symmetric ``S`` via its eigendecomposition."""
    S = np.asarray(S, dtype=float)
    if S.size == 0:
        return S.copy()
    lam, V = np.linalg.eigh(0.5 * (S + S.T))
    damp = 1.0 - beta * lam
    if np.any(damp <= 0):
        raise ProximityError(
            f"beta={beta:g} too large: beta*lambda_max = {beta * lam.max():.4g} >= 1; use a smaller beta")
    cond = damp.max() / damp.min()
    if cond > MAX_CONDITION:
        raise ProximityError(f"I - beta*S is ill-conditioned (cond {cond:.3g}); use a smaller beta")
    F = (V * (beta * lam / damp)) @ V.T
    return 0.5 * (F + F.T)


def cn_core(S):
    S = np.asarray(S, dtype=float)
    return S @ S


def core_function(S, cfg):
    if cfg.measure == KATZ:
        if cfg.beta is None:
            raise ProximityError("resolve beta before evaluating Katz cores")
        return katz_core(S, cfg.beta)
    return cn_core(S)


def score_row(la, fS, u, candidates):
    """Scores ``U[u] fS U[v]^T`` for each candidate ``v`` using only touched rows."""
    candidates = np.asarray(candidates, dtype=np.int64)
    if not 0 <= u < la.n:
        raise IndexError(f"node {u} out of range for n={la.n}")
    if candidates.size == 0:
        return np.zeros(0)
    if candidates.min() < 0 or candidates.max() >= la.n:
        raise IndexError("candidate node out of range")
    U = la.basis()
    lo, hi = U.indptr[u], U.indptr[u + 1]
    cols, vals = U.indices[lo:hi], U.data[lo:hi]
    z = vals @ fS[cols, :]
    return np.asarray(U[candidates] @ z).ravel()


def _series_length(rho_beta, tol):
    if rho_beta <= 0:
        return 1
    if rho_beta >= 1:
        raise ProximityError(f"beta * ||A||_2 = {rho_beta:.4g} >= 1, Katz series diverges")
    # smallest L with rho_beta^(L+1) / (1 - rho_beta) <= tol
    L = int(np.ceil(np.log(tol * (1 - rho_beta)) / np.log(rho_beta) - 1))
    return max(L, 1)


def exact_katz(g, beta, L=None, tol=1e-12):
    """Dense truncated Katz series ``sum_{k=1..L} beta^k A^k`` (n <= 2000).

    ``L`` defaults to the shortest length whose geometric tail bound is below ``tol``.
    """
    if g.n > 2000:
        raise ProximityError(f"exact Katz is limited to n <= 2000, got {g.n}")
    if beta == 0:
        return np.zeros((g.n, g.n))
    rho = spectral_norm(g)
    if L is None:
        L = _series_length(beta * rho, tol)
    elif beta * rho >= 1:
        raise ProximityError(f"beta * ||A||_2 = {beta * rho:.4g} >= 1, Katz series diverges")
    A = g.dense()
    term = np.eye(g.n)
    total = np.zeros_like(A)
    for _ in range(L):
        term = beta * (term @ A)
        total += term
    return total


def katz_row(g, beta, u, tol=1e-12, rho=None):
    """Row ``u`` of the truncated Katz series using sparse products only."""
    if rho is None:
        rho = spectral_norm(g)
    L = _series_length(beta * rho, tol)
    x = np.zeros(g.n)
    x[u] = 1.0
    total = np.zeros(g.n)
    for _ in range(L):
        x = beta * g.spmv(x)
        total += x
    return total
