"""Symmetric numerical kernels.

Orthonormalization, top-r symmetric eigendecomposition (dense or Lanczos with
full reorthogonalization and thick restarts), principal angles, and a Fiedler
vector helper used by the partitioner.

Eigenvalues are always ordered by descending magnitude. Adjacency matrices are
indefinite, and the damped proximity functions downstream are most sensitive to
the large-|lambda| directions, so algebraic ordering would be the wrong default.
"""
from __future__ import annotations

from typing import Callable, NamedTuple, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

DENSE_THRESHOLD = 512
EIG_TOL = 1e-8

Operator = Union[np.ndarray, sp.spmatrix, sp.sparray, LinearOperator, Callable]


class EigenConvergenceError(RuntimeError):
    """Raised when an eigensolver misses its residual target."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class EigResult(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray


def orthonormalize(Y, rtol=None):
    """Orthonormal basis for range(Y).

    Numerically dependent columns are dropped, so the result may have fewer
    columns than ``Y``. An all-zero ``Y`` yields an ``(m, 0)`` array.
    Columns that survive keep their original relative order, which makes the
    operation idempotent up to column sign on an already orthonormal input.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.size == 0:
        raise ValueError("orthonormalize needs a non-empty matrix")
    m = Y.shape[0]
    if not np.any(Y):
        return np.zeros((m, 0))
    Qp, R, piv = sla.qr(Y, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    if rtol is None:
        rtol = max(Y.shape) * np.finfo(float).eps
    rank = int(np.count_nonzero(d > rtol * d[0]))
    keep = np.sort(piv[:rank])
    # Y[:, keep] ~= Qp[:, :rank] R[:rank, pos]; re-triangularize the small factor
    # to get the unpivoted QR without a second pass over Y
    pos = np.argsort(piv)[keep]
    Q2, R = np.linalg.qr(R[:rank, pos])
    Q = Qp[:, :rank] @ Q2
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def principal_angle_cosines(U1, U2):
    """Cosines of the principal angles between range(U1) and range(U2), descending."""
    U1 = np.asarray(U1, dtype=float)
    U2 = np.asarray(U2, dtype=float)
    if U1.shape[0] != U2.shape[0]:
        raise ValueError(f"row dimension mismatch: {U1.shape[0]} vs {U2.shape[0]}")
    if U1.shape[1] == 0 or U2.shape[1] == 0:
        return np.zeros(0)
    s = np.linalg.svd(U1.T @ U2, compute_uv=False)
    return np.sort(np.clip(s, 0.0, 1.0))[::-1]


def _as_matvec(op, m):
    """Normalize the accepted operator flavours to (matmat, size)."""
    if isinstance(op, np.ndarray) or sp.issparse(op):
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise ValueError(f"operator must be square, got shape {op.shape}")
        return (lambda X: op @ X), op.shape[0]
    if isinstance(op, LinearOperator):
        return op.matmat, op.shape[0]
    if callable(op):
        if m is None:
            raise ValueError("size m is required for a callable operator")

        def matmat(X):
            if X.ndim == 1:
                return np.asarray(op(X), dtype=float)
            return np.column_stack([op(X[:, j]) for j in range(X.shape[1])])

        return matmat, int(m)
    raise TypeError(f"unsupported operator type {type(op).__name__}")


def magnitude_order(values, scale=None):
    """Indices sorting ``values`` by descending |value|; positive first on ties."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return np.zeros(0, dtype=int)
    if scale is None:
        scale = max(1.0, float(np.max(np.abs(values))))
    bucket = np.round(np.abs(values) / (1e-10 * scale))
    return np.lexsort((-values, -bucket))


def fix_signs(V):
    """Flip columns so the largest-magnitude entry of each is positive."""
    if V.shape[1] == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _residuals(matmat, V, lam):
    if V.shape[1] == 0:
        return np.zeros(0)
    R = matmat(V) - V * lam
    return np.linalg.norm(R, axis=0)


def _dense_top_r(M, r):
    M = 0.5 * (M + M.T)
    w, V = np.linalg.eigh(M)
    order = magnitude_order(w)[:r]
    return w[order], V[:, order]


def _lanczos_top_r(matmat, m, r, tol, max_restarts, rng):
    kmax = min(m, max(4 * r, r + 20))
    V = np.zeros((m, kmax + 1))
    T = np.zeros((kmax, kmax))
    v = rng.standard_normal(m)
    V[:, 0] = v / np.linalg.norm(v)
    start = 0
    last = None
    for _ in range(max_restarts):
        beta = 0.0
        for j in range(start, kmax):
            w = matmat(V[:, j])
            h = V[:, : j + 1].T @ w
            w = w - V[:, : j + 1] @ h
            h2 = V[:, : j + 1].T @ w
            w = w - V[:, : j + 1] @ h2
            h = h + h2
            T[: j + 1, j] = h
            T[j, : j + 1] = h
            beta = np.linalg.norm(w)
            if j + 1 >= m:
                beta = 0.0
                break
            scale = max(1.0, abs(h[j]))
            if beta <= 1e-12 * scale:
                # invariant subspace: continue with a fresh direction
                w = rng.standard_normal(m)
                for _ in range(2):
                    w = w - V[:, : j + 1] @ (V[:, : j + 1].T @ w)
                V[:, j + 1] = w / np.linalg.norm(w)
                beta = 0.0
            else:
                V[:, j + 1] = w / beta
        k = min(kmax, m)
        theta, Y = np.linalg.eigh(T[:k, :k])
        order = magnitude_order(theta)
        top = order[:r]
        est = np.abs(beta * Y[k - 1, top])
        bound = tol * np.maximum(1.0, np.abs(theta[top]))
        last = est
        if np.all(est <= bound):
            X = V[:, :k] @ Y[:, top]
            res = _residuals(matmat, X, theta[top])
            last = res
            if np.all(res <= bound):
                return theta[top], X
        if k >= m:
            break
        keep = order[: min(kmax - 1, r + (kmax - r) // 2)]
        p = keep.size
        V[:, :p] = V[:, :k] @ Y[:, keep]
        V[:, p] = V[:, k]
        T[:] = 0.0
        T[np.arange(p), np.arange(p)] = theta[keep]
        start = p
    raise EigenConvergenceError(
        f"Lanczos did not reach tolerance {tol:g} for r={r} on size {m}", residuals=last
    )


def symmetric_eig_top_r(op: Operator, r: int, *, m=None, tol=EIG_TOL, method="auto",
                        seed=0, max_iter=None) -> EigResult:
    """Top-r eigenpairs (by magnitude) of a symmetric operator.

    ``op`` may be a dense array, a scipy sparse matrix, a ``LinearOperator`` or a
    callable ``x -> A x`` (then ``m`` is required). Operators up to
    ``DENSE_THRESHOLD`` rows are materialized and solved directly; larger ones
    go through restarted Lanczos. ``max_iter`` caps the number of restart
    cycles and defaults to ``50 * r``.

    Every returned pair satisfies ``||A v - lam v|| <= tol * max(1, |lam|)``,
    otherwise :class:`EigenConvergenceError` is raised.
    """
    matmat, m = _as_matvec(op, m)
    if not 1 <= r <= m:
        raise ValueError(f"rank r={r} must satisfy 1 <= r <= {m}")
    if method == "auto":
        method = "dense" if m <= DENSE_THRESHOLD else "lanczos"
    if method == "dense":
        if isinstance(op, np.ndarray):
            M = np.asarray(op, dtype=float)
        elif sp.issparse(op):
            M = op.toarray().astype(float)
        else:
            M = matmat(np.eye(m))
        lam, V = _dense_top_r(M, r)
    elif method == "lanczos":
        rng = np.random.default_rng(seed)
        lam, V = _lanczos_top_r(matmat, m, r, tol, max_iter or 50 * r, rng)
    else:
        raise ValueError(f"unknown method {method!r}")
    V = fix_signs(V)
    res = _residuals(matmat, V, lam)
    if np.any(res > tol * np.maximum(1.0, np.abs(lam))):
        raise EigenConvergenceError("eigenpair residual above tolerance", residuals=res)
    return EigResult(lam, V, res)


def fiedler_vector(L, seed=0):
    """Eigenvector of the second-smallest eigenvalue of a graph Laplacian."""
    m = L.shape[0]
    if m < 2:
        return np.zeros(m)
    if m <= DENSE_THRESHOLD:
        Ld = L.toarray() if sp.issparse(L) else np.asarray(L, dtype=float)
        _, V = np.linalg.eigh(0.5 * (Ld + Ld.T))
        return fix_signs(V[:, 1:2])[:, 0]
    diag = L.diagonal()
    sigma = 2.0 * float(diag.max()) + 1.0
    ones = np.ones(m) / np.sqrt(m)

    def shifted(x):
        x = x - ones * (ones @ x)
        y = sigma * x - L @ x
        return y - ones * (ones @ y)

    res = symmetric_eig_top_r(shifted, 1, m=m, tol=1e-6, method="lanczos", seed=seed)
    return res.vectors[:, 0]
