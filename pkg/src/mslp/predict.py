"""Weighted multi-scale scoring and top-k recommendation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .proximity import core_function, score_row

TWO_HOP = "two_hop"
ALL_NON_NEIGHBORS = "all_non_neighbors"
POLICIES = (TWO_HOP, ALL_NON_NEIGHBORS)


def uniform_weights(depth):
    """Equal weights ``1/depth`` on all ``depth + 1`` levels (``[1.0]`` at depth 0).

    Only the ranking matters downstream, and that is invariant to scaling.
    """
    if depth == 0:
        return np.ones(1)
    return np.full(depth + 1, 1.0 / depth)


def leaf_weights(depth):
    w = np.zeros(depth + 1)
    w[-1] = 1.0
    return w


def check_weights(weights, depth):
    w = np.asarray(weights, dtype=float).ravel()
    if w.size != depth + 1:
        raise ValueError(f"expected {depth + 1} level weights, got {w.size}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("level weights must be finite and nonnegative")
    if not np.any(w > 0):
        raise ValueError("at least one level weight must be positive")
    return w


class MultiScaleScorer:
    """Sum of per-level low-rank proximities, ``sum_p w_p U_p f(S_p) U_p^T``.

    ``f(S_p)`` is evaluated once per level with a nonzero weight.
    """

    def __init__(self, model, cfg, weights=None):
        self.model = model
        self.cfg = cfg
        self.weights = check_weights(
            uniform_weights(model.depth) if weights is None else weights, model.depth)
        self.cores = {p: core_function(model.levels[p].S, cfg)
                      for p in range(model.depth + 1) if self.weights[p] > 0}

    def level_scores(self, u, candidates):
        return {p: score_row(self.model.levels[p], fS, u, candidates)
                for p, fS in self.cores.items()}

    def scores(self, u, candidates):
        candidates = np.asarray(candidates, dtype=np.int64)
        total = np.zeros(candidates.size)
        for p, s in self.level_scores(u, candidates).items():
            total += self.weights[p] * s
        return total

    def score_matrix(self):
        """Dense ``n x n`` combined scores; small graphs only."""
        n = self.model.n
        total = np.zeros((n, n))
        for p, fS in self.cores.items():
            U = self.model.levels[p].basis()
            total += self.weights[p] * np.asarray(U @ (U @ fS).T)
        return total


def multiscale_score(model, cfg, weights, u, candidates):
    return MultiScaleScorer(model, cfg, weights).scores(u, candidates)


@dataclass
class Prediction:
    user: int
    candidates: np.ndarray
    scores: np.ndarray
    per_level: dict = field(default_factory=dict)


def candidate_set(g, u, policy=TWO_HOP):
    if policy == TWO_HOP:
        return g.two_hop_candidates(u)
    if policy == ALL_NON_NEIGHBORS:
        return g.non_neighbors(u)
    raise ValueError(f"unknown candidate policy {policy!r}; choose from {POLICIES}")


def rank_order(candidates, scores):
    """Indices ranking by descending score, ascending node id on ties."""
    return np.lexsort((candidates, -np.asarray(scores)))


def recommend(scorer, g, u, k, candidate_policy=TWO_HOP):
    """Top-k candidates for ``u`` under any scorer with a ``scores(u, cands)`` method."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    cands = candidate_set(g, u, candidate_policy)
    scores = scorer.scores(u, cands)
    top = rank_order(cands, scores)[:k]
    per_level = {}
    if isinstance(scorer, MultiScaleScorer):
        per_level = scorer.level_scores(u, cands[top])
    return Prediction(u, cands[top], np.asarray(scores)[top], per_level)


def top_k(model, cfg, weights, g, u, k, candidate_policy=TWO_HOP):
    return recommend(MultiScaleScorer(model, cfg, weights), g, u, k, candidate_policy)
