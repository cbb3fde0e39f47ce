"""Named link-prediction methods: ``fit(graph) -> scorer`` factories.

A scorer exposes ``scores(u, candidates) -> ndarray``. Low-rank methods share
one code path and differ only in the hierarchy they use and the level weights.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import BaselineKind, BaselineScorer
from .hierarchy import HierarchyTree, build_hierarchy, random_hierarchy, shuffle_leaves
from .msapprox import MultiScaleModel, build_multiscale, clra_leaf
from .predict import MultiScaleScorer, check_weights, leaf_weights, uniform_weights
from .proximity import ProximityConfig

LOW_RANK = ("mslp", "clra", "eig", "randcluster")
BASELINES = tuple(k.value for k in BaselineKind)
METHODS = LOW_RANK + BASELINES + ("random",)


class RandomScorer:
    """Uniform random scores, reproducible per (seed, user)."""

    def __init__(self, seed=0):
        self.seed = seed

    def scores(self, u, candidates):
        rng = np.random.default_rng([self.seed, int(u)])
        return rng.random(len(candidates))


@dataclass(frozen=True)
class Method:
    """Configuration of one predictor; call it on a graph to get a scorer."""

    name: str
    depth: int = 3
    branching: int = 2
    rank: int = 20
    measure: str = "katz"
    beta: float | None = None
    alpha: float = 0.15
    seed: int = 0
    weights: tuple | None = None
    tree: HierarchyTree | None = field(default=None, compare=False)
    shuffle: float = 0.0
    power_pass: bool = False
    threads: int | None = None

    def __post_init__(self):
        if self.name not in METHODS:
            raise ValueError(f"unknown method {self.name!r}; choose from {', '.join(METHODS)}")

    @property
    def label(self):
        if self.name in LOW_RANK:
            return f"{self.name.upper()}-{'Katz' if self.measure == 'katz' else 'CN'}"
        return self.name.upper()

    def with_(self, **kw):
        return replace(self, **kw)

    def hierarchy(self, g):
        if self.name == "eig":
            return HierarchyTree.from_leaf(np.zeros(g.n, dtype=np.int64), self.branching, 0)
        if self.name == "randcluster":
            tree = random_hierarchy(g, self.depth, self.branching, self.seed)
        elif self.tree is not None:
            tree = self.tree
        else:
            tree = build_hierarchy(g, self.depth, self.branching, self.seed)
        if self.shuffle > 0:
            tree = shuffle_leaves(tree, self.shuffle, self.seed)
        return tree

    def model(self, g):
        tree = self.hierarchy(g)
        if self.name == "mslp":
            return build_multiscale(g, tree, self.rank, self.power_pass, self.threads)
        leaf = clra_leaf(g, tree, self.rank, self.threads)
        levels = [None] * tree.depth + [leaf]
        return MultiScaleModel(tree, self.rank, levels, labels=g.labels)

    def level_weights(self, depth):
        if self.name == "mslp":
            w = uniform_weights(depth) if self.weights is None else self.weights
            return check_weights(w, depth)
        return leaf_weights(depth)

    def __call__(self, g):
        if self.name == "random":
            return RandomScorer(self.seed)
        if self.name in BASELINES:
            return BaselineScorer(g, self.name, alpha=self.alpha, beta=self.beta)
        cfg = ProximityConfig(self.measure, self.beta).resolved(g)
        model = self.model(g)
        model.beta = cfg.beta if cfg.beta is not None else float("nan")
        return MultiScaleScorer(model, cfg, self.level_weights(model.depth))
