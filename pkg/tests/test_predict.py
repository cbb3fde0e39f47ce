import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import random_graph
from mslp.hierarchy import HierarchyTree, build_hierarchy
from mslp.methods import METHODS, Method, RandomScorer
from mslp.msapprox import build_multiscale
from mslp.predict import (ALL_NON_NEIGHBORS, TWO_HOP, MultiScaleScorer, candidate_set,
                          check_weights, leaf_weights, multiscale_score, rank_order, recommend,
                          top_k, uniform_weights)
from mslp.proximity import ProximityConfig


@pytest.fixture(scope="module")
def setup():
    g = random_graph(80, 0.08, 0)
    tree = build_hierarchy(g, 2, 2, seed=0)
    model = build_multiscale(g, tree, 4)
    cfg = ProximityConfig("katz").resolved(g)
    return g, tree, model, cfg


def test_uniform_weights():
    assert uniform_weights(0).tolist() == [1.0]
    assert uniform_weights(3).tolist() == [1 / 3] * 4


def test_weight_validation():
    with pytest.raises(ValueError):
        check_weights([1, 1], 2)
    with pytest.raises(ValueError):
        check_weights([1, -1, 1], 2)
    with pytest.raises(ValueError):
        check_weights([0, 0, 0], 2)


def test_scores_are_weighted_level_sum(setup):
    g, _, model, cfg = setup
    w = np.array([0.2, 0.5, 1.5])
    sc = MultiScaleScorer(model, cfg, w)
    cands = g.non_neighbors(3)
    per = sc.level_scores(3, cands)
    np.testing.assert_allclose(sc.scores(3, cands), sum(w[p] * per[p] for p in per))
    np.testing.assert_allclose(multiscale_score(model, cfg, w, 3, cands), sc.scores(3, cands))


def test_depth_zero_equals_eig_method():
    g = random_graph(60, 0.1, 1)
    tree = HierarchyTree.from_leaf(np.zeros(g.n, dtype=int), 2, 0)
    cfg = ProximityConfig("katz").resolved(g)
    sc = MultiScaleScorer(build_multiscale(g, tree, 5), cfg, [1.0])
    eig = Method("eig", rank=5)(g)
    c = g.non_neighbors(0)
    np.testing.assert_allclose(sc.scores(0, c), eig.scores(0, c), atol=1e-12)


def test_leaf_only_weights_equal_clra(setup):
    g, tree, model, cfg = setup
    sc = MultiScaleScorer(model, cfg, leaf_weights(2))
    clra = Method("clra", depth=2, rank=4, tree=tree)(g)
    c = g.non_neighbors(5)
    np.testing.assert_allclose(sc.scores(5, c), clra.scores(5, c), atol=1e-12)


@given(st.floats(1e-3, 1e3))
def test_ranking_invariant_to_weight_scaling(gamma):
    g = random_graph(60, 0.1, 2)
    model = build_multiscale(g, build_hierarchy(g, 2, 2), 3)
    cfg = ProximityConfig("katz").resolved(g)
    w = uniform_weights(2)
    for u in (0, 9, 33):
        a = top_k(model, cfg, w, g, u, 10, ALL_NON_NEIGHBORS)
        b = top_k(model, cfg, gamma * w, g, u, 10, ALL_NON_NEIGHBORS)
        assert a.candidates.tolist() == b.candidates.tolist()


def test_ties_broken_by_node_id():
    assert rank_order(np.array([5, 2, 9, 1]), np.array([1.0, 1.0, 2.0, 0.5])).tolist() == [2, 1, 0, 3]


def test_k_beyond_candidates_returns_all(path4):
    cfg = ProximityConfig("cn")
    model = build_multiscale(path4, HierarchyTree.from_leaf(np.zeros(4, dtype=int), 2, 0), 4)
    p = top_k(model, cfg, [1.0], path4, 0, 10, ALL_NON_NEIGHBORS)
    assert sorted(p.candidates.tolist()) == [2, 3]


def test_k_must_be_positive(setup):
    g, _, model, cfg = setup
    with pytest.raises(ValueError):
        top_k(model, cfg, None, g, 0, 0)


def test_unknown_policy(setup):
    g = setup[0]
    with pytest.raises(ValueError):
        candidate_set(g, 0, "three_hop")


def test_per_level_scores_reported(setup):
    g, _, model, cfg = setup
    p = top_k(model, cfg, None, g, 1, 5, TWO_HOP)
    assert set(p.per_level) == {0, 1, 2}
    recombined = sum(uniform_weights(2)[q] * s for q, s in p.per_level.items())
    np.testing.assert_allclose(recombined, p.scores, atol=1e-12)


@pytest.mark.parametrize("name", METHODS)
def test_never_recommends_self_or_neighbor(name):
    g = random_graph(50, 0.1, 3)
    scorer = Method(name, depth=2, rank=4)(g)
    for policy in (TWO_HOP, ALL_NON_NEIGHBORS):
        for u in range(g.n):
            p = recommend(scorer, g, u, 8, policy)
            assert u not in p.candidates
            assert np.intersect1d(p.candidates, g.neighbors(u)).size == 0
            assert np.all(np.diff(p.scores) <= 0)


def test_repeated_predictions_identical():
    g = random_graph(70, 0.08, 4)
    a = recommend(Method("mslp", depth=2, rank=4)(g), g, 0, 10)
    b = recommend(Method("mslp", depth=2, rank=4)(g), g, 0, 10)
    assert a.candidates.tolist() == b.candidates.tolist()
    assert a.scores.tobytes() == b.scores.tobytes()


def test_weight_monotonicity_spot_check():
    # raising one level's weight can only keep or improve that level's favourite pair
    g = random_graph(60, 0.1, 5)
    model = build_multiscale(g, build_hierarchy(g, 2, 2), 3)
    cfg = ProximityConfig("katz").resolved(g)
    u = 0
    cands = g.non_neighbors(u)
    for p in range(3):
        fav = cands[np.argmax(MultiScaleScorer(model, cfg, np.eye(3)[p]).scores(u, cands))]
        ranks = []
        for boost in (0.0, 0.5, 2.0, 10.0):
            w = uniform_weights(2) + boost * np.eye(3)[p]
            order = cands[rank_order(cands, MultiScaleScorer(model, cfg, w).scores(u, cands))]
            ranks.append(int(np.flatnonzero(order == fav)[0]))
        assert ranks == sorted(ranks, reverse=True)


# --- methods -----------------------------------------------------------------------------------

def test_method_labels_and_validation():
    assert Method("mslp").label == "MSLP-Katz"
    assert Method("clra", measure="cn").label == "CLRA-CN"
    assert Method("rwr").label == "RWR"
    with pytest.raises(ValueError):
        Method("magic")


def test_random_scorer_reproducible():
    r = RandomScorer(3)
    assert np.array_equal(r.scores(4, [1, 2, 3]), RandomScorer(3).scores(4, [1, 2, 3]))
    assert not np.array_equal(r.scores(4, [1, 2, 3]), RandomScorer(4).scores(4, [1, 2, 3]))


def test_cn_measure_full_rank_equals_a_squared():
    g = random_graph(30, 0.2, 6)
    sc = Method("eig", rank=g.n, measure="cn")(g)
    A = g.dense()
    np.testing.assert_allclose(sc.score_matrix(), A @ A, atol=1e-9)


def test_clra_leaf_only_model_builds_only_leaf():
    g = random_graph(40, 0.15, 7)
    sc = Method("clra", depth=2, rank=3)(g)
    assert sc.model.levels[0] is None and sc.model.levels[1] is None
    assert set(sc.cores) == {2}


def test_shuffled_method_uses_shuffled_tree():
    g = random_graph(60, 0.1, 8)
    tree = build_hierarchy(g, 2, 2)
    m = Method("clra", depth=2, tree=tree, shuffle=0.1, seed=1)
    assert int(np.sum(m.hierarchy(g).leaf != tree.leaf)) == 6

