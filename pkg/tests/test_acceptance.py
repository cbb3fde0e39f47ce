"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line verdict that is printed in the "acceptance
criteria" section at the end of the pytest run.
"""
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from helpers import random_graph
from mslp.baselines import BaselineScorer, rwr_vector
from mslp.datasets import karate, karate_tree
from mslp.evaluation import auc, leave_one_out, roc_curve, temporal_eval
from mslp.generators import powerlaw_graph, sbm_graph, sbm_temporal_generator
from mslp.hierarchy import (HierarchyTree, build_hierarchy, level_fractions, random_hierarchy)
from mslp.linalg import principal_angle_cosines, symmetric_eig_top_r
from mslp.methods import Method
from mslp.msapprox import approximation_error, build_multiscale, clra_leaf, lift_subspace
from mslp.predict import MultiScaleScorer
from mslp.proximity import ProximityConfig, exact_katz, spectral_norm

pytestmark = pytest.mark.acceptance

KS = (3, 5, 10, 15, 20)
KARATE_RANK = 3
SBM_SEEDS = range(10)
SBM = dict(blocks=8, sizes=[625] * 8, p_in=0.02, p_out=0.002, flip_rate=0.05)
SBM_USERS = 300


# --- 1. Karate leave-one-out ---------------------------------------------------------------

def test_criterion_01_karate_leave_one_out(criterion):
    criterion(1, "Karate leave-one-out: running")
    g = karate()
    tree = karate_tree(g)
    t0 = time.perf_counter()
    mslp = leave_one_out(g, Method("mslp", depth=2, rank=KARATE_RANK, tree=tree), KS)
    clra = leave_one_out(g, Method("clra", depth=2, rank=KARATE_RANK, tree=tree), KS)
    rand = [leave_one_out(g, Method("randcluster", depth=2, rank=KARATE_RANK, seed=s), KS)
            for s in range(10)]
    elapsed = time.perf_counter() - t0
    vs_clra = all(mslp.hits[k] >= clra.hits[k] for k in KS)
    vs_rand = all(mslp.hits[k] >= r.hits[k] for r in rand for k in KS)
    best_rand = {k: max(r.hits[k] for r in rand) for k in KS}
    criterion(1, f"Karate LOO hits@{list(KS)}: MSLP {[mslp.hits[k] for k in KS]}, "
                 f"CLRA {[clra.hits[k] for k in KS]}, best RandCluster "
                 f"{[best_rand[k] for k in KS]}; {elapsed:.1f}s (< 10s)")
    assert mslp.trials == 78
    assert vs_clra, "MSLP must match or beat CLRA at every k"
    assert vs_rand, "MSLP must match or beat every RandCluster seed at every k"
    assert elapsed < 10


# --- 2. Full-rank exactness ----------------------------------------------------------------

def test_criterion_02_full_rank_exactness(criterion):
    criterion(2, "full-rank exactness: running")
    graphs = [karate()] + [random_graph(n, p, s) for s, (n, p) in
                           enumerate([(50, 0.1), (40, 0.2), (25, 0.3), (50, 0.05)])]
    worst_katz = worst_cn = 0.0
    t0 = time.perf_counter()
    for g in graphs:
        tree = HierarchyTree.from_leaf(np.zeros(g.n, dtype=int), 2, 0)
        model = build_multiscale(g, tree, g.n)
        A = g.dense()
        beta = 0.5 / spectral_norm(g)
        katz = MultiScaleScorer(model, ProximityConfig("katz", beta), [1.0]).score_matrix()
        oracle = np.linalg.inv(np.eye(g.n) - beta * A) - np.eye(g.n)
        worst_katz = max(worst_katz, np.abs(katz - oracle).max())
        cn = MultiScaleScorer(model, ProximityConfig("cn"), [1.0]).score_matrix()
        worst_cn = max(worst_cn, np.abs(cn - A @ A).max(), np.abs(cn - np.round(cn)).max())
    elapsed = time.perf_counter() - t0
    criterion(2, f"full rank r=n, n<=50: Katz max err {worst_katz:.1e} (<=1e-8), "
                 f"CN max err {worst_cn:.1e} (<=1e-9); {elapsed / len(graphs):.2f}s per graph (< 1s)")
    assert worst_katz <= 1e-8
    assert worst_cn <= 1e-9
    assert elapsed / len(graphs) < 1.0


# --- 3. Lifting fidelity --------------------------------------------------------------------

def test_criterion_03_lifted_subspace_fidelity(criterion):
    criterion(3, "lifted subspace fidelity: running")
    low, low_full = 1.0, 1.0
    for seed in range(10):
        g, _ = sbm_graph([200, 200], 0.1, 0.01, seed=seed)
        tree = build_hierarchy(g, 1, 2, seed=seed)
        order = tree.order()
        A = g.adjacency[order][:, order]
        direct = symmetric_eig_top_r(A, 20).vectors
        lifted = build_multiscale(g, tree, 20).levels[0].basis()[order].toarray()
        low = min(low, principal_angle_cosines(lifted, direct)[:10].min())
        off = tree.offsets(1)
        kids = [symmetric_eig_top_r(A[a:b][:, a:b], b - a).vectors for a, b in zip(off, off[1:])]
        full = lift_subspace(A, kids, 20)
        low_full = min(low_full, principal_angle_cosines(full, direct)[:10].min())
    criterion(3, f"SBM n=400, 10 seeds, r=20: min top-10 cosine {low:.4f} (>=0.95); "
                 f"full-rank children {1 - low_full:.1e} below 1 (<=1e-8)")
    assert low >= 0.95
    assert low_full >= 1 - 1e-8


# --- 4. Optimal core ------------------------------------------------------------------------

def test_criterion_04_optimal_core(criterion):
    criterion(4, "optimal core: running")
    worst_gain = np.inf
    for seed in range(5):
        g = random_graph(30 + 5 * seed, 0.15, 100 + seed)
        model = build_multiscale(g, build_hierarchy(g, 2, 2, seed=seed), 5)
        rng = np.random.default_rng(seed)
        for la in model.levels:
            base = approximation_error(g, la)
            for i in range(20):
                E = rng.standard_normal(la.S.shape)
                E = 10.0 ** rng.uniform(-4, 0) * (E + E.T) / 2
                worst_gain = min(worst_gain, approximation_error(g, la, la.S + E) - base)
    criterion(4, f"5 graphs n<=50, r=5, 20 perturbations per level: min error change "
                 f"{worst_gain:.2e} (>=0)")
    assert worst_gain >= 0


# --- 5. Speed of lifting ----------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_05_lift_speed(criterion):
    criterion(5, "lift speed: running")
    t_start = time.perf_counter()
    g = powerlaw_graph(50_000, avg_degree=10, seed=0)
    tree = build_hierarchy(g, 1, 2, seed=0)
    kids = clra_leaf(g, tree, 50).blocks
    order = tree.order()
    A = g.adjacency[order][:, order]
    t_lift, t_direct = [], []
    for _ in range(2):
        t0 = time.perf_counter()
        U = lift_subspace(A, kids, 50)
        t_lift.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        direct = symmetric_eig_top_r(A, 50, method="lanczos")
        t_direct.append(time.perf_counter() - t0)
    speedup = min(t_direct) / min(t_lift)
    total = time.perf_counter() - t_start
    cos = principal_angle_cosines(U, direct.vectors)[:10].min()
    criterion(5, f"power-law n=5e4, r=50: lift {min(t_lift):.2f}s vs direct {min(t_direct):.2f}s, "
                 f"speedup {speedup:.1f}x (>=2x); top-10 cosine {cos:.4f}; total {total:.0f}s (<300s)")
    assert U.shape == (g.n, 50)
    assert speedup >= 2.0
    assert total < 300


# --- 6-8. Planted-block temporal benchmark ------------------------------------------------------

@pytest.fixture(scope="module")
def sbm_runs():
    runs = []
    for seed in SBM_SEEDS:
        sp = sbm_temporal_generator(SBM["blocks"], SBM["sizes"], SBM["p_in"], SBM["p_out"],
                                    SBM["flip_rate"], seed=seed)
        g = sp.train
        tree = build_hierarchy(g, 3, 2, seed=seed)
        methods = {
            "mslp": Method("mslp", depth=3, rank=20, tree=tree, seed=seed),
            "clra": Method("clra", depth=3, rank=20, tree=tree, seed=seed),
            "katz": Method("katz"),
            "mslp_shuffled": Method("mslp", depth=3, rank=20, tree=tree, shuffle=0.1, seed=seed),
            "clra_shuffled": Method("clra", depth=3, rank=20, tree=tree, shuffle=0.1, seed=seed),
        }
        aucs = {k: temporal_eval(sp, m, users=SBM_USERS, seed=seed).auc for k, m in methods.items()}
        runs.append({"seed": seed, "graph": g, "tree": tree, "pair": sp, "auc": aucs})
    return runs


@pytest.mark.slow
def test_criterion_06_sbm_auc_ordering(criterion, sbm_runs):
    criterion(6, "SBM AUC ordering: running")
    wins_clra = sum(r["auc"]["mslp"] > r["auc"]["clra"] for r in sbm_runs)
    wins_katz = sum(r["auc"]["mslp"] > r["auc"]["katz"] for r in sbm_runs)
    rnd = temporal_eval(sbm_runs[0]["pair"], Method("random", seed=0), users=SBM_USERS,
                        iterations=30, seed=0)
    mean = {k: np.mean([r["auc"][k] for r in sbm_runs]) for k in ("mslp", "clra", "katz")}
    criterion(6, f"SBM n=5000: MSLP>CLRA in {wins_clra}/10, MSLP>Katz in {wins_katz}/10 (>=8); "
                 f"mean AUC MSLP {mean['mslp']:.3f}, CLRA {mean['clra']:.3f}, "
                 f"Katz {mean['katz']:.3f}; random {rnd.auc:.3f} (0.5+-0.02)")
    assert wins_clra >= 8
    assert wins_katz >= 8
    assert abs(rnd.auc - 0.5) <= 0.02


@pytest.mark.slow
def test_criterion_07_shuffle_robustness(criterion, sbm_runs):
    criterion(7, "shuffle robustness: running")
    drop_mslp = np.mean([r["auc"]["mslp"] - r["auc"]["mslp_shuffled"] for r in sbm_runs])
    drop_clra = np.mean([r["auc"]["clra"] - r["auc"]["clra_shuffled"] for r in sbm_runs])
    criterion(7, f"10% leaf shuffle, mean AUC drop over 10 seeds: MSLP {drop_mslp:.4f} "
                 f"< CLRA {drop_clra:.4f}")
    assert drop_mslp < drop_clra


@pytest.mark.slow
def test_criterion_08_clustering_quality(criterion, sbm_runs):
    criterion(8, "clustering quality: running")
    ok = True
    cases = [(r["graph"], r["tree"], r["seed"]) for r in sbm_runs]
    g = karate()
    cases += [(g, build_hierarchy(g, 2, 2, seed=0), 0), (g, karate_tree(g), 0)]
    gaps = []
    for g, tree, seed in cases:
        built = level_fractions(g, tree)
        rand = level_fractions(g, random_hierarchy(g, tree.depth, tree.branching, seed=seed))
        ok &= all(b > r for b, r in zip(built[1:], rand[1:]))
        ok &= all(a >= b for a, b in zip(built, built[1:]))
        gaps.append(min(b - r for b, r in zip(built[1:], rand[1:])))
    sbm_built = np.mean([level_fractions(r["graph"], r["tree"]) for r in sbm_runs], axis=0)
    criterion(8, f"built > random at every level on 10 SBM graphs and Karate, monotone with depth; "
                 f"SBM built within % {np.round(100 * sbm_built, 1).tolist()}; "
                 f"smallest gap {100 * min(gaps):.1f} points")
    assert ok


# --- 9. Oracle equivalences ----------------------------------------------------------------------

def test_criterion_09_oracle_equivalences(criterion):
    criterion(9, "oracle equivalences: running")
    rng = np.random.default_rng(0)
    worst_auc = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 201))
        s = rng.integers(0, 8, n).astype(float)
        y = rng.random(n) < rng.uniform(0.1, 0.9)
        if y.all() or not y.any():
            continue
        pos, neg = s[y], s[~y]
        mw = ((pos[:, None] > neg).sum() + 0.5 * (pos[:, None] == neg).sum()) / (pos.size * neg.size)
        worst_auc = max(worst_auc, abs(auc(*roc_curve(s, y)) - mw))
    worst_cn = worst_rwr = 0.0
    tail_ok = True
    for seed in range(5):
        g = random_graph(60, 0.1, seed)
        A = g.dense()
        worst_cn = max(worst_cn, np.abs(BaselineScorer(g, "cn").score_matrix() - A @ A).max())
        col = A.sum(axis=0)
        P = np.divide(A, col, out=np.zeros_like(A), where=col > 0)
        R = 0.15 * np.linalg.inv(np.eye(g.n) - 0.85 * P)
        for u in range(g.n):
            if g.degree(u) and np.all(col > 0):
                worst_rwr = max(worst_rwr, np.abs(rwr_vector(g, u, 0.15) - R[:, u]).max())
        rho = spectral_norm(g)
        beta = 0.6 / rho
        K = np.linalg.inv(np.eye(g.n) - beta * A) - np.eye(g.n)
        for L in (2, 5, 10):
            tail_ok &= np.abs(exact_katz(g, beta, L=L) - K).max() <= (beta * rho) ** (L + 1) / (1 - beta * rho)
    criterion(9, f"AUC vs Mann-Whitney {worst_auc:.1e} (<=1e-6); CN vs A^2 {worst_cn:.1e}; "
                 f"RWR vs dense {worst_rwr:.1e} (<=1e-8); Katz tail bound {'held' if tail_ok else 'broken'}")
    assert worst_auc <= 1e-6
    assert worst_cn == 0.0
    assert worst_rwr <= 1e-8
    assert tail_ok


# --- 10. Determinism ----------------------------------------------------------------------------

def _cli(args, cwd, hashseed):
    env = dict(os.environ, PYTHONHASHSEED=str(hashseed))
    proc = subprocess.run([sys.executable, "-m", "mslp.cli", *map(str, args)], cwd=cwd, env=env,
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


def test_criterion_10_determinism(criterion, tmp_path):
    criterion(10, "determinism: running")
    from importlib import resources
    karate_path = resources.files("mslp") / "data" / "karate.txt"
    files = []
    stdout = []
    for run, hashseed in (("a", 1), ("b", 2)):
        d = tmp_path / run
        d.mkdir()
        _cli(["cluster", "--graph", karate_path, "--levels", 2, "--out", "tree", "--seed", 4], d, hashseed)
        _cli(["approx", "--graph", karate_path, "--tree", "tree/level1.tsv", "tree/level2.tsv",
              "--rank", 3, "--out", "model.bin", "--seed", 4], d, hashseed)
        stdout.append(_cli(["predict", "--graph", karate_path, "--model", "model.bin",
                            "--user", 1, "--k", 10], d, hashseed))
        _cli(["eval", "--sbm-blocks", 4, "--sbm-size", 150, "--p-in", 0.08, "--p-out", 0.008,
              "--levels", 2, "--rank", 8, "--sample-users", 80, "--iterations", 2,
              "--methods", "mslp,clra,eig,randcluster,cn,aa,pa,rwr,katz,random",
              "--out", "eval", "--seed", 4], d, hashseed)
        files.append({p.relative_to(d): p.read_bytes() for p in sorted(d.rglob("*"))
                      if p.is_file() and p.name != "timings.json"})
    same_names = files[0].keys() == files[1].keys()
    differing = [str(k) for k in files[0] if files[0][k] != files[1].get(k)]
    criterion(10, f"two fresh-process reruns: {len(files[0])} artifacts compared "
                  f"(tree, model, manifests, reports, ROC CSVs), {len(differing)} differ; "
                  f"predict output identical: {stdout[0] == stdout[1]}")
    assert same_names
    assert not differing, differing
    assert stdout[0] == stdout[1]
