"""Evaluation protocols: leave-one-out hits and sampled temporal ROC/AUC."""
from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .generators import sbm_temporal_generator  # noqa: F401  (re-exported)
from .predict import ALL_NON_NEIGHBORS, TWO_HOP, candidate_set, rank_order


def roc_curve(scores, labels):
    """Exact ROC over every distinct score threshold.

    Tied scores form a single step, which is the same as averaging over all
    tie-breaks. Returns ``(fpr, tpr)`` starting at (0, 0) and ending at (1, 1).
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    pos = int(labels.sum())
    neg = labels.size - pos
    if pos == 0 or neg == 0:
        raise ValueError("ROC needs at least one positive and one negative")
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    last = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(y)[last]
    fp = np.cumsum(~y)[last]
    fpr = np.r_[0.0, fp / neg]
    tpr = np.r_[0.0, tp / pos]
    return fpr, tpr


def auc(fpr, tpr):
    """Trapezoidal area under an ROC curve given as monotone point lists."""
    fpr = np.asarray(fpr, dtype=float)
    tpr = np.asarray(tpr, dtype=float)
    if fpr.size < 2 or fpr.size != tpr.size:
        raise ValueError("need at least two ROC points of matching length")
    if np.any(np.diff(fpr) < 0) or np.any(np.diff(tpr) < 0):
        raise ValueError("ROC points must be monotone non-decreasing")
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def hits_at_k(candidates, scores, positives, k):
    top = candidates[rank_order(candidates, scores)[:k]]
    return int(np.isin(top, positives).sum())


# --- leave-one-out ---------------------------------------------------------------


@dataclass
class LeaveOneOutResult:
    method: str
    k_list: list
    hits: dict
    ranks: list
    hit_edges: dict = field(default_factory=dict)

    @property
    def trials(self):
        return len(self.ranks)


def _all_pair_scores(scorer, g):
    if hasattr(scorer, "score_matrix") and g.n <= 2000:
        K = scorer.score_matrix()
        A = g.adjacency.toarray() != 0
        us, vs = np.triu_indices(g.n, k=1)
        keep = ~A[us, vs]
        us, vs = us[keep], vs[keep]
        return us, vs, K[us, vs]
    us, vs, ss = [], [], []
    for u in range(g.n):
        cands = g.non_neighbors(u)
        cands = cands[cands > u]
        if cands.size == 0:
            continue
        us.append(np.full(cands.size, u))
        vs.append(cands)
        ss.append(np.asarray(scorer.scores(u, cands), dtype=float))
    return np.concatenate(us), np.concatenate(vs), np.concatenate(ss)


def held_out_rank(g, scorer, u, v):
    """Rank of pair (u, v) among all non-adjacent pairs of ``g``.

    Ties go to the lexicographically smaller pair, matching top-k tie rules.
    """
    us, vs, ss = _all_pair_scores(scorer, g)
    a, b = min(u, v), max(u, v)
    idx = np.flatnonzero((us == a) & (vs == b))[0]
    s = ss[idx]
    before = (us < a) | ((us == a) & (vs < b))
    return int(1 + np.sum(ss > s) + np.sum((ss == s) & before))


def leave_one_out(g, method, k_list=(3, 5, 10, 15, 20), name=None):
    """Remove each edge in turn, refit ``method`` and rank the removed pair."""
    k_list = list(k_list)
    src, dst, _ = g.edges()
    ranks = []
    for u, v in zip(src.tolist(), dst.tolist()):
        masked = g.without_edges([(u, v)])
        ranks.append(held_out_rank(masked, method(masked), u, v))
    ranks_arr = np.asarray(ranks)
    edges = list(zip(src.tolist(), dst.tolist()))
    hits = {k: int(np.sum(ranks_arr <= k)) for k in k_list}
    hit_edges = {k: [e for e, r in zip(edges, ranks) if r <= k] for k in k_list}
    return LeaveOneOutResult(name or getattr(method, "label", str(method)), k_list, hits, ranks, hit_edges)


# --- temporal evaluation ---------------------------------------------------------------


@dataclass
class EvalReport:
    """ROC/AUC and precision@k of one method on sampled users.

    ``precision`` maps k to the mean share of correct links in each user's
    top-k. ``timings`` holds wall-clock seconds and is kept out of the
    deterministic JSON written by :func:`write_reports`.
    """

    method: str
    candidate_policy: str
    fpr: list
    tpr: list
    auc: float
    auc_per_iteration: list
    precision: dict
    hits: dict
    sample: dict
    timings: dict = field(default_factory=dict)

    @property
    def auc_std(self):
        return float(np.std(self.auc_per_iteration))

    def to_dict(self, with_timings=False):
        d = asdict(self)
        d["precision"] = {str(k): v for k, v in self.precision.items()}
        d["hits"] = {str(k): v for k, v in self.hits.items()}
        if not with_timings:
            d.pop("timings")
        return d


def eligible_users(sp, policy):
    nbrs = sp.test_neighbors()
    g = sp.train
    out = []
    for u in range(g.n):
        if not nbrs[u].size:
            continue
        if policy == ALL_NON_NEIGHBORS:
            if g.degree(u) < g.n - 1:
                out.append(u)
        elif candidate_set(g, u, policy).size:
            out.append(u)
    return np.asarray(out, dtype=np.int64)


def temporal_eval(sp, method, users=500, iterations=1, seed=0, candidate_policy=TWO_HOP,
                  k_list=(20,), scorer=None, name=None):
    """Score sampled users' candidate links on the t1 graph, judge them against t2.

    Users are drawn from those with at least one new link and one candidate.
    Each iteration draws a fresh sample; its pooled (user, candidate) scores
    give one ROC curve and AUC. The reported curve pools all iterations.
    """
    if len(sp.test_edges) == 0:
        raise ValueError("snapshot pair has no test edges")
    if candidate_policy not in (TWO_HOP, ALL_NON_NEIGHBORS):
        raise ValueError(f"unknown candidate policy {candidate_policy!r}")
    g = sp.train
    t0 = time.perf_counter()
    if scorer is None:
        scorer = method(g)
    fit_time = time.perf_counter() - t0
    pool = eligible_users(sp, candidate_policy)
    if pool.size == 0:
        raise ValueError("no user has both a test link and a candidate")
    test_nbrs = sp.test_neighbors()
    k_list = list(k_list)
    cache = {}
    all_s, all_y, aucs = [], [], []
    prec = {k: [] for k in k_list}
    hit_tot = {k: 0 for k in k_list}
    t1 = time.perf_counter()
    for it in range(iterations):
        rng = np.random.default_rng([seed, it])
        sample = np.sort(rng.choice(pool, size=min(users, pool.size), replace=False))
        it_s, it_y = [], []
        for u in sample.tolist():
            if u not in cache:
                cands = candidate_set(g, u, candidate_policy)
                cache[u] = (cands, np.asarray(scorer.scores(u, cands), dtype=float),
                            np.isin(cands, test_nbrs[u]))
            cands, s, y = cache[u]
            it_s.append(s)
            it_y.append(y)
            for k in k_list:
                h = hits_at_k(cands, s, test_nbrs[u], k)
                prec[k].append(h / k)
                hit_tot[k] += h
        s = np.concatenate(it_s)
        y = np.concatenate(it_y)
        aucs.append(auc(*roc_curve(s, y)))
        all_s.append(s)
        all_y.append(y)
    fpr, tpr = roc_curve(np.concatenate(all_s), np.concatenate(all_y))
    score_time = time.perf_counter() - t1
    return EvalReport(
        method=name or getattr(method, "label", str(method)),
        candidate_policy=candidate_policy,
        fpr=fpr.tolist(), tpr=tpr.tolist(),
        auc=float(np.mean(aucs)), auc_per_iteration=[float(a) for a in aucs],
        precision={k: float(np.mean(v)) for k, v in prec.items()},
        hits=hit_tot,
        sample={"users": int(min(users, pool.size)), "iterations": iterations, "seed": seed,
                "eligible": int(pool.size), "test_edges": int(len(sp.test_edges)),
                "discarded": int(sp.discarded)},
        timings={"fit_seconds": fit_time, "score_seconds": score_time},
    )


def write_reports(reports, outdir):
    """report.json, summary.csv and one roc CSV per method; timings go to timings.json."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "report.json").write_text(
        json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n")
    (outdir / "timings.json").write_text(
        json.dumps({f"{r.method}/{r.candidate_policy}": r.timings for r in reports},
                   indent=2, sort_keys=True) + "\n")
    ks = sorted({k for r in reports for k in r.precision})
    with (outdir / "summary.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "candidate_policy", "auc", "auc_std"] + [f"prec@{k}" for k in ks])
        for r in reports:
            w.writerow([r.method, r.candidate_policy, f"{r.auc:.6f}", f"{r.auc_std:.6f}"]
                       + [f"{r.precision.get(k, float('nan')):.6f}" for k in ks])
    for r in reports:
        path = outdir / f"roc_{r.method}_{r.candidate_policy}.csv".replace("/", "_")
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["fpr", "tpr"])
            for x, y in zip(r.fpr, r.tpr):
                w.writerow([f"{x:.9g}", f"{y:.9g}"])
