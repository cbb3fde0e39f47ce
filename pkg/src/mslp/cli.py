"""Command-line interface: cluster, approx, predict, eval, stats and loo.

Every subcommand takes ``--config FILE`` with ``key = value`` lines (keys are
the long flag names without dashes). Flags given on the command line win
over the file. Exit codes: 0 success, 2 bad input or configuration,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .baselines import ConvergenceError
from .evaluation import leave_one_out, temporal_eval, write_reports
from .generators import sbm_temporal_generator
from .graph import load_graph, load_snapshot_pair
from .hierarchy import (HierarchyError, build_hierarchy, level_fractions, random_hierarchy,
                        read_tree, write_tree)
from .linalg import EigenConvergenceError
from .methods import LOW_RANK, METHODS, Method
from .msapprox import approximation_error, build_multiscale, load_model, save_model
from .predict import POLICIES, TWO_HOP, MultiScaleScorer, check_weights, recommend, uniform_weights
from .proximity import ProximityConfig, ProximityError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
FLAGS = {"power_pass"}  # boolean options, "true"/"false" in config files


class ConfigError(ValueError):
    pass


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def config_argv(cfg):
    argv = []
    for key, value in cfg.items():
        flag = "--" + key.replace("_", "-")
        if key in FLAGS:
            if value.lower() in ("1", "true", "yes", "on"):
                argv.append(flag)
            elif value.lower() not in ("0", "false", "no", "off"):
                raise ConfigError(f"{key}: expected a boolean, got {value!r}")
        else:
            argv += [flag, value]
    return argv


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _common(p, graph=True):
    p.add_argument("--config", help="key = value file; command-line flags override it")
    p.add_argument("--seed", type=int, default=0, help="root seed for every random choice")
    p.add_argument("--manifest", help="where to write the run manifest (commands with --out "
                                      "write one next to their outputs by default)")
    if graph:
        p.add_argument("--graph", help="edge list or binary graph cache")
        p.add_argument("--weighted", action="store_true", help="read a third weight column")


def _hierarchy_opts(p):
    p.add_argument("--levels", type=int, default=3, help="hierarchy depth")
    p.add_argument("--branching", type=int, default=2, help="children per cluster")
    p.add_argument("--tree", nargs="+", help="assignment files for levels 1..depth")


def _scoring_opts(p):
    p.add_argument("--rank", type=int, default=20, help="rank r of every level")
    p.add_argument("--measure", choices=("katz", "cn"), default="katz")
    p.add_argument("--beta", type=float, help="Katz damping (default 0.5 / ||A||_2 estimate)")
    p.add_argument("--alpha", type=float, default=0.15, help="RWR restart probability")
    p.add_argument("--weights", type=_floats, help="comma-separated level weights w_0..w_depth")
    p.add_argument("--power-pass", action="store_true", help="one extra power pass when lifting")
    p.add_argument("--candidates", choices=POLICIES, default=TWO_HOP)


def build_parser():
    parser = argparse.ArgumentParser(prog="mslp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mslp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="build a cluster hierarchy and write assignments")
    _common(p)
    _hierarchy_opts(p)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("approx", help="build the multi-scale model and write it")
    _common(p)
    _hierarchy_opts(p)
    p.add_argument("--rank", type=int, default=20, help="rank r of every level")
    p.add_argument("--power-pass", action="store_true")
    p.add_argument("--max-core-mb", type=float, default=4096.0,
                   help="refuse to build when the dense cores would exceed this")
    p.add_argument("--error", action="store_true", help="report the relative error per level")
    p.add_argument("--out", required=True, help="model file path")

    p = sub.add_parser("predict", help="top-k new links for one user")
    _common(p)
    _hierarchy_opts(p)
    _scoring_opts(p)
    p.add_argument("--method", choices=METHODS, default="mslp")
    p.add_argument("--model", help="saved model file (mslp only)")
    p.add_argument("--user", required=True, help="node label")
    p.add_argument("--k", type=int, default=10, help="number of recommendations")

    p = sub.add_parser("eval", help="temporal ROC/AUC and precision@k of several methods")
    _common(p, graph=False)
    _hierarchy_opts(p)
    _scoring_opts(p)
    p.add_argument("--train", help="edge list at t1")
    p.add_argument("--test", help="edge list at t2")
    p.add_argument("--sbm-blocks", type=int, help="generate a planted-block pair instead")
    p.add_argument("--sbm-size", type=int, default=625)
    p.add_argument("--p-in", type=float, default=0.02)
    p.add_argument("--p-out", type=float, default=0.002)
    p.add_argument("--flip-rate", type=float, default=0.05)
    p.add_argument("--methods", default="mslp,clra,katz,random",
                   help=f"comma-separated subset of {','.join(METHODS)}")
    p.add_argument("--sample-users", type=int, default=500)
    p.add_argument("--iterations", type=int, default=1)
    p.add_argument("--k-list", type=_ints, default=[20])
    p.add_argument("--shuffle", type=float, default=0.0, help="fraction of nodes moved between leaves")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("stats", help="within-cluster edge share per level, built vs random")
    _common(p)
    _hierarchy_opts(p)

    p = sub.add_parser("loo", help="leave-one-out top-k hits")
    _common(p)
    _hierarchy_opts(p)
    _scoring_opts(p)
    p.add_argument("--methods", default="mslp,clra")
    p.add_argument("--k-list", type=_ints, default=[3, 5, 10, 15, 20])
    return parser


def parse_args(argv):
    """argparse with config-file values inserted ahead of the explicit flags."""
    argv = list(argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    parser = build_parser()
    if known.config and argv:
        cfg = config_argv(read_config(known.config))
        argv = argv[:1] + cfg + argv[1:]
    return parser.parse_args(argv)


def manifest(args, outputs=()):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("config", "manifest")}
    blob = json.dumps(cfg, sort_keys=True, default=str)
    return {
        "command": args.command,
        "config": json.loads(blob),
        "config_sha256": hashlib.sha256(blob.encode()).hexdigest(),
        "seed": args.seed,
        "outputs": [str(o) for o in outputs],
        "versions": {"mslp": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
    }


def write_manifest(path, args, outputs=()):
    path = args.manifest or path
    if path is None:
        return
    Path(path).write_text(json.dumps(manifest(args, outputs), indent=2, sort_keys=True) + "\n")


def _graph(args):
    if not args.graph:
        raise ConfigError("--graph is required")
    return load_graph(args.graph, weighted=args.weighted)


def _tree(args, g):
    if args.tree:
        tree = read_tree(args.tree, g, args.branching)
        args.levels = tree.depth
        return tree
    return build_hierarchy(g, args.levels, args.branching, seed=args.seed)


def core_bytes(n_clusters_per_level, rank):
    return sum(8 * (k * rank) ** 2 for k in n_clusters_per_level)


def cmd_cluster(args, out):
    g = _graph(args)
    tree = _tree(args, g)
    paths = write_tree(args.out, g, tree)
    write_manifest(Path(args.out) / "manifest.json", args, paths)
    for p, f in enumerate(level_fractions(g, tree)):
        print(f"level {p}\tclusters {tree.num_clusters(p)}\twithin {100 * f:.2f}%", file=out)


def cmd_approx(args, out):
    g = _graph(args)
    c, depth, r = args.branching, args.levels, args.rank
    need = core_bytes([c ** p for p in range(depth + 1)], r) + 8 * g.n * r * (depth + 1)
    if need > args.max_core_mb * 2 ** 20:
        raise ConfigError(
            f"model needs about {need / 2 ** 20:.0f} MiB (bases n*r per level plus dense cores "
            f"sum_p (c^p r)^2, i.e. O(n r + c^(2 l) r^2)) with n={g.n}, l={depth}, c={c}, r={r}; "
            f"lower --rank or --levels, or raise --max-core-mb")
    tree = _tree(args, g)
    model = build_multiscale(g, tree, r, power_pass=args.power_pass)
    save_model(model, args.out)
    write_manifest(Path(str(args.out) + ".manifest.json"), args, [args.out])
    for p, la in enumerate(model.levels):
        line = f"level {p}\tclusters {tree.num_clusters(p)}\trank {int(la.ranks.sum())}"
        if args.error:
            line += f"\trel_error {approximation_error(g, la):.6g}"
        print(line, file=out)


def _method(args, name, tree=None, **kw):
    return Method(name, depth=args.levels, branching=args.branching, rank=args.rank,
                  measure=args.measure, beta=args.beta, alpha=args.alpha, seed=args.seed,
                  weights=tuple(args.weights) if args.weights and name == "mslp" else None,
                  tree=tree, power_pass=args.power_pass, **kw)


def cmd_predict(args, out):
    g = _graph(args)
    if args.k < 1:
        raise ConfigError("--k must be >= 1")
    u = g.index_of(args.user)
    if args.model:
        if args.method != "mslp":
            raise ConfigError("--model can only be used with --method mslp")
        model = load_model(args.model)
        if model.n != g.n:
            raise ConfigError(f"model covers {model.n} nodes, graph has {g.n}")
        cfg = ProximityConfig(args.measure, args.beta).resolved(g)
        w = uniform_weights(model.depth) if args.weights is None else args.weights
        scorer = MultiScaleScorer(model, cfg, check_weights(w, model.depth))
    else:
        tree = _tree(args, g) if args.method in ("mslp", "clra") else None
        scorer = _method(args, args.method, tree)(g)
    pred = recommend(scorer, g, u, args.k, args.candidates)
    print("rank\tcandidate_label\tscore", file=out)
    for i, (v, s) in enumerate(zip(pred.candidates.tolist(), pred.scores.tolist()), start=1):
        print(f"{i}\t{g.labels[v]}\t{s:.12g}", file=out)
    write_manifest(None, args)


def _method_list(text):
    names = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in names if m not in METHODS]
    if bad or not names:
        raise ConfigError(f"unknown methods {bad}; choose from {', '.join(METHODS)}")
    return names


def cmd_eval(args, out):
    names = _method_list(args.methods)
    if args.sbm_blocks:
        sp = sbm_temporal_generator(args.sbm_blocks, [args.sbm_size] * args.sbm_blocks,
                                    args.p_in, args.p_out, args.flip_rate, seed=args.seed)
    elif args.train and args.test:
        sp = load_snapshot_pair(args.train, args.test)
    else:
        raise ConfigError("give --train and --test, or --sbm-blocks")
    g = sp.train
    tree = None
    if any(m in ("mslp", "clra") for m in names):
        tree = _tree(args, g)
    reports = []
    for name in names:
        m = _method(args, name, tree if name in ("mslp", "clra") else None, shuffle=args.shuffle
                    if name in LOW_RANK else 0.0)
        rep = temporal_eval(sp, m, users=args.sample_users, iterations=args.iterations,
                            seed=args.seed, candidate_policy=args.candidates, k_list=args.k_list)
        reports.append(rep)
        prec = " ".join(f"p@{k}={v:.4f}" for k, v in rep.precision.items())
        print(f"{rep.method}\tauc={rep.auc:.4f}\t{prec}", file=out)
    write_reports(reports, args.out)
    write_manifest(Path(args.out) / "manifest.json", args,
                   ["report.json", "summary.csv"] + [f"roc_{r.method}_{r.candidate_policy}.csv"
                                                     for r in reports])


def cmd_stats(args, out):
    g = _graph(args)
    built = level_fractions(g, _tree(args, g))
    rand = level_fractions(g, random_hierarchy(g, args.levels, args.branching, args.seed))
    print("level\tclusters\tbuilt_within_pct\trandom_within_pct", file=out)
    for p, (a, b) in enumerate(zip(built, rand)):
        print(f"{p}\t{args.branching ** p}\t{100 * a:.2f}\t{100 * b:.2f}", file=out)
    write_manifest(None, args)


def cmd_loo(args, out):
    g = _graph(args)
    names = _method_list(args.methods)
    tree = _tree(args, g) if any(m in ("mslp", "clra") for m in names) else None
    print("method\t" + "\t".join(f"hits@{k}" for k in args.k_list), file=out)
    for name in names:
        m = _method(args, name, tree if name in ("mslp", "clra") else None)
        res = leave_one_out(g, m, args.k_list)
        print(res.method + "\t" + "\t".join(str(res.hits[k]) for k in args.k_list), file=out)
    write_manifest(None, args)


COMMANDS = {"cluster": cmd_cluster, "approx": cmd_approx, "predict": cmd_predict,
            "eval": cmd_eval, "stats": cmd_stats, "loo": cmd_loo}


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
        COMMANDS[args.command](args, out)
    except SystemExit as exc:  # argparse usage errors already print a message
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    except (EigenConvergenceError, ConvergenceError, ProximityError, np.linalg.LinAlgError) as exc:
        print(f"mslp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, HierarchyError, ValueError, KeyError, OSError) as exc:
        print(f"mslp: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
