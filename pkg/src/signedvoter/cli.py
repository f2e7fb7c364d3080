"""Command-line entry point: ``signedvoter <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import ExperimentError, load_config, run_experiment, summarize
from .game import GameConfig, play_game
from .graph import GraphError, read_edge_csv, write_edge_csv
from .meanfield import MeanFieldError, mf_optimize_eps, template
from .netgen import MergePlan, generate_component, make_topology, merge_signed, parse_component
from .optimize import OptimizerOptions, adversary_strategy, gradient_ascent, relative_gain

log = logging.getLogger("signedvoter")

PLACEMENT = {"r": "random", "h": "high_degree", "l": "low_degree"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _out(args, path) -> Path:
    p = Path(path)
    if not p.is_absolute() and args.out_dir:
        p = Path(args.out_dir) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _graph(args):
    return read_edge_csv(args.graph, directed=not args.undirected)


def cmd_gen(args):
    if args.topology:
        g = make_topology(args.topology, n=args.n, p=args.p, ka=args.ka, kb=args.kb, seed=args.seed)
    else:
        if not (args.positive and args.negative):
            raise UsageError("gen needs --topology or both --positive and --negative")
        plan = MergePlan(args.p, PLACEMENT.get(args.placement, args.placement))
        ss = np.random.SeedSequence(args.seed)
        s_pos, s_neg, s_merge = (np.random.default_rng(s) for s in ss.spawn(3))
        pos = generate_component(parse_component(args.positive, args.n), s_pos)
        neg = generate_component(parse_component(args.negative, plan.size(args.n)), s_neg)
        g = merge_signed(pos, neg, plan, s_merge)
    write_edge_csv(g, _out(args, args.out))
    print(f"wrote {g.n} nodes, {g.num_edges} edges "
          f"({int(np.count_nonzero(g.has_negative))} nodes with negative ties) to {args.out}")


def cmd_optimize(args):
    g = _graph(args)
    p_B = adversary_strategy(g, args.adversary, args.budget_b * g.n)
    opts = OptimizerOptions(learning_rate=args.eta, tolerance=args.mu, mode=args.mode, rng_seed=args.seed,
                            starts=args.starts)
    res = gradient_ascent(g, p_B, args.budget_a * g.n, opts, record_true_trace=True)
    rows = [(i, repr(o), repr(t)) for i, (o, t) in enumerate(zip(res.objective_trace, res.true_trace))]
    _write_rows(_out(args, args.out), ["iter", "objective", "true_vote_share"], rows)
    if args.allocation:
        _write_rows(_out(args, args.allocation), ["node", "label", "p_a"],
                    [(i, lab, repr(v)) for i, (lab, v) in enumerate(zip(g.labels, res.p_star))])
    print(f"mode={res.mode} true_vote_share={res.true_vote_share:.6f} iterations={res.iterations} "
          f"converged={res.converged}")


def cmd_gain(args):
    g = _graph(args)
    p_B = adversary_strategy(g, args.adversary, args.budget_b * g.n)
    opts = OptimizerOptions(learning_rate=args.eta, tolerance=args.mu, rng_seed=args.seed, starts=args.starts)
    res = relative_gain(g, p_B, args.budget_a * g.n, opts, repeats=args.repeats, baseline=args.baseline)
    rows = [(r, repr(a.true_vote_share), repr(b.true_vote_share), repr(gn))
            for r, ((a, b), gn) in enumerate(zip(res.results, res.gains))]
    if args.out:
        _write_rows(_out(args, args.out), ["repeat", "x_signed", f"x_{args.baseline}", "gain"], rows)
    print(f"gain={res.gain:.6f} x_signed={res.x_signed:.6f} x_{args.baseline}={res.x_mirrored:.6f}")


def cmd_sweep(args):
    cfg = load_config(args.config, seed=args.seed_override)
    out_dir = args.out_dir or cfg.out_dir
    entry = run_experiment(cfg, out_dir=out_dir, jobs=args.jobs)
    print(f"{cfg.name}: {entry['n_cells']} cells, {entry['n_failed']} failed, "
          f"{entry['wall_time_s']:.1f}s -> {Path(out_dir) / entry['files']['table']}")
    return 2 if entry["n_failed"] == entry["n_cells"] else 0


def cmd_meanfield(args):
    rows = []
    for p in args.p:
        res = mf_optimize_eps(template(args.model, p), args.budget_a, args.b_alloc)
        rows.append((repr(p), repr(float(res.eps)), repr(float(res.x_star))))
    if args.out:
        _write_rows(_out(args, args.out), ["p", "eps_star", "x_star"], rows)
    for r in rows:
        print(",".join(r))


def cmd_game(args):
    if bool(args.graph) == bool(args.model):
        raise UsageError("game needs exactly one of --graph or --model")
    if args.graph:
        g = _graph(args)
        B_B = args.budget_b * g.n
        cfg = GameConfig(args.knowledge_a, args.knowledge_b, args.budget_ratio * B_B, B_B, graph=g,
                         max_rounds=args.rounds, eta=args.eta, mu=args.mu, damping=args.damping,
                         scheme=args.scheme)
    else:
        name, _, p = args.model.partition(":")
        if not p:
            raise UsageError("--model expects name:p, e.g. cp-reg-high:0.5")
        cfg = GameConfig(args.knowledge_a, args.knowledge_b, args.budget_ratio * args.budget_b, args.budget_b,
                         template=template(name, float(p)), max_rounds=args.rounds, damping=args.damping,
                         scheme=args.scheme)
    state = play_game(cfg, seed=args.seed)
    rows = [(h.round, repr(h.eps_a), repr(h.eps_b), repr(h.perceived_xa), repr(h.perceived_xb),
             repr(h.true_xa), repr(h.true_xb)) for h in state.history]
    if args.out:
        _write_rows(_out(args, args.out),
                    ["round", "eps_a", "eps_b", "perceived_xa", "perceived_xb", "true_xa", "true_xb"], rows)
    eps_a, eps_b = state.eps
    print(f"rounds={state.round} converged={state.converged} eps_a={eps_a:.4f} eps_b={eps_b:.4f} "
          f"true_xa={state.true_utilities[0]:.6f}")


def cmd_summarize(args):
    results = args.results or args.out_dir
    if not results:
        raise UsageError("summarize needs a results directory")
    rows = summarize(results)
    for r in rows:
        print(f"{r['experiment']},{r['series']},{r['metric']},{r['value']:.6g},{r['at']},"
              f"ok={r['n_ok']},skipped={r['n_skipped']}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed (default 0)")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="worker processes for sweeps")
    common.add_argument("--out-dir", default=argparse.SUPPRESS, help="directory for relative output paths")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = _Parser(prog="signedvoter", parents=[common],
                     description="Influence maximisation on signed networks under voter dynamics.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help):
        sp = sub.add_parser(name, parents=[common], help=help)
        sp.set_defaults(func=func)
        return sp

    def graph_args(sp, required=True):
        sp.add_argument("--graph", required=required, help="edge csv (rater,ratee,rating)")
        sp.add_argument("--undirected", action="store_true", help="mirror every rating")

    def opt_args(sp):
        sp.add_argument("--budget-a", type=float, default=1.0, help="A's budget per node")
        sp.add_argument("--adversary", default="uniform", help="uniform|avoid_negative|target_negative|"
                        "eps_split:<f>|degree_proportional")
        sp.add_argument("--budget-b", type=float, default=1.0, help="B's budget per node")
        sp.add_argument("--eta", type=float, default=None, help="step size (default N)")
        sp.add_argument("--mu", type=float, default=1e-7, help="stopping tolerance on the objective")
        sp.add_argument("--starts", type=int, default=5, help="random restarts, best kept")

    sp = add("gen", cmd_gen, "generate a synthetic signed network")
    sp.add_argument("--topology", help="named topology, e.g. cp-reg-high")
    sp.add_argument("--positive", help="positive component kind:params, e.g. cp:30,2,0.5")
    sp.add_argument("--negative", help="negative component kind:params, e.g. reg:8")
    sp.add_argument("--p", type=float, default=0.5)
    sp.add_argument("--placement", default="r", help="r|h|l")
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--ka", type=float, default=16)
    sp.add_argument("--kb", type=float, default=4)
    sp.add_argument("--out", required=True)

    sp = add("optimize", cmd_optimize, "optimise A's allocation against a fixed adversary")
    graph_args(sp)
    sp.add_argument("--mode", default="ga", help="ga|ga+|gaphi")
    opt_args(sp)
    sp.add_argument("--out", required=True, help="trace csv")
    sp.add_argument("--allocation", help="optional csv for the optimised allocation")

    sp = add("gain", cmd_gain, "relative gain of sign-aware over sign-blind optimisation")
    graph_args(sp)
    opt_args(sp)
    sp.add_argument("--repeats", type=int, default=5)
    sp.add_argument("--baseline", default="mirrored", choices=("mirrored", "dropped"))
    sp.add_argument("--out")

    sp = add("sweep", cmd_sweep, "run an experiment config")
    sp.add_argument("config")

    sp = add("meanfield", cmd_meanfield, "mean-field optimal negative-tie share")
    sp.add_argument("--model", required=True, choices=("reg-reg", "cp-reg-high", "cp-reg-low", "reg-cp"))
    sp.add_argument("--p", type=float, nargs="+", required=True)
    sp.add_argument("--budget-a", type=float, default=1.0)
    sp.add_argument("--b-alloc", type=float, default=1.0)
    sp.add_argument("--out")

    sp = add("game", cmd_game, "iterated best-response game")
    graph_args(sp, required=False)
    sp.add_argument("--model", help="mean-field template name:p")
    sp.add_argument("--knowledge-a", default="signed", choices=("signed", "blind"))
    sp.add_argument("--knowledge-b", default="blind", choices=("signed", "blind"))
    sp.add_argument("--budget-ratio", type=float, default=1.0)
    sp.add_argument("--budget-b", type=float, default=1.0, help="B's budget per node")
    sp.add_argument("--rounds", type=int, default=200)
    sp.add_argument("--eta", type=float, default=5.0)
    sp.add_argument("--mu", type=float, default=1e-7)
    sp.add_argument("--damping", type=float, default=0.0)
    sp.add_argument("--scheme", default="simultaneous", choices=("simultaneous", "alternating"))
    sp.add_argument("--out")

    sp = add("summarize", cmd_summarize, "headline numbers from a results directory")
    sp.add_argument("results", nargs="?")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(
                ("gen", "optimize", "gain", "sweep", "meanfield", "game", "summarize")))
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    args.seed_override = getattr(args, "seed", None)
    args.seed = getattr(args, "seed", 0)
    args.jobs = getattr(args, "jobs", 1)
    args.out_dir = getattr(args, "out_dir", None)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args) or 0
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ExperimentError, GraphError, MeanFieldError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
