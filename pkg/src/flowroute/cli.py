"""``flowroute`` command line: generate layouts, train, evaluate, sweep.

Exit codes: 0 success, 1 usage or configuration error, 2 I/O error,
3 training fault, 4 checkpoint version/shape mismatch.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .agent import CheckpointMismatch, DuelingQNet, TrainingFault
from .benchmarks import HEURISTICS, HeuristicPolicy
from .config import ConfigError, RunConfig, load_config
from .evaluation import (
    eval_layouts,
    evaluate,
    mbps,
    route_trace,
    summarize,
    write_cdf_csv,
    write_layout_csv,
    write_summary_csv,
)
from .layout import generate_layout, load_layout, save_layout
from .orchestrator import AgentPolicy, BenchmarkPolicy
from .training import run_training, train_or_load

log = logging.getLogger("flowroute")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_TRAINING, EXIT_VERSION = 0, 1, 2, 3, 4
SWEEP_PARAMS = ("bands", "window", "lambda")
SWEEP_HEADER = ("parameter", "value", "method", "sum_rate_mbps", "min_rate_mbps", "spectral_efficiency",
                "mean_hops", "mean_reprobes", "sum_rate_bps", "min_rate_bps", "layouts")


class UsageError(Exception):
    pass


def layout_filename(seed: int) -> str:
    return f"layout_{seed}.json"


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    return cfg


def _read_layouts(args, cfg: RunConfig, num_bands: int | None = None):
    if args.layouts_dir:
        d = Path(args.layouts_dir)
        if not d.is_dir():
            raise FileNotFoundError(f"layouts directory not found: {d}")
        lays = [load_layout(p) for p in sorted(d.glob("layout_*.json"))]
        lays.sort(key=lambda lay: lay.seed)
        if args.count is not None:
            lays = lays[: args.count]
        if num_bands is not None:
            lays = [lay.with_bands(num_bands) for lay in lays]
        return lays
    if args.seed is not None:
        cfg = cfg.replace(**{"eval.seed": args.seed})
    return eval_layouts(cfg, args.count, num_bands)


def _policy(args, cfg: RunConfig, window: int | None = None):
    if args.checkpoint:
        model = DuelingQNet.load(args.checkpoint, expect_neighbors=cfg.env.neighbors)
        return AgentPolicy(model, cfg.env, trace=False)
    if args.policy in (None, "ddqn"):
        raise UsageError("evaluating the agent needs --checkpoint")
    return BenchmarkPolicy(HeuristicPolicy(args.policy, window or args.window or cfg.env.neighbors), cfg.env)


# ---------------------------------------------------------------- commands

def cmd_generate(args) -> int:
    cfg = _config(args)
    base = cfg.eval.seed if args.seed is None else args.seed
    out = Path(args.layouts_dir or "layouts")
    count = cfg.eval.num_layouts if args.count is None else args.count
    paths = [out / layout_filename(base + i) for i in range(count)]
    clash = [p for p in paths if p.exists()]
    if clash and not args.force:
        raise UsageError(f"{clash[0]} exists ({len(clash)} file(s) would be overwritten); pass --force")
    out.mkdir(parents=True, exist_ok=True)
    for i, p in enumerate(paths):
        save_layout(generate_layout(cfg.layout, base + i, cfg.constants), p)
    print(f"wrote {count} layout(s) to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    if args.seed is not None:
        cfg = cfg.replace(**{"training.seed": args.seed})
    out = Path(args.out or cfg.output_dir)
    resume = None
    if args.checkpoint:
        resume = DuelingQNet.load(args.checkpoint, expect_neighbors=cfg.env.neighbors)
    elif (out / "checkpoint.npz").exists() and not args.force:
        raise UsageError(f"{out / 'checkpoint.npz'} exists; resume with --checkpoint or pass --force")
    res = run_training(cfg, out, resume=resume, progress_every=args.progress)
    print(f"trained {res.episodes} episode(s) in {res.wall_time:.1f}s; checkpoint {out / 'checkpoint.npz'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    rounds = args.rounds or cfg.eval.rounds
    lays = _read_layouts(args, cfg)
    policy = _policy(args, cfg)
    results = evaluate(policy, lays, rounds, fairness=not args.no_fairness,
                       with_power_control=args.power_control, workers=args.workers)
    name = policy.name + ("+pc" if args.power_control else "")
    out = Path(args.out or Path(cfg.output_dir) / f"eval_{name}")
    out.mkdir(parents=True, exist_ok=True)
    s = summarize(name, results)
    write_summary_csv(out / "summary.csv", [s])
    write_layout_csv(out / "layouts.csv", results)
    write_cdf_csv(out / "cdf.csv", results)
    traces = [{"layout": r.index, "seed": r.seed, "hops": route_trace(lay, r.routes)}
              for r, lay in zip(results, lays)]
    (out / "routes.json").write_text(json.dumps(traces) + "\n")
    print(f"{name}: sum {mbps(s.sum_rate)} Mbps, min {mbps(s.min_rate)} Mbps over {s.layouts} layout(s) -> {out}")
    return EXIT_OK


def _sweep_row(param, value, summary, num_bands, bandwidth):
    se = summary.sum_rate / (num_bands * bandwidth)
    return (param, value, summary.method, mbps(summary.sum_rate), mbps(summary.min_rate), f"{se:.3g}",
            f"{summary.mean_hops:.3g}", f"{summary.mean_reprobes:.3g}",
            repr(summary.sum_rate), repr(summary.min_rate), summary.layouts)


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if args.parameter not in SWEEP_PARAMS:
        raise UsageError(f"unknown sweep parameter {args.parameter!r}; choose from {', '.join(SWEEP_PARAMS)}")
    if not args.values:
        raise UsageError("sweep needs at least one value")
    rounds = args.rounds or cfg.eval.rounds
    cache = Path(args.cache or Path(cfg.output_dir) / "agents")
    agent = args.policy in (None, "ddqn") and args.checkpoint is None
    if args.parameter == "lambda" and not agent:
        raise UsageError("a lambda sweep trains one agent per value; drop --policy/--checkpoint")
    rows = []
    for raw in args.values:
        value = float(raw) if args.parameter == "lambda" else int(raw)
        run_cfg = cfg
        if args.parameter == "bands":
            run_cfg = cfg.replace(**{"layout.num_bands": value})
        elif args.parameter == "window":
            run_cfg = cfg.replace(**{"env.neighbors": value})
        else:
            run_cfg = cfg.replace(**{"training.discount": value})
        lays = _read_layouts(args, cfg, num_bands=value if args.parameter == "bands" else None)
        if agent:
            # the agent is trained at the base band count; bands only change at evaluation
            train_cfg = cfg if args.parameter == "bands" else run_cfg
            policy = AgentPolicy(train_or_load(train_cfg, cache, args.progress), run_cfg.env)
        else:
            policy = _policy(args, run_cfg, window=value if args.parameter == "window" else None)
        results = evaluate(policy, lays, rounds, fairness=not args.no_fairness, workers=args.workers)
        B = lays[0].num_bands if lays else run_cfg.layout.num_bands
        rows.append(_sweep_row(args.parameter, raw, summarize(policy.name, results), B,
                               cfg.constants.bandwidth_per_band))
        log.info("%s=%s done", args.parameter, raw)
    out = Path(args.out or Path(cfg.output_dir) / f"sweep_{args.parameter}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        w.writerows(rows)
    print(f"wrote {len(rows)} row(s) to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flowroute", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed_help):
        sp.add_argument("--config", help="JSON run configuration (defaults if omitted)")
        sp.add_argument("--seed", type=int, help=seed_help)

    g = sub.add_parser("generate", help="write layout documents")
    common(g, "first layout seed (default: eval.seed)")
    g.add_argument("--count", type=int, help="number of layouts (default: eval.num_layouts)")
    g.add_argument("--layouts-dir", help="output directory (default: ./layouts)")
    g.add_argument("--force", action="store_true", help="overwrite existing files")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train an agent")
    common(t, "training seed")
    t.add_argument("--out", help="run directory (default: config output_dir)")
    t.add_argument("--checkpoint", help="resume from this checkpoint")
    t.add_argument("--force", action="store_true", help="start over even if the run directory has a checkpoint")
    t.add_argument("--progress", type=int, default=1000, help="log every N episodes (0: never)")
    t.set_defaults(func=cmd_train)

    def eval_args(sp):
        common(sp, "first evaluation layout seed when generating on the fly")
        sp.add_argument("--layouts-dir", help="read layout_*.json from here instead of generating")
        sp.add_argument("--count", type=int, help="number of layouts (default: eval.num_layouts)")
        sp.add_argument("--checkpoint", help="trained agent to evaluate")
        sp.add_argument("--policy", choices=("ddqn",) + HEURISTICS, help="benchmark heuristic, or ddqn")
        sp.add_argument("--rounds", type=int, help="routing rounds (default: eval.rounds)")
        sp.add_argument("--workers", type=int, default=1, help="parallel evaluation processes")
        sp.add_argument("--no-fairness", action="store_true", help="keep index order in later rounds")
        sp.add_argument("--out", help="output path")

    e = sub.add_parser("eval", help="evaluate an agent or a heuristic")
    eval_args(e)
    e.add_argument("--window", type=int, help="heuristic candidate window (default: env.neighbors)")
    e.add_argument("--power-control", action="store_true", help="apply power control to the final routes")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="one results row per parameter value")
    eval_args(s)
    s.add_argument("parameter", help="bands | window | lambda")
    s.add_argument("values", nargs="*", help="values to sweep")
    s.add_argument("--cache", help="directory for agents trained during the sweep")
    s.add_argument("--progress", type=int, default=0, help="training log interval")
    s.add_argument("--window", type=int, help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"flowroute: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CheckpointMismatch as exc:
        print(f"flowroute: incompatible checkpoint: {exc}", file=sys.stderr)
        return EXIT_VERSION
    except TrainingFault as exc:
        print(f"flowroute: training aborted: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"flowroute: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
