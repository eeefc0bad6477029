#!/usr/bin/env python3
"""Write the desk-scale result CSVs.

Trains (or reuses) the agents it needs, then writes one CSV per experiment into
``--out``:

    methods.csv       agent and every heuristic on the same layouts
    bands.csv         agent spectral efficiency for B in {2, 4, 8}
    window.csv        closest-to-destination window sweep
    lambda.csv        hop/rate trade-off for lambda in {1, 0.8, 0.6}
    power.csv         with and without power control
    fairness.csv      per-flow mean bottleneck rates
    sumrate_cdf.csv   sorted agent sum rates (CDF samples)

Example::

    python scripts/results_csv.py --layouts 200 --out runs/results
"""
import argparse
import csv
import logging
from pathlib import Path

import numpy as np

from flowroute.benchmarks import HEURISTICS, HeuristicPolicy
from flowroute.config import RunConfig, load_config
from flowroute.evaluation import eval_layouts, evaluate, mbps, summarize, write_cdf_csv
from flowroute.orchestrator import AgentPolicy, BenchmarkPolicy
from flowroute.training import train_or_load

log = logging.getLogger("results")


def write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    log.info("wrote %s", path)


def row(s, *extra):
    return (*extra, s.method, mbps(s.sum_rate), mbps(s.min_rate), f"{s.mean_hops:.3g}", f"{s.mean_reprobes:.3g}")


COLS = ("method", "sum_rate_mbps", "min_rate_mbps", "mean_hops", "mean_reprobes")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="JSON run configuration (default: desk scale)")
    ap.add_argument("--layouts", type=int, default=200, help="evaluation layouts per table")
    ap.add_argument("--out", default="runs/results")
    ap.add_argument("--cache", default="runs/agents", help="where trained agents are kept")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--skip", nargs="*", default=(), help="experiments to skip, e.g. lambda bands")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = load_config(args.config) if args.config else RunConfig()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lays = eval_layouts(cfg, args.layouts)
    agent = train_or_load(cfg, args.cache, progress_every=5000)
    ddqn = AgentPolicy(agent, cfg.env)
    ev = dict(rounds=cfg.eval.rounds, fairness=cfg.eval.fairness, workers=args.workers)

    ours = evaluate(ddqn, lays, **ev)
    if "methods" not in args.skip:
        rows = [row(summarize("ddqn", ours))]
        for h in HEURISTICS:
            pol = BenchmarkPolicy(HeuristicPolicy(h, cfg.env.neighbors), cfg.env)
            rows.append(row(summarize(h, evaluate(pol, lays, **ev))))
        write(out / "methods.csv", COLS, rows)
        write_cdf_csv(out / "sumrate_cdf.csv", ours)

    if "bands" not in args.skip:
        rows = []
        for B in (2, 4, 8):
            s = summarize("ddqn", evaluate(ddqn, eval_layouts(cfg, args.layouts, num_bands=B), **ev))
            se = s.sum_rate / (B * cfg.constants.bandwidth_per_band)
            rows.append(row(s, B, f"{se:.3g}"))
        write(out / "bands.csv", ("bands", "spectral_efficiency") + COLS, rows)

    if "window" not in args.skip:
        rows = []
        for w in (2, 4, 6, 8, 10, 15, 25):
            pol = BenchmarkPolicy(HeuristicPolicy("closest-to-destination", w), cfg.env)
            rows.append(row(summarize(pol.name, evaluate(pol, lays, **ev)), w))
        write(out / "window.csv", ("window",) + COLS, rows)

    if "lambda" not in args.skip:
        rows = []
        for lam in (1.0, 0.8, 0.6):
            model = train_or_load(cfg.replace(**{"training.discount": lam}), args.cache, progress_every=5000)
            rows.append(row(summarize("ddqn", evaluate(AgentPolicy(model, cfg.env), lays, **ev)), lam))
        write(out / "lambda.csv", ("lambda",) + COLS, rows)

    if "power" not in args.skip:
        pc = evaluate(ddqn, lays, with_power_control=True, **ev)
        write(out / "power.csv", ("power_control",) + COLS,
              [row(summarize("ddqn", ours), "off"), row(summarize("ddqn", pc), "on")])

    if "fairness" not in args.skip:
        per_flow = np.mean([r.rates for r in ours], axis=0)
        write(out / "fairness.csv", ("flow", "mean_rate_mbps"), [(f, mbps(v)) for f, v in enumerate(per_flow)])


if __name__ == "__main__":
    main()
