"""Policy evaluation over batches of layouts, and result tables."""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .benchmarks import power_control
from .layout import NetworkLayout, generate_layout
from .netstate import RouteSolution, flow_rates
from .orchestrator import Policy, run_rounds
from .config import RunConfig


@dataclass
class LayoutResult:
    index: int
    seed: int
    rates: np.ndarray  # bit/s per flow
    hops: list[int]
    reprobes: list[int]
    fallbacks: int
    routes: RouteSolution

    @property
    def sum_rate(self) -> float:
        return float(self.rates.sum())

    @property
    def min_rate(self) -> float:
        return float(self.rates.min())


def eval_layouts(cfg: RunConfig, count: int | None = None, num_bands: int | None = None) -> list[NetworkLayout]:
    """Evaluation layouts: seeds ``eval.seed + i``, disjoint from training seeds."""
    n = cfg.eval.num_layouts if count is None else count
    lays = [generate_layout(cfg.layout, cfg.eval.seed + i, cfg.constants) for i in range(n)]
    if num_bands is not None:
        lays = [lay.with_bands(num_bands) for lay in lays]
    return lays


def evaluate_layout(policy: Policy, layout: NetworkLayout, index: int, rounds: int,
                    fairness: bool = True, with_power_control: bool = False) -> LayoutResult:
    res = run_rounds(layout, policy, rounds, fairness)
    routes, metrics = res.routes, res.metrics
    if with_power_control:
        routes = power_control(layout, routes)
        metrics = flow_rates(layout, routes)
    return LayoutResult(index, layout.seed, metrics.rates, res.hops, res.reprobes, res.fallbacks, routes)


def _worker(args):
    return evaluate_layout(*args)


def evaluate(policy: Policy, layouts: Sequence[NetworkLayout], rounds: int = 2, fairness: bool = True,
             with_power_control: bool = False, workers: int = 1) -> list[LayoutResult]:
    """Evaluate on every layout; results are ordered by layout index whatever the worker count."""
    jobs = [(policy, lay, i, rounds, fairness, with_power_control) for i, lay in enumerate(layouts)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_worker, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_worker(j) for j in jobs]
    return sorted(results, key=lambda r: r.index)


@dataclass
class Summary:
    method: str
    sum_rate: float
    min_rate: float
    mean_hops: float
    mean_reprobes: float
    layouts: int


def summarize(method: str, results: Sequence[LayoutResult]) -> Summary:
    if not results:
        return Summary(method, 0.0, 0.0, 0.0, 0.0, 0)
    return Summary(
        method,
        float(np.mean([r.sum_rate for r in results])),
        float(np.mean([r.min_rate for r in results])),
        float(np.mean([h for r in results for h in r.hops])),
        float(np.mean([p for r in results for p in r.reprobes])),
        len(results),
    )


def mbps(x: float) -> str:
    """Rate in Mbps with three significant digits."""
    return f"{x / 1e6:.3g}"


SUMMARY_HEADER = ("method", "sum_rate_mbps", "min_rate_mbps", "mean_hops", "mean_reprobes",
                  "sum_rate_bps", "min_rate_bps", "layouts")


def summary_row(s: Summary) -> tuple:
    return (s.method, mbps(s.sum_rate), mbps(s.min_rate), f"{s.mean_hops:.3g}", f"{s.mean_reprobes:.3g}",
            repr(s.sum_rate), repr(s.min_rate), s.layouts)


def write_summary_csv(path: str | Path, summaries: Sequence[Summary]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        for s in summaries:
            w.writerow(summary_row(s))


def write_layout_csv(path: str | Path, results: Sequence[LayoutResult]) -> None:
    """Per-layout sum/min rate plus every flow's bottleneck rate (bit/s)."""
    num_flows = max((len(r.rates) for r in results), default=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["layout", "seed", "sum_rate_bps", "min_rate_bps", "fallbacks"]
                   + [f"flow{f}_rate_bps" for f in range(num_flows)]
                   + [f"flow{f}_hops" for f in range(num_flows)])
        for r in results:
            w.writerow([r.index, r.seed, repr(r.sum_rate), repr(r.min_rate), r.fallbacks]
                       + [repr(float(x)) for x in r.rates] + list(r.hops))


def write_cdf_csv(path: str | Path, results: Sequence[LayoutResult]) -> None:
    """Sorted sum-rate samples with empirical CDF values."""
    vals = np.sort([r.sum_rate for r in results])
    n = len(vals)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sum_rate_bps", "sum_rate_mbps", "cdf"])
        for i, v in enumerate(vals):
            w.writerow([repr(float(v)), mbps(v), f"{(i + 1) / n:.6g}"])


def route_trace(layout: NetworkLayout, routes: RouteSolution) -> list[dict]:
    """Hop records for plotting: flow, hop index, endpoints, coordinates, band."""
    pos = layout.positions
    out = []
    for f, r in enumerate(routes.routes):
        if r is None:
            continue
        for j, (tx, rx, b) in enumerate(r.hops()):
            out.append({
                "flow": f, "hop": j, "tx": tx, "rx": rx, "band": b,
                "tx_xy": pos[tx].tolist(), "rx_xy": pos[rx].tolist(),
            })
    return out
