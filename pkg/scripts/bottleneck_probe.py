#!/usr/bin/env python3
"""Compare greedy routers with a max-bottleneck (widest path) router.

Each flow in turn gets the route that maximises its own bottleneck SINR given
the flows already routed (a label-setting search over (node, incoming band)
states with the half-duplex and adjacent-band rules). Its own hops are not
counted as interference during the search, so this is an optimistic
per-flow router, useful to see what the per-flow objective does to the
network-wide sum rate.

    python scripts/bottleneck_probe.py --layouts 30
"""
import argparse
import heapq

import numpy as np

from flowroute.benchmarks import HeuristicPolicy
from flowroute.config import RunConfig
from flowroute.evaluation import eval_layouts
from flowroute.netstate import FlowRoute, build_occupancy
from flowroute.orchestrator import BenchmarkPolicy, FlowResult, run_rounds


class WidestPath:
    name = "widest-path"

    def route(self, layout, routes, flow):
        src, dst = layout.source(flow), layout.destination(flow)
        B = layout.num_bands
        powers = routes.powers
        occ = build_occupancy(routes, exclude=flow)
        tx = np.zeros((layout.num_nodes, B), dtype=bool)
        rx = np.zeros((layout.num_nodes, B), dtype=bool)
        for _, t, r, b in routes.all_hops(exclude=flow):
            tx[t, b] = rx[r, b] = True
        interference = layout.gains.T @ (occ * powers)
        noise = layout.constants.noise_power
        cand = np.append(np.arange(layout.num_relays), dst)

        best = {(src, -1): np.inf}
        prev = {}
        heap = [(-np.inf, src, -1)]
        while heap:
            width, u, band_in = heapq.heappop(heap)
            width = -width
            if best.get((u, band_in), -1.0) > width:
                continue
            path, state = {src}, (u, band_in)
            while state in prev:
                path.add(state[0])
                state = prev[state]
            if u == dst:
                nodes, bands, state = [], [], (u, band_in)
                while state in prev:
                    nodes.append(state[0])
                    bands.append(state[1])
                    state = prev[state]
                nodes.append(src)
                return FlowResult(FlowRoute(tuple(nodes[::-1]), tuple(bands[::-1])))
            for b in range(B):
                if b == band_in or rx[u, b]:
                    continue
                sinr = layout.gains[u, cand] * powers[u, b] / (interference[cand, b] + noise)
                for v, s in zip(cand, sinr):
                    if v in path or tx[v, b]:
                        continue
                    w = min(width, s)
                    if w > best.get((int(v), b), -1.0):
                        best[int(v), b] = w
                        prev[int(v), b] = (u, band_in)
                        heapq.heappush(heap, (-w, int(v), b))
        return FlowResult(None)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--layouts", type=int, default=30)
    args = ap.parse_args()
    cfg = RunConfig()
    lays = eval_layouts(cfg, args.layouts)
    policies = [WidestPath()] + [BenchmarkPolicy(HeuristicPolicy(h), cfg.env)
                                 for h in ("best-direction", "closest-to-destination")]
    for pol in policies:
        sums, hops = [], []
        for lay in lays:
            res = run_rounds(lay, pol, cfg.eval.rounds)
            sums.append(res.metrics.sum_rate)
            hops.append(np.mean(res.hops))
        print(f"{pol.name:24s} sum {np.mean(sums) / 1e6:6.2f} Mbps  hops/flow {np.mean(hops):5.2f}")


if __name__ == "__main__":
    main()
