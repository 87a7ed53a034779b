#!/usr/bin/env python3
"""Reproduce the evaluation studies as tables on the synthetic underlay.

Each study crosses a swept parameter with the relevant schemes, averages
over seeds, and prints one aggregated table. At --scale desk the runs are
sized for a laptop; --scale paper uses the original 1000-peer setting and
takes correspondingly longer.

    python3 scripts/experiments.py population --scale desk
    python3 scripts/experiments.py dynamics --seeds 1,2,3
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from lancsim import sim_engine
from lancsim.policies import PolicyVariant
from lancsim.sim_engine import SimConfig

LANC = PolicyVariant.LANC_RANDOM
LA_LR = PolicyVariant.LA_LR


def base_config(scale: str) -> SimConfig:
    if scale == "paper":
        return SimConfig()
    return SimConfig(peers=400, blocks=50, block_size=16)


def fmt(x) -> str:
    if x is None:
        return "nan"
    return f"{x:.3f}" if isinstance(x, float) else str(x)


def aggregate(cfg: SimConfig, seeds: list[int]) -> dict:
    rows = []
    for seed in seeds:
        report, _ = sim_engine.run(replace(cfg, seed=seed))
        rows.append(report)
    out = {}
    for metric in ("idtr", "avg_dt", "max_dt", "unfinished_fraction"):
        vals = [getattr(r, metric) for r in rows if getattr(r, metric) is not None]
        out[metric] = float(np.mean(vals)) if vals else None
    return out


def table(title: str, header: list[str], rows: list[list]) -> None:
    print(f"\n== {title}")
    print(",".join(header))
    for row in rows:
        print(",".join(fmt(x) for x in row))


def study_population(cfg, seeds):
    sizes = [200, 400, 700, 1000] if cfg.peers >= 1000 else [100, 200, 400, 700]
    rows = []
    for peers in sizes:
        for pol in (LANC, LA_LR):
            agg = aggregate(replace(cfg, peers=peers, policy=pol), seeds)
            rows.append([peers, pol.value, agg["idtr"], agg["avg_dt"], agg["max_dt"]])
    table("population size", ["peers", "policy", "idtr", "avg_dt", "max_dt"], rows)


def study_degree(cfg, seeds):
    rows = []
    for degree in (6, 10, 14, 18, 22, 26):
        for pol in (LANC, LA_LR):
            agg = aggregate(replace(cfg, avg_degree=degree, policy=pol), seeds)
            rows.append([degree, pol.value, agg["idtr"], agg["avg_dt"]])
    table("overlay density", ["avg_degree", "policy", "idtr", "avg_dt"], rows)


def study_locality(cfg, seeds):
    rows = []
    for p in (0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9):
        for pol in (LANC, LA_LR):
            agg = aggregate(replace(cfg, intra_fraction=p, policy=pol), seeds)
            rows.append([p, pol.value, agg["idtr"], agg["avg_dt"], agg["max_dt"]])
    table("locality accuracy", ["intra_fraction", "policy", "idtr", "avg_dt", "max_dt"], rows)


def study_deployment(cfg, seeds):
    rows = []
    for frac in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0):
        for pol in (LANC, LA_LR):
            for server_aware in (True, False):
                agg = aggregate(
                    replace(cfg, deploy_fraction=frac, policy=pol, server_locality=server_aware),
                    seeds,
                )
                rows.append([frac, pol.value, server_aware, agg["idtr"]])
    table("incremental locality deployment",
          ["deploy_fraction", "policy", "server_aware", "idtr"], rows)


def study_usage(cfg, seeds):
    # locality in topology only (P-LANC) versus topology + download decision
    # (LANC), under uniform peer placement
    rows = []
    for p in (0.7, 0.8, 0.9, 0.95):
        for pol in (LANC, PolicyVariant.P_LANC):
            agg = aggregate(
                replace(cfg, intra_fraction=p, policy=pol, placement="uniform"), seeds
            )
            rows.append([p, pol.value, agg["idtr"]])
    table("locality usage (uniform placement)", ["intra_fraction", "policy", "idtr"], rows)


def study_density(cfg, seeds):
    rows = []
    for m in (1, 2, 4, 8, 20, None):
        for pol in (LANC, PolicyVariant.LANC_INFORMED):
            agg = aggregate(replace(cfg, encoding_density=m, policy=pol), seeds)
            rows.append(["all" if m is None else m, pol.value,
                         agg["idtr"], agg["avg_dt"], agg["max_dt"]])
    table("encoding density", ["m", "policy", "idtr", "avg_dt", "max_dt"], rows)


def study_hetero(cfg, seeds):
    rows = []
    for pol in (LANC, LA_LR):
        for label, frac, server_fast in (
            ("homogeneous", 0.0, False),
            ("low_cap_server", 0.1, False),
            ("high_cap_server", 0.1, True),
        ):
            agg = aggregate(
                replace(cfg, hetero_fraction=frac, server_hetero=server_fast, policy=pol),
                seeds,
            )
            rows.append([pol.value, label, agg["idtr"], agg["avg_dt"], agg["max_dt"]])
    table("heterogeneous capacities", ["policy", "case", "idtr", "avg_dt", "max_dt"], rows)


def study_tft(cfg, seeds):
    rows = []
    for c in (0, 1, 2, 4, 8, 16):
        for pol in (LANC, LA_LR):
            agg = aggregate(replace(cfg, tft_threshold=c, policy=pol), seeds)
            rows.append([c, pol.value, agg["idtr"], agg["avg_dt"], agg["max_dt"],
                         agg["unfinished_fraction"]])
    table("tit-for-tat threshold",
          ["C", "policy", "idtr", "avg_dt", "max_dt", "unfinished_fraction"], rows)


def study_dynamics(cfg, seeds):
    # churn scenarios run with the periodic (1 ts) buffer-map exchange the
    # schemes would have in practice; instantaneous maps hide the effect of
    # generations departing with unreplicated blocks
    rows = []
    for scenario in ("A", "B", "C", "D"):
        for pol in (LANC, LA_LR):
            agg = aggregate(replace(cfg, scenario=scenario, policy=pol, staleness=1.0), seeds)
            rows.append([scenario, pol.value, agg["idtr"], agg["avg_dt"], agg["max_dt"],
                         agg["unfinished_fraction"]])
    table("network dynamics",
          ["scenario", "policy", "idtr", "avg_dt", "max_dt", "unfinished_fraction"], rows)


def study_temporal(cfg, seeds):
    rows = []
    for pol in (LANC, LA_LR):
        report, _ = sim_engine.run(replace(cfg, policy=pol, seed=seeds[0]))
        for slot, transfers, weighted in report.temporal_series:
            rows.append([pol.value, slot, transfers, weighted])
    table("temporal inter-domain traffic", ["policy", "slot", "transfers", "weighted"], rows)


STUDIES = {
    "population": study_population,
    "degree": study_degree,
    "locality": study_locality,
    "deployment": study_deployment,
    "usage": study_usage,
    "density": study_density,
    "hetero": study_hetero,
    "tft": study_tft,
    "dynamics": study_dynamics,
    "temporal": study_temporal,
}


def main():
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("study", choices=sorted(STUDIES) + ["all"])
    ap.add_argument("--scale", choices=("desk", "paper"), default="desk")
    ap.add_argument("--seeds", default="1,2,3", help="comma separated")
    args = ap.parse_args()

    cfg = base_config(args.scale)
    seeds = [int(s) for s in args.seeds.split(",")]
    chosen = sorted(STUDIES) if args.study == "all" else [args.study]
    for name in chosen:
        STUDIES[name](cfg, seeds)
    return 0


if __name__ == "__main__":
    sys.exit(main())
