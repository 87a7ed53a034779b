#!/usr/bin/env python3
"""Regenerate the shipped synthetic AS underlay.

Searches generator seeds for a 37-node / 156-edge connected graph whose
mean pairwise hop count is closest to the 1.91 target, then writes it to
src/lancsim/data/underlay_37_156.txt.
"""

import argparse
from pathlib import Path

import numpy as np

from lancsim import netmodel


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--as-count", type=int, default=37)
    ap.add_argument("--edges", type=int, default=156)
    ap.add_argument("--target-hops", type=float, default=1.91)
    ap.add_argument("--seed-range", type=int, default=500)
    ap.add_argument(
        "--out",
        type=Path,
        default=Path(__file__).resolve().parent.parent / "src" / "lancsim" / "data" / "underlay_37_156.txt",
    )
    args = ap.parse_args()

    best = None
    for seed in range(args.seed_range):
        g = netmodel.generate_underlay(args.as_count, args.edges, np.random.default_rng(seed))
        m = g.mean_pairwise_hops()
        if best is None or abs(m - args.target_hops) < abs(best[1] - args.target_hops):
            best = (seed, m, g)
    seed, hops, g = best
    lines = [
        f"# synthetic AS-level underlay: {args.as_count} ASes, {args.edges} edges",
        f"# generator seed {seed}, mean pairwise hops {hops:.4f}",
    ]
    lines += [f"{u} {v}" for u, v in g.edges]
    args.out.write_text("\n".join(lines) + "\n")
    print(f"wrote {args.out} (seed {seed}, mean hops {hops:.4f}, "
          f"degrees {min(g.degree.values())}..{max(g.degree.values())})")


if __name__ == "__main__":
    main()
