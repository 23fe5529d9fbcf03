#!/usr/bin/env python3
"""
Vertex-LP Benchmark Tool for WrenchLab

Solves the vertex-LP workload of a batch of random sphere grasps for each
requested worker count and prints a throughput table, so the effect of
WRENCHLAB_THREADS can be read off directly.
"""

import argparse
import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.performance_monitor import benchmark_vertex_lps


def main():
    parser = argparse.ArgumentParser(description="Benchmark the vertex-LP workload")
    parser.add_argument("--instances", type=int, default=20, help="Random grasps per run")
    parser.add_argument("--seed", type=int, default=0, help="First grasp seed")
    parser.add_argument("--dirs", type=int, default=8, help="Search directions per finger")
    parser.add_argument("--workers", type=int, nargs="+", default=[1, 2, 4], help="Worker counts to compare")
    args = parser.parse_args()

    print("=" * 60)
    print("WrenchLab Vertex-LP Benchmark")
    print("=" * 60)
    print(f"Instances: {args.instances}  Directions: {args.dirs}")
    print()
    print(f"{'workers':>8} {'LPs':>8} {'optimal':>8} {'seconds':>9} {'LP/s':>10} {'p95 ms':>8} {'mem MB':>8}")

    for workers in args.workers:
        result = benchmark_vertex_lps(
            instances=args.instances, seed=args.seed, n_dirs=args.dirs, max_workers=workers,
        )
        print(
            f"{result.workers:>8} {result.lps:>8} {result.optimal:>8} "
            f"{result.seconds:>9.3f} {result.lps_per_second:>10.1f} {result.solve_ms_p95:>8.2f} {result.memory_mb:>8.1f}"
        )


if __name__ == "__main__":
    main()
