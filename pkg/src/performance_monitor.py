"""
Performance monitoring module for WrenchLab

Provides tools to measure LP throughput, CPU usage and memory consumption
for the vertex-LP workload behind L_FC, the dominant cost of PONG and of
synthesis sweeps.
"""

import logging
import time
from collections import deque
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
import psutil

from src.linprog import LinearProgram, LpStatus, batch_workers, solve_batch
from src.oracle import random_sphere_grasp
from src.pong import search_directions, vertex_program
from src.wrench import FrictionModel, basis_wrenches, wrench_maps

# Module logger
logger = logging.getLogger(__name__)


class PerformanceMonitor:
    """
    Rolling record of LP batch throughput and process resources.

    Each history keeps the last `history_size` samples; `lps_total` counts
    every LP ever recorded.
    """

    def __init__(self, history_size: int = 100):
        self.history_size = history_size

        # per batch: wall time (ms) and LP/s
        self.batch_times: deque = deque(maxlen=history_size)
        self.rate_history: deque = deque(maxlen=history_size)
        self.lps_total = 0

        # per sample: CPU % and RSS (MB)
        self.cpu_history: deque = deque(maxlen=history_size)
        self.memory_history: deque = deque(maxlen=history_size)

        self.process = psutil.Process()
        self.start_time = time.perf_counter()

    def record_batch(self, n_lps: int, seconds: float):
        """Add one solved batch of `n_lps` programs that took `seconds`."""
        self.batch_times.append(seconds * 1000)
        self.lps_total += n_lps
        if seconds > 0:
            self.rate_history.append(n_lps / seconds)

    def record_cpu_memory(self):
        """Sample this process's CPU share and resident set size."""
        try:
            with self.process.oneshot():
                cpu = self.process.cpu_percent()
                rss_mb = self.process.memory_info().rss / 2**20
        except psutil.Error as e:
            logger.debug(f"psutil sample skipped: {e}")
            return
        self.cpu_history.append(cpu)
        self.memory_history.append(rss_mb)

    @staticmethod
    def _summary(values: deque) -> Tuple[float, float, float]:
        if not values:
            return 0.0, 0.0, 0.0
        arr = np.fromiter(values, dtype=float)
        return float(arr.mean()), float(arr.min()), float(arr.max())

    def get_stats(self) -> Dict[str, float]:
        """
        Throughput and resource summary since construction

        Rates are per batch; zero-duration batches contribute to the LP
        count but not to the rate history. Empty histories report 0.
        """
        rate_avg, rate_min, rate_max = self._summary(self.rate_history)
        batch_avg, _, _ = self._summary(self.batch_times)
        cpu_avg, _, _ = self._summary(self.cpu_history)
        mem_avg, _, _ = self._summary(self.memory_history)
        return {
            'uptime_seconds': time.perf_counter() - self.start_time,
            'batches': float(len(self.batch_times)),
            'lps_total': float(self.lps_total),
            'lps_per_second_avg': rate_avg,
            'lps_per_second_min': rate_min,
            'lps_per_second_max': rate_max,
            'batch_time_avg_ms': batch_avg,
            'cpu_percent': self.cpu_history[-1] if self.cpu_history else 0.0,
            'cpu_avg': cpu_avg,
            'memory_mb': self.memory_history[-1] if self.memory_history else 0.0,
            'memory_avg_mb': mem_avg,
        }

    def get_report(self) -> str:
        """Multi-line text summary for logs and the benchmark tool."""
        s = self.get_stats()
        return "\n".join([
            "=== Vertex-LP Performance Report ===",
            f"Uptime: {s['uptime_seconds']:.1f}s",
            "",
            "LP throughput:",
            f"  Batches: {s['batches']:.0f} ({s['lps_total']:.0f} LPs)",
            f"  Average: {s['lps_per_second_avg']:.1f} LP/s",
            f"  Min/Max: {s['lps_per_second_min']:.1f} / {s['lps_per_second_max']:.1f} LP/s",
            f"  Batch time: {s['batch_time_avg_ms']:.2f}ms",
            "",
            f"CPU Usage: {s['cpu_percent']:.1f}% now, {s['cpu_avg']:.1f}% avg",
            f"Memory Usage: {s['memory_mb']:.1f} MB now, {s['memory_avg_mb']:.1f} MB avg",
        ])

    def is_performance_adequate(self, min_lps_per_second: float = 100.0, max_memory_mb: float = 2048.0) -> bool:
        """
        Check average throughput and memory against targets.

        Args:
            min_lps_per_second: Minimum average LP throughput
            max_memory_mb: Maximum acceptable resident memory

        Returns:
            True if both targets are met
        """
        s = self.get_stats()
        return s['lps_per_second_avg'] >= min_lps_per_second and s['memory_avg_mb'] <= max_memory_mb


class PerformanceProfiler:
    """Wall-clock timings of named sections, in milliseconds."""

    def __init__(self):
        self.sections: Dict[str, List[float]] = {}

    def record(self, name: str, ms: float):
        self.sections.setdefault(name, []).append(ms)

    @contextmanager
    def section(self, name: str) -> Iterator[None]:
        """
        Time the body of a with-block under `name`.

        Usage:
            with profiler.section("solve"):
                solve_batch(lps)
        """
        start = time.perf_counter()
        try:
            yield
        finally:
            self.record(name, (time.perf_counter() - start) * 1000)

    def section_stats(self, name: str) -> Optional[Dict[str, float]]:
        """count, mean, p50, p95, max and total of a section, or None if never timed."""
        times = self.sections.get(name)
        if not times:
            return None
        arr = np.asarray(times)
        p50, p95 = np.percentile(arr, [50, 95])
        return {
            'count': len(times),
            'mean_ms': float(arr.mean()),
            'p50_ms': float(p50),
            'p95_ms': float(p95),
            'max_ms': float(arr.max()),
            'total_ms': float(arr.sum()),
        }

    def get_report(self) -> str:
        lines = ["=== Section Timings ==="]
        for name in sorted(self.sections):
            st = self.section_stats(name)
            lines.append(
                f"{name}: {st['count']} calls, mean {st['mean_ms']:.2f}ms, "
                f"p95 {st['p95_ms']:.2f}ms, total {st['total_ms']:.1f}ms"
            )
        return "\n".join(lines)

    def clear(self):
        self.sections.clear()


@dataclass
class BenchmarkResult:
    """Outcome of one vertex-LP benchmark."""
    instances: int
    lps: int
    optimal: int
    workers: int
    seconds: float
    lps_per_second: float
    build_seconds: float
    solve_ms_p95: float
    cpu_avg: float
    memory_mb: float


def vertex_lp_workload(seed: int, n_fingers: int = 3, n_dirs: int = 8,
                       model: Optional[FrictionModel] = None) -> List[LinearProgram]:
    """
    All vertex LPs of one random sphere grasp, ordered (finger, direction, edge)

    The mean grasp need not be force closure; infeasible LPs are part of
    the workload too.
    """
    model = model or FrictionModel()
    contacts = random_sphere_grasp(n_fingers, seed)
    maps = wrench_maps(contacts, model)
    W = basis_wrenches(contacts, model).matrix
    dirs = search_directions(n_dirs)
    return [
        vertex_program(T @ (c.tangent_frame @ u), W)
        for c, finger_maps in zip(contacts, maps)
        for u in dirs
        for T in finger_maps
    ]


def benchmark_vertex_lps(instances: int = 10, seed: int = 0, n_fingers: int = 3, n_dirs: int = 8,
                         max_workers: Optional[int] = None) -> BenchmarkResult:
    """
    Solve the vertex-LP workload of `instances` random grasps and time it

    Only the solve section counts toward LP/s; building the LPs is timed
    separately.

    Args:
        instances: Number of random grasps (seeds seed, seed + 1, ...)
        seed: First grasp seed
        n_fingers: Fingers per grasp
        n_dirs: Search directions per finger
        max_workers: Batch threads (WRENCHLAB_THREADS when None)

    Returns:
        BenchmarkResult with LP/s and sampled CPU/memory
    """
    if instances < 1:
        raise ValueError(f"instances must be at least 1, got {instances}")
    workers = max_workers if max_workers is not None else batch_workers()
    monitor = PerformanceMonitor(history_size=instances)
    profiler = PerformanceProfiler()
    monitor.record_cpu_memory()

    optimal = 0
    for k in range(instances):
        with profiler.section("build"):
            lps = vertex_lp_workload(seed + k, n_fingers, n_dirs)
        with profiler.section("solve"):
            solutions = solve_batch(lps, max_workers=workers)
        monitor.record_batch(len(lps), profiler.sections["solve"][-1] / 1000)
        monitor.record_cpu_memory()
        optimal += sum(s.status is LpStatus.OPTIMAL for s in solutions)

    solve = profiler.section_stats("solve")
    total_seconds = solve['total_ms'] / 1000
    stats = monitor.get_stats()
    logger.info(f"Vertex-LP benchmark: {monitor.lps_total} LPs in {total_seconds:.3f}s on {workers} worker(s)")
    logger.debug(monitor.get_report())
    logger.debug(profiler.get_report())
    return BenchmarkResult(
        instances=instances,
        lps=monitor.lps_total,
        optimal=int(optimal),
        workers=workers,
        seconds=total_seconds,
        lps_per_second=monitor.lps_total / total_seconds if total_seconds > 0 else float(np.inf),
        build_seconds=profiler.section_stats("build")['total_ms'] / 1000,
        solve_ms_p95=solve['p95_ms'],
        cpu_avg=stats['cpu_avg'],
        memory_mb=stats['memory_mb'],
    )
