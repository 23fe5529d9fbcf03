"""
Unit tests for performance monitoring module
"""

import time
import unittest

import pytest

from src.linprog import LinearProgram
from src.performance_monitor import (
    BenchmarkResult,
    PerformanceMonitor,
    PerformanceProfiler,
    benchmark_vertex_lps,
    vertex_lp_workload,
)


class TestPerformanceMonitor(unittest.TestCase):
    """Test PerformanceMonitor class."""

    def setUp(self):
        """Set up test fixtures."""
        self.monitor = PerformanceMonitor(history_size=10)

    def test_initialization(self):
        """Test monitor initialization."""
        self.assertEqual(len(self.monitor.batch_times), 0)
        self.assertEqual(len(self.monitor.rate_history), 0)
        self.assertEqual(self.monitor.lps_total, 0)

    def test_record_batch(self):
        """Test batch recording."""
        self.monitor.record_batch(100, 0.5)
        self.monitor.record_batch(50, 0.0)

        self.assertEqual(self.monitor.lps_total, 150)
        self.assertEqual(len(self.monitor.batch_times), 2)
        # zero-duration batches carry no rate
        self.assertEqual(list(self.monitor.rate_history), [200.0])

    def test_get_stats(self):
        """Test statistics calculation."""
        self.monitor.record_batch(100, 0.5)
        self.monitor.record_batch(300, 0.5)
        self.monitor.record_cpu_memory()

        stats = self.monitor.get_stats()

        required_keys = [
            'uptime_seconds', 'batches', 'lps_total', 'lps_per_second_avg', 'lps_per_second_min',
            'lps_per_second_max', 'batch_time_avg_ms', 'cpu_percent', 'cpu_avg', 'memory_mb', 'memory_avg_mb',
        ]
        for key in required_keys:
            self.assertIn(key, stats)

        self.assertEqual(stats['lps_per_second_avg'], 400.0)
        self.assertEqual(stats['lps_per_second_min'], 200.0)
        self.assertEqual(stats['lps_per_second_max'], 600.0)
        self.assertAlmostEqual(stats['batch_time_avg_ms'], 500.0)
        self.assertGreater(stats['memory_mb'], 0)

    def test_empty_stats(self):
        """Test statistics with no samples."""
        stats = self.monitor.get_stats()
        self.assertEqual(stats['lps_per_second_avg'], 0.0)
        self.assertEqual(stats['memory_mb'], 0.0)

    def test_history_size(self):
        """Test history is bounded."""
        for _ in range(25):
            self.monitor.record_batch(10, 0.1)
        self.assertEqual(len(self.monitor.batch_times), 10)
        self.assertEqual(self.monitor.lps_total, 250)

    def test_get_report(self):
        """Test report generation."""
        self.monitor.record_batch(100, 0.5)
        self.monitor.record_cpu_memory()

        report = self.monitor.get_report()

        self.assertIn("Performance Report", report)
        self.assertIn("LP throughput:", report)
        self.assertIn("CPU Usage:", report)
        self.assertIn("Memory Usage:", report)

    def test_is_performance_adequate(self):
        """Test performance adequacy check."""
        for _ in range(10):
            self.monitor.rate_history.append(500.0)
            self.monitor.memory_history.append(100.0)
        self.assertTrue(self.monitor.is_performance_adequate())

        self.monitor.rate_history.clear()
        for _ in range(10):
            self.monitor.rate_history.append(10.0)
        self.assertFalse(self.monitor.is_performance_adequate())

    def test_memory_limit(self):
        """Test memory target."""
        self.monitor.rate_history.append(500.0)
        self.monitor.memory_history.append(4096.0)
        self.assertFalse(self.monitor.is_performance_adequate(max_memory_mb=2048.0))


class TestPerformanceProfiler(unittest.TestCase):
    """Test PerformanceProfiler class."""

    def setUp(self):
        """Set up test fixtures."""
        self.profiler = PerformanceProfiler()

    def test_profile_section(self):
        """Test timing a with-block."""
        with self.profiler.section("test_section"):
            time.sleep(0.01)

        stats = self.profiler.section_stats("test_section")
        self.assertIsNotNone(stats)
        self.assertEqual(stats['count'], 1)
        self.assertGreater(stats['mean_ms'], 5)

    def test_section_records_on_error(self):
        """Test a raising block is still timed."""
        with self.assertRaises(RuntimeError):
            with self.profiler.section("boom"):
                raise RuntimeError("boom")
        self.assertEqual(self.profiler.section_stats("boom")['count'], 1)

    def test_percentiles(self):
        """Test summary statistics of recorded timings."""
        for ms in range(1, 101):
            self.profiler.record("solve", float(ms))

        stats = self.profiler.section_stats("solve")
        self.assertEqual(stats['count'], 100)
        self.assertAlmostEqual(stats['mean_ms'], 50.5)
        self.assertAlmostEqual(stats['p50_ms'], 50.5)
        self.assertAlmostEqual(stats['p95_ms'], 95.05)
        self.assertEqual(stats['max_ms'], 100.0)
        self.assertEqual(stats['total_ms'], 5050.0)

    def test_missing_section(self):
        """Test stats for a section never profiled."""
        self.assertIsNone(self.profiler.section_stats("nothing"))

    def test_report_and_clear(self):
        """Test report generation and clearing."""
        with self.profiler.section("solve"):
            pass
        self.assertIn("solve: 1 calls", self.profiler.get_report())

        self.profiler.clear()
        self.assertEqual(len(self.profiler.sections), 0)


class TestVertexBenchmark:

    def test_workload_size(self):
        lps = vertex_lp_workload(seed=0, n_fingers=3, n_dirs=4)
        # fingers x directions x pyramid edges
        assert len(lps) == 3 * 4 * 4
        assert all(isinstance(lp, LinearProgram) for lp in lps)

    def test_benchmark(self):
        result = benchmark_vertex_lps(instances=2, seed=0, n_fingers=3, n_dirs=3, max_workers=1)
        assert isinstance(result, BenchmarkResult)
        assert result.instances == 2
        assert result.lps == 2 * 3 * 3 * 4
        assert 0 <= result.optimal <= result.lps
        assert result.workers == 1
        assert result.lps_per_second > 0
        assert result.build_seconds >= 0
        assert result.solve_ms_p95 > 0

    def test_benchmark_uses_env_workers(self, monkeypatch):
        monkeypatch.setenv("WRENCHLAB_THREADS", "2")
        assert benchmark_vertex_lps(instances=1, n_dirs=3).workers == 2

    def test_needs_instances(self):
        with pytest.raises(ValueError):
            benchmark_vertex_lps(instances=0)

    @pytest.mark.performance
    def test_throughput(self, benchmark_timer):
        with benchmark_timer as timer:
            result = benchmark_vertex_lps(instances=5, n_dirs=8, max_workers=1)
        assert result.lps == 5 * 3 * 8 * 4
        assert timer.elapsed < 60.0
