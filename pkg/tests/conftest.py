"""
Shared pytest fixtures for WrenchLab test suite

This module provides reusable fixtures for:
- Seeded random generators
- Canonical wrench sets (cross-polytope, non-closure sets)
- Sphere grasps with known geometry
- Temporary settings files and input documents

Usage:
    def test_something(cross_polytope_set, ring_contacts):
        contacts, model = ring_contacts
        pass
"""

import sys
import time
from pathlib import Path
from typing import Generator

import numpy as np
import pytest

# Add project root to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.oracle import make_rng
from src.settings import SETTINGS_ENV, Settings
from tests.helpers.grasp_factory import cross_polytope, ring_grasp, shifted_set


# ============================================================================
# Random Generator Fixtures
# ============================================================================

@pytest.fixture
def rng() -> np.random.Generator:
    """
    Provide a fresh Philox generator with a fixed seed.

    Every test gets its own stream, so test order never changes the draws.
    """
    return make_rng(12345)


# ============================================================================
# Wrench Set Fixtures
# ============================================================================

@pytest.fixture
def cross_polytope_set():
    """The twelve wrenches ±e_i of R^6."""
    return cross_polytope()


@pytest.fixture
def non_closure_set():
    """Twelve wrenches with first coordinate 1 (origin outside the hull)."""
    return shifted_set()


# ============================================================================
# Grasp Fixtures
# ============================================================================

@pytest.fixture
def ring_contacts():
    """
    Three equatorial contacts on a 5 cm sphere, 120° apart, inward normals,
    isotropic tangent variance 1e-3, μ = 0.5, square pyramids.
    """
    return ring_grasp(n_fingers=3)


@pytest.fixture
def four_finger_contacts():
    """Four contacts on the circle z = 0.01 of a 5 cm sphere."""
    return ring_grasp(n_fingers=4, height=0.01, variance=5e-4)


# ============================================================================
# Settings Fixtures
# ============================================================================

@pytest.fixture
def temp_settings(tmp_path: Path, monkeypatch) -> Generator[Settings, None, None]:
    """
    Provide Settings backed by a temporary file.

    WRENCHLAB_SETTINGS is pointed at the same file so CLI runs inside the
    test see it too.
    """
    settings_file = tmp_path / "settings.json"
    monkeypatch.setenv(SETTINGS_ENV, str(settings_file))
    yield Settings(str(settings_file))


@pytest.fixture(autouse=True)
def single_thread_batches(monkeypatch):
    """Keep batch solves single-threaded unless a test opts in."""
    monkeypatch.setenv("WRENCHLAB_THREADS", "1")


# ============================================================================
# Performance Testing Fixtures
# ============================================================================

@pytest.fixture
def benchmark_timer():
    """
    Wall-clock timer usable as a context manager; `elapsed` is in seconds.

    Usage:
        def test_batch_speed(benchmark_timer):
            with benchmark_timer as timer:
                solve_batch(lps)
            assert timer.elapsed < 1.0
    """

    class WallClock:
        elapsed: float = float("nan")

        def __enter__(self):
            self._t0 = time.perf_counter()
            return self

        def __exit__(self, *exc):
            self.elapsed = time.perf_counter() - self._t0
            return False

    return WallClock()


# ============================================================================
# Pytest Configuration Hooks
# ============================================================================

def pytest_collection_modifyitems(config, items):
    """
    Pytest hook to modify collected test items.

    Automatically marks tests based on filename patterns:
    - test_cli.py, test_loader.py, test_settings.py, test_reports.py -> @pytest.mark.integration
    - test_performance_*.py -> @pytest.mark.performance
    - everything else without a marker -> @pytest.mark.unit
    """
    integration_files = ("test_cli.py", "test_loader.py", "test_settings.py", "test_reports.py")
    for item in items:
        if any(name in item.nodeid for name in integration_files) or "integration" in item.nodeid:
            item.add_marker(pytest.mark.integration)

        if "performance" in item.nodeid:
            item.add_marker(pytest.mark.performance)

        if not any(item.get_closest_marker(m) for m in ("integration", "performance", "slow")):
            item.add_marker(pytest.mark.unit)
