"""
Monte Carlo oracles and random instance generators

Every sampler takes an explicit seed and draws from a Philox
counter-based generator; nothing touches a global RNG.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from src.errors import SampleRejectionError
from src.hull import contains_origin, membership_program
from src.linprog import LpStatus, solve_batch
from src.pong import Polygon2
from src.wrench import ContactSpec, FrictionModel, WrenchSet, as_points, wrench_maps, wrenches_from_maps

# Module logger
logger = logging.getLogger(__name__)


MIN_SAMPLES = 1000
MAX_REJECTIONS = 10_000


def make_rng(seed: int) -> np.random.Generator:
    """Seeded Philox generator."""
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class McEstimate:
    p_hat: float
    n_samples: int
    std_err: float

    @classmethod
    def from_count(cls, hits: int, n_samples: int) -> "McEstimate":
        p = hits / n_samples
        return cls(p_hat=p, n_samples=n_samples, std_err=float(np.sqrt(p * (1.0 - p) / n_samples)))

    def upper(self, k: float = 3.0) -> float:
        return self.p_hat + k * self.std_err


def _check_samples(n_samples: int):
    if n_samples < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {n_samples}")


def sample_normals(contacts: Sequence[ContactSpec], n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Random normals n = n̄ + [t1 t2] z, z ~ N(0, Σ), shape (n_samples, n_f, 3)."""
    n_f = len(contacts)
    sigmas = np.array([c.sigmas for c in contacts])
    z = rng.standard_normal((n_samples, n_f, 2)) * sigmas[None, :, :]
    frames = np.array([c.tangent_frame for c in contacts])
    n_bar = np.array([c.n_bar for c in contacts])
    return n_bar[None] + np.einsum("iab,sib->sia", frames, z)


def _closure_flags(maps: np.ndarray, normals: np.ndarray, n_sides: int) -> np.ndarray:
    lps = []
    for sample in normals:
        pts = wrenches_from_maps(maps, sample, n_sides).points
        lps.append(membership_program(pts, np.zeros(6)))
    return np.array([s.status is LpStatus.OPTIMAL for s in solve_batch(lps)])


def mc_force_closure(contacts: Sequence[ContactSpec], model: FrictionModel, n_samples: int, seed: int) -> McEstimate:
    """
    Fraction of sampled normal tuples whose wrenches are force closure.

    Wrench maps stay fixed at the mean normals.
    """
    _check_samples(n_samples)
    rng = make_rng(seed)
    maps = wrench_maps(contacts, model)
    normals = sample_normals(contacts, n_samples, rng)
    hits = int(np.sum(_closure_flags(maps, normals, model.n_sides)))
    logger.debug(f"MC force closure: {hits}/{n_samples}")
    return McEstimate.from_count(hits, n_samples)


def mc_containment_bound(contacts: Sequence[ContactSpec], model: FrictionModel, n_samples: int,
                         seed: int) -> McEstimate:
    """
    Fraction of samples in which every wrench deviation lies in −conv(W̄).

    Uses the same draws as `mc_force_closure` for the same seed, so the
    estimate never exceeds that one.
    """
    _check_samples(n_samples)
    rng = make_rng(seed)
    maps = wrench_maps(contacts, model)
    W_bar = wrenches_from_maps(maps, np.array([c.n_bar for c in contacts]), model.n_sides).points
    normals = sample_normals(contacts, n_samples, rng)

    lps = []
    for sample in normals:
        deviations = wrenches_from_maps(maps, sample, model.n_sides).points - W_bar
        lps.extend(membership_program(W_bar, -dev) for dev in deviations)
    flags = np.array([s.status is LpStatus.OPTIMAL for s in solve_batch(lps)])
    hits = int(np.sum(flags.reshape(n_samples, -1).all(axis=1)))
    return McEstimate.from_count(hits, n_samples)


def mc_gauss_polygon(poly: Polygon2, mu: Sequence[float], sigma: Sequence[float], n_samples: int,
                     seed: int) -> McEstimate:
    """Fraction of N(mu, diag(σ²)) samples inside a convex polygon."""
    _check_samples(n_samples)
    if poly.area == 0.0:
        return McEstimate.from_count(0, n_samples)
    rng = make_rng(seed)
    pts = np.asarray(mu, dtype=float) + rng.standard_normal((n_samples, 2)) * np.asarray(sigma, dtype=float)
    return McEstimate.from_count(int(np.sum(poly.contains(pts))), n_samples)


def random_force_closure_set(n_w: int, seed: int, max_rejections: int = MAX_REJECTIONS) -> WrenchSet:
    """
    Standard-normal point cloud in R^6 that contains the origin.

    Raises:
        SampleRejectionError: after max_rejections failed draws
    """
    if n_w < 7:
        raise ValueError(f"need at least 7 wrenches for a full-dimensional hull, got {n_w}")
    rng = make_rng(seed)
    for attempt in range(max_rejections):
        pts = rng.standard_normal((n_w, 6))
        if contains_origin(pts):
            logger.debug(f"Force-closure set accepted after {attempt + 1} draws")
            return WrenchSet(pts)
    raise SampleRejectionError(f"no force-closure set in {max_rejections} draws")


def acceptance_rate(n_w: int, trials: int, seed: int) -> float:
    """Fraction of standard-normal clouds of size n_w that contain the origin."""
    rng = make_rng(seed)
    hits = sum(contains_origin(rng.standard_normal((n_w, 6))) for _ in range(trials))
    return hits / trials


def perturb_in_hull(W_bar: WrenchSet, rng: np.random.Generator) -> WrenchSet:
    """w_l = w̄_l + Δ_l with each Δ_l a random point of −conv(W̄)."""
    pts = as_points(W_bar)
    weights = rng.dirichlet(np.ones(len(pts)), size=len(pts))
    return WrenchSet(pts - weights @ pts, n_sides=W_bar.n_sides)


def perturb_in_ball(W_bar: WrenchSet, radius: float, rng: np.random.Generator) -> WrenchSet:
    """w_l = w̄_l + Δ_l with ‖Δ_l‖ <= radius, uniform in the ball."""
    pts = as_points(W_bar)
    n, d = pts.shape
    u = rng.standard_normal((n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = radius * rng.uniform(0.0, 1.0, size=n) ** (1.0 / d)
    return WrenchSet(pts + r[:, None] * u, n_sides=W_bar.n_sides)


def random_sphere_grasp(
    n_fingers: int,
    seed: int,
    radius: float = 0.05,
    variance_range: Tuple[float, float] = (1e-4, 1e-2),
) -> List[ContactSpec]:
    """Contacts at uniform points of a sphere with inward normals and random diagonal variances."""
    rng = make_rng(seed)
    u = rng.standard_normal((n_fingers, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    lo, hi = variance_range
    variances = np.exp(rng.uniform(np.log(lo), np.log(hi), size=(n_fingers, 2)))
    return [
        ContactSpec.from_point_normal(radius * p, -p, sigma1_sq=v[0], sigma2_sq=v[1])
        for p, v in zip(u, variances)
    ]
