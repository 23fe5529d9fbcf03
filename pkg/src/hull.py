"""
Convex hull geometry for wrench sets

Origin and point membership are decided by feasibility LPs on the
in-house simplex. Facets come from qhull (scipy.spatial.ConvexHull) and are
normalized to unit outward normals; the Chebyshev ball is an LP over the
facet list.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog as scipy_linprog
from scipy.spatial import ConvexHull, QhullError

from src.errors import DegenerateHullError
from src.linprog import LinearProgram, LpStatus, solve
from src.wrench import WrenchLike, as_points

# Module logger
logger = logging.getLogger(__name__)


FACET_TOL = 1e-9
MARGINAL_TOL = 1e-6
RANK_TOL = 1e-10
JITTER = 1e-9
JITTER_SEED = 0x5EED


@dataclass(frozen=True)
class Facet:
    """Supporting hyperplane {x : a·x = b} with the hull on the side a·x <= b."""
    a: np.ndarray
    b: float

    def signed_distance(self, p: np.ndarray) -> np.ndarray:
        """a·p − b; non-positive for points inside the half-space."""
        return np.asarray(p, dtype=float) @ self.a - self.b


@dataclass
class FacetList:
    """Facets of one hull plus whether they were computed on a jittered copy."""
    facets: List[Facet]
    perturbed: bool = False

    @property
    def normals(self) -> np.ndarray:
        return np.array([f.a for f in self.facets])

    @property
    def offsets(self) -> np.ndarray:
        return np.array([f.b for f in self.facets])

    def __len__(self) -> int:
        return len(self.facets)

    def __iter__(self):
        return iter(self.facets)


@dataclass(frozen=True)
class OriginVerdict:
    """Force-closure verdict with a flag for near-boundary cases."""
    contains: bool
    marginal: bool
    l_star: float


def membership_program(points: np.ndarray, p: np.ndarray) -> LinearProgram:
    """Feasibility LP: α >= 0, Σα = 1, Σ α_l w_l = p."""
    n = points.shape[0]
    A_eq = np.vstack([points.T, np.ones((1, n))])
    b_eq = np.concatenate([np.asarray(p, dtype=float), [1.0]])
    return LinearProgram(c=np.zeros(n), A_eq=A_eq, b_eq=b_eq)


def min_weight_program(points: np.ndarray) -> LinearProgram:
    """
    The min-weight LP over variables (α, ℓ):

        maximize ℓ  s.t.  Σ α_l w_l = 0,  Σ α_l = 1,  α_l >= ℓ  for all l

    with α and ℓ free. The first d equality rows carry W.
    """
    n, d = points.shape
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_eq = np.zeros((d + 1, n + 1))
    A_eq[:d, :n] = points.T
    A_eq[d, :n] = 1.0
    b_eq = np.zeros(d + 1)
    b_eq[d] = 1.0
    A_ub = np.hstack([-np.eye(n), np.ones((n, 1))])
    b_ub = np.zeros(n)
    bounds = [(-np.inf, np.inf)] * (n + 1)
    return LinearProgram(c=c, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub, bounds=bounds)


def in_hull(points: WrenchLike, p: Sequence[float], tol_feas: Optional[float] = None) -> bool:
    """True iff p is a convex combination of the points (within tol_feas)."""
    pts = as_points(points)
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size != pts.shape[1]:
        raise ValueError(f"point has dimension {p.size}, hull has {pts.shape[1]}")
    sol = solve(membership_program(pts, p), tol_feas=tol_feas)
    return sol.status is LpStatus.OPTIMAL


def contains_origin(W: WrenchLike, tol_feas: Optional[float] = None) -> bool:
    """
    Force-closure test: does conv(W) contain the origin?

    Args:
        W: Wrench set or point array
        tol_feas: Feasibility tolerance of the membership LP (solver default when None)

    Returns:
        True iff convex weights α with W α = 0 exist
    """
    pts = as_points(W)
    return in_hull(pts, np.zeros(pts.shape[1]), tol_feas=tol_feas)


def classify_origin(W: WrenchLike) -> OriginVerdict:
    """Origin membership from the min-weight LP, marking |ℓ*| <= 1e-6 as marginal."""
    pts = as_points(W)
    sol = solve(min_weight_program(pts))
    if sol.status is not LpStatus.OPTIMAL:
        return OriginVerdict(contains=False, marginal=False, l_star=float("nan"))
    l_star = float(sol.value)
    contains = l_star >= -FACET_TOL
    marginal = abs(l_star) <= MARGINAL_TOL
    if marginal:
        logger.warning(f"Marginal force-closure verdict (l* = {l_star:.3e})")
    return OriginVerdict(contains=contains, marginal=marginal, l_star=l_star)


def check_full_dimensional(pts: np.ndarray):
    """Raise DegenerateHullError unless the points span their ambient space."""
    n, d = pts.shape
    if n < d + 1:
        raise DegenerateHullError(f"degenerate hull: {n} points cannot span R^{d}")
    centered = pts - pts.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    if s[0] == 0.0 or s[-1] <= RANK_TOL * s[0]:
        raise DegenerateHullError()


def _jittered(pts: np.ndarray) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(JITTER_SEED))
    scale = max(1.0, float(np.max(np.abs(pts))))
    return pts + JITTER * scale * rng.uniform(-1.0, 1.0, size=pts.shape)


def _merge_duplicates(normals: np.ndarray, offsets: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    kept_a: List[np.ndarray] = []
    kept_b: List[float] = []
    for a, b in zip(normals, offsets):
        if kept_a:
            A = np.asarray(kept_a)
            same = (np.max(np.abs(A - a), axis=1) <= FACET_TOL) & (np.abs(np.asarray(kept_b) - b) <= FACET_TOL)
            if np.any(same):
                continue
        kept_a.append(a)
        kept_b.append(b)
    return np.asarray(kept_a), np.asarray(kept_b)


def facets(points: WrenchLike) -> FacetList:
    """
    Enumerate the facets of conv(points).

    A copy of the input jittered by 1e-9 (seeded) is used when qhull rejects
    the original as numerically degenerate; the result then carries
    perturbed=True and offsets are re-fitted so every original point lies
    inside every facet.

    Raises:
        DegenerateHullError: if the hull is lower-dimensional
    """
    pts = as_points(points)
    check_full_dimensional(pts)

    perturbed = False
    try:
        hull = ConvexHull(pts)
    except QhullError as e:
        logger.warning(f"qhull rejected input ({str(e).splitlines()[0] if str(e) else 'error'}), retrying jittered")
        try:
            hull = ConvexHull(_jittered(pts))
        except QhullError:
            raise DegenerateHullError()
        perturbed = True

    normals = hull.equations[:, :-1]
    norms = np.linalg.norm(normals, axis=1, keepdims=True)
    normals = normals / norms
    offsets = -hull.equations[:, -1] / norms[:, 0]
    if perturbed:
        offsets = np.max(pts @ normals.T, axis=0)

    normals, offsets = _merge_duplicates(normals, offsets)
    worst = float(np.max(pts @ normals.T - offsets, initial=-np.inf))
    if worst > FACET_TOL * max(1.0, float(np.max(np.abs(pts)))):
        raise DegenerateHullError(f"degenerate hull: facet check failed by {worst:.3e}")

    logger.debug(f"{len(offsets)} facets from {pts.shape[0]} points (perturbed={perturbed})")
    return FacetList([Facet(a=a, b=float(b)) for a, b in zip(normals, offsets)], perturbed=perturbed)


def chebyshev(points: WrenchLike) -> Tuple[float, np.ndarray]:
    """
    Largest ball inside conv(points).

    Solves  maximize δ  s.t.  a·c + δ <= b  for every unit-normal facet.

    Returns:
        (delta, center)

    Raises:
        DegenerateHullError: if the hull is lower-dimensional
    """
    fl = facets(points)
    A = fl.normals
    b = fl.offsets
    d = A.shape[1]
    cost = np.zeros(d + 1)
    cost[-1] = -1.0
    A_ub = np.hstack([A, np.ones((A.shape[0], 1))])
    bounds = [(None, None)] * d + [(0, None)]
    result = scipy_linprog(cost, A_ub=A_ub, b_ub=b, bounds=bounds, method="highs")
    if not result.success:
        raise DegenerateHullError(f"degenerate hull: Chebyshev LP failed ({result.message})")
    delta = float(result.x[-1])
    if delta <= 0.0:
        raise DegenerateHullError()
    return delta, np.asarray(result.x[:d])
