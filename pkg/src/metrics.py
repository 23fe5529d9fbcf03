"""
Grasp quality metrics and robustness certificates

- min-weight metric ℓ* (primal LP and its dual)
- Ferrari-Canny ε from the facet list
- Chebyshev radius δ (via src.hull)
- containment and ball tolerance certificates
- the per-grasp ordering check 2δℓ* <= ε
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from src.errors import CertificateViolationError, DegenerateHullError, NotForceClosureError
from src.hull import (
    FACET_TOL,
    MARGINAL_TOL,
    Facet,
    chebyshev,
    classify_origin,
    contains_origin,
    facets,
    in_hull,
    min_weight_program,
)
from src.linprog import LinearProgram, LpSolution, LpStatus, solve, value_gradient_eq
from src.wrench import WrenchLike, as_points

# Module logger
logger = logging.getLogger(__name__)


BALL_TOL = 1e-12
BOUND_TOL = 1e-9


class MinWeightStatus(Enum):
    """Outcome of the min-weight LP"""
    OPTIMAL = "optimal"
    NOT_FORCE_CLOSURE = "not_force_closure"


@dataclass
class MinWeightResult:
    """
    Optimum of the min-weight LP.

    Unpacks as (l_star, alpha). An infeasible LP (0 outside the affine span
    of W) has status NOT_FORCE_CLOSURE and l_star = nan.
    """
    status: MinWeightStatus
    l_star: float
    alpha: Optional[np.ndarray]
    solution: Optional[LpSolution] = field(default=None, repr=False)

    @property
    def force_closure(self) -> bool:
        return self.status is MinWeightStatus.OPTIMAL and self.l_star >= -FACET_TOL

    def __iter__(self):
        return iter((self.l_star, self.alpha))


@dataclass
class DualResult:
    """Optimum of the dual min-weight LP; unpacks as (phi_star, nu)."""
    status: MinWeightStatus
    phi_star: float
    nu: Optional[np.ndarray]

    def __iter__(self):
        return iter((self.phi_star, self.nu))


class CertificateKind(Enum):
    """Which robustness result a certificate instantiates"""
    CONTAINMENT = "containment"
    BALL = "ball"


@dataclass
class ToleranceCertificate:
    kind: CertificateKind
    per_wrench_ok: List[bool]
    certified: bool
    marginal: bool = False


@dataclass
class LemmaPair:
    """A unit vector a and offset b with a·w_l + b >= 0 for all wrenches."""
    a: np.ndarray
    b: float
    min_slack: float

    @property
    def feasible(self) -> bool:
        return self.min_slack >= -FACET_TOL and abs(np.linalg.norm(self.a) - 1.0) <= FACET_TOL


@dataclass
class GraspMetrics:
    """
    Quality numbers of one wrench set.

    l_star_normalized is n_w·ℓ* (range [0, 1]); l_star_over_nw keeps the
    literal ℓ*/n_w. Metrics that need force closure or a full-dimensional
    hull are nan when unavailable.
    """
    force_closure: bool
    n_w: int
    l_star: float
    l_star_normalized: float
    l_star_over_nw: float
    epsilon: float
    delta: float
    bound_holds: Optional[bool]
    marginal: bool = False
    warnings: List[str] = field(default_factory=list)


def min_weight(W: WrenchLike) -> MinWeightResult:
    """
    Solve the min-weight LP: maximize the smallest convex weight that
    places the origin in conv(W).

    Args:
        W: Wrench set

    Returns:
        MinWeightResult; l_star <= 1/n_w always, l_star >= 0 iff force closure
    """
    pts = as_points(W)
    sol = solve(min_weight_program(pts))
    if sol.status is not LpStatus.OPTIMAL:
        logger.debug(f"Min-weight LP {sol.status.value}: not force closure")
        return MinWeightResult(MinWeightStatus.NOT_FORCE_CLOSURE, float("nan"), None, sol)
    n = pts.shape[0]
    return MinWeightResult(MinWeightStatus.OPTIMAL, float(sol.value), sol.z_star[:n].copy(), sol)


def min_weight_dual(W: WrenchLike) -> DualResult:
    """
    Dual of the min-weight LP:

        minimize φ  s.t.  ν·w_l + φ >= 0,  Σ_l (ν·w_l + φ) = 1

    Strong duality makes φ* equal ℓ* whenever the primal is feasible.
    """
    pts = as_points(W)
    n, d = pts.shape
    c = np.zeros(d + 1)
    c[-1] = -1.0
    A_ub = -np.hstack([pts, np.ones((n, 1))])
    A_eq = np.concatenate([pts.sum(axis=0), [float(n)]]).reshape(1, -1)
    lp = LinearProgram(c=c, A_eq=A_eq, b_eq=[1.0], A_ub=A_ub, b_ub=np.zeros(n),
                       bounds=[(-np.inf, np.inf)] * (d + 1))
    sol = solve(lp)
    if sol.status is not LpStatus.OPTIMAL:
        return DualResult(MinWeightStatus.NOT_FORCE_CLOSURE, float("nan"), None)
    return DualResult(MinWeightStatus.OPTIMAL, -float(sol.value), sol.z_star[:d].copy())


def min_weight_gradient(W: WrenchLike) -> np.ndarray:
    """
    Gradient of ℓ* with respect to the wrench coordinates, shape (n_w, d).

    Raises:
        NotForceClosureError: if the LP is infeasible
        DegenerateBasisError: at a degenerate optimal basis
    """
    pts = as_points(W)
    result = min_weight(pts)
    if result.status is not MinWeightStatus.OPTIMAL:
        raise NotForceClosureError("min-weight LP infeasible")
    n, d = pts.shape
    lp = min_weight_program(pts)
    grad = value_gradient_eq(lp, result.solution)
    return grad[:d, :n].T


def _min_facet(W: WrenchLike) -> Facet:
    if not contains_origin(W):
        raise NotForceClosureError()
    fl = facets(W)
    k = int(np.argmin(fl.offsets))
    return fl.facets[k]


def ferrari_canny(W: WrenchLike) -> float:
    """
    Radius of the largest origin-centered ball inside conv(W).

    Raises:
        NotForceClosureError: if the origin is outside the hull
        DegenerateHullError: if the hull is lower-dimensional
    """
    return max(0.0, _min_facet(W).b)


def lemma_pair(W: WrenchLike) -> LemmaPair:
    """The facet-derived (a*, b* = ε) pair, checked against every wrench."""
    pts = as_points(W)
    facet = _min_facet(pts)
    a = -facet.a
    b = max(0.0, facet.b)
    slack = float(np.min(pts @ a + b))
    return LemmaPair(a=a, b=b, min_slack=slack)


def _require_same_layout(W_bar: np.ndarray, W: np.ndarray):
    if W_bar.shape != W.shape:
        raise ValueError(f"wrench sets differ in shape: {W_bar.shape} vs {W.shape}")


def _confirm(kind: CertificateKind, flags: List[bool], W: np.ndarray, marginal: bool) -> ToleranceCertificate:
    certified = all(flags)
    if certified:
        verdict = classify_origin(W)
        if not verdict.contains:
            raise CertificateViolationError(
                f"{kind.value} certificate holds but the perturbed set is not force closure "
                f"(l* = {verdict.l_star:.3e})"
            )
        marginal = marginal or verdict.marginal
    if marginal:
        logger.warning(f"Marginal {kind.value} certificate")
    return ToleranceCertificate(kind=kind, per_wrench_ok=flags, certified=certified, marginal=marginal)


def certify_containment(W_bar: WrenchLike, W: WrenchLike) -> ToleranceCertificate:
    """
    Containment certificate: if every deviation w_l − w̄_l lies in −conv(W̄),
    the perturbed set is force closure.

    A certified result is confirmed with an origin-membership LP on W; a
    failed confirmation raises CertificateViolationError.
    """
    nominal = as_points(W_bar)
    perturbed = as_points(W)
    _require_same_layout(nominal, perturbed)
    flags = [in_hull(nominal, wb - w) for wb, w in zip(nominal, perturbed)]
    return _confirm(CertificateKind.CONTAINMENT, flags, perturbed, marginal=False)


def certify_ball(W_bar: WrenchLike, W: WrenchLike) -> ToleranceCertificate:
    """
    Ball certificate: every wrench within ε(W̄) of its nominal value.

    Raises:
        NotForceClosureError: if W̄ is not force closure
    """
    nominal = as_points(W_bar)
    perturbed = as_points(W)
    _require_same_layout(nominal, perturbed)
    eps = ferrari_canny(nominal)
    dist = np.linalg.norm(perturbed - nominal, axis=1)
    flags = [bool(r <= eps + BALL_TOL) for r in dist]
    slack = eps - float(np.max(dist))
    return _confirm(CertificateKind.BALL, flags, perturbed, marginal=0.0 <= slack < MARGINAL_TOL)


def bound_check(W: WrenchLike) -> Tuple[float, float, bool]:
    """
    Per-grasp ordering check.

    Returns:
        (2·δ·ℓ*, ε, 2·δ·ℓ* <= ε + 1e-9)

    Raises:
        NotForceClosureError: if W is not force closure
    """
    result = min_weight(W)
    if not result.force_closure:
        raise NotForceClosureError()
    delta, _ = chebyshev(W)
    eps = ferrari_canny(W)
    lhs = 2.0 * delta * max(result.l_star, 0.0)
    return lhs, eps, bool(lhs <= eps + BOUND_TOL)


def grasp_metrics(W: WrenchLike) -> GraspMetrics:
    """Every metric of one wrench set, with nan for the ones that do not apply."""
    pts = as_points(W)
    n = pts.shape[0]
    nan = float("nan")
    warnings: List[str] = []

    verdict = classify_origin(pts)
    l_star = verdict.l_star
    if verdict.marginal:
        warnings.append("marginal force-closure verdict")

    try:
        delta, _ = chebyshev(pts)
    except DegenerateHullError as e:
        delta = nan
        warnings.append(str(e))

    epsilon = nan
    bound_holds: Optional[bool] = None
    marginal = verdict.marginal
    if verdict.contains and np.isfinite(delta):
        try:
            epsilon = ferrari_canny(pts)
        except NotForceClosureError:
            # The min-weight LP and the membership LP disagree at the boundary
            epsilon = 0.0
            marginal = True
            warnings.append("marginal force-closure verdict: membership LP rejects the origin, ε set to 0")
            logger.warning(f"Membership LP disagrees with l* = {l_star:.3e}; reporting ε = 0")
        bound_holds = bool(2.0 * delta * max(l_star, 0.0) <= epsilon + BOUND_TOL)
        if not bound_holds:
            logger.warning(f"Ordering check failed: 2δℓ* = {2 * delta * l_star:.6e} > ε = {epsilon:.6e}")

    return GraspMetrics(
        force_closure=verdict.contains,
        n_w=n,
        l_star=l_star,
        l_star_normalized=n * l_star if np.isfinite(l_star) else nan,
        l_star_over_nw=l_star / n if np.isfinite(l_star) else nan,
        epsilon=epsilon,
        delta=delta,
        bound_holds=bound_holds,
        marginal=marginal,
        warnings=warnings,
    )
