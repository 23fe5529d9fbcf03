"""
Probabilistic force-closure lower bound (PONG)

Each finger's random normal is n = n̄ + [t1 t2] z with z ~ N(0, diag(σ1², σ2²)).
For a fixed set of tangent search directions u_k we find the longest step
θ_k such that every pyramid edge's wrench deviation T_j (θ_k d_k) stays in
−conv(W̄). The 2-D hull of the points θ_k u_k is a polygon of tangent
perturbations that provably keeps the grasp in force closure, so the
product over fingers of the Gaussian mass of those polygons lower-bounds
the probability of force closure.

Gaussian mass over a polygon is reduced to edge integrals by Green's
theorem and evaluated with composite Gauss-Legendre quadrature.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.spatial import ConvexHull, QhullError
from scipy.special import erf

from src.errors import DegenerateBasisError, OrientationError
from src.hull import contains_origin, in_hull
from src.linprog import LinearProgram, LpSolution, LpStatus, solve, solve_batch, value_gradient_eq
from src.wrench import (
    VARIANCE_FLOOR,
    ContactSpec,
    FrictionModel,
    WrenchSet,
    generator_jacobians,
    generators,
    hat,
    wrench_map,
    wrenches_from_maps,
)

# Module logger
logger = logging.getLogger(__name__)


THETA_MAX = 10.0
AREA_TOL = 1e-14
CONVEX_TOL = 1e-9
TIE_TOL = 1e-9
MAX_PANELS = 8192
PANEL_SIGMAS = 2.0
FD_STEP = 1e-6


class GradMode(Enum):
    """How l_fc_gradient differentiates through the vertex LPs"""
    IMPLICIT_KKT = "implicit_kkt"
    FINITE_DIFFERENCE = "finite_difference"


@dataclass(frozen=True)
class PongConfig:
    n_dirs: int = 8
    quad_nodes: int = 32
    grad_mode: GradMode = GradMode.IMPLICIT_KKT
    theta_max: float = THETA_MAX

    def __post_init__(self):
        if self.n_dirs < 3:
            raise ValueError(f"n_dirs must be at least 3, got {self.n_dirs}")
        if self.quad_nodes < 8:
            raise ValueError(f"quad_nodes must be at least 8, got {self.quad_nodes}")
        if not self.theta_max > 0:
            raise ValueError("theta_max must be positive")


@dataclass
class Polygon2:
    """
    Counterclockwise polygon in tangent coordinates.

    ray_index[m] is the search direction vertex m came from, when the
    polygon was built from vertex LPs.
    """
    vertices: np.ndarray
    ray_index: Tuple[int, ...] = ()

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 2)

    @classmethod
    def empty(cls) -> "Polygon2":
        return cls(np.zeros((0, 2)))

    @property
    def signed_area(self) -> float:
        v = self.vertices
        if len(v) < 3:
            return 0.0
        w = np.roll(v, -1, axis=0)
        return 0.5 * float(np.sum(v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]))

    @property
    def area(self) -> float:
        return abs(self.signed_area)

    def is_convex(self, tol: float = CONVEX_TOL) -> bool:
        v = self.vertices
        if len(v) < 3:
            return True
        a = np.roll(v, -1, axis=0) - v
        b = np.roll(v, -2, axis=0) - np.roll(v, -1, axis=0)
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        return bool(np.all(cross >= -tol))

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Point-in-convex-polygon test for an (n, 2) array."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        v = self.vertices
        if len(v) < 3 or self.area <= AREA_TOL:
            return np.zeros(len(pts), dtype=bool)
        inside = np.ones(len(pts), dtype=bool)
        for p, q in zip(v, np.roll(v, -1, axis=0)):
            edge = q - p
            rel = pts - p
            inside &= edge[0] * rel[:, 1] - edge[1] * rel[:, 0] >= 0.0
        return inside

    def edge_midpoints(self) -> np.ndarray:
        v = self.vertices
        return 0.5 * (v + np.roll(v, -1, axis=0))

    def reversed(self) -> "Polygon2":
        return Polygon2(self.vertices[::-1].copy(), tuple(reversed(self.ray_index)))

    def __len__(self) -> int:
        return len(self.vertices)


@dataclass
class PongResult:
    """
    L_FC of one grasp plus diagnostics. Unpacks as (value, per_finger).

    tightness[i] is finger i's polygon area over the area of the regular
    n_dirs-gon at that finger's largest θ.
    """
    value: float
    per_finger: List[float]
    polygons: List[Polygon2]
    thetas: np.ndarray
    clamped: np.ndarray
    tightness: List[float]
    mean_force_closure: bool
    W_bar: Optional[WrenchSet] = None
    sigmas: Optional[np.ndarray] = None
    _table: Optional["_VertexTable"] = field(default=None, repr=False)

    @property
    def any_clamped(self) -> bool:
        return bool(np.any(self.clamped))

    def __iter__(self):
        return iter((self.value, self.per_finger))


@dataclass
class LfcGradient:
    """
    Gradient of L_FC with the contact frames held fixed.

    d_x and d_n_bar have shape (n_f, 3); d_sigma_sq has shape (n_f, 2).
    """
    value: float
    d_x: np.ndarray
    d_n_bar: np.ndarray
    d_sigma_sq: np.ndarray
    mode: GradMode
    fallback: bool = False
    reason: str = ""


@dataclass
class _VertexTable:
    maps: np.ndarray
    lps: List[LinearProgram]
    solutions: List[LpSolution]
    per_j: np.ndarray
    n_sides: int
    n_dirs: int

    def flat(self, i: int, k: int, j: int) -> int:
        return (i * self.n_dirs + k) * self.n_sides + j


class _FallbackNeeded(Exception):
    pass


def search_directions(n_dirs: int) -> np.ndarray:
    """Unit directions u_k in tangent coordinates, equally spaced from t1."""
    angles = 2.0 * np.pi * np.arange(n_dirs) / n_dirs
    return np.column_stack([np.cos(angles), np.sin(angles)])


def vertex_program(e: np.ndarray, W: np.ndarray) -> LinearProgram:
    # maximize θ  s.t.  θ e + W α = 0,  Σα = 1,  θ, α >= 0
    n = W.shape[1]
    c = np.zeros(n + 1)
    c[0] = 1.0
    A_eq = np.zeros((7, n + 1))
    A_eq[:6, 0] = e
    A_eq[:6, 1:] = W
    A_eq[6, 1:] = 1.0
    b_eq = np.zeros(7)
    b_eq[6] = 1.0
    return LinearProgram(c=c, A_eq=A_eq, b_eq=b_eq)


def _theta_from(sol: LpSolution, theta_max: float) -> Tuple[float, bool]:
    if sol.status is LpStatus.OPTIMAL:
        if sol.value > theta_max:
            return theta_max, True
        return max(0.0, float(sol.value)), False
    if sol.status is LpStatus.UNBOUNDED:
        return theta_max, True
    if sol.status is LpStatus.ERROR:
        logger.warning(f"Vertex LP failed ({sol.message}); using θ = 0")
    return 0.0, False


def vertex_lp(
    i: int,
    d: Sequence[float],
    W_bar: WrenchSet,
    T_maps: np.ndarray,
    theta_max: float = THETA_MAX,
) -> float:
    """
    Longest step θ >= 0 along tangent direction d for finger i such that
    T_j (θ d) ∈ −conv(W̄) for every pyramid edge j.

    Computed as the minimum over j of single-edge LPs.

    Args:
        i: Finger index
        d: 3-D tangent direction
        W_bar: Mean wrench set
        T_maps: Wrench maps, shape (n_f, n_s, 6, 3)
        theta_max: Clamp for unbounded or runaway steps

    Returns:
        θ; 0 when the origin is outside conv(W̄)
    """
    d = np.asarray(d, dtype=float).reshape(3)
    W = W_bar.matrix
    thetas = []
    for T in T_maps[i]:
        theta, clamped = _theta_from(solve(vertex_program(T @ d, W)), theta_max)
        if clamped:
            logger.warning(f"Vertex LP for finger {i} clamped at θ = {theta_max}")
        thetas.append(theta)
    return float(min(thetas))


def joint_vertex_lp(
    i: int,
    d: Sequence[float],
    W_bar: WrenchSet,
    T_maps: np.ndarray,
    theta_max: float = THETA_MAX,
) -> float:
    """The same step as `vertex_lp`, from one LP with a weight vector per edge."""
    d = np.asarray(d, dtype=float).reshape(3)
    W = W_bar.matrix
    n = W.shape[1]
    maps = T_maps[i]
    n_s = len(maps)
    n_vars = 1 + n_s * n
    c = np.zeros(n_vars)
    c[0] = 1.0
    A_eq = np.zeros((7 * n_s, n_vars))
    b_eq = np.zeros(7 * n_s)
    for j, T in enumerate(maps):
        rows = slice(7 * j, 7 * j + 6)
        cols = slice(1 + j * n, 1 + (j + 1) * n)
        A_eq[rows, 0] = T @ d
        A_eq[rows, cols] = W
        A_eq[7 * j + 6, cols] = 1.0
        b_eq[7 * j + 6] = 1.0
    theta, _ = _theta_from(solve(LinearProgram(c=c, A_eq=A_eq, b_eq=b_eq)), theta_max)
    return theta


def _polygon_from_rays(thetas: np.ndarray, dirs: np.ndarray) -> Polygon2:
    points = thetas[:, None] * dirs
    if np.count_nonzero(thetas > 0) < 2:
        return Polygon2.empty()
    try:
        hull = ConvexHull(points)
    except QhullError:
        return Polygon2.empty()
    # 2-D qhull vertices come counterclockwise
    idx = tuple(int(v) for v in hull.vertices)
    poly = Polygon2(points[list(idx)], idx)
    if poly.area <= AREA_TOL:
        return Polygon2.empty()
    return poly


def fc_polygon(
    i: int,
    config: PongConfig,
    W_bar: WrenchSet,
    T_maps: np.ndarray,
    frame: np.ndarray,
) -> Polygon2:
    """
    Approximate force-closure polygon of finger i.

    Every vertex is re-checked with `inclusion_holds`; failures are logged
    as warnings and left in place.

    Args:
        i: Finger index
        config: Direction count and θ clamp
        W_bar: Mean wrench set
        T_maps: Wrench maps, shape (n_f, n_s, 6, 3)
        frame: 3×2 tangent frame [t1 t2] of finger i

    Returns:
        Counterclockwise polygon (empty when every θ is 0)
    """
    dirs = search_directions(config.n_dirs)
    thetas = np.array([
        vertex_lp(i, frame @ u, W_bar, T_maps, config.theta_max) for u in dirs
    ])
    poly = _polygon_from_rays(thetas, dirs)
    failed = polygon_violations(poly, i, W_bar, T_maps, frame)
    if failed:
        logger.warning(f"Finger {i}: polygon vertices {failed} fail the inclusion check")
    return poly


def inclusion_holds(z: Sequence[float], i: int, W_bar: WrenchSet, T_maps: np.ndarray, frame: np.ndarray) -> bool:
    """True iff the tangent perturbation z of finger i keeps every T_j·𝒯z in −conv(W̄)."""
    dn = frame @ np.asarray(z, dtype=float)
    return all(in_hull(W_bar.points, -(T @ dn)) for T in T_maps[i])


def polygon_violations(poly: Polygon2, i: int, W_bar: WrenchSet, T_maps: np.ndarray, frame: np.ndarray) -> List[int]:
    """Indices of polygon vertices that fail `inclusion_holds`."""
    return [m for m, z in enumerate(poly.vertices) if not inclusion_holds(z, i, W_bar, T_maps, frame)]


@lru_cache(maxsize=32)
def _unit_nodes(quad_nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(quad_nodes)
    return 0.5 * (x + 1.0), 0.5 * w


def _edge_rule(p: np.ndarray, q: np.ndarray, sigma: np.ndarray, quad_nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    span = np.max(np.abs(q - p) / sigma)
    panels = int(min(MAX_PANELS, max(1, np.ceil(span / PANEL_SIGMAS))))
    x, w = _unit_nodes(quad_nodes)
    offsets = np.arange(panels)[:, None]
    r = ((offsets + x[None, :]) / panels).reshape(-1)
    wr = np.tile(w / panels, panels)
    return r, wr


def _polygon_integral(poly: Polygon2, mu: np.ndarray, sigma: np.ndarray, quad_nodes: int, with_grad: bool):
    v = poly.vertices
    m = len(v)
    grad_v = np.zeros((m, 2))
    grad_s = np.zeros(2)
    s1, s2 = sigma
    c0 = 1.0 / (s2 * np.sqrt(8.0 * np.pi))
    total = 0.0
    sigma_term = np.zeros(2)
    for a in range(m):
        b = (a + 1) % m
        p, q = v[a], v[b]
        D = q[1] - p[1]
        r, w = _edge_rule(p, q, sigma, quad_nodes)
        y = p[None, :] + r[:, None] * (q - p)[None, :]
        dy2 = y[:, 1] - mu[1]
        u = (y[:, 0] - mu[0]) / (s1 * np.sqrt(2.0))
        A = np.exp(-0.5 * (dy2 / s2) ** 2)
        B = erf(u)
        F = A * B
        total += D * float(w @ F)
        if not with_grad:
            continue
        dB = (2.0 / np.sqrt(np.pi)) * np.exp(-u * u)
        F_y1 = A * dB / (s1 * np.sqrt(2.0))
        F_y2 = -F * dy2 / s2 ** 2
        grad_v[a, 0] += D * float(w @ ((1.0 - r) * F_y1))
        grad_v[b, 0] += D * float(w @ (r * F_y1))
        grad_v[a, 1] += -float(w @ F) + D * float(w @ ((1.0 - r) * F_y2))
        grad_v[b, 1] += float(w @ F) + D * float(w @ (r * F_y2))
        sigma_term[0] += D * float(w @ (A * dB * (-u / s1)))
        sigma_term[1] += D * float(w @ (F * dy2 ** 2 / s2 ** 3))
    prob = c0 * total
    if with_grad:
        grad_v *= c0
        grad_s[0] = c0 * sigma_term[0]
        grad_s[1] = c0 * sigma_term[1] - prob / s2
    return prob, grad_v, grad_s


def _check_polygon_inputs(poly: Polygon2, mu, sigma) -> Tuple[np.ndarray, np.ndarray]:
    sigma = np.asarray(sigma, dtype=float).reshape(2)
    mu = np.asarray(mu, dtype=float).reshape(2)
    if np.any(sigma <= 0) or not np.all(np.isfinite(sigma)):
        raise ValueError(f"standard deviations must be positive, got {sigma}")
    if poly.signed_area < -AREA_TOL:
        raise OrientationError("polygon must be counterclockwise")
    return mu, sigma


def gauss_polygon(poly: Polygon2, mu: Sequence[float], sigma: Sequence[float], quad_nodes: int = 32) -> float:
    """
    Probability that Z ~ N(mu, diag(σ1², σ2²)) falls inside a convex polygon.

    Args:
        poly: Counterclockwise polygon
        mu: Mean (2,)
        sigma: Standard deviations (σ1, σ2), both positive
        quad_nodes: Gauss-Legendre nodes per panel

    Returns:
        Probability in [0, 1]; 0 for a zero-area polygon

    Raises:
        ValueError: if a standard deviation is not positive
        OrientationError: if the polygon is clockwise
    """
    mu, sigma = _check_polygon_inputs(poly, mu, sigma)
    if poly.area <= AREA_TOL:
        return 0.0
    prob, _, _ = _polygon_integral(poly, mu, sigma, quad_nodes, with_grad=False)
    return float(np.clip(prob, 0.0, 1.0))


def gauss_polygon_grad(
    poly: Polygon2,
    mu: Sequence[float],
    sigma: Sequence[float],
    quad_nodes: int = 32,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    `gauss_polygon` with its derivatives.

    Returns:
        (probability, d/d vertices (m, 2), d/d (σ1, σ2))
    """
    mu, sigma = _check_polygon_inputs(poly, mu, sigma)
    if poly.area <= AREA_TOL:
        return 0.0, np.zeros((len(poly), 2)), np.zeros(2)
    prob, grad_v, grad_s = _polygon_integral(poly, mu, sigma, quad_nodes, with_grad=True)
    return float(np.clip(prob, 0.0, 1.0)), grad_v, grad_s


def _grasp_arrays(contacts: Sequence[ContactSpec]):
    if len(contacts) == 0:
        raise ValueError("a grasp needs at least one contact")
    X = np.array([c.x for c in contacts])
    N = np.array([c.n_bar for c in contacts])
    frames = np.array([c.tangent_frame for c in contacts])
    sig2 = np.array([[c.sigma1_sq, c.sigma2_sq] for c in contacts])
    return X, N, frames, sig2


def _maps_from_params(X: np.ndarray, N: np.ndarray, model: FrictionModel) -> np.ndarray:
    maps = np.empty((len(X), model.n_sides, 6, 3))
    for i, (x, n) in enumerate(zip(X, N)):
        for j, g in enumerate(generators(n, model.n_sides)):
            maps[i, j] = wrench_map(x, n, g, model.mu)
    return maps


def _std_devs(sig2: np.ndarray) -> np.ndarray:
    floored = np.maximum(sig2, VARIANCE_FLOOR)
    if np.any(sig2 < VARIANCE_FLOOR):
        logger.debug("Tangent variance below floor; using the floor for integration")
    return np.sqrt(floored)


def _tightness(poly: Polygon2, thetas: np.ndarray) -> float:
    peak = float(np.max(thetas, initial=0.0))
    if peak <= 0.0:
        return 0.0
    n = len(thetas)
    return poly.area / (0.5 * n * peak ** 2 * np.sin(2.0 * np.pi / n))


def _evaluate(X, N, frames, sig2, model: FrictionModel, config: PongConfig) -> PongResult:
    n_f = len(X)
    maps = _maps_from_params(X, N, model)
    W_bar = wrenches_from_maps(maps, N, model.n_sides)
    dirs = search_directions(config.n_dirs)
    zero_thetas = np.zeros((n_f, config.n_dirs))

    if not contains_origin(W_bar):
        logger.debug("Mean grasp is not force closure; L_FC = 0")
        return PongResult(
            value=0.0, per_finger=[0.0] * n_f, polygons=[Polygon2.empty() for _ in range(n_f)],
            thetas=zero_thetas, clamped=np.zeros_like(zero_thetas, dtype=bool), tightness=[0.0] * n_f,
            mean_force_closure=False, W_bar=W_bar, sigmas=_std_devs(sig2),
        )

    W = W_bar.matrix
    lps = []
    for i in range(n_f):
        for u in dirs:
            d = frames[i] @ u
            for T in maps[i]:
                lps.append(vertex_program(T @ d, W))
    solutions = solve_batch(lps)

    per_j = np.zeros((n_f, config.n_dirs, model.n_sides))
    clamped_j = np.zeros_like(per_j, dtype=bool)
    for idx, sol in enumerate(solutions):
        per_j.flat[idx], clamped_j.flat[idx] = _theta_from(sol, config.theta_max)
    thetas = per_j.min(axis=2)
    active = per_j.argmin(axis=2)
    clamped = np.take_along_axis(clamped_j, active[..., None], axis=2)[..., 0]
    if np.any(clamped):
        logger.warning(f"{int(np.sum(clamped))} vertex LPs clamped at θ = {config.theta_max}")

    sigmas = _std_devs(sig2)
    polygons, per_finger, tightness = [], [], []
    for i in range(n_f):
        poly = _polygon_from_rays(thetas[i], dirs)
        polygons.append(poly)
        per_finger.append(gauss_polygon(poly, (0.0, 0.0), sigmas[i], config.quad_nodes))
        tightness.append(_tightness(poly, thetas[i]))

    table = _VertexTable(maps=maps, lps=lps, solutions=solutions, per_j=per_j,
                         n_sides=model.n_sides, n_dirs=config.n_dirs)
    return PongResult(
        value=float(np.prod(per_finger)), per_finger=per_finger, polygons=polygons, thetas=thetas,
        clamped=clamped, tightness=tightness, mean_force_closure=True, W_bar=W_bar, sigmas=sigmas,
        _table=table,
    )


def l_fc(contacts: Sequence[ContactSpec], model: FrictionModel, config: Optional[PongConfig] = None) -> PongResult:
    """
    Lower bound on the probability of force closure.

    Args:
        contacts: Contacts with their tangent variances
        model: Friction model
        config: Direction count, quadrature and gradient settings

    Returns:
        PongResult; value is 0 when the mean grasp is not force closure
    """
    config = config or PongConfig()
    X, N, frames, sig2 = _grasp_arrays(contacts)
    result = _evaluate(X, N, frames, sig2, model, config)
    logger.debug(f"L_FC = {result.value:.6g} (per finger {result.per_finger})")
    return result


def _others(per_finger: Sequence[float], i: int) -> float:
    return float(np.prod([p for k, p in enumerate(per_finger) if k != i]))


def _wrench_jacobians(X: np.ndarray, N: np.ndarray, model: FrictionModel):
    """d w̄_j^i / d x^i and d w̄_j^i / d n̄^i, each (n_f, n_s, 6, 3)."""
    n_f = len(X)
    dw_dx = np.zeros((n_f, model.n_sides, 6, 3))
    dw_dn = np.zeros((n_f, model.n_sides, 6, 3))
    for i, (x, n) in enumerate(zip(X, N)):
        gens = generators(n, model.n_sides)
        jacs = generator_jacobians(n, model.n_sides)
        for j, (g, J) in enumerate(zip(gens, jacs)):
            force_map = np.eye(3) + model.mu * hat(g)
            f = force_map @ n
            df_dn = force_map - model.mu * hat(n) @ J
            dw_dn[i, j, :3] = df_dn
            dw_dn[i, j, 3:] = hat(x) @ df_dn
            dw_dx[i, j, 3:] = -hat(f)
    return dw_dx, dw_dn


def _direction_jacobians(x: np.ndarray, n: np.ndarray, d: np.ndarray, model: FrictionModel, j: int):
    """d (T_j d) / d x and d (T_j d) / d n̄ for a fixed tangent direction d."""
    g = generators(n, model.n_sides)[j]
    J = generator_jacobians(n, model.n_sides)[j]
    f_e = (np.eye(3) + model.mu * hat(g)) @ d
    dfe_dn = -model.mu * hat(d) @ J
    de_dn = np.vstack([dfe_dn, hat(x) @ dfe_dn])
    de_dx = np.vstack([np.zeros((3, 3)), -hat(f_e)])
    return de_dx, de_dn


def l_fc_gradient(
    contacts: Sequence[ContactSpec],
    model: FrictionModel,
    config: Optional[PongConfig] = None,
) -> LfcGradient:
    """
    Gradient of L_FC with respect to contact points, mean normals and
    tangent variances, holding every contact's tangent frame fixed.

    Vertex steps are differentiated through their optimal LP bases.
    Pyramid edges tied for the smallest step share the vertex weight
    equally, which for a pair is what central differences return. Clamped
    steps contribute nothing, and a grasp whose mean is not force closure
    has a zero gradient. A basis with a zero basic variable or a zero-area
    polygon switches the point and normal parts to central finite
    differences and sets `fallback`.
    """
    config = config or PongConfig()
    X, N, frames, sig2 = _grasp_arrays(contacts)
    return _gradient_from_params(X, N, frames, sig2, model, config)


def _gradient_from_params(X, N, frames, sig2, model: FrictionModel, config: PongConfig) -> LfcGradient:
    result = _evaluate(X, N, frames, sig2, model, config)
    d_sigma_sq = _variance_gradient(result, sig2, config)

    mode = config.grad_mode
    fallback = False
    reason = ""
    if mode is GradMode.IMPLICIT_KKT:
        try:
            d_x, d_n = _implicit_gradient(result, X, N, frames, model, config)
        except (_FallbackNeeded, DegenerateBasisError) as e:
            reason = str(e)
            logger.warning(f"Falling back to finite differences: {reason}")
            fallback = True
            mode = GradMode.FINITE_DIFFERENCE
    if mode is GradMode.FINITE_DIFFERENCE:
        d_x, d_n = _finite_difference_gradient(X, N, frames, sig2, model, config)

    return LfcGradient(value=result.value, d_x=d_x, d_n_bar=d_n, d_sigma_sq=d_sigma_sq,
                       mode=mode, fallback=fallback, reason=reason)


def _variance_gradient(result: PongResult, sig2: np.ndarray, config: PongConfig) -> np.ndarray:
    n_f = len(sig2)
    grad = np.zeros((n_f, 2))
    sigmas = _std_devs(sig2)
    for i, poly in enumerate(result.polygons):
        others = _others(result.per_finger, i)
        if others == 0.0 or poly.area <= AREA_TOL:
            continue
        _, _, d_sigma = gauss_polygon_grad(poly, (0.0, 0.0), sigmas[i], config.quad_nodes)
        floored = sig2[i] < VARIANCE_FLOOR
        grad[i] = np.where(floored, 0.0, others * d_sigma / (2.0 * sigmas[i]))
    return grad


def _implicit_gradient(result: PongResult, X, N, frames, model: FrictionModel, config: PongConfig):
    n_f = len(X)
    d_x = np.zeros((n_f, 3))
    d_n = np.zeros((n_f, 3))
    # Outside force closure L_FC is identically 0 nearby
    if not result.mean_force_closure:
        return d_x, d_n
    table = result._table
    n_s = model.n_sides
    dirs = search_directions(config.n_dirs)
    dw_dx, dw_dn = _wrench_jacobians(X, N, model)

    for i, poly in enumerate(result.polygons):
        if poly.area <= AREA_TOL:
            raise _FallbackNeeded(f"finger {i} has a zero-area polygon")
        others = _others(result.per_finger, i)
        if others == 0.0:
            continue
        _, d_vertices, _ = gauss_polygon_grad(poly, (0.0, 0.0), result.sigmas[i], config.quad_nodes)
        for m, k in enumerate(poly.ray_index):
            # a clamped step is constant in the grasp parameters
            if result.clamped[i, k]:
                continue
            weight = others * float(d_vertices[m] @ dirs[k])
            if weight == 0.0:
                continue
            per_j = table.per_j[i, k]
            low = float(per_j.min())
            tied = np.flatnonzero(per_j <= low + TIE_TOL * max(1.0, low))
            # Edges whose sin(angle to d) agree give the same LP; split the weight evenly
            share = weight / len(tied)
            for j in tied:
                j = int(j)
                idx = table.flat(i, k, j)
                sol = table.solutions[idx]
                if not sol.is_optimal:
                    raise _FallbackNeeded(f"vertex LP ({i}, {k}, {j}) has no optimal basis")
                # Each finger's edge wrenches are coplanar, so the optimal weights
                # need not be unique; that face survives every grasp perturbation.
                grad = value_gradient_eq(table.lps[idx], sol, unique_primal=False)
                dth_de = grad[:6, 0]
                dth_dW = grad[:6, 1:].T.reshape(n_f, n_s, 6)

                d_x += share * np.einsum("ajr,ajrc->ac", dth_dW, dw_dx)
                d_n += share * np.einsum("ajr,ajrc->ac", dth_dW, dw_dn)
                de_dx, de_dn = _direction_jacobians(X[i], N[i], frames[i] @ dirs[k], model, j)
                d_x[i] += share * (dth_de @ de_dx)
                d_n[i] += share * (dth_de @ de_dn)
    return d_x, d_n


def _value_from_params(X, N, frames, sig2, model: FrictionModel, config: PongConfig) -> float:
    return _evaluate(X, N, frames, sig2, model, config).value


def _finite_difference_gradient(X, N, frames, sig2, model: FrictionModel, config: PongConfig,
                                h: float = FD_STEP) -> Tuple[np.ndarray, np.ndarray]:
    grads = []
    for base, other_is_x in ((X, True), (N, False)):
        grad = np.zeros_like(base)
        for a in range(base.shape[0]):
            for c in range(3):
                plus = base.copy()
                minus = base.copy()
                plus[a, c] += h
                minus[a, c] -= h
                if other_is_x:
                    f_plus = _value_from_params(plus, N, frames, sig2, model, config)
                    f_minus = _value_from_params(minus, N, frames, sig2, model, config)
                else:
                    f_plus = _value_from_params(X, plus, frames, sig2, model, config)
                    f_minus = _value_from_params(X, minus, frames, sig2, model, config)
                grad[a, c] = (f_plus - f_minus) / (2.0 * h)
        grads.append(grad)
    return grads[0], grads[1]


def l_fc_from_params(X, N, frames, sig2, model: FrictionModel, config: Optional[PongConfig] = None) -> float:
    """
    L_FC as a plain function of contact points (n_f, 3), raw mean normals
    (n_f, 3), fixed tangent frames (n_f, 3, 2) and variances (n_f, 2).

    This is the parametrization `l_fc_gradient` differentiates.
    """
    config = config or PongConfig()
    return _value_from_params(np.asarray(X, dtype=float), np.asarray(N, dtype=float),
                              np.asarray(frames, dtype=float), np.asarray(sig2, dtype=float), model, config)
