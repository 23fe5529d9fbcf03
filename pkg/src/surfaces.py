"""
Analytic implicit surfaces and surface-normal uncertainty fields

A surface is the zero level set of a smooth s(x) that is negative inside
the object. Contacts get the inward mean normal −∇s/‖∇s‖ and tangent
variances from an uncertainty field:

- POLAR: σ² = scale·x₃² on both tangent axes
- SPHERICAL_HARMONIC: σ² = scale·exp(Re Y₄²(x)) on both tangent axes
- CURVATURE: σ_m² = log(K_curv·|κ_m| + h) along the principal directions
- CONSTANT: the same σ² everywhere

Every variance is floored at VARIANCE_FLOOR so Gaussian integrals stay
defined.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Tuple

import numpy as np

from src.errors import InputFormatError, IterationLimitError, SingularPointError
from src.wrench import VARIANCE_FLOOR, ContactSpec, tangent_basis

# Module logger
logger = logging.getLogger(__name__)


ON_SURFACE_TOL = 1e-6
PROJECT_TOL = 1e-10
PROJECT_MAX_ITERS = 50
GRAD_TOL = 1e-12

DEFAULT_K_CURV = 0.01
DEFAULT_H = float(np.e)
POLAR_SCALE = 100.0
HARMONIC_SCALE = 0.01

# Orthonormal real Y_4^2 prefactor: (3/8)·sqrt(5/(2π))
Y42_NORM = 0.375 * np.sqrt(5.0 / (2.0 * np.pi))


class ImplicitSurface(ABC):
    """Zero level set of s: R³ → R with s < 0 inside the object."""

    kind = "surface"

    @abstractmethod
    def s(self, x: np.ndarray) -> float:
        pass

    @abstractmethod
    def grad(self, x: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def hess(self, x: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n points on the surface, shape (n, 3)."""

    @property
    def extent(self) -> float:
        """Length scale used for separations and step sizes."""
        return 1.0

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        pass


@dataclass
class SphereSurface(ImplicitSurface):
    """s(x) = ‖x − center‖ − radius"""
    radius: float = 0.05
    center: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    kind = "sphere"

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"sphere radius must be positive, got {self.radius}")
        self._c = np.asarray(self.center, dtype=float).reshape(3)

    def s(self, x):
        return float(np.linalg.norm(np.asarray(x, dtype=float) - self._c) - self.radius)

    def grad(self, x):
        v = np.asarray(x, dtype=float) - self._c
        r = np.linalg.norm(v)
        if r == 0.0:
            raise SingularPointError()
        return v / r

    def hess(self, x):
        v = np.asarray(x, dtype=float) - self._c
        r = np.linalg.norm(v)
        if r == 0.0:
            raise SingularPointError()
        u = v / r
        return (np.eye(3) - np.outer(u, u)) / r

    def sample(self, n, rng):
        u = rng.standard_normal((n, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return self._c + self.radius * u

    @property
    def extent(self) -> float:
        return self.radius

    def to_dict(self):
        return {"kind": self.kind, "radius": self.radius, "center": list(self.center)}


@dataclass
class PlaneSurface(ImplicitSurface):
    """s(x) = x₃, the object filling x₃ < 0. Samples come from a square patch."""
    half_width: float = 0.05
    kind = "plane"

    def s(self, x):
        return float(np.asarray(x, dtype=float)[2])

    def grad(self, x):
        return np.array([0.0, 0.0, 1.0])

    def hess(self, x):
        return np.zeros((3, 3))

    def sample(self, n, rng):
        xy = rng.uniform(-self.half_width, self.half_width, size=(n, 2))
        return np.column_stack([xy, np.zeros(n)])

    @property
    def extent(self) -> float:
        return self.half_width

    def to_dict(self):
        return {"kind": self.kind, "half_width": self.half_width}


@dataclass
class EllipsoidSurface(ImplicitSurface):
    """s(x) = sqrt(Σ (x_i / a_i)²) − 1 with semi-axes a."""
    axes: Tuple[float, float, float] = (0.06, 0.05, 0.04)
    kind = "ellipsoid"

    def __post_init__(self):
        self._a = np.asarray(self.axes, dtype=float).reshape(3)
        if np.any(self._a <= 0):
            raise ValueError(f"ellipsoid semi-axes must be positive, got {self.axes}")
        self._D = np.diag(1.0 / self._a ** 2)

    def _q(self, x):
        x = np.asarray(x, dtype=float)
        return float(x @ self._D @ x)

    def s(self, x):
        return float(np.sqrt(self._q(x)) - 1.0)

    def grad(self, x):
        q = self._q(x)
        if q == 0.0:
            raise SingularPointError()
        return self._D @ np.asarray(x, dtype=float) / np.sqrt(q)

    def hess(self, x):
        q = self._q(x)
        if q == 0.0:
            raise SingularPointError()
        Dx = self._D @ np.asarray(x, dtype=float)
        return self._D / np.sqrt(q) - np.outer(Dx, Dx) / q ** 1.5

    def sample(self, n, rng):
        # Radial projection of uniform sphere directions
        u = rng.standard_normal((n, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        scale = 1.0 / np.sqrt(np.einsum("ni,ij,nj->n", u, self._D, u))
        return u * scale[:, None]

    @property
    def extent(self) -> float:
        return float(np.min(self._a))

    def to_dict(self):
        return {"kind": self.kind, "axes": list(self.axes)}


@dataclass(frozen=True)
class ShapeOperator:
    """Principal curvatures (|κ1| >= |κ2|) and unit principal directions."""
    kappa1: float
    kappa2: float
    v1: np.ndarray
    v2: np.ndarray


class FieldKind(Enum):
    """Uncertainty field families"""
    POLAR = "polar"
    SPHERICAL_HARMONIC = "harmonic"
    CURVATURE = "curvature"
    CONSTANT = "constant"


@dataclass
class UncertaintyField:
    """
    Tangent-variance model over a surface.

    params by kind: POLAR {scale}, SPHERICAL_HARMONIC {r, scale},
    CURVATURE {K_curv, h}, CONSTANT {value}.
    """
    kind: FieldKind
    params: Dict[str, float] = field(default_factory=dict)

    def variances(self, surface: ImplicitSurface, x: np.ndarray) -> Tuple[float, float]:
        """Raw (σ1², σ2²) at x, before the floor; CURVATURE pairs them with principal directions."""
        x = np.asarray(x, dtype=float)
        if self.kind is FieldKind.POLAR:
            v = self.params.get("scale", POLAR_SCALE) * x[2] ** 2
            return v, v
        if self.kind is FieldKind.SPHERICAL_HARMONIC:
            v = self.params.get("scale", HARMONIC_SCALE) * np.exp(real_y42(x))
            return v, v
        if self.kind is FieldKind.CONSTANT:
            v = self.params.get("value", 1.0)
            return v, v
        shape = shape_operator(surface, x)
        K = self.params.get("K_curv", DEFAULT_K_CURV)
        h = self.params.get("h", DEFAULT_H)
        args = (K * abs(shape.kappa1) + h, K * abs(shape.kappa2) + h)
        if min(args) <= 1.0:
            raise ValueError(f"curvature field log argument {min(args):.6g} <= 1 at {x}")
        return float(np.log(args[0])), float(np.log(args[1]))

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, **self.params}


def polar_field(scale: float = POLAR_SCALE) -> UncertaintyField:
    """Isotropic σ² = scale·x₃²: certain at the equator, uncertain at the poles."""
    return UncertaintyField(FieldKind.POLAR, {"scale": scale})


def harmonic_field(r: float = 0.05, scale: float = HARMONIC_SCALE) -> UncertaintyField:
    """Isotropic σ² = scale·exp(Re Y₄²) on a sphere of radius r."""
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r}")
    return UncertaintyField(FieldKind.SPHERICAL_HARMONIC, {"r": r, "scale": scale})


def curvature_field(surface: ImplicitSurface = None, K_curv: float = DEFAULT_K_CURV,
                    h: float = DEFAULT_H) -> UncertaintyField:
    """
    σ_m² = log(K_curv·|κ_m| + h) along the principal directions.

    The surface argument is accepted for symmetry with the other factories;
    the field is evaluated against whichever surface the contact lies on.
    """
    if not K_curv > 0:
        raise ValueError(f"K_curv must be positive, got {K_curv}")
    return UncertaintyField(FieldKind.CURVATURE, {"K_curv": K_curv, "h": h})


def constant_field(value: float = 1e-3) -> UncertaintyField:
    if value < 0:
        raise ValueError("variance must be non-negative")
    return UncertaintyField(FieldKind.CONSTANT, {"value": value})


def real_y42(x: np.ndarray) -> float:
    """
    Real part of the orthonormal spherical harmonic Y_4^2 in Cartesian form,

        (3/8)·sqrt(5/(2π)) · (x² − y²)(7z² − ρ²) / ρ⁴,

    which equals (3/8)·sqrt(5/(2π))·sin²φ(7cos²φ − 1)·cos 2θ for polar angle
    φ and azimuth θ, and is finite at the poles.
    """
    x = np.asarray(x, dtype=float)
    rho2 = float(x @ x)
    if rho2 == 0.0:
        raise SingularPointError()
    return float(Y42_NORM * (x[0] ** 2 - x[1] ** 2) * (7.0 * x[2] ** 2 - rho2) / rho2 ** 2)


def _unit_gradient(surface: ImplicitSurface, x: np.ndarray) -> Tuple[np.ndarray, float]:
    g = surface.grad(x)
    norm = float(np.linalg.norm(g))
    if norm <= GRAD_TOL:
        raise SingularPointError()
    return g / norm, norm


def project(surface: ImplicitSurface, x, tol: float = PROJECT_TOL, max_iters: int = PROJECT_MAX_ITERS) -> np.ndarray:
    """
    Damped Newton projection onto the zero level set along ∇s.

    Raises:
        SingularPointError: if ∇s vanishes along the way
        IterationLimitError: if |s| is still above tol after max_iters
    """
    x = np.array(x, dtype=float).reshape(3)
    value = surface.s(x)
    for _ in range(max_iters):
        if abs(value) <= tol:
            return x
        g = surface.grad(x)
        gg = float(g @ g)
        if gg <= GRAD_TOL ** 2:
            raise SingularPointError()
        step = 1.0
        while True:
            candidate = x - step * value * g / gg
            new_value = surface.s(candidate)
            if abs(new_value) < abs(value) or step < 1e-8:
                break
            step *= 0.5
        x, value = candidate, new_value
    if abs(value) <= tol:
        return x
    raise IterationLimitError(f"iteration limit: projection stalled at |s| = {abs(value):.3e}")


def shape_operator(surface: ImplicitSurface, x) -> ShapeOperator:
    """
    Eigenpairs of S = −(I − n nᵀ) ∇²s / ‖∇s‖ on the tangent plane at x,
    sorted by |κ| descending.

    Raises:
        SingularPointError: if ∇s vanishes at x
    """
    x = np.asarray(x, dtype=float).reshape(3)
    n, norm = _unit_gradient(surface, x)
    t1, t2 = tangent_basis(n)
    B = np.column_stack([t1, t2])
    S = -(B.T @ surface.hess(x) @ B) / norm
    S = 0.5 * (S + S.T)
    kappas, vecs = np.linalg.eigh(S)
    order = np.argsort(-np.abs(kappas), kind="stable")
    kappas = kappas[order]
    vecs = B @ vecs[:, order]
    return ShapeOperator(float(kappas[0]), float(kappas[1]), vecs[:, 0], vecs[:, 1])


def contact_at(surface: ImplicitSurface, field: UncertaintyField, x) -> ContactSpec:
    """
    Contact with its random-normal model at a surface point.

    Points off the surface by more than 1e-6 are projected first. The mean
    normal is −∇s/‖∇s‖ (inward). The tangent frame is the principal frame
    for CURVATURE fields and the deterministic completion of the normal
    otherwise.

    Raises:
        SingularPointError: if ∇s vanishes at x
    """
    x = np.asarray(x, dtype=float).reshape(3)
    if abs(surface.s(x)) > ON_SURFACE_TOL:
        x = project(surface, x)
    outward, _ = _unit_gradient(surface, x)
    n_bar = -outward

    if field.kind is FieldKind.CURVATURE:
        shape = shape_operator(surface, x)
        t1 = shape.v1 - (shape.v1 @ n_bar) * n_bar
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(n_bar, t1)
    else:
        t1, t2 = tangent_basis(n_bar)

    s1, s2 = field.variances(surface, x)
    if not (np.isfinite(s1) and np.isfinite(s2)):
        raise ValueError(f"non-finite variance at {x}")
    if min(s1, s2) < VARIANCE_FLOOR:
        logger.warning(f"Variance floor applied at {np.round(x, 6).tolist()}")
    return ContactSpec(
        x=x, n_bar=n_bar, t1=t1, t2=t2,
        sigma1_sq=max(s1, VARIANCE_FLOOR), sigma2_sq=max(s2, VARIANCE_FLOOR),
    )


def sample_surface(surface: ImplicitSurface, n: int, rng: np.random.Generator) -> np.ndarray:
    """n points on the surface, projected to tolerance."""
    return np.array([project(surface, p) for p in surface.sample(n, rng)])


_SURFACES = {
    "sphere": lambda d: SphereSurface(radius=float(d.get("radius", 0.05)),
                                      center=tuple(d.get("center", (0.0, 0.0, 0.0)))),
    "plane": lambda d: PlaneSurface(half_width=float(d.get("half_width", 0.05))),
    "ellipsoid": lambda d: EllipsoidSurface(axes=tuple(d.get("axes", (0.06, 0.05, 0.04)))),
}


def surface_from_dict(data: Dict[str, Any]) -> ImplicitSurface:
    """Build a surface from {"kind": ..., **params}."""
    kind = data.get("kind")
    if kind not in _SURFACES:
        raise InputFormatError(f"unknown surface kind {kind!r}")
    try:
        return _SURFACES[kind](data)
    except (TypeError, ValueError) as e:
        raise InputFormatError(f"bad {kind} surface: {e}")


def field_from_dict(data: Dict[str, Any]) -> UncertaintyField:
    """Build an uncertainty field from {"kind": ..., **params}."""
    try:
        kind = FieldKind(data.get("kind"))
    except ValueError:
        raise InputFormatError(f"unknown field kind {data.get('kind')!r}")
    params = {k: float(v) for k, v in data.items() if k != "kind"}
    try:
        if kind is FieldKind.POLAR:
            return polar_field(**params)
        if kind is FieldKind.SPHERICAL_HARMONIC:
            return harmonic_field(**params)
        if kind is FieldKind.CURVATURE:
            return curvature_field(None, **params)
        return constant_field(**params)
    except (TypeError, ValueError) as e:
        raise InputFormatError(f"bad {kind.value} field: {e}")
