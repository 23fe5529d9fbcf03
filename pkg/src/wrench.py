"""
Friction pyramids and basis wrenches

Builds the n_s-sided pyramidal approximation of each contact's Coulomb cone
and the wrenches its edges induce. Every basis wrench is linear in the
contact normal: w_j = T_j · n, where T_j is fixed by the contact point,
the friction coefficient and the generator direction g_j. Generators are
always taken from the MEAN normal, so perturbing the normal moves the
wrenches linearly and keeps every pyramid edge Coulomb-compliant.

Wrench vectors are flat 6-vectors ordered (f, τ); torques are taken about
the world origin.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import DegenerateNormalError

# Module logger
logger = logging.getLogger(__name__)


# Tolerances for frame validation
UNIT_TOL = 1e-9
ORTHO_TOL = 1e-9

# Smallest tangent variance handed to Gaussian integrals
VARIANCE_FLOOR = 1e-8


def hat(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix with hat(a) @ b == a × b."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


@dataclass(frozen=True)
class Wrench:
    """A force/torque pair, stored and compared as a flat 6-vector (f, τ)."""
    f: Tuple[float, float, float]
    tau: Tuple[float, float, float]

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_vector())):
            raise ValueError("wrench entries must be finite")

    @classmethod
    def from_vector(cls, w: Sequence[float]) -> "Wrench":
        w = np.asarray(w, dtype=float)
        if w.shape != (6,):
            raise ValueError(f"expected a 6-vector, got shape {w.shape}")
        return cls(f=tuple(w[:3]), tau=tuple(w[3:]))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.f, dtype=float), np.asarray(self.tau, dtype=float)])


@dataclass(frozen=True)
class FrictionModel:
    """Coulomb coefficient and pyramid side count."""
    mu: float = 0.5
    n_sides: int = 4

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"friction coefficient must be positive, got {self.mu}")
        if int(self.n_sides) != self.n_sides or self.n_sides < 3:
            raise ValueError(f"pyramid needs at least 3 sides, got {self.n_sides}")


@dataclass(eq=False)
class ContactSpec:
    """
    One contact of a grasp together with its random-normal model.

    The random normal is n = n_bar + [t1 t2] z with z ~ N(0, diag(σ1², σ2²)).
    """
    x: np.ndarray
    n_bar: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    sigma1_sq: float = 0.0
    sigma2_sq: float = 0.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(3)
        self.n_bar = np.asarray(self.n_bar, dtype=float).reshape(3)
        self.t1 = np.asarray(self.t1, dtype=float).reshape(3)
        self.t2 = np.asarray(self.t2, dtype=float).reshape(3)
        self.sigma1_sq = float(self.sigma1_sq)
        self.sigma2_sq = float(self.sigma2_sq)

        for name in ("x", "n_bar", "t1", "t2"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"contact field {name} must be finite")
        if abs(np.linalg.norm(self.n_bar) - 1.0) > UNIT_TOL:
            raise ValueError(f"mean normal must be unit length, got norm {np.linalg.norm(self.n_bar)}")
        gram = self.frame_matrix().T @ self.frame_matrix()
        if np.max(np.abs(gram - np.eye(3))) > ORTHO_TOL:
            raise ValueError("contact frame {t1, t2, n_bar} is not orthonormal")
        if self.sigma1_sq < 0 or self.sigma2_sq < 0:
            raise ValueError("tangent variances must be non-negative")

    @classmethod
    def from_point_normal(
        cls,
        x: Sequence[float],
        n_bar: Sequence[float],
        sigma1_sq: float = 0.0,
        sigma2_sq: Optional[float] = None,
    ) -> "ContactSpec":
        """Build a contact whose tangent frame is the deterministic completion of n_bar."""
        n = np.asarray(n_bar, dtype=float)
        norm = np.linalg.norm(n)
        if norm == 0.0:
            raise DegenerateNormalError()
        n = n / norm
        t1, t2 = tangent_basis(n)
        return cls(
            x=x, n_bar=n, t1=t1, t2=t2,
            sigma1_sq=sigma1_sq,
            sigma2_sq=sigma1_sq if sigma2_sq is None else sigma2_sq,
        )

    @property
    def tangent_frame(self) -> np.ndarray:
        """3×2 matrix [t1 t2] mapping tangent coordinates to R³."""
        return np.column_stack([self.t1, self.t2])

    @property
    def sigmas(self) -> Tuple[float, float]:
        return float(np.sqrt(self.sigma1_sq)), float(np.sqrt(self.sigma2_sq))

    def frame_matrix(self) -> np.ndarray:
        return np.column_stack([self.t1, self.t2, self.n_bar])

    def perturbed_normal(self, z: Sequence[float]) -> np.ndarray:
        """n = n_bar + T z for tangent coordinates z."""
        return self.n_bar + self.tangent_frame @ np.asarray(z, dtype=float)


class WrenchSet:
    """
    Ordered basis wrenches of a grasp.

    Row l of `points` is the wrench of finger i, pyramid edge j with
    l = i * n_sides + j (zero-based). Sets that do not come from a grasp
    (raw CSV input, random clouds) use n_fingers = n_w and n_sides = 1.
    """

    def __init__(self, points: Union[np.ndarray, Sequence[Sequence[float]]], n_sides: Optional[int] = None):
        pts = np.array(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 6:
            raise ValueError(f"wrench set must be an (n_w, 6) array, got shape {pts.shape}")
        if pts.shape[0] < 1:
            raise ValueError("wrench set must contain at least one wrench")
        if not np.all(np.isfinite(pts)):
            raise ValueError("wrench entries must be finite")
        self.n_sides = int(n_sides) if n_sides is not None else 1
        if pts.shape[0] % self.n_sides != 0:
            raise ValueError(f"{pts.shape[0]} wrenches do not split into pyramids of {self.n_sides}")
        self.points = pts
        self.points.setflags(write=False)

    @property
    def n_w(self) -> int:
        return self.points.shape[0]

    @property
    def n_fingers(self) -> int:
        return self.n_w // self.n_sides

    @property
    def matrix(self) -> np.ndarray:
        """The 6 × n_w matrix W whose columns are the wrenches."""
        return self.points.T

    @property
    def wrenches(self) -> List[Wrench]:
        return [Wrench.from_vector(w) for w in self.points]

    def flat_index(self, i: int, j: int) -> int:
        if not (0 <= i < self.n_fingers and 0 <= j < self.n_sides):
            raise IndexError(f"(finger {i}, edge {j}) out of range")
        return i * self.n_sides + j

    def finger_edge(self, l: int) -> Tuple[int, int]:
        if not 0 <= l < self.n_w:
            raise IndexError(f"wrench index {l} out of range")
        return divmod(l, self.n_sides)

    def scaled(self, c: float) -> "WrenchSet":
        return WrenchSet(self.points * c, n_sides=self.n_sides)

    def __len__(self) -> int:
        return self.n_w

    def __eq__(self, other) -> bool:
        if not isinstance(other, WrenchSet):
            return NotImplemented
        return self.n_sides == other.n_sides and np.array_equal(self.points, other.points)

    def __repr__(self) -> str:
        return f"WrenchSet(n_w={self.n_w}, n_sides={self.n_sides})"


WrenchLike = Union[WrenchSet, np.ndarray, Sequence[Sequence[float]]]


def as_points(W: WrenchLike) -> np.ndarray:
    """Return the (n, d) point array behind a WrenchSet or array-like."""
    if isinstance(W, WrenchSet):
        return np.asarray(W.points, dtype=float)
    pts = np.asarray(W, dtype=float)
    if pts.ndim != 2:
        raise ValueError(f"expected a 2-D point array, got shape {pts.shape}")
    return pts


def _helper_axis(n: np.ndarray) -> np.ndarray:
    # Axis least aligned with n; ties go to the lowest index.
    a = np.zeros(3)
    a[int(np.argmin(np.abs(n)))] = 1.0
    return a


def tangent_basis(n_bar: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Deterministically complete a normal to a right-handed orthonormal frame.

    t1 is the projection of the coordinate axis least aligned with n onto
    the plane orthogonal to n; t2 = n × t1, so det[t1 t2 n] = +1.

    Args:
        n_bar: Normal direction (normalized internally)

    Returns:
        (t1, t2) unit vectors

    Raises:
        DegenerateNormalError: if n_bar has zero length
    """
    n = np.asarray(n_bar, dtype=float).reshape(3)
    norm = np.linalg.norm(n)
    if not np.isfinite(norm) or norm == 0.0:
        raise DegenerateNormalError()
    n = n / norm
    a = _helper_axis(n)
    u = a - np.dot(a, n) * n
    t1 = u / np.linalg.norm(u)
    t2 = np.cross(n, t1)
    return t1, t2


def tangent_basis_jacobian(n_raw: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Jacobians d t1 / d n and d t2 / d n of `tangent_basis` w.r.t. the raw
    (unnormalized) normal, valid away from helper-axis switches.
    """
    n_raw = np.asarray(n_raw, dtype=float).reshape(3)
    r = np.linalg.norm(n_raw)
    if r == 0.0:
        raise DegenerateNormalError()
    n = n_raw / r
    a = _helper_axis(n)
    proj = (np.eye(3) - np.outer(n, n)) / r
    u = a - np.dot(a, n) * n
    u_norm = np.linalg.norm(u)
    t1 = u / u_norm
    du_dn = -(np.outer(n, a) + np.dot(a, n) * np.eye(3))
    j_t1 = (np.eye(3) - np.outer(t1, t1)) / u_norm @ du_dn @ proj
    j_t2 = -hat(t1) @ proj + hat(n) @ j_t1
    return j_t1, j_t2


def generators(n: Sequence[float], n_sides: int) -> List[np.ndarray]:
    """
    Unit generators orthogonal to n, spaced 2π/n_sides apart, g_1 = t1.

    Raises:
        DegenerateNormalError: if n is zero
    """
    if n_sides < 1:
        raise ValueError("n_sides must be positive")
    t1, t2 = tangent_basis(n)
    angles = 2.0 * np.pi * np.arange(n_sides) / n_sides
    return [np.cos(phi) * t1 + np.sin(phi) * t2 for phi in angles]


def generator_jacobians(n: Sequence[float], n_sides: int) -> List[np.ndarray]:
    """d g_j / d n for each generator of `generators(n, n_sides)`."""
    j_t1, j_t2 = tangent_basis_jacobian(n)
    angles = 2.0 * np.pi * np.arange(n_sides) / n_sides
    return [np.cos(phi) * j_t1 + np.sin(phi) * j_t2 for phi in angles]


def wrench_map(x: Sequence[float], n_ref: Sequence[float], g_j: Sequence[float], mu: float) -> np.ndarray:
    """
    The 6×3 map T_j with w_j = T_j · n.

    T_j = [I + μ ĝ_j ; x̂ (I + μ ĝ_j)], so the force part is n + μ (g_j × n)
    and the torque part is x × force.

    Args:
        x: Contact point
        n_ref: Mean normal the generator was built from (g_j must be orthogonal to it)
        g_j: Unit generator
        mu: Friction coefficient
    """
    x = np.asarray(x, dtype=float).reshape(3)
    n_ref = np.asarray(n_ref, dtype=float).reshape(3)
    g = np.asarray(g_j, dtype=float).reshape(3)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(g)) and np.all(np.isfinite(n_ref)) and np.isfinite(mu)):
        raise ValueError("wrench map inputs must be finite")
    if abs(np.linalg.norm(g) - 1.0) > UNIT_TOL:
        raise ValueError("generator must be unit length")
    n_norm = np.linalg.norm(n_ref)
    if n_norm > 0 and abs(np.dot(g, n_ref)) > ORTHO_TOL * max(1.0, n_norm):
        raise ValueError("generator must be orthogonal to the reference normal")
    force = np.eye(3) + mu * hat(g)
    return np.vstack([force, hat(x) @ force])


def wrench_maps(contacts: Sequence[ContactSpec], model: FrictionModel) -> np.ndarray:
    """All maps T_j^i, shape (n_f, n_s, 6, 3), generators from the mean normals."""
    maps = np.empty((len(contacts), model.n_sides, 6, 3))
    for i, contact in enumerate(contacts):
        for j, g in enumerate(generators(contact.n_bar, model.n_sides)):
            maps[i, j] = wrench_map(contact.x, contact.n_bar, g, model.mu)
    return maps


def basis_wrenches(
    contacts: Sequence[ContactSpec],
    model: FrictionModel,
    normals: Optional[Sequence[Sequence[float]]] = None,
) -> WrenchSet:
    """
    Basis wrenches w_j^i = T_j^i · n^i of a grasp.

    Args:
        contacts: Contacts of the grasp (non-empty)
        model: Friction model
        normals: Optional perturbed normals, one per contact; mean normals when None

    Returns:
        WrenchSet with n_f · n_s wrenches in (finger, edge) order
    """
    if len(contacts) == 0:
        raise ValueError("a grasp needs at least one contact")
    if normals is None:
        normals = [c.n_bar for c in contacts]
    if len(normals) != len(contacts):
        raise ValueError(f"got {len(normals)} normals for {len(contacts)} contacts")
    maps = wrench_maps(contacts, model)
    return wrenches_from_maps(maps, np.asarray(normals, dtype=float), model.n_sides)


def wrenches_from_maps(maps: np.ndarray, normals: np.ndarray, n_sides: int) -> WrenchSet:
    """Apply precomputed maps (n_f, n_s, 6, 3) to normals (n_f, 3)."""
    points = np.einsum("ijab,ib->ija", maps, normals).reshape(-1, 6)
    return WrenchSet(points, n_sides=n_sides)
