"""
Contact-point grasp synthesis on implicit surfaces

Contacts are the decision variables. Each iteration takes the gradient of
the objective with respect to the contact points, moves along its tangent
component with an Armijo backtracking search and projects every contact
back onto the surface. Pairwise separation is a quadratic hinge penalty.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np

from src.errors import InputFormatError, SampleRejectionError, WrenchLabError
from src.metrics import GraspMetrics, MinWeightStatus, grasp_metrics, min_weight
from src.oracle import McEstimate, make_rng, mc_force_closure
from src.pong import PongConfig, l_fc, l_fc_gradient
from src.surfaces import (
    ImplicitSurface,
    UncertaintyField,
    contact_at,
    field_from_dict,
    project,
    sample_surface,
    surface_from_dict,
)
from src.wrench import ContactSpec, FrictionModel, basis_wrenches

# Module logger
logger = logging.getLogger(__name__)


ARMIJO_C = 1e-4
SHRINK = 0.5
INITIAL_STEP = 1e-2
STEP_TOL = 1e-6
GAIN_TOL = 1e-8
PENALTY_WEIGHT = 1e3
MAX_RESAMPLES = 50
FD_STEP = 1e-6
FIELD_FD_STEP = 1e-7
SEPARATION_TOL = 1e-9


class Objective(Enum):
    """What synthesis maximizes"""
    LFC = "lfc"
    MIN_WEIGHT = "min_weight"


@dataclass
class SynthProblem:
    """
    One synthesis task.

    k_l is a floor on n_w·ℓ* enforced through the same hinge penalty as the
    separation constraint; it only applies to the MIN_WEIGHT objective.
    """
    surface: ImplicitSurface
    field: UncertaintyField
    n_fingers: int = 3
    objective: Objective = Objective.LFC
    min_separation: float = 0.02
    k_l: float = 0.0
    model: FrictionModel = field(default_factory=FrictionModel)
    pong: PongConfig = field(default_factory=PongConfig)
    mc_samples: int = 1000

    def __post_init__(self):
        if self.n_fingers < 2:
            raise ValueError(f"need at least 2 fingers, got {self.n_fingers}")
        if not self.min_separation > 0:
            raise ValueError("min_separation must be positive")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SynthProblem":
        """Parse the problem section of a problem JSON document."""
        try:
            friction = data.get("friction", {})
            pong = data.get("pong", {})
            return cls(
                surface=surface_from_dict(data["surface"]),
                field=field_from_dict(data["field"]),
                n_fingers=int(data.get("n_fingers", 3)),
                objective=Objective(data.get("objective", "lfc")),
                min_separation=float(data.get("min_separation", 0.02)),
                k_l=float(data.get("k_l", 0.0)),
                model=FrictionModel(mu=float(friction.get("mu", 0.5)), n_sides=int(friction.get("n_sides", 4))),
                pong=PongConfig(n_dirs=int(pong.get("n_dirs", 8)), quad_nodes=int(pong.get("quad_nodes", 32))),
                mc_samples=int(data.get("mc_samples", 1000)),
            )
        except KeyError as e:
            raise InputFormatError(f"problem is missing {e}")
        except (TypeError, ValueError) as e:
            raise InputFormatError(f"bad problem: {e}")


@dataclass
class SynthResult:
    """
    Outcome of one synthesis run.

    objective_value includes the penalty terms; metric_value is the bare
    L_FC or n_w·ℓ*.
    """
    contacts: np.ndarray
    objective_value: float
    metric_value: float
    iterations: int
    converged: bool
    feasible: bool
    seed: int
    trace: List[float] = field(default_factory=list)


@dataclass
class SweepRow:
    """One grasp of a sweep; error is set instead of the results when the run failed."""
    seed: int
    result: Optional[SynthResult] = None
    metrics: Optional[GraspMetrics] = None
    l_fc: float = float("nan")
    mc: Optional[McEstimate] = None
    error: str = ""


def grasp_contacts(problem: SynthProblem, X: np.ndarray) -> List[ContactSpec]:
    return [contact_at(problem.surface, problem.field, x) for x in X]


def _separation_penalty(X: np.ndarray, sep: float):
    value = 0.0
    grad = np.zeros_like(X)
    for a in range(len(X)):
        for b in range(a + 1, len(X)):
            diff = X[a] - X[b]
            dist = float(np.linalg.norm(diff))
            gap = sep - dist
            if gap <= 0.0:
                continue
            value += PENALTY_WEIGHT * gap ** 2
            if dist > 0.0:
                g = 2.0 * PENALTY_WEIGHT * gap * diff / dist
                grad[a] -= g
                grad[b] += g
    return value, grad


def separation_ok(X: np.ndarray, sep: float) -> bool:
    d = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=2)
    iu = np.triu_indices(len(X), k=1)
    return bool(np.all(d[iu] >= sep - SEPARATION_TOL))


def metric_value(problem: SynthProblem, X: np.ndarray) -> float:
    """Unpenalized objective: L_FC, or n_w·ℓ* (−1 when the min-weight LP is infeasible)."""
    contacts = grasp_contacts(problem, X)
    if problem.objective is Objective.LFC:
        return l_fc(contacts, problem.model, problem.pong).value
    W = basis_wrenches(contacts, problem.model)
    result = min_weight(W)
    if result.status is not MinWeightStatus.OPTIMAL:
        return -1.0
    return W.n_w * result.l_star


def evaluate_objective(problem: SynthProblem, X: np.ndarray) -> float:
    """Penalized objective at contact points X, shape (n_f, 3)."""
    X = np.asarray(X, dtype=float)
    value = metric_value(problem, X)
    penalty, _ = _separation_penalty(X, problem.min_separation)
    if problem.objective is Objective.MIN_WEIGHT and value < problem.k_l:
        penalty += PENALTY_WEIGHT * (problem.k_l - value) ** 2
    return value - penalty


def _normal_jacobian(surface: ImplicitSurface, x: np.ndarray) -> np.ndarray:
    # n̄ = −∇s/‖∇s‖  ⇒  dn̄/dx = −(I − ûûᵀ) ∇²s / ‖∇s‖ with û = ∇s/‖∇s‖
    g = surface.grad(x)
    norm = np.linalg.norm(g)
    u = g / norm
    return -(np.eye(3) - np.outer(u, u)) @ surface.hess(x) / norm


def _variance_gradient(problem: SynthProblem, x: np.ndarray) -> np.ndarray:
    """Central differences of (σ1², σ2²) along each coordinate, shape (2, 3)."""
    h = FIELD_FD_STEP * max(1.0, problem.surface.extent)
    grad = np.zeros((2, 3))
    for c in range(3):
        step = np.zeros(3)
        step[c] = h
        plus = np.array(problem.field.variances(problem.surface, x + step))
        minus = np.array(problem.field.variances(problem.surface, x - step))
        grad[:, c] = (plus - minus) / (2.0 * h)
    return grad


def _lfc_gradient(problem: SynthProblem, X: np.ndarray) -> np.ndarray:
    contacts = grasp_contacts(problem, X)
    grad = l_fc_gradient(contacts, problem.model, problem.pong)
    total = grad.d_x.copy()
    for i, x in enumerate(X):
        total[i] += _normal_jacobian(problem.surface, x).T @ grad.d_n_bar[i]
        total[i] += grad.d_sigma_sq[i] @ _variance_gradient(problem, x)
    return total


def _fd_gradient(problem: SynthProblem, X: np.ndarray) -> np.ndarray:
    grad = np.zeros_like(X)
    for i in range(len(X)):
        for c in range(3):
            plus = X.copy()
            minus = X.copy()
            plus[i, c] += FD_STEP
            minus[i, c] -= FD_STEP
            plus[i] = project(problem.surface, plus[i])
            minus[i] = project(problem.surface, minus[i])
            grad[i, c] = (metric_value(problem, plus) - metric_value(problem, minus)) / (2.0 * FD_STEP)
    return grad


def objective_gradient(problem: SynthProblem, X: np.ndarray) -> np.ndarray:
    """Gradient of the penalized objective w.r.t. contact points, projected onto the tangent planes."""
    X = np.asarray(X, dtype=float)
    if problem.objective is Objective.LFC:
        grad = _lfc_gradient(problem, X)
    else:
        grad = _fd_gradient(problem, X)
        value = metric_value(problem, X)
        if value < problem.k_l:
            grad = grad * (1.0 + 2.0 * PENALTY_WEIGHT * (problem.k_l - value))
    _, pen_grad = _separation_penalty(X, problem.min_separation)
    grad = grad - pen_grad
    for i, x in enumerate(X):
        u = problem.surface.grad(x)
        u = u / np.linalg.norm(u)
        grad[i] -= (grad[i] @ u) * u
    return grad


def _initial_sample(problem: SynthProblem, rng: np.random.Generator) -> np.ndarray:
    for attempt in range(MAX_RESAMPLES):
        X = sample_surface(problem.surface, problem.n_fingers, rng)
        if not separation_ok(X, problem.min_separation):
            logger.debug(f"Initial sample rejected: contacts closer than {problem.min_separation}")
            continue
        try:
            if metric_value(problem, X) > 0.0:
                logger.debug(f"Initial sample accepted after {attempt + 1} draws")
                return X
        except WrenchLabError as e:
            logger.debug(f"Initial sample rejected: {e}")
    raise SampleRejectionError(f"no feasible initial sample in {MAX_RESAMPLES} draws")


def synthesize(problem: SynthProblem, seed: int, max_iters: int = 200) -> SynthResult:
    """
    Projected gradient ascent on the contact points.

    Args:
        problem: Surface, field, objective and constraints
        seed: Seed of the initial surface sample
        max_iters: Iteration cap; 0 returns the initial sample

    Returns:
        SynthResult with a non-decreasing objective trace

    Raises:
        SampleRejectionError: if no initial sample is separated with a positive objective
    """
    rng = make_rng(seed)
    X = _initial_sample(problem, rng)
    value = evaluate_objective(problem, X)
    trace = [value]
    step = INITIAL_STEP
    converged = False
    iterations = 0

    for iterations in range(1, max_iters + 1):
        grad = objective_gradient(problem, X)
        gnorm = float(np.linalg.norm(grad))
        if gnorm == 0.0:
            converged = True
            break
        direction = grad / gnorm
        step = min(INITIAL_STEP, 2.0 * step)
        accepted = False
        while step >= STEP_TOL:
            candidate = np.array([project(problem.surface, x) for x in X + step * direction])
            try:
                new_value = evaluate_objective(problem, candidate)
            except WrenchLabError:
                new_value = -np.inf
            if new_value >= value + ARMIJO_C * step * gnorm:
                accepted = True
                break
            step *= SHRINK
        if not accepted:
            converged = True
            break

        gain = new_value - value
        moved = float(np.linalg.norm(candidate - X))
        X, value = candidate, new_value
        trace.append(value)
        if moved < STEP_TOL or gain < GAIN_TOL:
            converged = True
            break

    feasible = separation_ok(X, problem.min_separation)
    if not feasible:
        logger.warning(f"Seed {seed}: contacts violate the {problem.min_separation} m separation")
    logger.info(f"Seed {seed}: objective {value:.6g} after {iterations} iterations (converged={converged})")
    return SynthResult(
        contacts=X,
        objective_value=value,
        metric_value=metric_value(problem, X),
        iterations=iterations,
        converged=converged,
        feasible=feasible,
        seed=seed,
        trace=trace,
    )


def sweep(problem: SynthProblem, n_grasps: int, seed: int, max_iters: int = 200,
          mc_samples: Optional[int] = None) -> List[SweepRow]:
    """
    Independent synthesis runs with seeds seed, seed + 1, ...

    Each grasp is scored with the full metric set, L_FC and a Monte Carlo
    force-closure estimate (mc_samples = 0 skips it). A failing run is
    recorded with its error and the sweep continues.
    """
    if n_grasps < 1:
        raise ValueError(f"n_grasps must be at least 1, got {n_grasps}")
    mc_samples = problem.mc_samples if mc_samples is None else mc_samples
    rows = []
    for g in range(n_grasps):
        run_seed = seed + g
        try:
            result = synthesize(problem, run_seed, max_iters)
            contacts = grasp_contacts(problem, result.contacts)
            metrics = grasp_metrics(basis_wrenches(contacts, problem.model))
            bound = l_fc(contacts, problem.model, problem.pong).value
            mc = mc_force_closure(contacts, problem.model, mc_samples, run_seed) if mc_samples else None
            rows.append(SweepRow(seed=run_seed, result=result, metrics=metrics, l_fc=bound, mc=mc))
        except (WrenchLabError, ValueError) as e:
            logger.warning(f"Sweep run {run_seed} failed: {e}")
            rows.append(SweepRow(seed=run_seed, error=str(e)))
    return rows


def uniform_baseline(problem: SynthProblem, n_points: int, seed: int) -> np.ndarray:
    """Uniform surface sample used as the reference distribution in toy comparisons."""
    return sample_surface(problem.surface, n_points, make_rng(seed))
