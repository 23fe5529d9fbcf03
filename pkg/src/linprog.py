"""
Dense simplex solver for small linear programs

Problems have the form

    maximize    cᵀz
    subject to  A_eq z  = b_eq
                A_ub z <= b_ub
                lo <= z <= hi        (bounds may be ±inf)

and are solved by a two-phase tableau simplex. Dantzig pivoting is used
for a fixed budget of pivots, after which the solver switches to Bland's
rule so degenerate problems always terminate.

The final primal/dual pair is recomputed from the optimal basis with a
direct solve, which is what strong-duality checks and the sensitivity
routine rely on.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.errors import DegenerateBasisError, IterationLimitError

# Module logger
logger = logging.getLogger(__name__)


TOL_FEAS = 1e-9
TOL_GAP = 1e-8
PIVOT_TOL = 1e-10
OPT_TOL = 1e-10
DEGENERACY_TOL = 1e-9
DANTZIG_BUDGET = 50
MAX_PIVOTS = 5000

# Env var capping worker threads for batch solves
THREADS_ENV = "WRENCHLAB_THREADS"

# Phase-I tolerance used when a caller passes none
_default_tol_feas = TOL_FEAS


class LpStatus(Enum):
    """Solver outcome"""
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ERROR = "error"


@dataclass
class LinearProgram:
    """
    A dense LP in maximization form.

    `bounds` holds one (lo, hi) pair per variable; None means (0, +inf)
    for every variable.
    """
    c: np.ndarray
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    bounds: Optional[Sequence[Tuple[float, float]]] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        self.A_eq, self.b_eq = _coerce_block(self.A_eq, self.b_eq, n, "equality")
        self.A_ub, self.b_ub = _coerce_block(self.A_ub, self.b_ub, n, "inequality")
        if self.bounds is None:
            self.bounds = [(0.0, np.inf)] * n
        if len(self.bounds) != n:
            raise ValueError(f"expected {n} bounds, got {len(self.bounds)}")
        cleaned = []
        for lo, hi in self.bounds:
            lo = -np.inf if lo is None else float(lo)
            hi = np.inf if hi is None else float(hi)
            if lo == np.inf or hi == -np.inf or lo > hi:
                raise ValueError(f"invalid bound pair ({lo}, {hi})")
            cleaned.append((lo, hi))
        self.bounds = cleaned
        for name in ("c", "A_eq", "b_eq", "A_ub", "b_ub"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"LP data {name} must be finite")

    @property
    def n_vars(self) -> int:
        return self.c.size


def _coerce_block(A, b, n: int, label: str) -> Tuple[np.ndarray, np.ndarray]:
    if A is None:
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    if A.shape != (b.size, n):
        raise ValueError(f"{label} block has shape {A.shape}, expected ({b.size}, {n})")
    return A, b


@dataclass
class LpSolution:
    """
    Solver result.

    Duals follow the convention dV/db = dual, so inequality duals are
    non-negative at a maximum.
    """
    status: LpStatus
    z_star: Optional[np.ndarray] = None
    value: float = float("nan")
    dual_eq: Optional[np.ndarray] = None
    dual_ub: Optional[np.ndarray] = None
    dual_value: float = float("nan")
    basis: Tuple[int, ...] = ()
    iterations: int = 0
    message: str = ""
    _standard: Optional["_StandardForm"] = field(default=None, repr=False, compare=False)
    _x_std: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    _reduced_costs: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def is_optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL

    def kkt_residuals(self, lp: LinearProgram) -> dict:
        """Primal feasibility, complementary slackness and duality gap at the returned point."""
        if not self.is_optimal:
            raise ValueError(f"no KKT residuals for status {self.status.value}")
        z = self.z_star
        eq = np.max(np.abs(lp.A_eq @ z - lp.b_eq), initial=0.0)
        ub = np.max(lp.A_ub @ z - lp.b_ub, initial=0.0)
        lo = np.array([b[0] for b in lp.bounds])
        hi = np.array([b[1] for b in lp.bounds])
        bound = max(np.max(lo - z, initial=0.0), np.max(z - hi, initial=0.0))
        slack = lp.b_ub - lp.A_ub @ z
        comp = np.max(np.abs(self.dual_ub * slack), initial=0.0)
        return {
            "primal_infeasibility": float(max(eq, ub, bound, 0.0)),
            "complementary_slackness": float(comp),
            "duality_gap": float(abs(self.value - self.dual_value)),
        }


@dataclass
class _StandardForm:
    """max c·x + const  s.t.  A x = b, x >= 0, b >= 0, with the map back to z."""
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    const: float
    shift: np.ndarray
    M: np.ndarray
    row_sign: np.ndarray
    n_eq: int
    n_ub: int
    slack_of_row: List[Optional[int]]
    partner: dict


def _standardize(lp: LinearProgram) -> _StandardForm:
    n = lp.n_vars
    shift = np.zeros(n)
    cols: List[np.ndarray] = []
    partner = {}
    upper_rows = []
    for k, (lo, hi) in enumerate(lp.bounds):
        unit = np.zeros(n)
        unit[k] = 1.0
        if np.isfinite(lo):
            shift[k] = lo
            cols.append(unit)
            if np.isfinite(hi):
                upper_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            shift[k] = hi
            cols.append(-unit)
        else:
            cols.append(unit)
            cols.append(-unit)
            partner[len(cols) - 2] = len(cols) - 1
            partner[len(cols) - 1] = len(cols) - 2
    M = np.column_stack(cols) if cols else np.zeros((n, 0))
    n_x = M.shape[1]

    A_eq = lp.A_eq @ M
    b_eq = lp.b_eq - lp.A_eq @ shift
    A_ub = lp.A_ub @ M
    b_ub = lp.b_ub - lp.A_ub @ shift
    A_bd = np.zeros((len(upper_rows), n_x))
    b_bd = np.zeros(len(upper_rows))
    for r, (col, width) in enumerate(upper_rows):
        A_bd[r, col] = 1.0
        b_bd[r] = width

    n_eq, n_ub, n_bd = A_eq.shape[0], A_ub.shape[0], A_bd.shape[0]
    n_slack = n_ub + n_bd
    m = n_eq + n_slack
    A = np.zeros((m, n_x + n_slack))
    A[:n_eq, :n_x] = A_eq
    A[n_eq:n_eq + n_ub, :n_x] = A_ub
    A[n_eq + n_ub:, :n_x] = A_bd
    A[n_eq:, n_x:] = np.eye(n_slack)
    b = np.concatenate([b_eq, b_ub, b_bd])

    row_sign = np.where(b < 0, -1.0, 1.0)
    A *= row_sign[:, None]
    b *= row_sign
    slack_of_row: List[Optional[int]] = [None] * m
    for r in range(n_eq, m):
        if row_sign[r] > 0:
            slack_of_row[r] = n_x + (r - n_eq)

    c = np.concatenate([M.T @ lp.c, np.zeros(n_slack)])
    return _StandardForm(
        A=A, b=b, c=c, const=float(lp.c @ shift), shift=shift, M=M,
        row_sign=row_sign, n_eq=n_eq, n_ub=n_ub, slack_of_row=slack_of_row, partner=partner,
    )


class _Tableau:
    """Dense simplex tableau; the last row holds reduced costs and -objective."""

    def __init__(self, A: np.ndarray, b: np.ndarray, basis: List[int]):
        m, n = A.shape
        self.T = np.zeros((m + 1, n + 1))
        self.T[:m, :n] = A
        self.T[:m, n] = b
        self.basis = list(basis)
        self.pivots = 0

    @property
    def m(self) -> int:
        return self.T.shape[0] - 1

    def set_objective(self, c: np.ndarray):
        n = self.T.shape[1] - 1
        self.T[-1, :] = 0.0
        self.T[-1, :n] = c
        for i, j in enumerate(self.basis):
            if c[j] != 0.0:
                self.T[-1] -= c[j] * self.T[i]

    def pivot(self, row: int, col: int):
        T = self.T
        T[row] /= T[row, col]
        factors = T[:, col].copy()
        factors[row] = 0.0
        T -= np.outer(factors, T[row])
        T[:, col] = 0.0
        T[row, col] = 1.0
        self.basis[row] = col
        self.pivots += 1

    def run(self, allowed: np.ndarray, max_pivots: int) -> LpStatus:
        while True:
            if self.pivots >= max_pivots:
                raise IterationLimitError()
            reduced = np.where(allowed, self.T[-1, :-1], -np.inf)
            candidates = np.flatnonzero(reduced > OPT_TOL)
            if candidates.size == 0:
                return LpStatus.OPTIMAL
            if self.pivots < DANTZIG_BUDGET:
                col = int(candidates[np.argmax(reduced[candidates])])
            else:
                col = int(candidates[0])

            column = self.T[:-1, col]
            rows = np.flatnonzero(column > PIVOT_TOL)
            if rows.size == 0:
                return LpStatus.UNBOUNDED
            ratios = self.T[rows, -1] / column[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            # Bland leaving rule: smallest basic variable index among ties
            row = int(min(ties, key=lambda r: self.basis[r]))
            self.pivot(row, col)


def solve(lp: LinearProgram, tol_feas: Optional[float] = None, max_pivots: int = MAX_PIVOTS) -> LpSolution:
    """
    Solve an LP with the two-phase simplex method.

    Args:
        lp: Problem to solve
        tol_feas: Feasibility tolerance for phase I (default_tol_feas() when None)
        max_pivots: Pivot cap across both phases

    Returns:
        LpSolution with status, primal/dual pair and basis

    Raises:
        IterationLimitError: if the pivot cap is exceeded
    """
    tol_feas = _default_tol_feas if tol_feas is None else tol_feas
    std = _standardize(lp)
    m, n = std.A.shape

    # Phase I: artificial columns only for rows without a usable slack
    artificial_rows = [r for r in range(m) if std.slack_of_row[r] is None]
    n_art = len(artificial_rows)
    A1 = np.hstack([std.A, np.zeros((m, n_art))])
    basis = []
    art_iter = iter(range(n, n + n_art))
    for r in range(m):
        if std.slack_of_row[r] is None:
            col = next(art_iter)
            A1[r, col] = 1.0
            basis.append(col)
        else:
            basis.append(std.slack_of_row[r])

    tab = _Tableau(A1, std.b, basis)
    kept_rows = list(range(m))
    if n_art:
        c1 = np.zeros(n + n_art)
        c1[n:] = -1.0
        tab.set_objective(c1)
        tab.run(np.ones(n + n_art, dtype=bool), max_pivots)
        infeasibility = tab.T[-1, -1]
        scale = max(1.0, float(np.max(np.abs(std.b), initial=0.0)))
        if infeasibility > tol_feas * scale:
            logger.debug(f"Phase I residual {infeasibility:.3e}: infeasible")
            return LpSolution(status=LpStatus.INFEASIBLE, iterations=tab.pivots, message="infeasible")

        # Drive zero-level artificials out of the basis; rows that cannot be
        # pivoted are linearly dependent and get dropped.
        drop = []
        for r in range(tab.m):
            if tab.basis[r] >= n:
                row = tab.T[r, :n]
                j = int(np.argmax(np.abs(row)))
                if abs(row[j]) > PIVOT_TOL:
                    tab.pivot(r, j)
                else:
                    drop.append(r)
        if drop:
            logger.debug(f"Dropping {len(drop)} redundant constraint rows")
            keep_mask = np.ones(tab.m + 1, dtype=bool)
            keep_mask[drop] = False
            tab.T = tab.T[keep_mask]
            tab.basis = [bj for r, bj in enumerate(tab.basis) if r not in drop]
            kept_rows = [r for r in range(m) if r not in drop]
        tab.T = np.hstack([tab.T[:, :n], tab.T[:, -1:]])

    # Phase II
    tab.set_objective(std.c)
    status = tab.run(np.ones(n, dtype=bool), max_pivots)
    if status is LpStatus.UNBOUNDED:
        return LpSolution(status=LpStatus.UNBOUNDED, value=float("inf"), iterations=tab.pivots,
                          message="unbounded")

    return _finalize(lp, std, tab.basis, kept_rows, tab.pivots)


def _finalize(lp: LinearProgram, std: _StandardForm, basis: List[int], kept_rows: List[int],
              pivots: int) -> LpSolution:
    A = std.A[kept_rows]
    b = std.b[kept_rows]
    B = A[:, basis]
    x_basic = np.linalg.solve(B, b)
    x = np.zeros(std.A.shape[1])
    x[basis] = x_basic
    y_kept = np.linalg.solve(B.T, std.c[basis])
    reduced = std.c - A.T @ y_kept

    y_std = np.zeros(std.A.shape[0])
    y_std[kept_rows] = y_kept
    y_orig = y_std * std.row_sign

    n_x = std.M.shape[1]
    z = std.shift + std.M @ x[:n_x]
    value = float(lp.c @ z)
    dual_value = float(y_kept @ b + std.const)
    return LpSolution(
        status=LpStatus.OPTIMAL,
        z_star=z,
        value=value,
        dual_eq=y_orig[:std.n_eq],
        dual_ub=y_orig[std.n_eq:std.n_eq + std.n_ub],
        dual_value=dual_value,
        basis=tuple(int(j) for j in basis),
        iterations=pivots,
        message="optimal" if len(kept_rows) == std.A.shape[0] else "optimal (redundant rows dropped)",
        _standard=std,
        _x_std=x,
        _reduced_costs=reduced,
    )


def _solve_safely(lp: LinearProgram, tol_feas: Optional[float]) -> LpSolution:
    try:
        return solve(lp, tol_feas=tol_feas)
    except (IterationLimitError, np.linalg.LinAlgError, ValueError) as e:
        logger.warning(f"Batch element failed: {e}")
        return LpSolution(status=LpStatus.ERROR, message=str(e))


def default_tol_feas() -> float:
    return _default_tol_feas


def set_default_tol_feas(tol_feas: float):
    """Set the phase-I tolerance used by every solve that does not pass its own."""
    global _default_tol_feas
    if not 0.0 < tol_feas < 1.0:
        raise ValueError(f"tol_feas must lie in (0, 1), got {tol_feas}")
    if tol_feas != _default_tol_feas:
        logger.info(f"LP feasibility tolerance set to {tol_feas:g}")
    _default_tol_feas = float(tol_feas)


def batch_workers() -> int:
    """Worker thread count from WRENCHLAB_THREADS (default 1)."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning(f"Ignoring invalid {THREADS_ENV}={raw!r}")
        return 1


def solve_batch(lps: Sequence[LinearProgram], tol_feas: Optional[float] = None,
                max_workers: Optional[int] = None) -> List[LpSolution]:
    """
    Solve independent LPs, preserving input order.

    A failing element comes back with status ERROR and its message; the
    rest of the batch is unaffected.
    """
    if len(lps) == 0:
        return []
    workers = max_workers if max_workers is not None else batch_workers()
    if workers <= 1 or len(lps) == 1:
        return [_solve_safely(lp, tol_feas) for lp in lps]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda lp: _solve_safely(lp, tol_feas), lps))


def _is_zero(d) -> bool:
    return d is None or not np.any(np.asarray(d))


def _check_nondegenerate(sol: LpSolution, need_unique_dual: bool, need_unique_primal: bool):
    std = sol._standard
    basis = set(sol.basis)
    x_basic = sol._x_std[list(sol.basis)]
    scale = max(1.0, float(np.max(np.abs(x_basic), initial=0.0)))
    if need_unique_dual:
        if np.any(x_basic <= DEGENERACY_TOL * scale):
            raise DegenerateBasisError()
        if len(sol.basis) != std.A.shape[0]:
            raise DegenerateBasisError()
    if need_unique_primal:
        for j in range(std.A.shape[1]):
            if j in basis or std.partner.get(j) in basis:
                continue
            if sol._reduced_costs[j] > -DEGENERACY_TOL:
                raise DegenerateBasisError()


def sensitivity(lp: LinearProgram, sol: LpSolution, dA_eq=None, db_eq=None, dA_ub=None, db_ub=None,
                dc=None) -> float:
    """
    Directional derivative of the optimal value along a data perturbation.

    At a non-degenerate optimal basis the KKT system is locally smooth and
    implicit differentiation reduces to

        dV = dcᵀz* + y_eqᵀ(db_eq − dA_eq z*) + y_ubᵀ(db_ub − dA_ub z*).

    Raises:
        DegenerateBasisError: if the basis is degenerate in a way the
            requested direction depends on
    """
    if not sol.is_optimal or sol._standard is None:
        raise ValueError("sensitivity needs an optimal solution from solve()")
    touches_a = not (_is_zero(dA_eq) and _is_zero(dA_ub))
    touches_b = not (_is_zero(db_eq) and _is_zero(db_ub))
    touches_c = not _is_zero(dc)
    _check_nondegenerate(sol, need_unique_dual=touches_a or touches_b,
                         need_unique_primal=touches_a or touches_c)

    z = sol.z_star
    total = 0.0
    if touches_c:
        total += float(np.asarray(dc, dtype=float) @ z)
    if lp.A_eq.shape[0]:
        rhs = np.zeros(lp.A_eq.shape[0])
        if not _is_zero(db_eq):
            rhs += np.asarray(db_eq, dtype=float)
        if not _is_zero(dA_eq):
            rhs -= np.asarray(dA_eq, dtype=float) @ z
        total += float(sol.dual_eq @ rhs)
    if lp.A_ub.shape[0]:
        rhs = np.zeros(lp.A_ub.shape[0])
        if not _is_zero(db_ub):
            rhs += np.asarray(db_ub, dtype=float)
        if not _is_zero(dA_ub):
            rhs -= np.asarray(dA_ub, dtype=float) @ z
        total += float(sol.dual_ub @ rhs)
    return total


def value_gradient_eq(lp: LinearProgram, sol: LpSolution, unique_primal: bool = True) -> np.ndarray:
    """
    dV/dA_eq = −y_eq z*ᵀ, checked for a non-degenerate basis.

    With unique_primal=False only the dual has to be unique. The result is
    then the derivative along perturbations that keep the optimal face,
    where every optimal z* gives the same directional derivative.
    """
    if not sol.is_optimal or sol._standard is None:
        raise ValueError("gradient needs an optimal solution from solve()")
    _check_nondegenerate(sol, need_unique_dual=True, need_unique_primal=unique_primal)
    return -np.outer(sol.dual_eq, sol.z_star)
