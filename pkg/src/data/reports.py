"""
Machine-readable reports for WrenchLab
JSON documents for single grasps and verification runs, CSV for sweeps.

Floats are written in Python's shortest round-trip form, so a value read
back parses to the identical double and repeated runs give identical bytes.
NaN and infinities become JSON null.
"""

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, TextIO

import numpy as np

from src.metrics import GraspMetrics
from src.oracle import McEstimate
from src.pong import PongResult
from src.synth import SweepRow

# Module logger
logger = logging.getLogger(__name__)


def to_jsonable(value: Any) -> Any:
    """
    Convert numpy scalars/arrays, enums and dataclasses to plain JSON types

    Non-finite floats map to None.
    """
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if hasattr(value, "__dataclass_fields__"):
        return to_jsonable(asdict(value))
    return value


def dumps(document: Any) -> str:
    """Deterministic JSON text with sorted keys and a trailing newline."""
    return json.dumps(to_jsonable(document), sort_keys=True, indent=2, allow_nan=False) + "\n"


def mc_dict(mc: Optional[McEstimate]) -> Optional[Dict[str, Any]]:
    if mc is None:
        return None
    return {"p_hat": mc.p_hat, "n_samples": mc.n_samples, "std_err": mc.std_err}


@dataclass
class GraspReport:
    """Result of the metrics command for one grasp."""
    fingerprint: str
    force_closure: bool
    n_w: int
    l_star: float
    l_star_normalized: float
    l_star_over_nw: float
    epsilon: float
    delta: float
    bound_holds: Optional[bool]
    marginal: bool = False
    L_FC: Optional[float] = None
    mc_estimate: Optional[McEstimate] = None
    warnings: List[str] = field(default_factory=list)

    @classmethod
    def from_metrics(cls, fingerprint: str, metrics: GraspMetrics, l_fc: Optional[float] = None,
                     mc: Optional[McEstimate] = None) -> "GraspReport":
        return cls(
            fingerprint=fingerprint,
            force_closure=metrics.force_closure,
            n_w=metrics.n_w,
            l_star=metrics.l_star,
            l_star_normalized=metrics.l_star_normalized,
            l_star_over_nw=metrics.l_star_over_nw,
            epsilon=metrics.epsilon,
            delta=metrics.delta,
            bound_holds=metrics.bound_holds,
            marginal=metrics.marginal,
            L_FC=l_fc,
            mc_estimate=mc,
            warnings=list(metrics.warnings),
        )

    def to_dict(self) -> Dict[str, Any]:
        doc = {
            "fingerprint": self.fingerprint,
            "force_closure": self.force_closure,
            "n_w": self.n_w,
            "l_star": self.l_star,
            "l_star_normalized": self.l_star_normalized,
            "l_star_over_nw": self.l_star_over_nw,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "bound_holds": self.bound_holds,
            "marginal": self.marginal,
            "warnings": self.warnings,
        }
        if self.L_FC is not None:
            doc["L_FC"] = self.L_FC
        if self.mc_estimate is not None:
            doc["mc_estimate"] = mc_dict(self.mc_estimate)
        return doc

    def to_json(self) -> str:
        return dumps(self.to_dict())


@dataclass
class PongReport:
    """L_FC of one grasp with its per-finger polygons and an optional MC cross-check."""
    fingerprint: str
    result: PongResult
    mc_estimate: Optional[McEstimate] = None
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        r = self.result
        doc = {
            "fingerprint": self.fingerprint,
            "L_FC": r.value,
            "mean_force_closure": r.mean_force_closure,
            "fingers": [
                {
                    "integral": r.per_finger[i],
                    "polygon": r.polygons[i].vertices,
                    "thetas": r.thetas[i],
                    "clamped": r.clamped[i],
                    "tightness": r.tightness[i],
                }
                for i in range(len(r.per_finger))
            ],
            "warnings": self.warnings,
        }
        if self.mc_estimate is not None:
            doc["mc_estimate"] = mc_dict(self.mc_estimate)
        return doc

    def to_json(self) -> str:
        return dumps(self.to_dict())


@dataclass
class VerifySummary:
    """Pass/fail counts of one verification run; counterexample is the first failure."""
    theorem: str
    trials: int
    seed: int
    passed: int = 0
    failed: int = 0
    errors: int = 0
    counterexample: Optional[Dict[str, Any]] = None

    @property
    def ok(self) -> bool:
        return self.failed == 0 and self.errors == 0

    def record(self, passed: bool, detail: Dict[str, Any]):
        if passed:
            self.passed += 1
            return
        self.failed += 1
        if self.counterexample is None:
            self.counterexample = detail

    def record_error(self, detail: Dict[str, Any]):
        self.errors += 1
        if self.counterexample is None:
            self.counterexample = detail

    def to_dict(self) -> Dict[str, Any]:
        return {
            "theorem": self.theorem,
            "trials": self.trials,
            "seed": self.seed,
            "passed": self.passed,
            "failed": self.failed,
            "errors": self.errors,
            "counterexample": self.counterexample,
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())


def sweep_columns(n_fingers: int) -> List[str]:
    contact_cols = [f"x{i}_{axis}" for i in range(n_fingers) for axis in "xyz"]
    return (
        ["seed"]
        + contact_cols
        + ["objective_value", "metric_value", "iterations", "converged", "feasible",
           "l_star", "l_star_normalized", "epsilon", "delta", "l_fc", "mc_p_hat", "mc_std_err", "error"]
    )


def _cell(value: Any) -> str:
    value = to_jsonable(value)
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def sweep_row_cells(row: SweepRow, n_fingers: int) -> List[str]:
    result, metrics = row.result, row.metrics
    contacts = result.contacts.reshape(-1).tolist() if result is not None else [None] * (3 * n_fingers)
    values = [row.seed] + contacts + [
        result.objective_value if result else None,
        result.metric_value if result else None,
        result.iterations if result else None,
        result.converged if result else None,
        result.feasible if result else None,
        metrics.l_star if metrics else None,
        metrics.l_star_normalized if metrics else None,
        metrics.epsilon if metrics else None,
        metrics.delta if metrics else None,
        row.l_fc,
        row.mc.p_hat if row.mc else None,
        row.mc.std_err if row.mc else None,
        row.error,
    ]
    return [_cell(v) for v in values]


def write_sweep_csv(rows: Sequence[SweepRow], n_fingers: int, stream: TextIO):
    """One header line plus one line per sweep row, '\\n' line endings."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(sweep_columns(n_fingers))
    for row in rows:
        writer.writerow(sweep_row_cells(row, n_fingers))
    logger.debug(f"Wrote {len(rows)} sweep rows")
