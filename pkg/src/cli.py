"""
Command-line surface for WrenchLab
Certifies grasps, computes metrics and PONG bounds, verifies the tolerance
and ordering results on random corpora, and runs synthesis sweeps.

Payloads (JSON, or CSV for sweeps) go to stdout; diagnostics go to stderr.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src import __version__
from src.data.loader import GraspDataLoader, GraspInput
from src.data.reports import GraspReport, PongReport, VerifySummary, dumps, write_sweep_csv
from src.errors import CertificateViolationError, WrenchLabError
from src.hull import contains_origin
from src.linprog import set_default_tol_feas
from src.metrics import (
    bound_check,
    certify_ball,
    certify_containment,
    ferrari_canny,
    grasp_metrics,
    min_weight,
    min_weight_dual,
)
from src.oracle import (
    make_rng,
    mc_force_closure,
    perturb_in_ball,
    perturb_in_hull,
    random_force_closure_set,
    random_sphere_grasp,
)
from src.performance_monitor import benchmark_vertex_lps
from src.pong import PongConfig, PongResult, inclusion_holds, l_fc
from src.settings import SETTINGS_ENV, Settings
from src.synth import SynthProblem, sweep, synthesize
from src.wrench import FrictionModel, wrench_maps

# Module logger
logger = logging.getLogger(__name__)


LOG_LEVEL_ENV = "WRENCHLAB_LOG_LEVEL"

# Exit codes
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_FORCE_CLOSURE = 2

# Wrench-set sizes drawn by the random-corpus verifications
VERIFY_SIZES = (8, 12, 16, 24)
DUALITY_TOL = 1e-8

# Shrink applied to ε when sampling ball perturbations, so rounding cannot
# push a deviation past the certified radius
BALL_SHRINK = 1.0 - 1e-9


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _non_negative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {value}")
    return value


def _emit(text: str):
    sys.stdout.write(text)
    sys.stdout.flush()


def _load_settings(args) -> Settings:
    explicit = args.settings or os.environ.get(SETTINGS_ENV)
    settings = Settings(args.settings, persist=bool(explicit))
    set_default_tol_feas(settings.tol_feas)
    return settings


# --- metrics ---------------------------------------------------------------

def cmd_metrics(args) -> int:
    """Full metric report of one grasp; exit 2 when it is not force closure."""
    settings = _load_settings(args)
    grasp = GraspDataLoader().load(args.input)
    metrics = grasp_metrics(grasp.wrenches)

    bound = None
    mc = None
    if args.pong or args.mc:
        if grasp.contacts is None:
            metrics.warnings.append("L_FC and Monte Carlo need a contact spec, not raw wrenches")
        else:
            if args.pong:
                bound = l_fc(grasp.contacts, grasp.model, settings.pong_config()).value
            if args.mc:
                mc = mc_force_closure(grasp.contacts, grasp.model, args.mc, args.seed)

    report = GraspReport.from_metrics(grasp.fingerprint, metrics, l_fc=bound, mc=mc)
    _emit(report.to_json())
    logger.info(f"metrics: force_closure={metrics.force_closure}, l*={metrics.l_star:.6g}")
    return EXIT_OK if metrics.force_closure else EXIT_NOT_FORCE_CLOSURE


# --- verify ----------------------------------------------------------------

Trial = Callable[[int, np.random.Generator, Any], Tuple[bool, Dict[str, Any]]]


def _random_set(trial_seed: int, rng: np.random.Generator, n_w: Optional[int]):
    size = n_w or int(rng.choice(VERIFY_SIZES))
    return random_force_closure_set(size, trial_seed)


def _trial_containment(trial_seed: int, rng: np.random.Generator, args) -> Tuple[bool, Dict[str, Any]]:
    W_bar = _random_set(trial_seed, rng, args.n_w)
    W = perturb_in_hull(W_bar, rng)
    cert = certify_containment(W_bar, W)
    closed = contains_origin(W)
    return cert.certified and closed, {"W_bar": W_bar.points, "W": W.points,
                                       "certified": cert.certified, "force_closure": closed}


def _trial_ball(trial_seed: int, rng: np.random.Generator, args) -> Tuple[bool, Dict[str, Any]]:
    W_bar = _random_set(trial_seed, rng, args.n_w)
    eps = ferrari_canny(W_bar)
    W = perturb_in_ball(W_bar, eps * BALL_SHRINK, rng)
    cert = certify_ball(W_bar, W)
    closed = contains_origin(W)
    return cert.certified and closed, {"W_bar": W_bar.points, "W": W.points, "epsilon": eps,
                                       "certified": cert.certified, "force_closure": closed}


def _trial_bound(trial_seed: int, rng: np.random.Generator, args) -> Tuple[bool, Dict[str, Any]]:
    W = _random_set(trial_seed, rng, args.n_w)
    lhs, eps, holds = bound_check(W)
    return holds, {"W": W.points, "two_delta_l_star": lhs, "epsilon": eps}


def _trial_duality(trial_seed: int, rng: np.random.Generator, args) -> Tuple[bool, Dict[str, Any]]:
    W = _random_set(trial_seed, rng, args.n_w)
    primal = min_weight(W).l_star
    dual = min_weight_dual(W).phi_star
    return abs(primal - dual) <= DUALITY_TOL, {"W": W.points, "l_star": primal, "phi_star": dual}


def _trial_pong(trial_seed: int, rng: np.random.Generator, args) -> Tuple[bool, Dict[str, Any]]:
    model = FrictionModel()
    contacts = random_sphere_grasp(3, trial_seed)
    bound = l_fc(contacts, model, args.pong_config).value
    mc = mc_force_closure(contacts, model, args.mc, trial_seed)
    detail = {
        "contacts": [{"x": c.x, "n_bar": c.n_bar, "sigma1_sq": c.sigma1_sq, "sigma2_sq": c.sigma2_sq}
                     for c in contacts],
        "L_FC": bound, "mc_p_hat": mc.p_hat, "mc_std_err": mc.std_err,
    }
    return bound <= mc.upper(3.0), detail


THEOREMS: Dict[str, Trial] = {
    "containment": _trial_containment,
    "ball": _trial_ball,
    "bound": _trial_bound,
    "duality": _trial_duality,
    "pong": _trial_pong,
}


def run_verification(theorem: str, trials: int, seed: int, args) -> VerifySummary:
    """
    Run `trials` independent checks of one theorem

    Trial seeds come from one Philox stream seeded with `seed`, so the
    summary is a function of (theorem, trials, seed, flags) alone.
    """
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    trial = THEOREMS[theorem]
    summary = VerifySummary(theorem=theorem, trials=trials, seed=seed)
    rng = make_rng(seed)
    for t in range(trials):
        trial_seed = int(rng.integers(2 ** 32))
        try:
            passed, detail = trial(trial_seed, rng, args)
            summary.record(passed, {"trial": t, "seed": trial_seed, **detail})
        except CertificateViolationError as e:
            summary.record(False, {"trial": t, "seed": trial_seed, "error": str(e)})
        except (WrenchLabError, ValueError) as e:
            logger.warning(f"Trial {t} (seed {trial_seed}) failed: {e}")
            summary.record_error({"trial": t, "seed": trial_seed, "error": str(e)})
    logger.info(f"verify {theorem}: {summary.passed}/{trials} passed")
    return summary


def cmd_verify(args) -> int:
    """Pass/fail summary of one theorem on a random corpus; exit 0 iff nothing failed."""
    settings = _load_settings(args)
    trials = args.trials if args.trials is not None else settings.verify_trials
    args.mc = args.mc if args.mc is not None else settings.mc_samples
    args.pong_config = settings.pong_config()
    summary = run_verification(args.theorem, trials, args.seed, args)
    _emit(summary.to_json())
    return EXIT_OK if summary.ok else EXIT_ERROR


# --- pong ------------------------------------------------------------------

def _pong_config(settings: Settings, doc: Dict[str, Any]) -> PongConfig:
    base = settings.pong_config()
    section = doc.get("pong", {})
    return PongConfig(
        n_dirs=int(section.get("n_dirs", base.n_dirs)),
        quad_nodes=int(section.get("quad_nodes", base.quad_nodes)),
        theta_max=float(section.get("theta_max", base.theta_max)),
    )


def revalidate_polygons(report_doc: Dict[str, Any], grasp: GraspInput, result: PongResult) -> List[str]:
    """
    Check every emitted polygon vertex against the inclusion condition

    Reads the vertices back from the serialized report so the check covers
    what a consumer of the JSON sees.
    """
    maps = wrench_maps(grasp.contacts, grasp.model)
    problems = []
    for i, finger in enumerate(report_doc["fingers"]):
        frame = grasp.contacts[i].tangent_frame
        for z in finger["polygon"]:
            if not inclusion_holds(z, i, result.W_bar, maps, frame):
                problems.append(f"finger {i} polygon vertex {z} fails the inclusion check")
    return problems


def cmd_pong(args) -> int:
    """L_FC, per-finger integrals and polygons, with an optional MC cross-check."""
    settings = _load_settings(args)
    loader = GraspDataLoader()
    doc = loader.load_problem(args.problem)
    grasp = loader.parse_contact_spec(doc, source=str(args.problem))
    try:
        config = _pong_config(settings, doc)
    except (TypeError, ValueError, AttributeError) as e:
        raise WrenchLabError(f"bad pong section: {e}")

    result = l_fc(grasp.contacts, grasp.model, config)
    n_mc = args.mc if args.mc is not None else int(doc.get("mc", settings.mc_samples))
    mc = mc_force_closure(grasp.contacts, grasp.model, n_mc, args.seed) if n_mc else None

    report = PongReport(fingerprint=grasp.fingerprint, result=result, mc_estimate=mc)
    if result.any_clamped:
        report.warnings.append(f"vertex LPs clamped at theta = {config.theta_max}")
    if result.mean_force_closure:
        report.warnings.extend(revalidate_polygons(json.loads(report.to_json()), grasp, result))
    else:
        report.warnings.append("mean grasp is not force closure")

    _emit(report.to_json())
    logger.info(f"pong: L_FC = {result.value:.6g}")
    return EXIT_OK


# --- synth -----------------------------------------------------------------

def _synth_problem(doc: Dict[str, Any], settings: Settings) -> SynthProblem:
    problem = dict(doc.get("problem", doc))
    problem.setdefault("min_separation", settings.min_separation)
    return SynthProblem.from_dict(problem)


def cmd_synth(args) -> int:
    """Single synthesis run (JSON) or a sweep of runs (CSV)."""
    settings = _load_settings(args)
    problem = _synth_problem(GraspDataLoader().load_problem(args.problem), settings)
    max_iters = args.max_iters if args.max_iters is not None else settings.max_iters

    if args.sweep is None:
        result = synthesize(problem, args.seed, max_iters)
        _emit(dumps({
            "seed": result.seed,
            "contacts": result.contacts,
            "objective": problem.objective,
            "objective_value": result.objective_value,
            "metric_value": result.metric_value,
            "iterations": result.iterations,
            "converged": result.converged,
            "feasible": result.feasible,
        }))
        return EXIT_OK

    rows = sweep(problem, args.sweep, args.seed, max_iters, mc_samples=args.mc)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="") as f:
            write_sweep_csv(rows, problem.n_fingers, f)
        logger.info(f"Wrote {len(rows)} sweep rows to {out}")
    else:
        write_sweep_csv(rows, problem.n_fingers, sys.stdout)
    return EXIT_OK


# --- bench -----------------------------------------------------------------

def cmd_bench(args) -> int:
    """Vertex-LP throughput with CPU/memory sampling."""
    result = benchmark_vertex_lps(
        instances=args.instances, seed=args.seed, n_fingers=args.fingers,
        n_dirs=args.dirs, max_workers=args.workers,
    )
    _emit(dumps(result))
    return EXIT_OK


# --- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wrenchlab", description="WrenchLab grasp robustness tools")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--settings", help="Settings JSON file (default: $WRENCHLAB_SETTINGS)")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging on stderr")

    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    metrics_parser = subparsers.add_parser("metrics", help="Metrics of one grasp")
    metrics_parser.add_argument("input", help="Contact-spec JSON or raw wrench CSV")
    metrics_parser.add_argument("--pong", action="store_true", help="Also compute L_FC")
    metrics_parser.add_argument("--mc", type=_non_negative_int, default=0,
                                help="Monte Carlo force-closure samples (0 = off)")
    metrics_parser.add_argument("--seed", type=int, default=0, help="Monte Carlo seed")

    verify_parser = subparsers.add_parser("verify", help="Check a theorem on a random corpus")
    verify_parser.add_argument("theorem", choices=sorted(THEOREMS), help="What to verify")
    verify_parser.add_argument("--trials", type=_positive_int, help="Number of trials")
    verify_parser.add_argument("--seed", type=int, default=0, help="Corpus seed")
    verify_parser.add_argument("--n-w", dest="n_w", type=_positive_int,
                               help="Fix the wrench-set size (default: drawn from 8, 12, 16, 24)")
    verify_parser.add_argument("--mc", type=_positive_int, help="Monte Carlo samples per pong trial")

    pong_parser = subparsers.add_parser("pong", help="L_FC bound of one grasp")
    pong_parser.add_argument("problem", help="Problem JSON (contact spec with optional pong/mc sections)")
    pong_parser.add_argument("--mc", type=_non_negative_int, help="Monte Carlo samples (0 = omit)")
    pong_parser.add_argument("--seed", type=int, default=0, help="Monte Carlo seed")

    synth_parser = subparsers.add_parser("synth", help="Grasp synthesis")
    synth_parser.add_argument("problem", help="Problem JSON")
    synth_parser.add_argument("--sweep", type=_positive_int, help="Number of independent runs")
    synth_parser.add_argument("--seed", type=int, default=0, help="First run seed")
    synth_parser.add_argument("--out", help="Sweep CSV path (default: stdout)")
    synth_parser.add_argument("--max-iters", dest="max_iters", type=_positive_int, help="Iteration cap per run")
    synth_parser.add_argument("--mc", type=_non_negative_int, help="Monte Carlo samples per sweep grasp")

    bench_parser = subparsers.add_parser("bench", help="Vertex-LP throughput benchmark")
    bench_parser.add_argument("--instances", type=_positive_int, default=10, help="Random grasps")
    bench_parser.add_argument("--seed", type=int, default=0, help="First grasp seed")
    bench_parser.add_argument("--fingers", type=_positive_int, default=3, help="Fingers per grasp")
    bench_parser.add_argument("--dirs", type=_positive_int, default=8, help="Search directions")
    bench_parser.add_argument("--workers", type=_positive_int, help="Batch threads")

    return parser


def configure_logging(verbose: bool):
    level_name = "DEBUG" if verbose else os.environ.get(LOG_LEVEL_ENV, "WARNING").upper()
    level = getattr(logging, level_name, logging.WARNING)
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


COMMANDS = {
    "metrics": cmd_metrics,
    "verify": cmd_verify,
    "pong": cmd_pong,
    "synth": cmd_synth,
    "bench": cmd_bench,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one command and return its exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_ERROR

    configure_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except (WrenchLabError, ValueError, OSError) as e:
        print(f"wrenchlab {args.command}: {e}", file=sys.stderr)
        return EXIT_ERROR
