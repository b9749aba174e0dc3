"""
daecanon command line.

Reports go to stdout as JSON, logs to stderr. Exit codes: 0 success,
1 a failed check or computation, 2 an input error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from . import fixtures
from .models.params import STAGE_ALIASES, StageName
from .models.reports import CheckResult
from .models.settings import CanonSettings
from .models.structure import Characteristics
from .oracle import frozen_pencil_structure
from .problem import LoadedProblem, load
from .session import CanonSession
from .utils import export
from .utils.exceptions import INPUT_ERRORS, CanonException, ConfigurationError
from .utils.sampling import midpoint

logger = logging.getLogger("daecanon")


class CommandFailed(Exception):
    """A command finished but one of its checks failed."""

    def __init__(self, report: Dict[str, Any], check: Optional[CheckResult] = None, message: str = ""):
        self.report = report
        self.check = check
        self.message = message or (f"check {check.name} failed" if check else "command failed")
        super().__init__(self.message)


def _emit(document: Dict[str, Any]):
    print(json.dumps(document, indent=2, default=str))


def _first_failure(checks: Sequence[CheckResult]) -> Optional[CheckResult]:
    return next((c for c in checks if not c.passed), None)


def _characteristics_document(c: Characteristics) -> Dict[str, Any]:
    return c.model_dump()


# -- commands ---------------------------------------------------------------


def cmd_analyze(session: CanonSession, args) -> Dict[str, Any]:
    loaded = load(args.file)
    outcome = session.Frontends.step0(loaded.pair, loaded.tag)
    pair = outcome.pair
    report = {
        "problem": loaded.name,
        "kind": loaded.tag.kind.value,
        "characteristics": _characteristics_document(Characteristics.from_spec(pair.spec, pair.d)),
        "blocks": {"sizes": pair.spec.sizes, "ordering": pair.spec.ordering.value},
        "diagnosis": outcome.diagnosis.model_dump(),
        "caveats": outcome.caveats,
    }
    if not outcome.diagnosis.passed:
        raise CommandFailed(report, message="; ".join(outcome.diagnosis.notes) or "step0 output is not in PreSCF")
    return report


def _oracle_check(session: CanonSession, loaded: LoadedProblem, characteristics: Characteristics) -> CheckResult:
    """Frozen-pencil structure of a constant pair against the pipeline's characteristics."""
    t = midpoint(loaded.pair.interval)
    frozen = frozen_pencil_structure(loaded.pair.E(t), loaded.pair.F(t), rank_tol=session.settings.rank_tol)
    found = (frozen.mu, frozen.theta, frozen.d)
    # a nonsingular E has index 0 for the pencil but no nilpotent blocks here
    mu = characteristics.mu if characteristics.a else 0
    expected = (mu, characteristics.theta, characteristics.d)
    return CheckResult(
        name="frozen_pencil",
        passed=found == expected,
        detail=f"oracle (mu, theta, d) = {found}, pipeline {expected}",
    )


def cmd_canon(session: CanonSession, args) -> Dict[str, Any]:
    loaded = load(args.file)
    target = STAGE_ALIASES[args.stage]
    result = session.Pipeline.run_pipeline(loaded.pair, loaded.tag, upto=target)
    checks = [
        CheckResult(
            name=f"equivalence_{s.label}",
            deviation=max(s.report.max_dev_E, s.report.max_dev_F),
            tol=s.report.tol,
            passed=s.report.passed,
        )
        for s in result.stages
    ]
    checks.append(
        CheckResult(
            name="stage_reached",
            passed=result.has_stage(target),
            detail=result.step4_error.message if result.step4_error else None,
        )
    )
    if loaded.pair.E.is_constant() and loaded.pair.F.is_constant() and result.has_stage(StageName.STEP3):
        checks.append(_oracle_check(session, loaded, result.characteristics))

    stages = []
    for s in result.stages:
        entry = {"stage": s.label, "iterations": s.iterations, "report": s.report.model_dump(mode="json")}
        if args.out:
            matrices = session.Pipeline.stage_matrices(result, s.label)
            ts = session.verify_grid(loaded.pair)
            entry["files"] = [str(p) for p in export.write_stage(args.out, s.label, matrices, ts, s.caveats, s.report)]
        stages.append(entry)

    report = {
        "problem": loaded.name,
        "requested": target.value,
        "reached": result.last_label,
        "characteristics": _characteristics_document(result.characteristics),
        "stages": stages,
        "checks": [c.model_dump() for c in checks],
        "caveats": result.caveats,
    }
    failure = _first_failure(checks)
    if failure:
        raise CommandFailed(report, failure)
    return report


def cmd_projector(session: CanonSession, args) -> Dict[str, Any]:
    loaded = load(args.file)
    result = session.Pipeline.run_pipeline(loaded.pair, loaded.tag, upto=StageName.STEP2)
    objects = session.Canonical.projector_from_prescf(result)
    ts = [args.at] if args.at is not None else session.verify_grid(loaded.pair)
    checks = session.Canonical.check_projector(objects, ts)
    report = {
        "problem": loaded.name,
        "d": objects.d,
        "Pi_can": objects.Pi_can.to_strings(),
        "samples": [{"t": t, "Pi_can": objects.Pi_can(t).tolist()} for t in ts],
        "checks": [c.model_dump() for c in checks],
    }
    if args.out:
        report["files"] = [str(p) for p in export.write_projector(args.out, objects.Pi_can, ts)]
    failure = _first_failure(checks)
    if failure:
        raise CommandFailed(report, failure)
    return report


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"--u0 must be a comma separated list of numbers, got {text!r}")


def cmd_solve(session: CanonSession, args) -> Dict[str, Any]:
    loaded = load(args.file)
    result = session.Pipeline.run_pipeline(loaded.pair, loaded.tag)
    trajectory = session.Solver.solve_ivp(
        result,
        t0=args.t0,
        u0=_floats(args.u0),
        q=loaded.q,
        grid=args.grid,
        rtol=session.settings.rtol,
    )
    check = CheckResult(
        name="residual",
        deviation=trajectory.max_residual,
        tol=args.max_residual,
        passed=trajectory.max_residual <= args.max_residual,
    )
    report = {
        "problem": loaded.name,
        "stage": result.last_label,
        "t0": trajectory.t0,
        "x0": trajectory.x0.tolist(),
        "points": len(trajectory.t),
        "max_residual": trajectory.max_residual,
        "checks": [check.model_dump()],
    }
    if args.out:
        report["trajectory"] = str(export.write_trajectory(args.out, trajectory))
    if not check.passed:
        raise CommandFailed(report, check)
    return report


def cmd_reproduce(session: CanonSession, args) -> Dict[str, Any]:
    report = fixtures.reproduce(args.name, session)
    document = report.model_dump()
    document["passed"] = report.passed
    if not report.passed:
        raise CommandFailed(document, report.first_failure)
    return document


COMMANDS = {
    "analyze": cmd_analyze,
    "canon": cmd_canon,
    "projector": cmd_projector,
    "solve": cmd_solve,
    "reproduce": cmd_reproduce,
}


# -- argument parsing -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="Log debug output to stderr")
    common.add_argument("--tol", type=float, default=None, help="Verification tolerance (overrides DAE_CANON_TOL)")
    common.add_argument("--samples", type=int, default=None, help="Number of verification samples")
    common.add_argument("--rtol", type=float, default=None, help="Integrator relative tolerance")
    common.add_argument("--env-file", default=None, help="Path of a .env file with DAE_CANON_* settings")

    parser = argparse.ArgumentParser(
        prog="daecanon",
        description="Transform linear time-varying DAEs into standard canonical form.",
    )
    # common options go after the subcommand so its defaults cannot mask them
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="Canonical characteristics and PreSCF diagnosis")
    p.add_argument("file", type=Path)

    p = sub.add_parser("canon", parents=[common], help="Run the pipeline up to a stage")
    p.add_argument("file", type=Path)
    p.add_argument("--stage", choices=list(STAGE_ALIASES), default="sscf")
    p.add_argument("--out", type=Path, default=None, help="Directory for stage JSON and CSV dumps")

    p = sub.add_parser("projector", parents=[common], help="Canonical projector")
    p.add_argument("file", type=Path)
    p.add_argument("--at", type=float, default=None, help="Evaluate at a single time instead of the sample grid")
    p.add_argument("--out", type=Path, default=None, help="Directory for projector JSON and CSV")

    p = sub.add_parser("solve", parents=[common], help="Solve an initial value problem")
    p.add_argument("file", type=Path)
    p.add_argument("--t0", type=float, required=True)
    p.add_argument("--u0", default="", help="Comma separated initial value of the pure-ODE component")
    p.add_argument("--grid", type=int, default=100)
    p.add_argument("--max-residual", type=float, default=1e-7)
    p.add_argument("--out", type=Path, default=None, help="Trajectory CSV path")

    p = sub.add_parser("reproduce", parents=[common], help="Check a worked example against its displayed matrices")
    p.add_argument("name", choices=fixtures.names())
    return parser


def configure_logging(verbose: bool):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    configure_logging(args.verbose)

    try:
        settings = CanonSettings.from_env(args.env_file, tol=args.tol, n_verify=args.samples, rtol=args.rtol)
        with CanonSession(settings) as session:
            report = COMMANDS[args.command](session, args)
    except CommandFailed as e:
        logger.error(e.message)
        _emit({"status": "failed", "message": e.message, **e.report})
        return 1
    except INPUT_ERRORS as e:
        logger.error(e.message)
        _emit({"status": "error", "code": e.code, "message": e.message})
        return 2
    except CanonException as e:
        logger.error(e.message)
        document = {"status": "error", "code": e.code, "message": e.message}
        if e.partial is not None:
            document["completed"] = [s.label for s in e.partial.stages]
        _emit(document)
        return 1

    _emit({"status": "ok", **report})
    return 0


if __name__ == "__main__":
    sys.exit(main())
