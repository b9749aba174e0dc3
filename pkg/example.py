#!/usr/bin/env python3
"""
Example script demonstrating how to use daecanon.
It runs every resource group on the problems in problems/ and the embedded examples.

Usage:
    1. Optionally set tolerances in a .env file:
       DAE_CANON_TOL=1e-9
       DAE_CANON_SAMPLES=20

    2. Run the script:
       python example.py
"""

import logging

import numpy as np

from daecanon import CanonSession, load
from daecanon import fixtures
from daecanon.utils.exceptions import CanonException

logging.basicConfig(level=logging.INFO)


def run_pipeline(session):
    """Run the full pipeline on a small PreSCF pair"""
    print("\n=== PIPELINE ===")
    problem = load("problems/small_prescf.json")
    result = session.Pipeline.run_pipeline(problem.pair, problem.tag)
    for stage in result.stages:
        print(f"{stage.label}: {stage.iterations} iteration(s), passed={stage.report.passed}")
    print(f"Characteristics: {result.characteristics}")
    print(f"Omega: {result.omega.to_strings()}")
    return problem, result


def canonical_objects(session, result):
    """Canonical projector and pure ODE"""
    print("\n=== CANONICAL ===")
    objects = session.Canonical.projector_from_prescf(result)
    print(f"Pi_can(0.5) =\n{np.round(objects.Pi_can(0.5), 6)}")
    ode = session.Canonical.pure_ode(result)
    print(f"pure ODE of dimension {ode.d}")


def solve(session, problem, result):
    """Initial value problem through the decoupled form"""
    print("\n=== SOLVER ===")
    trajectory = session.Solver.solve_ivp(result, t0=0.0, u0=[1.0], q=problem.q, grid=50)
    print(f"x(t0) = {trajectory.x0}")
    print(f"max residual = {trajectory.max_residual:.2e}")


def frontends(session):
    """Step 0 for Hessenberg and multibody inputs"""
    print("\n=== FRONTENDS ===")
    for path in ("problems/hessenberg2.json", "problems/linear_pendulum.json"):
        problem = load(path)
        outcome = session.Frontends.step0(problem.pair, problem.tag)
        print(f"{problem.name}: d={outcome.pair.d}, blocks={outcome.pair.spec.sizes}, caveats={outcome.caveats}")


def reproduce(session):
    """Check the embedded worked examples"""
    print("\n=== WORKED EXAMPLES ===")
    for name in fixtures.names():
        report = fixtures.reproduce(name, session)
        print(f"{name}: {'passed' if report.passed else report.first_failure}")


def main():
    with CanonSession() as session:
        try:
            problem, result = run_pipeline(session)
            canonical_objects(session, result)
            solve(session, problem, result)
            frontends(session)
            reproduce(session)
        except CanonException as e:
            print(f"Error {e.code}: {e.message}")


if __name__ == "__main__":
    main()
