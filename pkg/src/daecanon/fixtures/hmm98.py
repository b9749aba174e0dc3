"""
Index-2 Hessenberg example with parameters eta and lam.

The homogeneous solution is x(t) = C e^(-lam t) (1, eta t - 1, 1 - eta t).
gamma(t) = sqrt((1 - eta t)^2 + 1) never vanishes.
"""

import math
from typing import List

import numpy as np

from ..expr import MatrixFn
from ..models.reports import CheckResult
from ..problem import load
from .base import Display, diag_rows, display_checks, identity_rows, matrix_check, with_parameters

NAME = "hmm98"

G = "sqrt((1 - eta*t)^2 + 1)"
G2 = "((1 - eta*t)^2 + 1)"

PROBLEM = {
    "name": NAME,
    "interval": [0.0, 2.0],
    "structure": {
        "kind": "hessenberg2",
        "m_blocks": [2, 1],
        "bases": {
            "B_d": [[f"1/{G}"], [f"(eta*t - 1)/{G}"]],
            "B_a": [[f"(1 - eta*t)/{G}"], [f"1/{G}"]],
        },
    },
    "E": [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "0"]],
    "F": [
        ["lam", "-1", "-1"],
        ["eta*(-eta*t^2 + t - 1)", "lam", "-eta*t"],
        ["-eta*t + 1", "1", "0"],
    ],
}

# Same problem with the kernel bases left to the hessenberg2 frontend
PROBLEM_AUTOMATIC_BASES = dict(PROBLEM, structure={k: v for k, v in PROBLEM["structure"].items() if k != "bases"})

PARAMETER_SETS = [{"eta": 1.0, "lam": 2.0}, {"eta": 0.5, "lam": -1.0}]

OMEGA = f"lam + (-eta^2*t + eta)/{G2}"
F22_12 = f"(eta^2*lam*t^2 + eta^2*t - 2*eta*lam*t - eta + 2*lam)/{G2}"
E_PRESCF = [["1", "0", "0"], ["0", "0", "1"], ["0", "0", "0"]]

DISPLAYS = [
    Display(
        "L0",
        "step0",
        "L",
        [[f"1/{G}", f"(eta*t - 1)/{G}", "0"], [f"(-eta*t + 1)/{G}", f"1/{G}", "0"], ["0", "0", "1"]],
        signs="rows",
    ),
    Display(
        "K0",
        "step0",
        "K",
        [[f"1/{G}", "0", f"(-eta*t + 1)/{G}"], [f"(eta*t - 1)/{G}", "0", f"1/{G}"], ["0", "1", "0"]],
        signs="columns",
    ),
    Display("E0", "step0", "E", E_PRESCF),
    Display(
        "F0",
        "step0",
        "F",
        [
            [
                f"(-eta*(eta*t - 1)*(t*(eta*t - 1) + 1) + lam + (eta*t - 1)*(lam*(eta*t - 1) - 1))/{G2}",
                f"(-eta*t*(eta*t - 1) - 1)/{G}",
                f"(eta^4*t^4 - 3*eta^3*t^3 + eta^3*t^2 + 3*eta^2*t^2 - 2*eta^2*t - eta*t - 1)/{G2}",
            ],
            [
                f"(-eta*t + 1)/{G2}",
                f"-1/{G}",
                f"(eta*t + lam + (eta*t - 1)*(eta*t*(eta*t - 1) + eta + lam*(eta*t - 1)) - 1)/{G2}",
            ],
            ["0", "0", G],
        ],
    ),
    Display(
        "L1",
        "step1",
        "L",
        [["1", "-eta^2*t^2 + eta*t - 1", f"eta*t*{G}"], ["0", "1", "0"], ["0", "0", "1"]],
    ),
    Display("K1", "step1", "K", [["1", "0", "eta^2*t^2 - eta*t + 1"], ["0", "1", "0"], ["0", "0", "1"]]),
    Display(
        "F1",
        "step1",
        "F",
        [[OMEGA, "0", "0"], [f"(-eta*t + 1)/{G2}", f"-1/{G}", F22_12], ["0", "0", G]],
    ),
    Display("L2", "step2", "L", identity_rows(3)),
    Display("K2", "step2", "K", [["1", "0", "0"], [f"(-eta*t + 1)/{G}", "1", "0"], ["0", "0", "1"]]),
    Display("F2", "step2", "F", [[OMEGA, "0", "0"], ["0", f"-1/{G}", F22_12], ["0", "0", G]]),
    Display(
        "L",
        "step2",
        "L_total",
        [
            [f"eta*t*{G}", f"(-eta^2*t^2 + 2*eta*t - 2)/{G}", f"eta*t*{G}"],
            [f"(-eta*t + 1)/{G}", f"1/{G}", "0"],
            ["0", "0", "1"],
        ],
    ),
    Display(
        "K",
        "step2",
        "K_total",
        [[f"1/{G}", "0", G], [f"(eta*t - 1)/{G}", "0", f"eta*t*{G}"], [f"(-eta*t + 1)/{G}", "1", "0"]],
    ),
    Display(
        "K^-1",
        "step2",
        "K_total_inv",
        [[f"eta*t*{G}", f"-{G}", "0"], ["eta*t*(eta*t - 1)", "-eta*t + 1", "1"], [f"(-eta*t + 1)/{G}", f"1/{G}", "0"]],
    ),
    Display("E_SCF", "step3", "E", [["1", "0", "0"], ["0", "0", f"-{G}"], ["0", "0", "0"]]),
    Display("F_SCF", "step3", "F", diag_rows([OMEGA, "1", "1"])),
    Display("L4", "step4", "L", diag_rows(["1", f"-1/{G}", "1"])),
    Display("K4", "step4", "K", diag_rows(["1", f"-{G}", "1"])),
    Display("E_SSCF", "step4", "E", E_PRESCF),
    Display("F_SSCF", "step4", "F", diag_rows([OMEGA, "1", "1"])),
]

PI_CAN = [
    ["eta*t", "-1", "0"],
    ["eta*t*(eta*t - 1)", "-eta*t + 1", "0"],
    ["eta*t*(-eta*t + 1)", "eta*t - 1", "0"],
]
A = [["0", "eta^2*t^2 - eta*t + 1"]]
B = [[f"(-eta*t + 1)/{G}"], ["0"]]


def extra_checks(session, result, params, ts, prefix: str) -> List[CheckResult]:
    tol = session.settings.tol
    checks = []
    objects = session.Canonical.projector_from_prescf(result)
    for name, actual, rows in (("Pi_can", objects.Pi_can, PI_CAN), ("A", objects.A, A), ("B", objects.B, B)):
        checks.append(matrix_check(f"{prefix}{name}", actual, MatrixFn.from_rows(rows, params), ts, tol))
    checks.append(zero_product_check(session, objects, ts, prefix))
    checks.append(matrix_check(f"{prefix}omega", result.omega, MatrixFn.from_rows([[OMEGA]], params), ts, tol))
    checks.append(_scaled_omega_check(session, params, ts, prefix))
    checks.append(_solution_check(session, result, params, prefix))
    checks.extend(_automatic_bases_checks(session, params, ts, prefix))
    return checks


def zero_product_check(session, objects, ts, prefix: str) -> CheckResult:
    AB = session.normalize(objects.A @ objects.B)
    symbolic = AB.is_zero_expr()
    deviation = 0.0 if symbolic else AB.max_abs(ts)
    return CheckResult(
        name=f"{prefix}AB_zero",
        deviation=deviation,
        tol=session.settings.zero_tol,
        passed=symbolic or deviation <= session.settings.zero_tol,
        detail="symbolic zero" if symbolic else "zero at samples only",
    )


def _scaled_omega_check(session, params, ts, prefix: str) -> CheckResult:
    """With the differential variable scaled by gamma, the pure ODE is z' + lam z = 0."""
    document = dict(PROBLEM, parameters=dict(params))
    document["structure"] = dict(PROBLEM["structure"], scaling=[G])
    loaded = load(document)
    scaled = session.Pipeline.run_pipeline(loaded.pair, loaded.tag, upto="step1")
    expected = MatrixFn.from_rows([["lam"]], params)
    return matrix_check(f"{prefix}omega_scaled", scaled.omega, expected, ts, session.settings.tol)


def _automatic_bases_checks(session, params, ts, prefix: str) -> List[CheckResult]:
    """Every display again, with B_d and B_a computed from H21 by the frontend."""
    document, _ = with_parameters(PROBLEM_AUTOMATIC_BASES, params)
    loaded = load(document)
    result = session.Pipeline.run_pipeline(loaded.pair, loaded.tag)
    return display_checks(result, DISPLAYS, params, ts, session.settings.tol, f"{prefix}automatic bases: ")

def _solution_check(session, result, params, prefix: str) -> CheckResult:
    """x(0) = (1, -1, 1) needs u(0) = gamma(0) = sqrt(2)."""
    eta, lam = params["eta"], params["lam"]
    trajectory = session.Solver.solve_ivp(result, t0=0.0, u0=[math.sqrt(2.0)], grid=50)
    t = trajectory.t
    exact = np.exp(-lam * t)[:, None] * np.stack([np.ones_like(t), eta * t - 1, 1 - eta * t], axis=1)
    error = float(np.max(np.abs(trajectory.x - exact)) / np.max(np.abs(exact)))
    return CheckResult(name=f"{prefix}solution", deviation=error, tol=1e-7, passed=error < 1e-7)
