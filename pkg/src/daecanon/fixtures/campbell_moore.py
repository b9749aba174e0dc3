"""
Linearized index-3 test problem with parameter alpha != 0.

m = 7, r = 6, theta = (1, 1), d = 4. The pair becomes Hessenberg after
swapping the first two groups of three variables and equations.
"""

from typing import List

from ..expr import MatrixFn
from ..models.reports import CheckResult
from .base import Display, identity_rows, matrix_check
from .hmm98 import zero_product_check

NAME = "campbell-moore"

S, C = "sin(t)", "cos(t)"
SC = "sin(t)*cos(t)"
S2, C2 = "sin(t)^2", "cos(t)^2"
S2T = "sin(2*t)/2"

PROBLEM = {
    "name": NAME,
    "interval": [0.1, 1.4],
    "structure": {
        "kind": "hessenberg3",
        "m_blocks": [3, 3, 1],
        "permutation": [3, 4, 5, 0, 1, 2, 6],
        "bases": {
            "B_d3": [[SC, S], [S2, f"-{C}"], [C, "0"]],
            "B_a3": [[C2], [SC], [f"-{S}"]],
        },
    },
    "E": [["1" if i == j and i < 6 else "0" for j in range(7)] for i in range(7)],
    "F": [
        ["0", "0", "0", "-1", "0", "0", "0"],
        ["0", "0", "0", "0", "-1", "0", "0"],
        ["0", "0", "0", "0", "0", "-1", "0"],
        ["0", "0", S, "0", "1", f"-{C}", f"-alpha*{C2}"],
        ["0", "0", f"-{C}", "-1", "0", f"-{S}", f"-alpha*{SC}"],
        ["0", "0", "1", "0", "0", "0", f"alpha*{S}"],
        [f"alpha*{C2}", f"alpha*{SC}", f"-alpha*{S}", "0", "0", "0", "0"],
    ],
}

PARAMETER_SETS = [{"alpha": 0.3}, {"alpha": 1.0}]

E_PRESCF = [
    ["1", "0", "0", "0", "0", "0", "0"],
    ["0", "1", "0", "0", "0", "0", "0"],
    ["0", "0", "1", "0", "0", "0", "0"],
    ["0", "0", "0", "1", "0", "0", "0"],
    ["0", "0", "0", "0", "0", "1", "0"],
    ["0", "0", "0", "0", "0", "0", "1"],
    ["0", "0", "0", "0", "0", "0", "0"],
]

# Rows 0..3 of F1 and F2 agree
F_DIFFERENTIAL = [
    [f"-{S2T}", "0", "0", f"-{C}^3", "0", "0", "0"],
    ["0", "0", C, "0", "0", "0", "0"],
    ["-1", "0", "0", S, "0", "0", "0"],
    ["0", "-1", f"-{S}", "0", "0", "0", "0"],
]

F22_TOP = f"(cos(t)^2 + 1)*{S2}"


def _identity_with(rows: dict) -> List[List[str]]:
    out = identity_rows(7)
    for index, row in rows.items():
        out[index] = row
    return out


DISPLAYS = [
    Display(
        "L0",
        "step0",
        "L",
        [
            ["0", "0", "0", SC, S2, C, "0"],
            ["0", "0", "0", S, f"-{C}", "0", "0"],
            [SC, S2, C, "0", "0", "0", "0"],
            [S, f"-{C}", "0", "0", "0", "0", "0"],
            ["0", "0", "0", C2, SC, f"-{S}", "0"],
            [C2, SC, f"-{S}", "0", "0", "0", "0"],
            ["0", "0", "0", "0", "0", "0", "1"],
        ],
        signs="rows",
    ),
    Display(
        "K0",
        "step0",
        "K",
        [
            ["0", "0", SC, S, "0", "0", C2],
            ["0", "0", S2, f"-{C}", "0", "0", SC],
            ["0", "0", C, "0", "0", "0", f"-{S}"],
            [SC, S, "0", "0", "0", C2, "0"],
            [S2, f"-{C}", "0", "0", "0", SC, "0"],
            [C, "0", "0", "0", "0", f"-{S}", "0"],
            ["0", "0", "0", "0", "1", "0", "0"],
        ],
        signs="columns",
    ),
    Display("E0", "step0", "E", E_PRESCF),
    Display(
        "F0",
        "step0",
        "F",
        [
            [f"-{S2T}", "0", C2, "0", "0", f"-{C2}", f"-{S2T}"],
            ["0", "0", C, "0", "0", "0", f"-{S}"],
            ["-1", "0", "0", S, "0", "0", "-1"],
            ["0", "-1", f"-{S}", "0", "0", "0", f"-{C}"],
            [S2, "0", f"-{S2T}", "0", "-alpha", S2T, S2],
            ["0", "0", "1", C, "0", "-1", "0"],
            ["0", "0", "0", "0", "0", "0", "alpha"],
        ],
    ),
    Display(
        "L1",
        "step1",
        "L",
        _identity_with({
            0: ["1", "0", "0", "0", "0", f"-{C2}", "(cos(t)^2 + 3)*sin(2*t)/(2*alpha)"],
            1: ["0", "1", "0", "0", "0", "0", f"{S}/alpha"],
            2: ["0", "0", "1", "0", "0", "0", "(cos(t)^2 + 1)/alpha"],
            3: ["0", "0", "0", "1", "0", "0", f"{C}/alpha"],
        }),
    ),
    Display("K1", "step1", "K", _identity_with({0: ["1", "0", "0", "0", "0", "0", C2]})),
    Display(
        "F1",
        "step1",
        "F",
        F_DIFFERENTIAL + [
            [S2, "0", f"-{S2T}", "0", "-alpha", S2T, F22_TOP],
            ["0", "0", "1", C, "0", "-1", "0"],
            ["0", "0", "0", "0", "0", "0", "alpha"],
        ],
    ),
    Display("L2", "step2", "L", _identity_with({4: ["0", "0", "-1", f"-{C}", "1", "0", "0"]})),
    Display(
        "K2",
        "step2",
        "K",
        _identity_with({
            4: [f"({S2} + 1)/alpha", f"{C}/alpha", "sin(2*t)/(2*alpha)", f"-(sin(t)^3 + {S})/alpha", "1", "0", "0"],
            5: ["0", "0", "1", C, "0", "1", "0"],
        }),
    ),
    Display("E2", "step2", "E", E_PRESCF),
    Display(
        "F2",
        "step2",
        "F",
        F_DIFFERENTIAL + [
            ["0", "0", "0", "0", "-alpha", S2T, F22_TOP],
            ["0", "0", "0", "0", "0", "-1", "0"],
            ["0", "0", "0", "0", "0", "0", "alpha"],
        ],
    ),
]

A = [["0", "0", C2], ["0", "0", "0"], ["0", "0", "0"], ["0", "0", "0"]]
B = [
    [f"({S2} + 1)/alpha", f"{C}/alpha", "sin(2*t)/(2*alpha)", f"-(sin(t)^3 + {S})/alpha"],
    ["0", "0", "1", C],
    ["0", "0", "0", "0"],
]


def extra_checks(session, result, params, ts, prefix: str) -> List[CheckResult]:
    tol = session.settings.tol
    characteristics = session.Canonical.characteristics(result)
    found = (characteristics.mu, characteristics.r, characteristics.theta, characteristics.d)
    checks = [
        CheckResult(
            name=f"{prefix}characteristics",
            tol=tol,
            passed=found == (3, 6, [1, 1], 4),
            detail=f"(mu, r, theta, d) = {found}",
        )
    ]
    objects = session.Canonical.projector_from_prescf(result)
    checks.append(matrix_check(f"{prefix}A", objects.A, MatrixFn.from_rows(A, params), ts, tol))
    checks.append(matrix_check(f"{prefix}B", objects.B, MatrixFn.from_rows(B, params), ts, tol))
    checks.append(zero_product_check(session, objects, ts, prefix))
    for check in session.Canonical.check_projector(objects, ts):
        checks.append(check.model_copy(update={"name": f"{prefix}{check.name}"}))
    return checks
