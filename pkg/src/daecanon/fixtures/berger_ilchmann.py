"""
Index-2 example with a user supplied Step 0 transform.

m = 3, r = 2, d = 1, one nilpotent block pair [1, 1]. The working interval
must avoid the zeros of sin t.
"""

from typing import List

from ..models.reports import CheckResult
from .base import Display, diag_rows, identity_rows

NAME = "berger-ilchmann"

PROBLEM = {
    "name": NAME,
    "interval": [0.1, 3.0],
    "structure": {
        "kind": "custom_transform",
        "L0": [
            ["1", "-1 - cos(t)/sin(t)", "0"],
            ["cos(t)", "0", "1"],
            ["0", "1", "0"],
        ],
        "K0": [
            ["1/sin(t)", "0", "-cos(t)/sin(t)"],
            ["0", "0", "1"],
            ["0", "1", "0"],
        ],
    },
    "d": 1,
    "blocks": [1, 1],
    "E": [
        ["sin(t)", "cos(t)", "0"],
        ["0", "0", "0"],
        ["-sin(2*t)/2", "sin(t)^2", "0"],
    ],
    "F": [
        ["-sin(t) + cos(t)", "-sin(t) - cos(t)", "0"],
        ["cos(t)", "-sin(t)", "0"],
        ["sin(t)^2", "sin(2*t)/2", "-t^2 - 1"],
    ],
}

PARAMETER_SETS = [{}]

E_PRESCF = [["1", "0", "0"], ["0", "0", "1"], ["0", "0", "0"]]

DISPLAYS = [
    Display("E0", "step0", "E", E_PRESCF),
    Display(
        "F0",
        "step0",
        "F",
        [
            ["(sin(2*t) + 2)/(cos(2*t) - 1)", "0", "sqrt(2)*sin(t + pi/4)/sin(t)^2"],
            ["-cos(t) + 1/sin(t)", "-t^2 - 1", "-cos(t)/sin(t)"],
            ["cos(t)/sin(t)", "0", "-1/sin(t)"],
        ],
    ),
    Display("L1", "step1", "L", [["1", "0", "1 + cos(t)/sin(t)"], ["0", "1", "0"], ["0", "0", "1"]]),
    Display("K1", "step1", "K", identity_rows(3)),
    Display("E1", "step1", "E", E_PRESCF),
    Display(
        "F1",
        "step1",
        "F",
        [
            ["-1", "0", "0"],
            ["-cos(t) + 1/sin(t)", "-t^2 - 1", "-cos(t)/sin(t)"],
            ["cos(t)/sin(t)", "0", "-1/sin(t)"],
        ],
    ),
    Display("L2(1)", "step2", "L@0", [["1", "0", "0"], ["-cos(t)", "1", "0"], ["0", "0", "1"]]),
    Display(
        "K2(1)",
        "step2",
        "K@0",
        [["1", "0", "0"], ["-sqrt(2)*cos(t + pi/4)/(t^2 + 1)", "1", "0"], ["cos(t)", "0", "1"]],
    ),
    Display("L2(2)", "step2", "L@1", identity_rows(3)),
    Display(
        "K2(2)",
        "step2",
        "K@1",
        [["1", "0", "0"], ["sqrt(2)*cos(t + pi/4)/(t^2 + 1)", "1", "0"], ["0", "0", "1"]],
    ),
    Display("E2", "step2", "E", E_PRESCF),
    Display(
        "F2",
        "step2",
        "F",
        [["-1", "0", "0"], ["0", "-t^2 - 1", "-cos(t)/sin(t)"], ["0", "0", "-1/sin(t)"]],
    ),
    Display(
        "L3",
        "step3",
        "L",
        [["1", "0", "0"], ["0", "-1/(t^2 + 1)", "cos(t)/(t^2 + 1)"], ["0", "0", "-sin(t)"]],
    ),
    Display("K3", "step3", "K", identity_rows(3)),
    # L3 E2 puts -1/(t^2 + 1) above the diagonal of the nilpotent part
    Display("E3", "step3", "E", [["1", "0", "0"], ["0", "0", "-1/(t^2 + 1)"], ["0", "0", "0"]]),
    Display("F3", "step3", "F", diag_rows(["-1", "1", "1"])),
    Display("L4", "step4", "L", diag_rows(["1", "-(t^2 + 1)", "1"])),
    Display("K4", "step4", "K", diag_rows(["1", "-1/(t^2 + 1)", "1"])),
    Display("E4", "step4", "E", E_PRESCF),
    Display("F4", "step4", "F", diag_rows(["-1", "1", "1"])),
]


def extra_checks(session, result, params, ts, prefix: str) -> List[CheckResult]:
    tol = session.settings.tol
    characteristics = session.Canonical.characteristics(result)
    expected = (2, 2, [1], 1)
    found = (characteristics.mu, characteristics.r, characteristics.theta, characteristics.d)
    return [
        CheckResult(
            name=f"{prefix}characteristics",
            tol=tol,
            passed=found == expected,
            detail=f"(mu, r, theta, d) = {found}",
        ),
        CheckResult(
            name=f"{prefix}sscf_reached",
            tol=tol,
            passed=result.step4_error is None and result.last_label == "step4",
            detail=result.step4_error.message if result.step4_error else None,
        ),
    ]
