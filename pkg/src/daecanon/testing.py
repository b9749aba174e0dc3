"""
Seeded random problem documents for property tests.

Every generator returns a problem dict accepted by `daecanon.problem.load`.
Entries are small polynomial and trigonometric expressions on the interval
(0, 1); nonsingularity is arranged by construction, not by luck.
"""

from typing import List, Optional, Sequence

import numpy as np

from .models.structure import BlockSpec, Ordering

INTERVAL = [0.0, 1.0]

Rows = List[List[str]]


class Entries:
    """Draws expression strings from a seeded generator."""

    def __init__(self, seed: int, constant: bool = False):
        self.rng = np.random.default_rng(seed)
        self.constant = constant

    def coefficient(self, low: int = -3, high: int = 3) -> int:
        return int(self.rng.integers(low, high + 1))

    def smooth(self) -> str:
        a, b = self.coefficient(), self.coefficient(1, 3)
        if self.constant:
            return str(a)
        templates = [
            f"{a}",
            f"{a}*t + {b}",
            f"{a}*t^2 - {b}*t",
            f"{a}*sin({b}*t)",
            f"{a}*cos(t) + {b}",
            f"{a}*t*cos({b}*t)",
        ]
        return templates[self.rng.integers(len(templates))]

    def positive(self) -> str:
        """An entry bounded away from zero on the interval."""
        b = self.coefficient(1, 3)
        if self.constant:
            return str(b + 1)
        return [f"{b} + t^2", f"{b + 1} + sin(t)", f"{b} + exp(t)"][self.rng.integers(3)]

    def matrix(self, rows: int, cols: int) -> Rows:
        return [[self.smooth() for _ in range(cols)] for _ in range(rows)]

    def upper_triangular(self, n: int, unit: bool = False, lower: bool = False) -> Rows:
        out = [["0"] * n for _ in range(n)]
        for i in range(n):
            out[i][i] = "1" if unit else self.positive()
            for j in range(n):
                if (j > i and not lower) or (j < i and lower):
                    out[i][j] = self.smooth()
        return out


def zeros(rows: int, cols: int) -> Rows:
    return [["0"] * cols for _ in range(rows)]


def identity(n: int, sign: int = 1) -> Rows:
    return [[str(sign) if i == j else "0" for j in range(n)] for i in range(n)]


def assemble(layout: Sequence[Sequence[Rows]]) -> Rows:
    """Glue a block layout of string matrices."""
    out: Rows = []
    for row in layout:
        height = len(row[0])
        for r in range(height):
            out.append([e for piece in row for e in piece[r]])
    return out


def _mul(A: Rows, B: Rows) -> Rows:
    """Product of string matrices, written out as sums of parenthesized products."""
    out = []
    for i in range(len(A)):
        line = []
        for j in range(len(B[0])):
            terms = [f"({A[i][k]})*({B[k][j]})" for k in range(len(B)) if A[i][k] != "0" and B[k][j] != "0"]
            line.append(" + ".join(terms) if terms else "0")
        out.append(line)
    return out


def _transpose(A: Rows) -> Rows:
    return [list(col) for col in zip(*A)] if A else []


def _but(entries: Entries, spec: BlockSpec, unit: bool = False, lower_diagonal: bool = False) -> Rows:
    """Block upper triangular matrix with triangular, nonsingular diagonal blocks."""
    a = spec.a
    out = zeros(a, a)
    for i in range(spec.mu):
        r0, r1 = spec.block_range(i)
        diag = entries.upper_triangular(r1 - r0, unit=unit, lower=lower_diagonal)
        for p in range(r1 - r0):
            out[r0 + p][r0:r1] = diag[p]
        for j in range(i + 1, spec.mu):
            c0, c1 = spec.block_range(j)
            piece = entries.matrix(r1 - r0, c1 - c0)
            for p in range(r1 - r0):
                out[r0 + p][c0:c1] = piece[p]
    return out


def _nilpotent(spec: BlockSpec) -> Rows:
    out = zeros(spec.a, spec.a)
    for i in range(spec.mu - 1):
        r0, _ = spec.block_range(i)
        c0, _ = spec.block_range(i + 1)
        for k in range(min(spec.sizes[i], spec.sizes[i + 1])):
            out[r0 + k][c0 + k] = "1"
    return out


def _sizes(entries: Entries, mu: int, ordering: Ordering, max_size: int = 3) -> List[int]:
    sizes = sorted((int(entries.rng.integers(1, max_size + 1)) for _ in range(mu)), reverse=True)
    return sizes if ordering == Ordering.DECREASING else sizes[::-1]


def _document(name: str, E: Rows, F: Rows, kind: str, d: Optional[int], spec: Optional[BlockSpec], **structure) -> dict:
    document = {
        "name": name,
        "interval": INTERVAL,
        "structure": {"kind": kind, **structure},
        "E": E,
        "F": F,
    }
    if spec is not None:
        document["blocks"] = list(spec.sizes)
        document["ordering"] = spec.ordering.value
        document["d"] = d
    return document


def random_prescf(seed: int, mu: Optional[int] = None, d: Optional[int] = None, constant: bool = False) -> dict:
    """
    A PreSCF pair: E = diag(I_d, N_E), F22 block upper triangular with
    nonsingular diagonal blocks, and F21 F12 block upper triangular because
    either F21 lives in the first block row or F12 in the last block column.
    """
    entries = Entries(seed, constant)
    mu = mu or int(entries.rng.integers(2, 4))
    d = d if d is not None else int(entries.rng.integers(1, 3))
    spec = BlockSpec(sizes=_sizes(entries, mu, Ordering.DECREASING), ordering=Ordering.DECREASING)
    a = spec.a

    E = assemble([[identity(d), zeros(d, a)], [zeros(a, d), _nilpotent(spec)]])
    F11 = entries.matrix(d, d)
    F22 = _but(entries, spec)
    F12, F21 = entries.matrix(d, a), entries.matrix(a, d)
    if entries.rng.random() < 0.5:
        first = spec.sizes[0]
        F21 = F21[:first] + zeros(a - first, d)
    else:
        last = spec.block_range(spec.mu - 1)[0]
        F12 = [["0"] * last + row[last:] for row in F12]
    F = assemble([[F11, F12], [F21, F22]])
    kind = "constant PreSCF" if constant else "PreSCF"
    return _document(f"random {kind} {seed}", E, F, "prescf", d, spec)


def random_constant_prescf(seed: int, mu: Optional[int] = None, d: Optional[int] = None) -> dict:
    return random_prescf(seed, mu=mu, d=d, constant=True)


def random_t_canonical(seed: int, mu: Optional[int] = None, d: int = 1) -> dict:
    """E = diag(I_d, R N_E), F = [[Omega, 0], [F21, R U]] with R, U block upper triangular."""
    entries = Entries(seed)
    mu = mu or int(entries.rng.integers(2, 4))
    spec = BlockSpec(sizes=_sizes(entries, mu, Ordering.DECREASING), ordering=Ordering.DECREASING)
    a = spec.a
    R = _but(entries, spec)
    U = _but(entries, spec, unit=True)
    N = _mul(R, _nilpotent(spec))
    E = assemble([[identity(d), zeros(d, a)], [zeros(a, d), N]])
    F = assemble([[entries.matrix(d, d), zeros(d, a)], [entries.matrix(a, d), _mul(R, U)]])
    return _document(f"random T-canonical {seed}", E, F, "t_canonical", d, spec)


def random_s_canonical(seed: int, mu: Optional[int] = None, d: int = 1) -> dict:
    """E = [[I_d, E12], [0, N_E R]], F = [[Omega, F12], [0, U R]], increasing blocks."""
    entries = Entries(seed)
    mu = mu or int(entries.rng.integers(2, 4))
    spec = BlockSpec(sizes=_sizes(entries, mu, Ordering.INCREASING), ordering=Ordering.INCREASING)
    a = spec.a
    R = _but(entries, spec, lower_diagonal=True)
    U = _but(entries, spec, unit=True)
    N = _mul(_nilpotent(spec), R)
    E = assemble([[identity(d), entries.matrix(d, a)], [zeros(a, d), N]])
    F = assemble([[entries.matrix(d, d), entries.matrix(d, a)], [zeros(a, d), _mul(U, R)]])
    return _document(f"random S-canonical {seed}", E, F, "s_canonical", d, spec)


def _pivot_friendly(entries: Entries, rows: int, cols: int) -> Rows:
    """[D, W] with D diagonal and positive: the kernel is spanned by [-D^-1 W; I]."""
    out = entries.matrix(rows, cols)
    for i in range(rows):
        for j in range(rows):
            out[i][j] = entries.positive() if i == j else "0"
    return out


def random_hessenberg2(seed: int, m1: Optional[int] = None, m2: int = 1) -> dict:
    """E = diag(I_m1, 0), F = [[H11, H21^T], [H21, 0]], so H21 H12 = H21 H21^T is positive definite."""
    entries = Entries(seed)
    m1 = m1 or m2 + int(entries.rng.integers(1, 3))
    H21 = _pivot_friendly(entries, m2, m1)
    E = assemble([[identity(m1), zeros(m1, m2)], [zeros(m2, m1), zeros(m2, m2)]])
    F = assemble([[entries.matrix(m1, m1), _transpose(H21)], [H21, zeros(m2, m2)]])
    return _document(f"random Hessenberg-2 {seed}", E, F, "hessenberg2", None, None, m_blocks=[m1, m2])


def random_hessenberg3(seed: int, m2: Optional[int] = None, m3: int = 1, sign: int = 1) -> dict:
    """
    E = diag(I_m1, I_m2, 0), F = [[H11, H12, H13], [[sign I, 0], H22, 0], [0, H32, 0]]
    with the top m2 rows of H13 equal to H32^T.
    """
    entries = Entries(seed)
    m2 = m2 or m3 + int(entries.rng.integers(1, 3))
    m1 = m2 + int(entries.rng.integers(0, 2))
    H32 = _pivot_friendly(entries, m3, m2)
    H13 = _transpose(H32) + entries.matrix(m1 - m2, m3)
    H21 = [row + ["0"] * (m1 - m2) for row in identity(m2, sign)]
    E = assemble([
        [identity(m1), zeros(m1, m2), zeros(m1, m3)],
        [zeros(m2, m1), identity(m2), zeros(m2, m3)],
        [zeros(m3, m1), zeros(m3, m2), zeros(m3, m3)],
    ])
    F = assemble([
        [entries.matrix(m1, m1), entries.matrix(m1, m2), H13],
        [H21, entries.matrix(m2, m2), zeros(m2, m3)],
        [zeros(m3, m1), H32, zeros(m3, m3)],
    ])
    return _document(f"random Hessenberg-3 {seed}", E, F, "hessenberg3", None, None, m_blocks=[m1, m2, m3])


def random_rhs(seed: int, m: int) -> List[str]:
    entries = Entries(seed + 7919)
    return [entries.smooth() for _ in range(m)]
