"""Exact linear algebra on Fraction matrices.

Matrices are lists of lists of Fractions, small (at most 33x33), so plain
exact elimination is entirely adequate. Determinants use fraction-free
Bareiss elimination on the integer-cleared matrix; inversion uses
Gauss-Jordan over the rational field with exact pivoting.
"""

from __future__ import annotations

from fractions import Fraction
from math import lcm

Matrix = list  # list[list[Fraction]]


class SingularMatrix(ValueError):
    """Exact elimination found no nonzero pivot: the matrix has no inverse."""


def identity(n: int) -> Matrix:
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    n, k, m = len(a), len(b), len(b[0])
    assert len(a[0]) == k
    out = [[Fraction(0)] * m for _ in range(n)]
    for i in range(n):
        ai = a[i]
        oi = out[i]
        for t in range(k):
            c = ai[t]
            if c:
                bt = b[t]
                for j in range(m):
                    if bt[j]:
                        oi[j] += c * bt[j]
    return out

def mat_vec(a: Matrix, x: list) -> list:
    return [sum((c * v for c, v in zip(row, x) if c), Fraction(0))
            for row in a]


def transpose(a: Matrix) -> Matrix:
    return [list(col) for col in zip(*a)]


def bareiss_det(a: Matrix) -> Fraction:
    """Exact determinant by fraction-free (Bareiss) elimination."""
    n = len(a)
    if n == 0:
        return Fraction(1)
    # clear denominators row by row; track the factor taken out
    m = []
    scale = Fraction(1)
    for row in a:
        d = lcm(*[c.denominator for c in row]) if row else 1
        scale /= d ** 1
        m.append([int(c * d) for c in row])
    # scale currently holds prod(1/d_i); det(a) = det(m) * prod(1/d_i)
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for r in range(k + 1, n):
                if m[r][k] != 0:
                    m[k], m[r] = m[r], m[k]
                    sign = -sign
                    break
            else:
                return Fraction(0)
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
            m[i][k] = 0
        prev = m[k][k]
    return sign * scale * m[n - 1][n - 1]


def invert(a: Matrix) -> Matrix:
    """Exact inverse by Gauss-Jordan; raises SingularMatrix."""
    n = len(a)
    work = [[Fraction(c) for c in row] + [Fraction(int(i == j))
                                          for j in range(n)]
            for i, row in enumerate(a)]
    for col in range(n):
        piv = None
        for r in range(col, n):
            if work[r][col] != 0:
                piv = r
                break
        if piv is None:
            raise SingularMatrix(f"no pivot in column {col}")
        work[col], work[piv] = work[piv], work[col]
        p = work[col][col]
        work[col] = [c / p for c in work[col]]
        for r in range(n):
            if r != col and work[r][col]:
                f = work[r][col]
                work[r] = [c - f * d for c, d in zip(work[r], work[col])]
    return [row[n:] for row in work]
