"""Moment matrix M, its exact inverse, and the advection matrices.

All lambda dependence is carried as integer exponents alongside pure
Fraction matrices: M = diag(lambda^d_i) . core with core integer-valued,
so inversion and products stay in the rational field. The advection matrix
for direction alpha is Lambda^a = M diag(v^a) M^-1 whose (i, k) entry is
coeff * lambda^(1 + d_i - d_k) * d_alpha.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from .ratmat import SingularMatrix, identity, invert, mat_mul
from .schemes import SchemeDef

AXES = "xyz"


@dataclass(frozen=True)
class MomentMatrix:
    lambda_degrees: tuple       # d_i per row
    core: tuple                 # q x q of Fraction: core[i][j] = p_i(c_j), lambda=1

    @property
    def q(self) -> int:
        return len(self.core)


@dataclass(frozen=True)
class MomentMatrixInverse:
    lambda_degrees: tuple       # column j of M^-1 scales by lambda^(-d_j)
    core: tuple                 # exact inverse of MomentMatrix.core


def build_moment_matrix(s: SchemeDef) -> MomentMatrix:
    rows = s.core_matrix()
    return MomentMatrix(
        lambda_degrees=s.lambda_degrees,
        core=tuple(tuple(row) for row in rows))


def invert_moment_matrix(m: MomentMatrix) -> MomentMatrixInverse:
    inv = invert([list(row) for row in m.core])
    # verify exactly; cheap at q <= 33 and catches any construction slip
    prod = mat_mul([list(r) for r in m.core], inv)
    assert prod == identity(m.q), "inverse verification failed"
    return MomentMatrixInverse(
        lambda_degrees=m.lambda_degrees,
        core=tuple(tuple(row) for row in inv))


@dataclass(frozen=True)
class LambdaMatrix:
    """Per direction: q x q Fraction coefficients of Lambda-hat, with the
    lambda exponent of entry (i, k) fixed by homogeneity."""

    dim: int
    lambda_degrees: tuple
    coeffs: tuple               # dim-tuple of q x q Fraction matrices

    @property
    def q(self) -> int:
        return len(self.coeffs[0])

    def entry(self, axis: int, i: int, k: int):
        """Return (coefficient, lambda-exponent) of Lambda^axis[i][k]."""
        c = self.coeffs[axis][i][k]
        e = 1 + self.lambda_degrees[i] - self.lambda_degrees[k]
        return c, (e if c else 0)


def advection_matrices(s: SchemeDef,
                       m: MomentMatrix | None = None) -> LambdaMatrix:
    if m is None:
        m = build_moment_matrix(s)
    inv = invert_moment_matrix(m).core
    mats = []
    for axis in range(s.dim):
        # core . diag(c_j^axis) . core^-1
        scaled = [[m.core[i][j] * s.velocities[j][axis]
                   for j in range(s.q)] for i in range(s.q)]
        lam_hat = mat_mul(scaled, [list(r) for r in inv])
        mats.append(tuple(tuple(row) for row in lam_hat))
    return LambdaMatrix(dim=s.dim, lambda_degrees=s.lambda_degrees,
                        coeffs=tuple(mats))


@dataclass(frozen=True)
class AbcdBlocks:
    """The four sub-blocks of each Lambda^alpha at the conserved split N."""

    n: int
    lam: LambdaMatrix

    @property
    def q(self) -> int:
        return self.lam.q

    def a(self, axis: int, i: int, k: int):
        return self.lam.entry(axis, i, k)

    def b(self, axis: int, i: int, k: int):
        return self.lam.entry(axis, i, self.n + k)

    def c(self, axis: int, i: int, k: int):
        return self.lam.entry(axis, self.n + i, k)

    def d(self, axis: int, i: int, k: int):
        return self.lam.entry(axis, self.n + i, self.n + k)


def abcd_blocks(lam: LambdaMatrix, n: int) -> AbcdBlocks:
    if not (1 <= n < lam.q):
        raise ValueError(f"conserved split {n} out of range")
    return AbcdBlocks(n=n, lam=lam)


# -- serialization ----------------------------------------------------------

def moment_matrix_csv(s: SchemeDef, m: MomentMatrix | None = None) -> str:
    """CSV: one line per moment: name, lambda degree, core entries."""
    if m is None:
        m = build_moment_matrix(s)
    lines = ["moment,lambda_degree," +
             ",".join("c" + "".join(str(x) for x in c).replace("-", "m")
                      for c in s.velocities)]
    for name, d, row in zip(s.moment_names, m.lambda_degrees, m.core):
        lines.append(name + "," + str(d) + "," +
                     ",".join(str(v) for v in row))
    return "\n".join(lines) + "\n"


def matrices_json_obj(s: SchemeDef) -> dict:
    """JSON object with the factored M, its inverse and Lambda matrices;
    entries are rational strings, Lambda entries carry lambda exponents."""
    m = build_moment_matrix(s)
    inv = invert_moment_matrix(m)
    lam = advection_matrices(s, m)
    def frac(x: Fraction) -> str:
        return str(x)
    obj = {
        "schema": "1",
        "scheme": s.name,
        "moments": list(s.moment_names),
        "lambda_degrees": list(m.lambda_degrees),
        "core": [[frac(v) for v in row] for row in m.core],
        "core_inverse": [[frac(v) for v in row] for row in inv.core],
        "lambda_matrices": {},
    }
    for axis in range(s.dim):
        rows = []
        for i in range(s.q):
            row = []
            for k in range(s.q):
                c, e = lam.entry(axis, i, k)
                row.append([frac(c), e])
            rows.append(row)
        obj["lambda_matrices"][AXES[axis]] = rows
    return obj


def matrices_json(s: SchemeDef) -> str:
    return json.dumps(matrices_json_obj(s), indent=2, sort_keys=True) + "\n"
