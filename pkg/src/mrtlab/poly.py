"""Sparse multivariate polynomials over exact rationals.

All symbolic computation in the analysis pipeline runs on these: moment
polynomials in (vx, vy, vz, lam), and analysis-side polynomials in the
canonical variable set (rho, u, v, w, e, lam, cs, sig_e, sig_x, sig_q, sig_h).
Coefficients are `fractions.Fraction`; there is no floating point anywhere in
the analysis path.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

Scalar = Union[int, Fraction]

# Canonical analysis variables, fixed order. Schemes that do not use a symbol
# simply never reference it; equality of polynomials is then well defined
# across modules.
ANALYSIS_VARS = ("rho", "u", "v", "w", "e", "lam", "cs",
                 "sig_e", "sig_x", "sig_q", "sig_h")

# Variables of moment-defining polynomials.
MOMENT_VARS = ("vx", "vy", "vz", "lam")


class NotDivisible(ArithmeticError):
    """Exact polynomial division left a nonzero remainder."""


def _as_fraction(x: Scalar) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"expected int or Fraction, got {type(x).__name__}")


class Poly:
    """Polynomial as a map from exponent vectors to nonzero Fractions.

    Instances are immutable by convention: no method mutates `terms` after
    construction, so values are safe to share.
    """

    __slots__ = ("vars", "terms")

    def __init__(self, variables: Sequence[str],
                 terms: Mapping[tuple, Scalar] | None = None):
        self.vars = tuple(variables)
        clean = {}
        if terms:
            n = len(self.vars)
            for exps, coef in terms.items():
                if len(exps) != n:
                    raise ValueError(
                        f"exponent vector {exps} has length {len(exps)}, "
                        f"expected {n}")
                c = _as_fraction(coef)
                if c != 0:
                    key = tuple(int(e) for e in exps)
                    if any(e < 0 for e in key):
                        raise ValueError(f"negative exponent in {key}")
                    clean[key] = clean.get(key, Fraction(0)) + c
            clean = {k: c for k, c in clean.items() if c != 0}
        self.terms = clean

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, variables: Sequence[str]) -> "Poly":
        return cls(variables)

    @classmethod
    def const(cls, variables: Sequence[str], c: Scalar) -> "Poly":
        n = len(tuple(variables))
        return cls(variables, {(0,) * n: c})

    @classmethod
    def var(cls, variables: Sequence[str], name: str) -> "Poly":
        variables = tuple(variables)
        try:
            i = variables.index(name)
        except ValueError:
            raise ValueError(f"unknown variable {name!r}") from None
        e = [0] * len(variables)
        e[i] = 1
        return cls(variables, {tuple(e): 1})

    # -- predicates --------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, Poly):
            return self.vars == other.vars and self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self == Poly.const(self.vars, other)
        return NotImplemented

    def __hash__(self):
        return hash((self.vars, frozenset(self.terms.items())))

    # -- ring operations ---------------------------------------------------

    def _check_same_vars(self, other: "Poly") -> None:
        if self.vars != other.vars:
            raise ValueError(
                f"variable-set mismatch: {self.vars} vs {other.vars}")

    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            self._check_same_vars(other)
            return other
        return Poly.const(self.vars, other)

    def __add__(self, other) -> "Poly":
        other = self._coerce(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, Fraction(0)) + c
        return Poly(self.vars, out)

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly(self.vars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other) -> "Poly":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Poly":
        return self._coerce(other) - self

    def __mul__(self, other) -> "Poly":
        other = self._coerce(other)
        out: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, Fraction(0)) + c1 * c2
        return Poly(self.vars, out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Poly":
        if not isinstance(n, int) or n < 0:
            raise ValueError("exponent must be a nonnegative integer")
        out = Poly.const(self.vars, 1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    # -- calculus ----------------------------------------------------------

    def derivative(self, name: str) -> "Poly":
        try:
            i = self.vars.index(name)
        except ValueError:
            raise ValueError(f"unknown variable {name!r}") from None
        out = {}
        for e, c in self.terms.items():
            if e[i] > 0:
                d = list(e)
                d[i] -= 1
                out[tuple(d)] = c * e[i]
        return Poly(self.vars, out)

    # -- exact division ----------------------------------------------------

    def divide_exact(self, q: "Poly") -> "Poly":
        """Return r with r*q == self; raise NotDivisible otherwise."""
        q = self._coerce(q)
        if q.is_zero:
            raise ZeroDivisionError("division by the zero polynomial")
        lead_q = max(q.terms)  # lex-greatest exponent vector
        cq = q.terms[lead_q]
        rem = dict(self.terms)
        quot: dict = {}
        while rem:
            lead_r = max(rem)
            e = tuple(a - b for a, b in zip(lead_r, lead_q))
            if any(x < 0 for x in e):
                raise NotDivisible(
                    f"remainder with leading term {lead_r} not divisible")
            c = rem[lead_r] / cq
            quot[e] = quot.get(e, Fraction(0)) + c
            for eq2, cq2 in q.terms.items():
                k = tuple(a + b for a, b in zip(e, eq2))
                nc = rem.get(k, Fraction(0)) - c * cq2
                if nc:
                    rem[k] = nc
                elif k in rem:
                    del rem[k]
        return Poly(self.vars, quot)

    # -- evaluation & substitution ----------------------------------------

    def evaluate(self, assignment: Mapping[str, Scalar]) -> Fraction:
        """Exact evaluation; every variable that occurs must be assigned."""
        vals = []
        for i, name in enumerate(self.vars):
            if name in assignment:
                vals.append(_as_fraction(assignment[name]))
            elif any(e[i] for e in self.terms):
                raise ValueError(f"missing assignment for {name!r}")
            else:
                vals.append(Fraction(0))
        total = Fraction(0)
        for e, c in self.terms.items():
            term = c
            for x, k in zip(vals, e):
                if k:
                    term *= x ** k
            total += term
        return total

    def substitute(self, name: str, replacement: "Poly") -> "Poly":
        """Replace every occurrence of a variable by a polynomial."""
        replacement = self._coerce(replacement)
        i = self.vars.index(name)
        out = Poly.zero(self.vars)
        powers = {0: Poly.const(self.vars, 1)}
        for e, c in self.terms.items():
            k = e[i]
            if k not in powers:
                powers[k] = replacement ** k
            base = list(e)
            base[i] = 0
            out = out + Poly(self.vars, {tuple(base): c}) * powers[k]
        return out

    def substitute_squared(self, name: str, replacement: "Poly") -> "Poly":
        """Replace var² by a polynomial; the variable must occur only in
        even powers (used for constraints like cs² → λ²/3)."""
        i = self.vars.index(name)
        if any(e[i] % 2 for e in self.terms):
            raise ValueError(f"{name!r} occurs at odd power")
        replacement = self._coerce(replacement)
        out = Poly.zero(self.vars)
        powers = {0: Poly.const(self.vars, 1)}
        for e, c in self.terms.items():
            k = e[i] // 2
            if k not in powers:
                powers[k] = replacement ** k
            base = list(e)
            base[i] = 0
            out = out + Poly(self.vars, {tuple(base): c}) * powers[k]
        return out

    # -- inspection --------------------------------------------------------

    def degree_in(self, names: Iterable[str]) -> int:
        """Max total degree over the given variables (-1 for the zero poly)."""
        idx = [self.vars.index(n) for n in names]
        if not self.terms:
            return -1
        return max(sum(e[i] for i in idx) for e in self.terms)

    def coefficient_of(self, name: str, power: int) -> "Poly":
        """Collect the coefficient of name**power (a poly in the rest)."""
        i = self.vars.index(name)
        out = {}
        for e, c in self.terms.items():
            if e[i] == power:
                d = list(e)
                d[i] = 0
                out[tuple(d)] = c
        return Poly(self.vars, out)

    def uses(self, name: str) -> bool:
        i = self.vars.index(name)
        return any(e[i] for e in self.terms)

    # -- rendering ---------------------------------------------------------

    def text(self) -> str:
        """Deterministic human-readable form, sorted by exponent vector."""
        if not self.terms:
            return "0"
        parts = []
        for e in sorted(self.terms, reverse=True):
            c = self.terms[e]
            factors = []
            for name, k in zip(self.vars, e):
                if k == 1:
                    factors.append(name)
                elif k > 1:
                    factors.append(f"{name}^{k}")
            mono = "*".join(factors)
            if not mono:
                body = str(abs(c))
            elif abs(c) == 1:
                body = mono
            else:
                body = f"{abs(c)}*{mono}"
            sign = "-" if c < 0 else "+"
            parts.append((sign, body))
        first_sign, first_body = parts[0]
        s = ("-" if first_sign == "-" else "") + first_body
        for sign, body in parts[1:]:
            s += f" {sign} {body}"
        return s

    def __repr__(self) -> str:
        return f"Poly({self.text()})"


# -- small convenience layer for writing formulas ---------------------------

def pvar(name: str, variables: Sequence[str] = ANALYSIS_VARS) -> Poly:
    return Poly.var(variables, name)


def pconst(c: Scalar, variables: Sequence[str] = ANALYSIS_VARS) -> Poly:
    return Poly.const(variables, c)


def frac(a: int, b: int = 1) -> Fraction:
    return Fraction(a, b)


class FirstOrderForm:
    """Σ coeff(k, α)·∂_α V_k — a first-order differential expression whose
    coefficients are polynomials in the primitive fields."""

    __slots__ = ("dim", "nfields", "coeffs")

    def __init__(self, dim: int, nfields: int,
                 coeffs: Mapping[tuple, Poly] | None = None):
        self.dim = dim
        self.nfields = nfields
        self.coeffs = {}
        if coeffs:
            for (k, a), p in coeffs.items():
                if not (0 <= k < nfields):
                    raise ValueError(f"field index {k} out of range")
                if not (0 <= a < dim):
                    raise ValueError(f"direction {a} out of range")
                if not p.is_zero:
                    self.coeffs[(k, a)] = p

    def get(self, k: int, a: int) -> Poly:
        p = self.coeffs.get((k, a))
        if p is None:
            return Poly.zero(ANALYSIS_VARS)
        return p

    def __add__(self, other: "FirstOrderForm") -> "FirstOrderForm":
        if (self.dim, self.nfields) != (other.dim, other.nfields):
            raise ValueError("shape mismatch")
        out = dict(self.coeffs)
        for key, p in other.coeffs.items():
            out[key] = out[key] + p if key in out else p
        return FirstOrderForm(self.dim, self.nfields, out)

    def __sub__(self, other: "FirstOrderForm") -> "FirstOrderForm":
        return self + other.scale(pconst(-1))

    def scale(self, p: Poly) -> "FirstOrderForm":
        return FirstOrderForm(
            self.dim, self.nfields,
            {key: p * q for key, q in self.coeffs.items()})

    def map_coeffs(self, fn) -> "FirstOrderForm":
        return FirstOrderForm(
            self.dim, self.nfields,
            {key: fn(p) for key, p in self.coeffs.items()})

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def __eq__(self, other) -> bool:
        if not isinstance(other, FirstOrderForm):
            return NotImplemented
        return (self.dim, self.nfields, self.coeffs) == \
               (other.dim, other.nfields, other.coeffs)

    __hash__ = None


class SecondOrderFluxForm:
    """Σ_β ∂_β [ inner first-order form ], one entry per conserved equation
    index i and outer direction β."""

    __slots__ = ("dim", "entries")

    def __init__(self, dim: int, entries: Mapping[tuple, FirstOrderForm]):
        self.dim = dim
        self.entries = {key: f for key, f in entries.items() if not f.is_zero}

    def get(self, i: int, beta: int) -> FirstOrderForm | None:
        return self.entries.get((i, beta))

    def cells(self):
        """Yield ((i, β, k, α), Poly) over all nonzero residual cells."""
        for (i, beta), form in sorted(self.entries.items()):
            for (k, a), p in sorted(form.coeffs.items()):
                yield (i, beta, k, a), p

    def __sub__(self, other: "SecondOrderFluxForm") -> "SecondOrderFluxForm":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        keys = set(self.entries) | set(other.entries)
        out = {}
        for key in keys:
            a = self.entries.get(key)
            b = other.entries.get(key)
            if a is None:
                out[key] = b.scale(pconst(-1))
            elif b is None:
                out[key] = a
            else:
                out[key] = a - b
        return SecondOrderFluxForm(self.dim, out)

    def __add__(self, other: "SecondOrderFluxForm") -> "SecondOrderFluxForm":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        keys = set(self.entries) | set(other.entries)
        out = {}
        for key in keys:
            a = self.entries.get(key)
            b = other.entries.get(key)
            if a is None:
                out[key] = b
            elif b is None:
                out[key] = a
            else:
                out[key] = a + b
        return SecondOrderFluxForm(self.dim, out)

    @property
    def is_zero(self) -> bool:
        return not self.entries
