"""Lattice scheme definitions: velocities, moment polynomials, grouping.

Schemes are defined by descriptor text files (grammar below); the twelve
built-in scheme/model combinations ship as data files parsed on first use,
so there is a single construction path.

Descriptor format::

    name = d2q9-iso
    dimension = 2
    model = isothermal          # or: thermal
    conserved = 3
    deviation = free text       # optional, repeatable; transcription notes

    [velocities]                # one velocity per line, integers
    0 0
    1 0

    [moments]                   # name = polynomial in vx vy vz lambda
    rho = 1
    eps = 3*(vx^2 + vy^2) - 4*lambda^2

    [groups]                    # name  group  sigma
    rho  conserved    -
    eps  fit-euler    sig_e

    [energy]                    # thermal models only: eps = a*E + b*lambda^2*rho
    a = 26
    b = -28

Expressions use ``+ - * ^`` with rational literals like ``35/12``;
``#`` starts a comment anywhere.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources

from .poly import MOMENT_VARS, Poly
from .ratmat import bareiss_det

BUILTIN_NAMES = (
    "d2q9-iso", "d2q13-iso", "d3q19-iso", "d3q27-iso", "d3q33-iso",
    "d3q27-2-iso", "d2q13-th", "d2q17-th", "d2v17-th", "d2w17-th",
    "d3q33-th", "d3q27-2-th",
)

GROUP_LABELS = ("conserved", "fit-euler", "fit-viscous", "no-influence")
SIGMA_NAMES = ("sig_e", "sig_x", "sig_q", "sig_h")


class ParseError(ValueError):
    """Descriptor text rejected; carries a 1-based line and column."""

    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col
        self.message = message


class SchemeError(ValueError):
    """A SchemeDef invariant is violated; message names the invariant."""


# -- polynomial expression parser ------------------------------------------

_TOKEN_RE = re.compile(r"\s*(?:(\d+(?:/\d+)?)|([a-z_]+)|([-+*^()]))")
_EXPR_NAMES = {"vx": "vx", "vy": "vy", "vz": "vz", "lambda": "lam"}


class _ExprParser:
    def __init__(self, text: str, line: int, col0: int):
        self.text = text
        self.line = line
        self.col0 = col0
        self.pos = 0
        self.tok = None
        self.tok_pos = 0
        self._advance()

    def _err(self, msg: str, pos: int | None = None):
        p = self.tok_pos if pos is None else pos
        raise ParseError(self.line, self.col0 + p + 1, msg)

    def _advance(self):
        m = _TOKEN_RE.match(self.text, self.pos)
        while m and m.group(0).strip() == "" and m.end() > self.pos:
            self.pos = m.end()
            m = _TOKEN_RE.match(self.text, self.pos)
        rest = self.text[self.pos:]
        if not rest.strip():
            self.tok = ("eof", "")
            self.tok_pos = len(self.text)
            return
        if not m:
            self._err(f"unexpected character {rest.strip()[0]!r}",
                      pos=self.pos + len(rest) - len(rest.lstrip()))
        self.tok_pos = m.end() - len(m.group(0).lstrip())
        if m.group(1):
            self.tok = ("num", Fraction(m.group(1)))
        elif m.group(2):
            self.tok = ("name", m.group(2))
        else:
            self.tok = ("op", m.group(3))
        self.pos = m.end()

    def _accept(self, kind: str, value=None):
        if self.tok[0] == kind and (value is None or self.tok[1] == value):
            out = self.tok
            self._advance()
            return out
        return None

    def parse(self) -> Poly:
        p = self.expr()
        if self.tok[0] != "eof":
            self._err(f"unexpected trailing {self.tok[1]!r}")
        return p

    def expr(self) -> Poly:
        p = self.term()
        while True:
            if self._accept("op", "+"):
                p = p + self.term()
            elif self._accept("op", "-"):
                p = p - self.term()
            else:
                return p

    def term(self) -> Poly:
        p = self.unary()
        while self._accept("op", "*"):
            p = p * self.unary()
        return p

    def unary(self) -> Poly:
        if self._accept("op", "-"):
            return -self.unary()
        return self.power()

    def power(self) -> Poly:
        p = self.atom()
        if self._accept("op", "^"):
            t = self._accept("num")
            if not t or t[1].denominator != 1:
                self._err("exponent must be a nonnegative integer")
            return p ** int(t[1])
        return p

    def atom(self) -> Poly:
        t = self._accept("num")
        if t:
            return Poly.const(MOMENT_VARS, t[1])
        t = self._accept("name")
        if t:
            if t[1] not in _EXPR_NAMES:
                self._err(f"unknown variable {t[1]!r}")
            return Poly.var(MOMENT_VARS, _EXPR_NAMES[t[1]])
        if self._accept("op", "("):
            p = self.expr()
            if not self._accept("op", ")"):
                self._err("expected ')'")
            return p
        self._err(f"expected a value, got {self.tok[1]!r}" if self.tok[1]
                  else "expected a value")


def parse_moment_expr(text: str, line: int = 1, col0: int = 0) -> Poly:
    """Parse one moment-polynomial expression to a Poly in (vx,vy,vz,lam)."""
    return _ExprParser(text, line, col0).parse()


# -- scheme definition ------------------------------------------------------

@dataclass(frozen=True)
class SchemeDef:
    """A lattice scheme plus its moment basis and grouping metadata."""

    name: str
    dim: int
    model: str                       # "isothermal" | "thermal"
    velocities: tuple                # of int tuples, length dim
    moment_names: tuple              # of str
    moment_polys: tuple              # of Poly over MOMENT_VARS
    conserved: int                   # N: first N moments collide trivially
    groups: tuple                    # of group labels, one per moment
    sigmas: tuple                    # of sigma names (None on conserved rows)
    energy_ab: tuple | None = None   # (a, b): eps = a*E + b*lambda^2*rho
    deviations: tuple = ()
    lambda_degrees: tuple = field(init=False)

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise SchemeError(f"dimension must be 2 or 3, got {self.dim}")
        if self.model not in ("isothermal", "thermal"):
            raise SchemeError(f"bad model {self.model!r}")
        q = len(self.velocities)
        if q != len(self.moment_polys) or q != len(self.moment_names):
            raise SchemeError("velocity and moment counts differ")
        if len(set(self.velocities)) != q:
            seen = set()
            for c in self.velocities:
                if c in seen:
                    raise SchemeError(f"duplicate velocity {c}")
                seen.add(c)
        for c in self.velocities:
            if len(c) != self.dim:
                raise SchemeError(f"velocity {c} has wrong dimension")
        if len(set(self.moment_names)) != q:
            raise SchemeError("duplicate moment name")
        degrees = []
        for nm, p in zip(self.moment_names, self.moment_polys):
            if p.vars != MOMENT_VARS:
                raise SchemeError(f"moment {nm} not over {MOMENT_VARS}")
            if self.dim == 2 and p.uses("vz"):
                raise SchemeError(f"moment {nm} uses vz in a 2D scheme")
            if p.is_zero:
                raise SchemeError(f"moment {nm} is the zero polynomial")
            degs = {sum(e) for e in p.terms}
            if len(degs) != 1:
                raise SchemeError(f"moment {nm} is not lambda-homogeneous")
            degrees.append(degs.pop())
        object.__setattr__(self, "lambda_degrees", tuple(degrees))
        n = self.conserved
        expected = self.dim + (1 if self.model == "isothermal" else 2)
        if n != expected:
            raise SchemeError(
                f"conserved count {n} but {self.model} in {self.dim}D "
                f"needs {expected}")
        if len(self.groups) != q or len(self.sigmas) != q:
            raise SchemeError("group/sigma metadata length mismatch")
        for i, (g, s) in enumerate(zip(self.groups, self.sigmas)):
            if g not in GROUP_LABELS:
                raise SchemeError(f"bad group {g!r} on moment {i}")
            if (g == "conserved") != (i < n):
                raise SchemeError(
                    "conserved moments must be exactly the first "
                    f"{n} rows (moment {i} labeled {g!r})")
            if g == "conserved":
                if s is not None:
                    raise SchemeError(f"conserved moment {i} carries a sigma")
            elif s not in SIGMA_NAMES:
                raise SchemeError(f"bad sigma {s!r} on moment {i}")
        if self.model == "thermal":
            if self.energy_ab is None:
                raise SchemeError("thermal model needs an [energy] section")
            a, b = self.energy_ab
            if a == 0:
                raise SchemeError("energy map coefficient a must be nonzero")
        elif self.energy_ab is not None:
            raise SchemeError("isothermal model must not carry an energy map")

    @property
    def q(self) -> int:
        return len(self.velocities)

    def moment_index(self, name: str) -> int:
        return self.moment_names.index(name)

    def core_matrix(self):
        """q x q Fraction matrix: M-hat[i][j] = p_i(c_j) at lambda = 1."""
        rows = []
        for p in self.moment_polys:
            row = []
            for c in self.velocities:
                assign = {"vx": c[0], "vy": c[1],
                          "vz": c[2] if self.dim == 3 else 0, "lam": 1}
                row.append(p.evaluate(assign))
            rows.append(row)
        return rows

    def __eq__(self, other):
        if not isinstance(other, SchemeDef):
            return NotImplemented
        return (self.name, self.dim, self.model, self.velocities,
                self.moment_names, self.moment_polys, self.conserved,
                self.groups, self.sigmas, self.energy_ab) == \
               (other.name, other.dim, other.model, other.velocities,
                other.moment_names, other.moment_polys, other.conserved,
                other.groups, other.sigmas, other.energy_ab)

    __hash__ = None


# -- descriptor parsing -----------------------------------------------------

_SECTIONS = ("velocities", "moments", "groups", "energy")


def parse_scheme(text: str) -> SchemeDef:
    """Parse descriptor text; raises ParseError or SchemeError."""
    top: dict = {"deviation": []}
    sections: dict = {s: [] for s in _SECTIONS}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ParseError(lineno, len(line), "unterminated section")
            sec = stripped[1:-1].strip()
            if sec not in _SECTIONS:
                raise ParseError(lineno, line.index("[") + 1,
                                 f"unknown section {sec!r}")
            current = sec
            continue
        if current is None:
            if "=" not in line:
                raise ParseError(lineno, 1, "expected 'key = value'")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key == "deviation":
                top["deviation"].append(value)
            elif key in ("name", "dimension", "model", "conserved"):
                if key in top and key != "deviation":
                    raise ParseError(lineno, 1, f"duplicate key {key!r}")
                top[key] = (value, lineno)
            else:
                raise ParseError(lineno, 1, f"unknown key {key!r}")
        else:
            sections[current].append((lineno, line))

    def top_value(key):
        if key not in top:
            raise ParseError(1, 1, f"missing {key!r}")
        return top[key]

    name_v, _ = top_value("name")
    dim_v, dim_ln = top_value("dimension")
    model_v, _ = top_value("model")
    cons_v, cons_ln = top_value("conserved")
    try:
        dim = int(dim_v)
    except ValueError:
        raise ParseError(dim_ln, 1, "dimension must be an integer") from None
    try:
        conserved = int(cons_v)
    except ValueError:
        raise ParseError(cons_ln, 1, "conserved must be an integer") from None

    velocities = []
    for lineno, line in sections["velocities"]:
        parts = line.split()
        try:
            vec = tuple(int(p) for p in parts)
        except ValueError:
            raise ParseError(lineno, 1, "velocities are integers") from None
        if len(vec) != dim:
            raise ParseError(lineno, 1,
                             f"expected {dim} components, got {len(vec)}")
        velocities.append(vec)

    moment_names = []
    moment_polys = []
    for lineno, line in sections["moments"]:
        if "=" not in line:
            raise ParseError(lineno, 1, "expected 'name = expression'")
        nm, _, expr = line.partition("=")
        nm = nm.strip()
        if not re.fullmatch(r"[a-z][a-z0-9_]*", nm):
            raise ParseError(lineno, 1, f"bad moment name {nm!r}")
        moment_names.append(nm)
        moment_polys.append(
            parse_moment_expr(expr, lineno, line.index("=") + 1))

    groups = {}
    for lineno, line in sections["groups"]:
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(lineno, 1, "expected 'name group sigma'")
        nm, grp, sig = parts
        if nm in groups:
            raise ParseError(lineno, 1, f"duplicate group entry {nm!r}")
        groups[nm] = (grp, None if sig == "-" else sig, lineno)

    energy_ab = None
    if sections["energy"]:
        vals = {}
        for lineno, line in sections["energy"]:
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in ("a", "b"):
                raise ParseError(lineno, 1, f"unknown energy key {key!r}")
            try:
                vals[key] = Fraction(value)
            except (ValueError, ZeroDivisionError):
                raise ParseError(lineno, 1,
                                 f"bad rational {value!r}") from None
        if set(vals) != {"a", "b"}:
            raise ParseError(sections["energy"][0][0], 1,
                             "energy section needs both a and b")
        energy_ab = (vals["a"], vals["b"])

    group_list = []
    sigma_list = []
    for nm in moment_names:
        if nm not in groups:
            raise SchemeError(f"moment {nm!r} missing from [groups]")
        grp, sig, _ = groups[nm]
        group_list.append(grp)
        sigma_list.append(sig)
    for nm in groups:
        if nm not in moment_names:
            raise SchemeError(f"[groups] names unknown moment {nm!r}")

    return SchemeDef(
        name=name_v, dim=dim, model=model_v,
        velocities=tuple(velocities),
        moment_names=tuple(moment_names),
        moment_polys=tuple(moment_polys),
        conserved=conserved,
        groups=tuple(group_list),
        sigmas=tuple(sigma_list),
        energy_ab=energy_ab,
        deviations=tuple(top["deviation"]),
    )


def dump_scheme(s: SchemeDef) -> str:
    """Render a SchemeDef back to descriptor text (deterministic bytes)."""
    out = [f"name = {s.name}",
           f"dimension = {s.dim}",
           f"model = {s.model}",
           f"conserved = {s.conserved}"]
    for d in s.deviations:
        out.append(f"deviation = {d}")
    out.append("")
    out.append("[velocities]")
    for c in s.velocities:
        out.append(" ".join(str(x) for x in c))
    out.append("")
    out.append("[moments]")
    for nm, p in zip(s.moment_names, s.moment_polys):
        expr = re.sub(r"\blam\b", "lambda", p.text())
        out.append(f"{nm} = {expr}")
    out.append("")
    out.append("[groups]")
    width = max(len(nm) for nm in s.moment_names)
    for nm, grp, sig in zip(s.moment_names, s.groups, s.sigmas):
        out.append(f"{nm:<{width}}  {grp:<12}  {sig or '-'}")
    if s.energy_ab is not None:
        out.append("")
        out.append("[energy]")
        out.append(f"a = {s.energy_ab[0]}")
        out.append(f"b = {s.energy_ab[1]}")
    return "\n".join(out) + "\n"


@lru_cache(maxsize=None)
def builtin(name: str) -> SchemeDef:
    """Load one of the twelve built-in scheme/model combinations."""
    if name not in BUILTIN_NAMES:
        raise KeyError(f"unknown scheme {name!r}; valid: "
                       + ", ".join(BUILTIN_NAMES))
    text = (resources.files("mrtlab") / "data" / f"{name}.scheme").read_text()
    s = parse_scheme(text)
    assert s.name == name
    return s


# -- validation -------------------------------------------------------------

@dataclass(frozen=True)
class ValidationReport:
    homogeneous: bool
    orthogonal: bool
    invertible: bool
    failures: tuple
    deviations: tuple

    @property
    def ok(self) -> bool:
        return self.homogeneous and self.orthogonal and self.invertible


def validate_scheme(s: SchemeDef) -> ValidationReport:
    """Exact checks: row orthogonality, invertibility, homogeneity."""
    failures = []
    homogeneous = True
    for nm, p in zip(s.moment_names, s.moment_polys):
        if len({sum(e) for e in p.terms}) != 1:
            homogeneous = False
            failures.append(f"moment {nm} not lambda-homogeneous")
    core = s.core_matrix()
    orthogonal = True
    for i in range(s.q):
        for k in range(i + 1, s.q):
            dot = sum(a * b for a, b in zip(core[i], core[k]))
            if dot != 0:
                orthogonal = False
                failures.append(
                    f"rows {s.moment_names[i]} and {s.moment_names[k]} "
                    f"not orthogonal (dot {dot})")
    invertible = bareiss_det(core) != 0
    if not invertible:
        failures.append("moment matrix is singular")
    return ValidationReport(homogeneous, orthogonal, invertible,
                            tuple(failures), s.deviations)
