"""Equivalent-PDE engine: Taylor expansion of the schemes at orders 1 and 2.

Order 1 extracts the flux of every conserved equation from the A and B
blocks of the advection matrices and compares it with the Euler fluxes.
Order 2 builds the viscous correction Gamma_2 = B Sigma Psi_1 with
Psi_1 = dPhi(W).Gamma_1 - (C W + D Phi(W)), written as a flux form
sum_beta d_beta [ sum_{k,alpha} coeff * d_alpha V_k ], and compares it
cell by cell with the compressible Navier-Stokes targets.  The residual
convention is Gamma_2 + target, where the target is the divergence of the
viscous stress (plus the heated energy flux on the energy row) divided by
the time step, so that an exact fit gives a residual of zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .poly import (ANALYSIS_VARS, FirstOrderForm, NotDivisible, Poly,
                   SecondOrderFluxForm, frac, pconst, pvar)
from .schemes import SchemeDef, builtin
from .matrices import (AbcdBlocks, abcd_blocks, advection_matrices,
                       build_moment_matrix)
from .equilibria import (CS, E, LAM, R, ZERO, EquilibriumSet, FluidModel,
                         VariableMap, equilibrium_family, jacobian_conserved,
                         model_for, variable_map)

SIG_E = pvar("sig_e")
SIG_X = pvar("sig_x")

# The printed equilibria of these schemes close the second order
# identification only on the acoustic lattice cs^2 = lam^2 / 3; the
# substitution is applied to Gamma_2 before the viscous comparison.
CS_CONSTRAINED = frozenset({"d2q9-iso", "d3q19-iso", "d3q27-iso"})

# Schemes whose second order system is fully solvable under the default
# sigma identifications.
EXACT_FIT = frozenset({
    "d2q13-iso", "d3q33-iso", "d3q27-2-iso",
    "d2q17-th", "d2v17-th", "d2w17-th", "d3q33-th", "d3q27-2-th",
})

# Default sigma identifications ("a=b" substitutes symbol a by b).  Every
# thermal scheme ties the heat-flux rate to the stress rate: the energy
# row couples the q moments, so sig_q shows up there otherwise.
DEFAULT_IDENTIFY = {
    "d2q13-th": ("sig_q=sig_x",),
    "d2q17-th": ("sig_q=sig_x",),
    "d2v17-th": ("sig_q=sig_x",),
    "d2w17-th": ("sig_q=sig_x",),
    "d3q33-th": ("sig_q=sig_x",),
    "d3q27-2-th": ("sig_q=sig_x",),
}

_AXES = "xyz"


def _shift(p: Poly, d: int) -> Poly:
    """Multiply by lam^d; for d < 0 the division must be exact."""
    if d == 0 or p.is_zero:
        return p
    if d > 0:
        return p * LAM ** d
    return p.divide_exact(LAM ** (-d))


def _constant_value(p: Poly) -> Fraction | None:
    if any(p.uses(v) for v in ANALYSIS_VARS):
        return None
    return p.evaluate({})


# -- viscosities -------------------------------------------------------------

@dataclass(frozen=True)
class ViscosityMap:
    """Shear and bulk viscosities divided by Delta t, plus the Prandtl
    number when the scheme pins one."""

    scheme: str
    mu: Poly
    zeta: Poly
    prandtl: Fraction | None

    def display(self) -> dict:
        out = {
            "mu": "0" if self.mu.is_zero else f"({self.mu.text()}) * dt",
            "zeta": "0" if self.zeta.is_zero else f"({self.zeta.text()}) * dt",
            "prandtl": "n/a" if self.prandtl is None else str(self.prandtl),
        }
        return out


def _vis(name, mu, zeta, prandtl=None):
    return ViscosityMap(scheme=name, mu=mu, zeta=zeta, prandtl=prandtl)


def viscosity_table(name: str) -> ViscosityMap:
    third = frac(1, 3)
    if name == "d2q9-iso":
        return _vis(name, R * SIG_X * LAM ** 2 * third,
                    R * SIG_E * LAM ** 2 * third)
    if name == "d2q13-iso":
        # printed with a lattice-normalized sound speed; in physical units
        # the lam^2 of Delta x = lam Delta t cancels against it
        return _vis(name, R * SIG_X * CS ** 2, R * SIG_E * CS ** 2)
    if name in ("d3q19-iso", "d3q27-iso"):
        return _vis(name, R * SIG_X * LAM ** 2 * third,
                    R * SIG_E * LAM ** 2 * frac(2, 9))
    if name in ("d3q33-iso", "d3q27-2-iso"):
        return _vis(name, R * SIG_X * CS ** 2,
                    R * SIG_E * CS ** 2 * frac(2, 3))
    if name == "d2q13-th":
        mu = R * E * SIG_X * 2
        return _vis(name, mu, mu)
    if name in ("d2q17-th", "d2v17-th", "d2w17-th"):
        return _vis(name, R * E * SIG_X, ZERO, Fraction(1))
    if name in ("d3q33-th", "d3q27-2-th"):
        return _vis(name, R * E * SIG_X * frac(2, 3), ZERO, Fraction(1))
    raise KeyError(f"no viscosity table for scheme {name!r}")


# -- order 1 -----------------------------------------------------------------

@dataclass(frozen=True)
class FirstOrderSystem:
    """Flux of every conserved equation along every direction, written in
    the primitive variables."""

    scheme: str
    model: FluidModel
    names: tuple                 # conserved moment names
    fields: tuple                # primitive variables, fixes the k index
    fluxes: dict                 # (i, axis) -> Poly
    energy_ab: tuple | None = None

    def flux(self, i: int, axis: int) -> Poly:
        return self.fluxes[(i, axis)]


def first_order_fluxes(blocks: AbcdBlocks, eq: EquilibriumSet,
                       vm: VariableMap) -> FirstOrderSystem:
    n = blocks.n
    dim = blocks.lam.dim
    wpolys = [vm.polys[name] for name in vm.names]
    phis = [eq.entries[name] for name in eq.names]
    fluxes = {}
    for i in range(n):
        for axis in range(dim):
            total = ZERO
            for k in range(n):
                c, d = blocks.a(axis, i, k)
                if c:
                    total = total + _shift(wpolys[k] * c, d)
            for m in range(blocks.q - n):
                c, d = blocks.b(axis, i, m)
                if c:
                    total = total + _shift(phis[m] * c, d)
            fluxes[(i, axis)] = total
    return FirstOrderSystem(scheme=eq.scheme, model=eq.model,
                            names=vm.names, fields=eq.model.primitives,
                            fluxes=fluxes, energy_ab=vm.energy_ab)


@dataclass
class ResidualReport:
    """Nonzero cells of a residual.  Order 1 keys are (equation, axis);
    order 2 keys are (equation, outer beta, variable, inner alpha)."""

    scheme: str
    order: int
    cells: dict
    row_names: tuple
    field_names: tuple = ()
    sigma_constraints: tuple = ()
    prandtl: Fraction | None = None
    form: SecondOrderFluxForm | None = None

    @property
    def is_zero(self) -> bool:
        return not self.cells

    @property
    def unsolved_count(self) -> int:
        return len(self.cells)

    def cell_label(self, key) -> str:
        if self.order == 1:
            i, a = key
            return f"{self.row_names[i]}: d{_AXES[a]}"
        i, b, k, a = key
        return (f"{self.row_names[i]}: d{_AXES[b]}"
                f"[{self.field_names[k]} d{_AXES[a]}]")

    def sorted_cells(self):
        return [(key, self.cells[key]) for key in sorted(self.cells)]


def euler_residual(sys: FirstOrderSystem) -> ResidualReport:
    model = sys.model
    p = model.pressure()
    targets = {}
    for axis in range(model.dim):
        ua = pvar(model.velocity_vars[axis])
        targets[(0, axis)] = R * ua
        for i in range(model.dim):
            t = R * pvar(model.velocity_vars[i]) * ua
            if i == axis:
                t = t + p
            targets[(1 + i, axis)] = t
        if model.kind == "thermal":
            a, b = sys.energy_ab
            eps = model.total_energy() * a + R * LAM ** 2 * b
            targets[(model.dim + 1, axis)] = (eps + p * a) * ua
    cells = {}
    for key, f in sys.fluxes.items():
        d = f - targets[key]
        if not d.is_zero:
            cells[key] = d
    return ResidualReport(scheme=sys.scheme, order=1, cells=cells,
                          row_names=sys.names, field_names=sys.fields)


# -- order 2 -----------------------------------------------------------------

def sigma_symbols(s: SchemeDef) -> dict:
    out = {}
    for i, name in enumerate(s.moment_names):
        if i >= s.conserved:
            assert s.sigmas[i] is not None, f"missing sigma for {name}"
            out[name] = s.sigmas[i]
    return out


def _parse_identify(rule: str):
    src, sep, dst = rule.partition("=")
    src, dst = src.strip(), dst.strip()
    if not sep or not src or not dst:
        raise ValueError(f"bad sigma identification {rule!r}, expected a=b")
    for sym in (src, dst):
        if sym not in ANALYSIS_VARS or not sym.startswith("sig_"):
            raise ValueError(f"unknown sigma symbol {sym!r} in {rule!r}")
    return src, dst


def second_order_form(blocks: AbcdBlocks, eq: EquilibriumSet,
                      vm: VariableMap, sys: FirstOrderSystem | None = None,
                      *, sigmas: dict, identify=()) -> SecondOrderFluxForm:
    if sys is None:
        sys = first_order_fluxes(blocks, eq, vm)
    n = blocks.n
    dim = blocks.lam.dim
    fields = sys.fields
    nf = len(fields)

    # Gamma_1 of each conserved row as a first-order form, by the chain rule
    gamma1 = []
    for i in range(n):
        coeffs = {}
        for axis in range(dim):
            fp = sys.fluxes[(i, axis)]
            for k, fname in enumerate(fields):
                dp = fp.derivative(fname)
                if not dp.is_zero:
                    coeffs[(k, axis)] = dp
        gamma1.append(FirstOrderForm(dim, nf, coeffs))

    jac = jacobian_conserved(eq, vm)
    wpolys = [vm.polys[name] for name in vm.names]
    phis = [eq.entries[name] for name in eq.names]

    psi = []
    for mi, mname in enumerate(eq.names):
        acc = FirstOrderForm(dim, nf)
        row = jac[mname]
        for i, wname in enumerate(vm.names):
            g = row[wname]
            if not g.is_zero:
                acc = acc + gamma1[i].scale(g)
        coeffs = {}
        for axis in range(dim):
            total = ZERO
            for k in range(n):
                c, d = blocks.c(axis, mi, k)
                if c:
                    total = total + _shift(wpolys[k] * c, d)
            for m2 in range(blocks.q - n):
                c, d = blocks.d(axis, mi, m2)
                if c:
                    total = total + _shift(phis[m2] * c, d)
            for k, fname in enumerate(fields):
                dp = total.derivative(fname)
                if not dp.is_zero:
                    coeffs[(k, axis)] = dp
        psi.append(acc - FirstOrderForm(dim, nf, coeffs))

    entries = {}
    for i in range(n):
        for beta in range(dim):
            acc = FirstOrderForm(dim, nf)
            for mi, mname in enumerate(eq.names):
                c, d = blocks.b(beta, i, mi)
                if not c:
                    continue
                scaled = psi[mi].scale(pvar(sigmas[mname]) * c)
                if d:
                    scaled = scaled.map_coeffs(lambda p, d=d: _shift(p, d))
                acc = acc + scaled
            entries[(i, beta)] = acc
    g2 = SecondOrderFluxForm(dim, entries)

    for rule in identify:
        src, dst = _parse_identify(rule)
        rep = pvar(dst)
        g2 = SecondOrderFluxForm(g2.dim, {
            key: f.map_coeffs(lambda p: p.substitute(src, rep))
            for key, f in g2.entries.items()})
    return g2


def ns_target(model: FluidModel, vis: ViscosityMap, energy_ab=None,
              prandtl: Fraction | None = None) -> SecondOrderFluxForm:
    """Divergence of the viscous stress per momentum row; the energy row
    adds the stress working and the heat flux, scaled by the coefficient
    that maps the physical total energy onto the scheme energy."""
    dim = model.dim
    fields = model.primitives
    nf = len(fields)
    mu, zeta = vis.mu, vis.zeta
    iu = [fields.index(name) for name in model.velocity_vars]
    off = zeta - mu if dim == 2 else zeta - mu * frac(2, 3)

    tau = {}
    for i in range(dim):
        coeffs = {}
        for j in range(dim):
            c = off + (mu * 2 if j == i else ZERO)
            if not c.is_zero:
                coeffs[(iu[j], j)] = c
        tau[(i, i)] = FirstOrderForm(dim, nf, coeffs)
    for i in range(dim):
        for j in range(i + 1, dim):
            f = FirstOrderForm(dim, nf,
                               {(iu[j], i): mu, (iu[i], j): mu})
            tau[(i, j)] = f
            tau[(j, i)] = f

    entries = {}
    for i in range(dim):
        for b in range(dim):
            entries[(1 + i, b)] = tau[(i, b)]
    if model.kind == "thermal":
        a_coef = energy_ab[0]
        ie = fields.index("e")
        for b in range(dim):
            acc = FirstOrderForm(dim, nf)
            for i in range(dim):
                acc = acc + tau[(i, b)].scale(pvar(model.velocity_vars[i]))
            if prandtl is not None:
                acc = acc + FirstOrderForm(
                    dim, nf, {(ie, b): mu * (model.gamma / prandtl)})
            entries[(model.dim + 1, b)] = acc.scale(pconst(a_coef))
    return SecondOrderFluxForm(dim, entries)


def _infer_prandtl(g2: SecondOrderFluxForm, model: FluidModel,
                   vis: ViscosityMap, energy_ab) -> Fraction | None:
    """Read the Prandtl number off the heat cells of Gamma_2 when they all
    carry the same constant multiple of mu; None when no constant fits."""
    if vis.mu.is_zero or energy_ab is None:
        return None
    row = model.dim + 1
    ie = model.primitives.index("e")
    vals = []
    for b in range(model.dim):
        form = g2.get(row, b)
        g = form.get(ie, b) if form is not None else ZERO
        if g.is_zero:
            return None
        try:
            c = _constant_value(g.divide_exact(vis.mu))
        except NotDivisible:
            return None
        if c is None:
            return None
        vals.append(c)
    if len(set(vals)) != 1 or vals[0] == 0:
        return None
    pr = -energy_ab[0] * model.gamma / vals[0]
    return pr if pr > 0 else None


def navier_stokes_residual(g2: SecondOrderFluxForm, model: FluidModel,
                           vis: ViscosityMap, *, scheme: str = "",
                           energy_ab=None, cs_sub: bool = False,
                           identify=()) -> ResidualReport:
    if cs_sub:
        third = LAM ** 2 * frac(1, 3)
        g2 = SecondOrderFluxForm(g2.dim, {
            key: f.map_coeffs(lambda p: p.substitute_squared("cs", third))
            for key, f in g2.entries.items()})
    pr = vis.prandtl
    if model.kind == "thermal" and pr is None:
        pr = _infer_prandtl(g2, model, vis, energy_ab)
    target = ns_target(model, vis, energy_ab=energy_ab, prandtl=pr)
    resid = g2 + target
    names = ("rho",) + tuple("j" + _AXES[a] for a in range(model.dim))
    if model.kind == "thermal":
        names = names + ("eps",)
    return ResidualReport(scheme=scheme, order=2, cells=dict(resid.cells()),
                          row_names=names, field_names=model.primitives,
                          sigma_constraints=tuple(identify), prandtl=pr,
                          form=resid)


@dataclass
class DiscrepancyTensor:
    """Residual regrouped as sum_beta d_beta R[i, beta], with a symmetry
    check of the momentum block."""

    scheme: str
    dim: int
    row_names: tuple
    field_names: tuple
    entries: dict                # (i, beta) -> FirstOrderForm
    symmetric: bool

    @property
    def is_empty(self) -> bool:
        return not self.entries


def discrepancy_extract(report: ResidualReport) -> DiscrepancyTensor:
    assert report.order == 2 and report.form is not None
    form = report.form
    dim = form.dim
    entries = {key: f for key, f in form.entries.items() if not f.is_zero}
    empty = FirstOrderForm(dim, len(report.field_names))
    sym = True
    for a in range(dim):
        for b in range(a + 1, dim):
            if entries.get((1 + a, b), empty) != entries.get((1 + b, a), empty):
                sym = False
    return DiscrepancyTensor(scheme=report.scheme, dim=dim,
                             row_names=report.row_names,
                             field_names=report.field_names,
                             entries=entries, symmetric=sym)


# -- orchestration -----------------------------------------------------------

def _rows_orthogonal(core) -> bool:
    q = len(core)
    for i in range(q):
        for k in range(i + 1, q):
            if sum(core[i][j] * core[k][j] for j in range(q)):
                return False
    return True


@dataclass
class SchemeAnalysis:
    scheme: SchemeDef
    model: FluidModel
    flags: tuple
    identify: tuple
    orthogonal: bool
    eq: EquilibriumSet
    vm: VariableMap
    system: FirstOrderSystem
    euler: ResidualReport
    ns: ResidualReport
    viscosities: ViscosityMap
    discrepancy: DiscrepancyTensor
    cs_substituted: bool
    exact_fit_expected: bool


def analyze(s: SchemeDef | str, model: FluidModel | None = None,
            flags=(), identify=None) -> SchemeAnalysis:
    if isinstance(s, str):
        s = builtin(s)
    if model is None:
        model = model_for(s)
    if identify is None:
        identify = DEFAULT_IDENTIFY.get(s.name, ())
    identify = tuple(identify)
    eq = equilibrium_family(s, model, flags)
    vm = variable_map(s, model)
    mm = build_moment_matrix(s)
    lam = advection_matrices(s, mm)
    blocks = abcd_blocks(lam, s.conserved)
    sys = first_order_fluxes(blocks, eq, vm)
    eul = euler_residual(sys)
    g2 = second_order_form(blocks, eq, vm, sys,
                           sigmas=sigma_symbols(s), identify=identify)
    vis = viscosity_table(s.name)
    ns = navier_stokes_residual(g2, model, vis, scheme=s.name,
                                energy_ab=vm.energy_ab,
                                cs_sub=s.name in CS_CONSTRAINED,
                                identify=identify)
    return SchemeAnalysis(scheme=s, model=model, flags=tuple(flags),
                          identify=identify,
                          orthogonal=_rows_orthogonal(mm.core),
                          eq=eq, vm=vm, system=sys, euler=eul, ns=ns,
                          viscosities=vis,
                          discrepancy=discrepancy_extract(ns),
                          cs_substituted=s.name in CS_CONSTRAINED,
                          exact_fit_expected=s.name in EXACT_FIT)
