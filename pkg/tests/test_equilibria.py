"""Equilibrium families, variable maps, and the conserved-variable Jacobian."""

import random
from fractions import Fraction

import pytest

from mrtlab.equilibria import (CS, E, LAM, R, U, V, W, EquilibriumSet,
                               dump_equilibria, equilibrium_family,
                               fluid_model, jacobian_conserved, model_for,
                               parity_failures, variable_map)
from mrtlab.poly import NotDivisible, frac, pvar
from mrtlab.schemes import BUILTIN_NAMES, builtin

S2 = U * U + V * V


def all_pairs():
    for name in BUILTIN_NAMES:
        s = builtin(name)
        yield s, equilibrium_family(s), variable_map(s)


def test_fluid_model_invariants():
    m = fluid_model("thermal", 2)
    assert m.gamma == 2
    assert m.pressure() == R * E
    m = fluid_model("thermal", 3)
    assert m.gamma == Fraction(5, 3)
    assert m.pressure() == frac(2, 3) * R * E
    assert fluid_model("isothermal", 2).pressure() == CS ** 2 * R
    with pytest.raises(ValueError):
        from mrtlab.equilibria import FluidModel
        FluidModel("thermal", 2, Fraction(5, 3))


def test_unsupported_combination():
    s = builtin("d2q9-iso")
    with pytest.raises(ValueError, match="unsupported combination"):
        equilibrium_family(s, fluid_model("thermal", 2))
    with pytest.raises(ValueError, match="unknown reading flags"):
        equilibrium_family(s, flags={"no-such-flag"})


def test_rho_divisibility_all():
    for s, eq, _ in all_pairs():
        for name in eq.names:
            p = eq.entries[name]
            if not p.is_zero:
                q = p.divide_exact(R)
                assert q * R == p
                assert not q.uses("rho")


def test_parity_clean_by_default():
    for s, eq, _ in all_pairs():
        assert parity_failures(s, eq) == (), s.name
    s = builtin("d3q27-iso")
    eq = equilibrium_family(s, flags={"d3q27-aniso"})
    assert parity_failures(s, eq) == ()


def test_parity_reports_verbatim_readings():
    cases = {
        ("d2q9-iso", "d2q9-q-verbatim"): (("qx", "x"), ("qy", "y")),
        ("d2q17-th", "d2q17-combo-verbatim"): (("rx", "x"), ("ry", "x")),
        ("d2w17-th", "d2w17-combo-verbatim"): (("ry", "x"), ("ry", "y")),
        ("d3q33-th", "d3q33-th-qz-verbatim"): (("qz", "y"), ("qz", "z")),
    }
    for (name, flag), expected in cases.items():
        s = builtin(name)
        eq = equilibrium_family(s, flags={flag})
        assert parity_failures(s, eq) == expected


def test_known_equilibria():
    eq = equilibrium_family(builtin("d2q13-iso"))
    assert eq.entries["qx"] == R * U * (S2 + 4 * CS ** 2 - 3 * LAM ** 2)
    assert eq.entries["eps"] == R * (13 * S2 - 28 * LAM ** 2 + 26 * CS ** 2)
    eq = equilibrium_family(builtin("d2q13-iso"), flags={"d2q13-q-verbatim"})
    assert eq.entries["qx"] == \
        R * U * (S2 + 4 * LAM ** 2 * CS ** 2 - 3 * LAM ** 2)
    eq = equilibrium_family(builtin("d3q27-2-th"))
    assert eq.entries["rx"] == R * U * LAM ** 2 * (
        -(U ** 2 + 3 * V ** 2 + 3 * W ** 2) - 6 * E + 5 * LAM ** 2)
    eq = equilibrium_family(builtin("d2q9-iso"))
    assert eq.entries["h"] == R * (3 * S2 - 2 * LAM ** 2)
    assert eq.entries["qx"] == R * U * (3 * S2 - LAM ** 2)


def test_odd_moments_rest_zero():
    at_rest = {"rho": frac(7, 5), "u": 0, "v": 0, "w": 0, "e": frac(3, 4),
               "lam": 2, "cs": frac(2, 3)}
    for s, eq, _ in all_pairs():
        for name in eq.names:
            p = s.moment_polys[s.moment_index(name)]
            odd_somewhere = False
            for mv in ("vx", "vy", "vz")[:s.dim]:
                from mrtlab.poly import MOMENT_VARS, Poly
                if p.substitute(mv, -Poly.var(MOMENT_VARS, mv)) == -p:
                    odd_somewhere = True
            if odd_somewhere:
                assert eq.entries[name].evaluate(at_rest) == 0, \
                    f"{s.name}.{name}"


def test_variable_map_identities():
    vm = variable_map(builtin("d2q17-th"))
    assert vm.polys["eps"] == R * (17 * S2 + 34 * E - 60 * LAM ** 2)
    assert vm.chain["eps"]["e"] == 34 * R
    assert vm.chain["eps"]["u"] == 34 * R * U
    assert vm.chain["eps"]["rho"] == 17 * S2 + 34 * E - 60 * LAM ** 2
    assert vm.chain["jx"] == {"rho": U, "u": R}
    vm = variable_map(builtin("d3q33-th"))
    assert vm.polys["eps"] == R * (11 * (S2 + W * W) + 22 * E - 26 * LAM ** 2)
    vm = variable_map(builtin("d2q9-iso"))
    assert vm.names == ("rho", "jx", "jy")
    assert vm.chain["rho"] == {"rho": R.divide_exact(R)}


def test_combination_constraints_recorded():
    eq = equilibrium_family(builtin("d3q33-iso"))
    assert len(eq.constraints) == 3
    c = eq.constraints[0]
    assert c.names == ("rx", "tx")
    assert c.coeffs == ((Fraction(1), 0), (Fraction(38, 13), -2))
    assert eq.entries["rx"] == c.target
    assert eq.entries["tx"].is_zero
    eq = equilibrium_family(builtin("d2w17-th"))
    assert eq.constraints[0].names == ("rx", "xy2")
    assert eq.constraints[0].coeffs == ((Fraction(1), 0), (Fraction(171, 2), 0))


def test_jacobian_examples():
    s = builtin("d2q9-iso")
    eq, vm = equilibrium_family(s), variable_map(s)
    jac = jacobian_conserved(eq, vm)
    assert jac["xy"]["jx"] == V
    assert jac["xy"]["jy"] == U
    assert jac["xy"]["rho"] == -U * V
    s = builtin("d2q13-th")
    jac = jacobian_conserved(equilibrium_family(s), variable_map(s))
    assert jac["qx"]["eps"] == frac(2, 13) * U


def test_jacobian_rejects_non_rho_linear():
    s = builtin("d2q9-iso")
    vm = variable_map(s)
    bad = EquilibriumSet(scheme=s.name, model=vm.model, names=("xy",),
                         entries={"xy": U * V})
    with pytest.raises(NotDivisible):
        jacobian_conserved(bad, vm)


def _feval(p, vals):
    total = 0.0
    for e, c in p.terms.items():
        t = float(c)
        for name, k in zip(p.vars, e):
            if k:
                t *= vals[name] ** k
        total += t
    return total


def _rand_state(rng, model):
    st = {"rho": Fraction(rng.randint(40, 160), 64),
          "u": Fraction(rng.randint(-16, 16), 64),
          "v": Fraction(rng.randint(-16, 16), 64),
          "w": Fraction(rng.randint(-16, 16), 64) if model.dim == 3
               else Fraction(0),
          "lam": Fraction(rng.randint(48, 128), 64),
          "cs": Fraction(rng.randint(24, 64), 64),
          "e": Fraction(rng.randint(40, 160), 64)}
    if model.kind != "thermal":
        st["e"] = Fraction(0)
    return st


def test_jacobian_finite_difference_oracle():
    # central differences of Phi(V(W)) in conserved space, float arithmetic
    rng = random.Random(20260823)
    h = 2.0 ** -20
    states = 0
    for s, eq, vm in all_pairs():
        model = vm.model
        thermal = model.kind == "thermal"
        if thermal:
            a, b = vm.energy_ab
        for _ in range(9):
            st = _rand_state(rng, model)
            wvals = {nm: _feval(vm.polys[nm], {k: float(x)
                                               for k, x in st.items()})
                     for nm in vm.names}
            lam = float(st["lam"])

            def prim(wv):
                rho = wv["rho"]
                out = {"rho": rho, "u": wv["jx"] / rho, "v": wv["jy"] / rho,
                       "w": wv.get("jz", 0.0) / rho,
                       "lam": lam, "cs": float(st["cs"]), "e": 0.0}
                if thermal:
                    sq = out["u"] ** 2 + out["v"] ** 2 + out["w"] ** 2
                    out["e"] = ((wv["eps"] - float(b) * lam * lam * rho)
                                / float(a) - rho * sq / 2.0) / rho
                return out

            jac = jacobian_conserved(eq, vm)
            for name in eq.names:
                phi = eq.entries[name]
                if phi.is_zero:
                    continue
                for wn in vm.names:
                    hi = dict(wvals)
                    lo = dict(wvals)
                    hi[wn] += h
                    lo[wn] -= h
                    fd = (_feval(phi, prim(hi)) - _feval(phi, prim(lo))) / (2 * h)
                    exact = float(jac[name][wn].evaluate(st))
                    assert abs(exact - fd) <= 1e-6 * max(1.0, abs(exact)), \
                        (s.name, name, wn, exact, fd)
            states += 1
    assert states >= 100


def test_dump_equilibria_stable():
    s = builtin("d2q9-iso")
    eq = equilibrium_family(s)
    text = dump_equilibria(eq)
    assert text == dump_equilibria(equilibrium_family(s))
    assert "qx = 3*rho*u^3 + 3*rho*u*v^2 - rho*u*lam^2" in text
    s = builtin("d3q33-iso")
    text = dump_equilibria(equilibrium_family(s))
    assert "constraint: rx + 38/13*lam^-2*tx = " in text


def test_model_for_matches_scheme():
    for name in BUILTIN_NAMES:
        s = builtin(name)
        m = model_for(s)
        assert m.kind == s.model and m.dim == s.dim
