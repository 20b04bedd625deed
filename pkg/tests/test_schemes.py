import dataclasses
from fractions import Fraction

import pytest

from mrtlab.poly import MOMENT_VARS, Poly
from mrtlab.schemes import (BUILTIN_NAMES, ParseError, SchemeError, builtin,
                            dump_scheme, parse_moment_expr, parse_scheme,
                            validate_scheme)

# (name, q, N, family sizes euler/viscous/no-influence)
FAMILY_SIZES = {
    "d2q9-iso": (9, 3, 3, 2, 1),
    "d2q13-iso": (13, 3, 3, 4, 3),
    "d3q19-iso": (19, 4, 6, 6, 3),
    "d3q27-iso": (27, 4, 6, 7, 10),
    "d3q33-iso": (33, 4, 6, 13, 10),
    "d3q27-2-iso": (27, 4, 6, 10, 7),
    "d2q13-th": (13, 4, 4, 4, 1),
    "d2q17-th": (17, 4, 4, 7, 2),
    "d2v17-th": (17, 4, 4, 7, 2),
    "d2w17-th": (17, 4, 4, 7, 2),
    "d3q33-th": (33, 5, 8, 16, 4),
    "d3q27-2-th": (27, 5, 8, 13, 1),
}

ENERGY_MAPS = {
    "d2q13-th": (26, -28),
    "d2q17-th": (34, -60),
    "d2v17-th": (34, -80),
    "d2w17-th": (34, -52),
    "d3q33-th": (22, -26),
    "d3q27-2-th": (6, -8),
}


def test_builtin_names_and_counts():
    assert len(BUILTIN_NAMES) == 12
    for name, (q, n, fe, fv, fn) in FAMILY_SIZES.items():
        s = builtin(name)
        assert s.q == q
        assert s.conserved == n
        assert s.groups.count("fit-euler") == fe
        assert s.groups.count("fit-viscous") == fv
        assert s.groups.count("no-influence") == fn


def test_unknown_builtin():
    with pytest.raises(KeyError):
        builtin("d2q5-iso")


def test_energy_maps():
    for name, (a, b) in ENERGY_MAPS.items():
        assert builtin(name).energy_ab == (a, b)
    for name in BUILTIN_NAMES:
        if name not in ENERGY_MAPS:
            assert builtin(name).energy_ab is None


def test_velocity_sets():
    for name in BUILTIN_NAMES:
        s = builtin(name)
        assert len(set(s.velocities)) == s.q
    w = builtin("d2w17-th")
    assert (2, 1) in w.velocities
    assert (2, 0) not in w.velocities
    v = builtin("d2v17-th")
    assert (3, 0) in v.velocities and (2, 0) not in v.velocities
    q272 = builtin("d3q27-2-iso")
    assert (1, 0, 0) not in q272.velocities
    assert (2, 0, 0) in q272.velocities and (1, 1, 1) in q272.velocities


def test_d2q9_paper_velocity_order():
    s = builtin("d2q9-iso")
    assert s.velocities == ((0, 0), (1, 0), (0, 1), (-1, 0), (0, -1),
                            (1, 1), (-1, 1), (-1, -1), (1, -1))


def test_d2q9_lambda_degrees_and_core_rows():
    s = builtin("d2q9-iso")
    assert s.lambda_degrees == (0, 1, 1, 2, 2, 2, 3, 3, 4)
    core = s.core_matrix()
    assert core[0] == [1] * 9
    # j_x row: (0, 1, 0, -1, 0, 1, -1, -1, 1) scaled by lambda
    assert core[1] == [0, 1, 0, -1, 0, 1, -1, -1, 1]
    # h at rest velocity: 4 lambda^4
    assert core[8][0] == 4


def test_core_matrices_integer_valued():
    for name in BUILTIN_NAMES:
        core = builtin(name).core_matrix()
        assert all(v.denominator == 1 for row in core for v in row), name


def test_validate_all_builtins():
    for name in BUILTIN_NAMES:
        r = validate_scheme(builtin(name))
        assert r.ok, (name, r.failures)
        assert r.homogeneous and r.orthogonal and r.invertible


def test_validate_detects_repeated_row():
    s = builtin("d3q33-iso")
    polys = list(s.moment_polys)
    polys[-1] = polys[-2]  # h4 := copy of h3
    broken = dataclasses.replace(s, moment_polys=tuple(polys))
    r = validate_scheme(broken)
    assert not r.invertible
    assert any("singular" in f for f in r.failures)


def test_roundtrip_dump_parse():
    for name in BUILTIN_NAMES:
        s = builtin(name)
        text = dump_scheme(s)
        assert text == dump_scheme(s)  # byte-stable
        s2 = parse_scheme(text)
        assert s2 == s


D2Q9_TABLE_DESCRIPTOR = """
name = d2q9-iso
dimension = 2
model = isothermal
conserved = 3

[velocities]
0 0
1 0
0 1
-1 0
0 -1
1 1
-1 1
-1 -1
1 -1

[moments]
rho = 1
jx = vx
jy = vy
eps = 3*vx^2 + 3*vy^2 - 4*lambda^2
xx = vx^2 - vy^2
xy = vx*vy
qx = 3*vx^3 + 3*vx*vy^2 - 5*lambda^2*vx
qy = 3*vy^3 + 3*vy*vx^2 - 5*lambda^2*vy
h = 9/2*(vx^2+vy^2)^2 - 21/2*lambda^2*(vx^2+vy^2) + 4*lambda^4

[groups]
rho conserved -
jx conserved -
jy conserved -
eps fit-euler sig_e
xx fit-euler sig_x
xy fit-euler sig_x
qx fit-viscous sig_q
qy fit-viscous sig_q
h no-influence sig_h
"""


def test_descriptor_matches_builtin():
    assert parse_scheme(D2Q9_TABLE_DESCRIPTOR) == builtin("d2q9-iso")


def test_duplicate_velocity_rejected():
    text = D2Q9_TABLE_DESCRIPTOR.replace("0 1\n-1 0", "1 0\n-1 0", 1)
    with pytest.raises(SchemeError, match="duplicate velocity"):
        parse_scheme(text)


def test_inhomogeneous_row_rejected():
    text = D2Q9_TABLE_DESCRIPTOR.replace(
        "eps = 3*vx^2 + 3*vy^2 - 4*lambda^2",
        "eps = 3*vx^2 + 3*vy^2 - 4*lambda")
    with pytest.raises(SchemeError, match="homogeneous"):
        parse_scheme(text)


def test_bad_group_rejected():
    text = D2Q9_TABLE_DESCRIPTOR.replace("h no-influence sig_h",
                                         "h ghost sig_h")
    with pytest.raises(SchemeError, match="bad group"):
        parse_scheme(text)


def test_parse_error_positions():
    with pytest.raises(ParseError) as ei:
        parse_moment_expr("vx + ", line=7, col0=5)
    assert ei.value.line == 7
    with pytest.raises(ParseError, match="unknown variable"):
        parse_moment_expr("vx * vq")
    with pytest.raises(ParseError, match="unknown section"):
        parse_scheme("name = x\n[velocity]\n")
    err = None
    try:
        parse_scheme(D2Q9_TABLE_DESCRIPTOR.replace("xy = vx*vy",
                                                   "xy = vx*/vy"))
    except ParseError as e:
        err = e
    assert err is not None and err.line > 1 and err.col > 1


def test_expression_grammar():
    p = parse_moment_expr("-(vx - vy)^2 + 1/2 * lambda^2")
    vx = Poly.var(MOMENT_VARS, "vx")
    vy = Poly.var(MOMENT_VARS, "vy")
    lam = Poly.var(MOMENT_VARS, "lam")
    assert p == -((vx - vy) ** 2) + lam * lam * Fraction(1, 2)


def test_thermal_requires_energy_section():
    text = D2Q9_TABLE_DESCRIPTOR.replace("model = isothermal",
                                         "model = thermal")
    text = text.replace("conserved = 3", "conserved = 4")
    text = text.replace("eps fit-euler sig_e", "eps conserved -")
    # moments out of conserved-first order -> error either way; here the
    # missing [energy] section is the first invariant to trip
    with pytest.raises(SchemeError):
        parse_scheme(text)


def test_deviation_flags_carried():
    assert builtin("d2q9-iso").deviations == ()
    for name in ("d2q17-th", "d2v17-th", "d2w17-th"):
        s = builtin(name)
        assert len(s.deviations) == 2
        assert validate_scheme(s).deviations == s.deviations
