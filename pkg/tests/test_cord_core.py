import random
from fractions import Fraction

import pytest

from jetcords.chart_calculus import (
    Chart,
    ChartMap,
    Form,
    VectorField,
    coordinate_differential,
    wedge,
)
from jetcords.cord_core import (
    QuantumCord,
    SourceMap,
    bracket,
    compose_sections,
    concord_from_gauge,
    cord_coefficients,
    curvature,
    curvature_recursion_residual,
    degree0_fields,
    fiber_solve,
    flatness_order,
    gauge,
    gv_cord,
    identity_gauge,
    is_impotent,
    jet_contraction,
    jet_transport,
    jetform_d,
    jetforms_equal,
    jf_scale,
    jf_sub,
    make_gauge_section,
    make_jetform,
    make_quantum_cord,
    mc_cord,
    pullback_cord,
    section_inverse,
    stabilizer_solve,
)
from jetcords.jet_groupoid import graded_indices, mi_degree

F = Fraction

CYL = Chart(("x", "y"), (True, False))
PLANE = Chart(("x", "y"), (False, False))
LINE = Chart(("s",), (False,))
CIRCLE = Chart(("x",), (True,))


def dx(chart=CYL):
    return coordinate_differential(chart, "x")


def dy(chart=CYL):
    return coordinate_differential(chart, "y")


def minus_dy_field(chart=CYL):
    return VectorField.build(chart, {"y": chart.const(-1)})


def cylinder_gv(order=8):
    a0 = dy() + Form.build(CYL, 1, {(0,): CYL.coord("y") * CYL.cos("x")})
    return gv_cord(a0, minus_dy_field(), order)


def jet0(chart, order, coeffs):
    """degree-0 k=1 jet form from {power: rational or field}."""
    comps = {}
    for m, c in coeffs.items():
        f = chart.const(c) if isinstance(c, (int, Fraction)) else c
        comps[(m,)] = Form.function(f)
    return make_jetform(chart, 1, order, 0, SourceMap.zero(chart, 1), [comps])


def agrees_through(a, b, n):
    res = jf_sub(a, b)
    return all(mi_degree(idx) > n for comp in res.comps for idx, _ in comp)


class TestBracket:
    def test_degree0_oracle(self):
        # [t, t^2] = t * 2t - t^2 * 1 = t^2
        f = jet0(CYL, 4, {1: 1})
        g = jet0(CYL, 4, {2: 1})
        got = bracket(f, g)
        assert got.coefficient(0, (2,)) == Form.function(CYL.const(1))
        assert sum(len(c) for c in got.comps) == 1

    def test_odd_self_bracket(self):
        a = cord_coefficients(CYL, 4, [dy(), dx(), Form.zero(CYL, 1),
                                       dy() + dx()])
        lhs = bracket(a, a)
        # [A,A] = 2 A ^ A' for odd A
        manual = {}
        forms = {0: dy(), 1: dx(), 3: dy() + dx()}
        for m, fm in forms.items():
            for n, fn in forms.items():
                if n >= 1 and m + n - 1 <= 4:
                    key = (m + n - 1,)
                    term = wedge(fm, fn) * (2 * n)
                    manual[key] = manual.get(key, Form.zero(CYL, 2)) + term
        for key, form in manual.items():
            assert lhs.coefficient(0, key) == form

    def test_constant_second_argument(self):
        # A = t dy, B = dx: [A,B] = B ^ A' = dx ^ dy
        a = cord_coefficients(CYL, 3, [Form.zero(CYL, 1), dy()])
        b = cord_coefficients(CYL, 3, [dx()])
        got = bracket(a, b)
        assert got.coefficient(0, (0,)) == wedge(dx(), dy())

    def test_graded_antisymmetry(self):
        # [B,A] = -(-1)^{pq} [A,B]
        a = cord_coefficients(CYL, 3, [dy(), dx() * CYL.cos("x")])
        b = cord_coefficients(CYL, 3, [dx(), dy() * CYL.coord("y")])
        assert jetforms_equal(bracket(a, b), bracket(b, a))
        x = jet0(CYL, 3, {0: 2, 1: 1})
        assert jetforms_equal(bracket(a, x), jf_scale(bracket(x, a), -1))

    def test_derivation_identity(self):
        # d[A,B] = [dA,B] + (-1)^p [A,dB]; supports chosen low enough that
        # no dropped top coefficient enters either side
        a = cord_coefficients(CYL, 4, [dy() * CYL.coord("y"),
                                       dx() * CYL.cos("x")])
        b = jet0(CYL, 4, {0: CYL.sin("x"), 2: CYL.coord("y")})
        lhs = jetform_d(bracket(a, b))
        rhs = jf_sub(bracket(jetform_d(a), b), bracket(a, jetform_d(b)))
        assert jetforms_equal(lhs, rhs)

    def test_source_mismatch_rejected(self):
        a = cord_coefficients(CYL, 3, [dy()])
        b = cord_coefficients(CYL, 3, [dy()], source=CYL.coord("y"))
        with pytest.raises(ValueError, match="source"):
            bracket(a, b)


class TestCurvature:
    def test_dy_is_flat(self):
        a = cord_coefficients(CYL, 6, [dy()])
        assert flatness_order(a) == 6

    def test_germ_cord_one_plus_t_squared(self):
        ds = coordinate_differential(LINE, "s")
        a = cord_coefficients(LINE, 5, [ds, Form.zero(LINE, 1), ds])
        assert flatness_order(a) == 5

    def test_x_t_dy_not_flat(self):
        a = cord_coefficients(
            PLANE, 4,
            [Form.zero(PLANE, 1),
             Form.build(PLANE, 1, {(1,): PLANE.coord("x")})])
        f = curvature(a)
        assert f.coefficient(0, (1,)) == wedge(dx(PLANE), dy(PLANE))
        assert flatness_order(a) == 0

    def test_recursion_residuals(self):
        a = cylinder_gv(6)
        halved = curvature_recursion_residual(a, F(1, 2))
        literal = curvature_recursion_residual(a, F(1))
        assert halved.is_zero()
        assert not literal.is_zero()


class TestGauge:
    def test_identity_fixes(self):
        a = cylinder_gv(6)
        y = identity_gauge(CYL, 1, 6)
        assert jetforms_equal(gauge(y, a), a)

    def test_halving_zero_cord(self):
        zero = cord_coefficients(CYL, 5, [Form.zero(CYL, 1)])
        y = make_gauge_section(CYL, 1, 5, SourceMap.zero(CYL, 1),
                               SourceMap.zero(CYL, 1), [{(1,): F(1, 2)}])
        assert gauge(y, zero).is_zero()

    def test_translation_cancels_exact_part(self):
        # Y: 0 -> s_A with unit linear part kills a_0 = d(s_A)
        src = SourceMap(CYL, (CYL.coord("y"),))
        a = make_jetform(CYL, 1, 4, 1, src, [{(0,): dy()}])
        y = make_gauge_section(CYL, 1, 4, SourceMap.zero(CYL, 1), src,
                               [{(1,): 1}])
        assert gauge(y, a).is_zero()

    def test_flatness_preserved_with_moving_source(self):
        a = cylinder_gv(6)
        src = SourceMap(CYL, (CYL.coord("y"),))
        w = make_gauge_section(CYL, 1, 6, src, SourceMap.zero(CYL, 1),
                               [{(1,): 1}])
        moved = gauge(w, a)
        assert isinstance(moved, QuantumCord)
        assert moved.source == src
        assert moved.flat_order == 6
        back = make_gauge_section(CYL, 1, 6, SourceMap.zero(CYL, 1), src,
                                  [{(1,): 1}])
        assert jetforms_equal(gauge(back, moved), a)

    def test_group_law_random_k1(self):
        rng = random.Random(11)
        zero = SourceMap.zero(CYL, 1)
        for _ in range(40):
            order = 5
            a = _random_jetform_k1(rng, order)
            y = _random_section_k1(rng, order)
            z = _random_section_k1(rng, order)
            lhs = gauge(z, gauge(y, a))
            rhs = gauge(compose_sections(z, y), a)
            assert jetforms_equal(lhs, rhs)

    def test_group_law_field_coefficients(self):
        rng = random.Random(5)
        for _ in range(6):
            a = _random_jetform_k1(rng, 4, with_fields=True)
            y = _random_section_k1(rng, 4, with_fields=True)
            z = _random_section_k1(rng, 4, with_fields=True)
            assert jetforms_equal(gauge(z, gauge(y, a)),
                                  gauge(compose_sections(z, y), a))

    def test_group_law_random_k2(self):
        rng = random.Random(23)
        for _ in range(8):
            a = _random_jetform_k2(rng, 3)
            y = _random_section_k2(rng, 3)
            z = _random_section_k2(rng, 3)
            assert jetforms_equal(gauge(z, gauge(y, a)),
                                  gauge(compose_sections(z, y), a))

    def test_composite_keeps_full_degree(self):
        # truncating Y o Z at the nominal order would drop its cubic part,
        # which the Jacobian inverse reads at the top index of the action
        x_dx = Form.build(PLANE, 1, {(0,): PLANE.coord("x")})
        a = cord_coefficients(PLANE, 2, [dy(PLANE), x_dx])
        zero = SourceMap.zero(PLANE, 1)
        y = make_gauge_section(PLANE, 1, 2, zero, zero, [{(1,): 1, (2,): 1}])
        w = compose_sections(y, y)
        assert w.coefficient(0, (3,)) == PLANE.const(2)
        assert w.coefficient(0, (4,)) == PLANE.const(1)
        lhs = gauge(y, gauge(y, a))
        assert jetforms_equal(lhs, gauge(w, a))
        want = dy(PLANE) * 10 + x_dx * (-2)
        assert lhs.coefficient(0, (2,)) == want

    def test_curvature_covariance_linear_sections(self):
        # a linear section keeps the gauged cord polynomial, so the
        # identity is exact at every stored index
        rng = random.Random(7)
        zero = SourceMap.zero(CYL, 1)
        for _ in range(10):
            a = _random_jetform_k1(rng, 5, with_fields=True)  # not flat
            c = CYL.const(F(rng.randint(2, 3)))
            if rng.random() < 0.5:
                c = c + CYL.cos("x")
            y = make_gauge_section(CYL, 1, 5, zero, zero, [{(1,): c}])
            lhs = curvature(gauge(y, a))
            rhs = jet_transport(y, curvature(a))
            assert jetforms_equal(lhs, rhs)

    def test_curvature_covariance_general_sections_below_top(self):
        # a nonlinear section divides: the gauged cord's true order+1
        # coefficient feeds the top curvature index and is not stored,
        # so the identity is checked on every index below it
        rng = random.Random(7)
        for _ in range(8):
            a = _random_jetform_k1(rng, 5)
            y = _random_section_k1(rng, 5)
            lhs = curvature(gauge(y, a))
            rhs = jet_transport(y, curvature(a))
            assert agrees_through(lhs, rhs, 4)

    def test_curvature_covariance_k2_linear_sections(self):
        rng = random.Random(3)
        zero = SourceMap.zero(CYL, 2)
        for _ in range(4):
            a = _random_jetform_k2(rng, 3)
            y = make_gauge_section(
                CYL, 2, 3, zero, zero,
                [{(1, 0): CYL.const(F(rng.randint(1, 2))),
                  (0, 1): CYL.const(_random_fraction(rng))},
                 {(0, 1): CYL.const(F(rng.randint(1, 2)))}])
            assert jetforms_equal(curvature(gauge(y, a)),
                                  jet_transport(y, curvature(a)))

    def test_curvature_covariance_k2_general_below_top(self):
        rng = random.Random(13)
        for _ in range(3):
            a = _random_jetform_k2(rng, 3)
            y = _random_section_k2(rng, 3)
            assert agrees_through(curvature(gauge(y, a)),
                                  jet_transport(y, curvature(a)), 2)


def _random_fraction(rng, lo=-2, hi=2, den=3):
    return F(rng.randint(lo, hi), rng.randint(1, den))


def _random_form1(rng, chart=CYL, with_fields=False):
    cx = chart.const(_random_fraction(rng))
    cy = chart.const(_random_fraction(rng))
    if with_fields and rng.random() < 0.7:
        cx = cx + chart.cos("x") * _random_fraction(rng)
        cy = cy + chart.coord("y") * _random_fraction(rng)
    return Form.build(chart, 1, {(0,): cx, (1,): cy})


def _random_jetform_k1(rng, order, with_fields=False):
    forms = [_random_form1(rng, with_fields=with_fields)
             for _ in range(order + 1)]
    return cord_coefficients(CYL, order, forms)


def _random_section_k1(rng, order, with_fields=False):
    coeffs = {(1,): CYL.const(F(rng.randint(1, 3), rng.randint(1, 2)))}
    for m in range(2, order + 1):
        c = CYL.const(_random_fraction(rng))
        if with_fields and rng.random() < 0.5:
            c = c + CYL.sin("x") * _random_fraction(rng)
        coeffs[(m,)] = c
    zero = SourceMap.zero(CYL, 1)
    return make_gauge_section(CYL, 1, order, zero, zero, [coeffs])


def _random_jetform_k2(rng, order):
    comps = []
    for _ in range(2):
        acc = {}
        for idx in graded_indices(2, order):
            if rng.random() < 0.4:
                acc[idx] = _random_form1(rng)
        comps.append(acc)
    return make_jetform(CYL, 2, order, 1, SourceMap.zero(CYL, 2), comps)


def _random_section_k2(rng, order):
    zero = SourceMap.zero(CYL, 2)
    coeffs = [{}, {}]
    coeffs[0][(1, 0)] = CYL.const(F(rng.randint(1, 2)))
    coeffs[0][(0, 1)] = CYL.const(_random_fraction(rng))
    coeffs[1][(0, 1)] = CYL.const(F(rng.randint(1, 2)))
    for i in range(2):
        for idx in graded_indices(2, order):
            if sum(idx) >= 2 and rng.random() < 0.3:
                coeffs[i][idx] = CYL.const(_random_fraction(rng))
    return make_gauge_section(CYL, 2, order, zero, zero, coeffs)


def _identity_through(sec, n):
    for idx, f in sec.comps[0]:
        if mi_degree(idx) > n:
            continue
        if idx == (1,):
            if f != sec.chart.const(1):
                return False
        elif not f.is_zero():
            return False
    return True


class TestSectionInverse:
    def test_linear_inverse_is_reciprocal(self):
        zero = SourceMap.zero(CYL, 1)
        y = make_gauge_section(CYL, 1, 4, zero, zero,
                               [{(1,): CYL.const(2) + CYL.cos("x")}])
        z = section_inverse(y)
        assert sum(1 for _ in z.comps[0]) == 1
        assert compose_sections(y, z).is_identity()
        assert compose_sections(z, y).is_identity()

    def test_general_inverse_through_stored_orders(self):
        # the inverse is solved through order + 1; the full-degree
        # composite carries junk beyond that, which consumers truncate
        rng = random.Random(4)
        for _ in range(8):
            y = _random_section_k1(rng, 5, with_fields=True)
            z = section_inverse(y)
            assert _identity_through(compose_sections(y, z), 6)
            assert _identity_through(compose_sections(z, y), 6)

    def test_transport_roundtrip_exact(self):
        rng = random.Random(6)
        for _ in range(5):
            y = _random_section_k1(rng, 5, with_fields=True)
            w = _random_jetform_k1(rng, 5, with_fields=True)
            back = jet_transport(section_inverse(y), jet_transport(y, w))
            assert jetforms_equal(back, w)

    def test_codimension_two_rejected(self):
        rng = random.Random(8)
        with pytest.raises(ValueError, match="codimension 1"):
            section_inverse(_random_section_k2(rng, 3))


class TestGV:
    def test_trivial_pair(self):
        a = gv_cord(dy(), minus_dy_field(), 6)
        assert a.flat_order == 6
        assert a.coefficient(0, (0,)) == dy()
        assert sum(len(c) for c in a.comps) == 1

    def test_cylinder_pair(self):
        a = cylinder_gv(8)
        want_a1 = Form.build(CYL, 1, {(0,): -CYL.cos("x")})
        assert a.coefficient(0, (1,)) == want_a1
        for m in range(2, 9):
            assert a.coefficient(0, (m,)).is_zero()
        assert a.flat_order == 8

    def test_contraction_is_minus_one_jet(self):
        a = cylinder_gv(6)
        assert jet_contraction(minus_dy_field(), a) == {(0,): CYL.const(-1)}

    def test_normalization_rejected(self):
        with pytest.raises(ValueError, match="normalization"):
            gv_cord(dy(), VectorField.build(CYL, {"y": CYL.const(1)}), 4)


class TestMC:
    def test_constant_x_flips_gv(self):
        x = jet0(CYL, 8, {0: -1})
        b = mc_cord(dy() + Form.build(CYL, 1,
                                      {(0,): CYL.coord("y") * CYL.cos("x")}),
                    minus_dy_field(), x, 8)
        a = cylinder_gv(8)
        # B(t) = -A(-t): b_n = (-1)^{n+1} a_n
        for m in range(9):
            want = a.coefficient(0, (m,)) * ((-1) ** (m + 1))
            assert b.coefficient(0, (m,)) == want
        assert b.flat_order == 8

    def test_simple_pair_has_no_linear_term(self):
        x = jet0(CYL, 4, {0: -1})
        b = mc_cord(dy(), minus_dy_field(), x, 4)
        assert b.coefficient(0, (0,)) == dy() * (-1)
        assert b.coefficient(0, (1,)).is_zero()
        assert b.flat_order == 4

    def test_contraction_postcondition(self):
        x = jet0(CYL, 6, {0: -2, 1: 1})
        a0 = dy() + Form.build(CYL, 1, {(0,): CYL.coord("y") * CYL.cos("x")})
        b = mc_cord(a0, minus_dy_field(), x, 6)
        got = jet_contraction(minus_dy_field(), b)
        want = degree0_fields(jf_scale(x, -1))
        assert got == want
        assert b.flat_order == 6

    def test_positive_x0_rejected(self):
        with pytest.raises(ValueError, match="negative"):
            mc_cord(dy(), minus_dy_field(), jet0(CYL, 4, {0: 1}), 4)


class TestSolvers:
    def test_fiber_fixed_point(self):
        a = gv_cord(dy(), minus_dy_field(), 5)
        y = fiber_solve(a, minus_dy_field(), jet0(CYL, 5, {0: -1}))
        assert y.is_identity()

    def test_fiber_halving(self):
        a = gv_cord(dy(), minus_dy_field(), 5)
        y = fiber_solve(a, minus_dy_field(), jet0(CYL, 5, {0: -2}))
        assert y.coefficient(0, (1,)) == CYL.const(F(1, 2))
        for m in range(2, 7):
            assert y.coefficient(0, (m,)).is_zero()

    def test_fiber_log_series(self):
        a = gv_cord(dy(), minus_dy_field(), 6)
        y = fiber_solve(a, minus_dy_field(), jet0(CYL, 6, {0: -1, 1: 1}))
        # the section carries y_{order+1}, pinned by the index-6 relation
        for m in range(1, 8):
            assert y.coefficient(0, (m,)) == CYL.const(F(1, m))

    def test_fiber_postcondition_on_cylinder(self):
        a = cylinder_gv(6)
        x = jet0(CYL, 6, {0: -2, 1: F(1, 2)})
        y = fiber_solve(a, minus_dy_field(), x)
        moved = gauge(y, a)
        assert jet_contraction(minus_dy_field(), moved) == degree0_fields(x)

    def test_fiber_uniqueness_roundtrip(self):
        a = cylinder_gv(5)
        x = jet0(CYL, 5, {0: -3, 2: 1})
        y = fiber_solve(a, minus_dy_field(), x)
        again = fiber_solve(a, minus_dy_field(), x)
        assert y == again
        moved = gauge(y, a)
        x_back = jet0(CYL, 5, dict(
            (m, f) for (m,), f in
            jet_contraction(minus_dy_field(), moved).items()))
        y2 = fiber_solve(a, minus_dy_field(), x_back)
        assert y.comps == y2.comps

    def test_stabilizer_trivial_for_dy(self):
        a = gv_cord(dy(), minus_dy_field(), 6)
        assert stabilizer_solve(a, minus_dy_field()).is_identity()

    def test_stabilizer_trivial_on_cylinder(self):
        a = cylinder_gv(8)
        assert stabilizer_solve(a, minus_dy_field()).is_identity()

    def test_stabilizer_rejects_impotent(self):
        zero = cord_coefficients(CYL, 4, [Form.zero(CYL, 1)])
        flat_zero = make_quantum_cord(zero)
        with pytest.raises(ValueError, match="[Ii]mpotent"):
            stabilizer_solve(flat_zero, minus_dy_field())


class TestImpotency:
    def test_t_dtheta(self):
        a = cord_coefficients(CIRCLE, 4,
                              [Form.zero(CIRCLE, 1),
                               coordinate_differential(CIRCLE, "x")])
        assert is_impotent(a)

    def test_dy_not_impotent(self):
        assert not is_impotent(cylinder_gv(4))

    def test_leaf_pullback_impotent(self):
        a = cylinder_gv(6)
        leaf = ChartMap.build(CIRCLE, CYL, {"x": {"x": 1}, "y": 0})
        restricted = pullback_cord(a, leaf)
        assert is_impotent(restricted)
        want = Form.build(CIRCLE, 1, {(0,): -CIRCLE.cos("x")})
        assert restricted.coefficient(0, (1,)) == want
        assert isinstance(restricted, QuantumCord)
        assert restricted.flat_order == 6

    def test_gauge_invariance_of_impotency(self):
        a = cord_coefficients(
            CIRCLE, 5,
            [Form.zero(CIRCLE, 1),
             coordinate_differential(CIRCLE, "x"),
             coordinate_differential(CIRCLE, "x") * CIRCLE.cos("x")])
        zero = SourceMap.zero(CIRCLE, 1)
        y = make_gauge_section(CIRCLE, 1, 5, zero, zero,
                               [{(1,): 2, (2,): CIRCLE.sin("x")}])
        assert is_impotent(gauge(y, a))
        b = cylinder_gv(5)
        z = make_gauge_section(CYL, 1, 5, SourceMap.zero(CYL, 1),
                               SourceMap.zero(CYL, 1), [{(1,): 2}])
        assert not is_impotent(gauge(z, b))


class TestPullbackCord:
    def test_identity(self):
        a = cylinder_gv(5)
        assert jetforms_equal(pullback_cord(a, ChartMap.identity(CYL)), a)

    def test_commutes_with_structure(self):
        leaf = ChartMap.build(CIRCLE, CYL, {"x": {"x": 1}, "y": 0})
        a = _random_jetform_k1(random.Random(4), 4, with_fields=True)
        b = _random_jetform_k1(random.Random(9), 4, with_fields=True)
        assert jetforms_equal(pullback_cord(jetform_d(a), leaf),
                              jetform_d(pullback_cord(a, leaf)))
        assert jetforms_equal(pullback_cord(bracket(a, b), leaf),
                              bracket(pullback_cord(a, leaf),
                                      pullback_cord(b, leaf)))


class TestConcord:
    def test_identity_gauge_constant_extension(self):
        a = cylinder_gv(4)
        c = concord_from_gauge(a, identity_gauge(CYL, 1, 4))
        a_s, b_s = c.split()
        assert b_s.is_zero()
        assert jetforms_equal(c.restrict(0), a)
        assert jetforms_equal(c.restrict(1), a)

    def test_halving_endpoints_and_flatness(self):
        a = cylinder_gv(6)
        zero = SourceMap.zero(CYL, 1)
        y = make_gauge_section(CYL, 1, 6, zero, zero, [{(1,): F(1, 2)}])
        c = concord_from_gauge(a, y)
        assert c.cord.flat_order == 6
        assert jetforms_equal(c.restrict(0), a)
        assert jetforms_equal(c.restrict(1), gauge(y, a))

    def test_split_identity_exact_for_linear_section(self):
        a = cylinder_gv(5)
        zero = SourceMap.zero(CYL, 1)
        y = make_gauge_section(CYL, 1, 5, zero, zero,
                               [{(1,): CYL.const(2) + CYL.cos("x")}])
        c = concord_from_gauge(a, y)
        _, b_s = c.split()
        assert not b_s.is_zero()
        assert c.split_residual().is_zero()
        assert c.cord.flat_order == 5

    def test_split_identity_nonlinear_section(self):
        a = cylinder_gv(5)
        zero = SourceMap.zero(CYL, 1)
        y = make_gauge_section(CYL, 1, 5, zero, zero,
                               [{(1,): F(1, 2), (2,): F(1, 3)}])
        c = concord_from_gauge(a, y)
        res = c.split_residual()
        # the top coefficient would need the dropped order+1 coefficient
        assert all(mi_degree(idx) == 5
                   for comp in res.comps for idx, _ in comp)

    def test_nonzero_source_rejected(self):
        src = SourceMap(CYL, (CYL.coord("y"),))
        a = make_quantum_cord(make_jetform(CYL, 1, 4, 1, src,
                                           [{(0,): dy()}]))
        with pytest.raises(ValueError, match="source"):
            concord_from_gauge(a, identity_gauge(CYL, 1, 4))
