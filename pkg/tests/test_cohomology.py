import random
from fractions import Fraction

import pytest

from jetcords.chart_calculus import (
    Chart,
    Form,
    RationalField,
    TwoPiMultiple,
    VectorField,
    contract,
    coordinate_differential,
    exterior_derivative,
)
from jetcords.cohomology import (
    FourierTruncation,
    TwistedComplex,
    bott_cohomology_profile,
    bott_differential,
    gv_integral,
    h0_dimension,
    nabla,
    phi_transport,
)
from jetcords.cord_core import (
    SourceMap,
    bracket,
    curvature,
    gauge,
    gv_cord,
    identity_gauge,
    jet_transport,
    jetform_d,
    jetforms_equal,
    jf_scale,
    jf_sub,
    make_gauge_section,
    make_jetform,
    make_quantum_cord,
    section_inverse,
)
from jetcords.jet_groupoid import mi_degree

F = Fraction

TORUS = Chart(("x", "y"), (True, True))
T3 = Chart(("x", "y", "z"), (True, True, True))
CYL = Chart(("x", "y"), (True, False))

ZERO1 = SourceMap.zero(TORUS, 1)


def dcoord(chart, name):
    return coordinate_differential(chart, name)


def rand_fraction(rng, lo=-2, hi=2, den=3):
    return F(rng.randint(lo, hi), rng.randint(1, den))


def rand_field(rng, chart=TORUS):
    f = chart.const(rand_fraction(rng))
    if rng.random() < 0.7:
        f = f + chart.cos("x") * rand_fraction(rng)
    if rng.random() < 0.4:
        f = f + chart.sin("y", 2) * rand_fraction(rng)
    return f


def rand_jetform(rng, order, degree, top):
    """k=1 jet form with random coefficients through fiber degree `top`."""
    comps = {}
    for m in range(top + 1):
        if degree == 0:
            comps[(m,)] = Form.build(TORUS, 0, {(): rand_field(rng)})
        elif degree == 1:
            comps[(m,)] = Form.build(TORUS, 1, {(0,): rand_field(rng),
                                                (1,): rand_field(rng)})
        else:
            comps[(m,)] = Form.build(TORUS, 2, {(0, 1): rand_field(rng)})
    return make_jetform(TORUS, 1, order, degree, ZERO1, [comps])


def flat_tangent_cord(rng, order, top=2):
    """sum_m f_m(x) t^m dx: flat at every polynomial degree, since both the
    exterior derivative and all wedge pairs of dx-multiples of functions of
    x vanish identically."""
    comps = {}
    for m in range(top + 1):
        g = TORUS.const(rand_fraction(rng))
        if rng.random() < 0.8:
            g = g + TORUS.cos("x") * rand_fraction(rng)
        if rng.random() < 0.5:
            g = g + TORUS.sin("x", 2) * rand_fraction(rng)
        comps[(m,)] = Form.build(TORUS, 1, {(0,): g})
    return make_jetform(TORUS, 1, order, 1, ZERO1, [comps])


def linear_section(rng, order):
    w1 = TORUS.const(F(rng.randint(2, 3)))
    if rng.random() < 0.5:
        w1 = w1 + TORUS.cos("x") * F(1, 2)
    return make_gauge_section(TORUS, 1, order, ZERO1, ZERO1, [{(1,): w1}])


def general_section(rng, order):
    coeffs = {(1,): TORUS.const(F(rng.randint(1, 3), rng.randint(1, 2)))}
    for m in range(2, order + 1):
        c = TORUS.const(rand_fraction(rng))
        if rng.random() < 0.5:
            c = c + TORUS.sin("x") * rand_fraction(rng)
        coeffs[(m,)] = c
    return make_gauge_section(TORUS, 1, order, ZERO1, ZERO1, [coeffs])


def agrees_through(a, b, n):
    res = jf_sub(a, b)
    return all(mi_degree(idx) > n for comp in res.comps for idx, _ in comp)


def slope_pair(p, q):
    a = Form.build(TORUS, 1, {(0,): TORUS.const(-p), (1,): TORUS.const(q)})
    v = VectorField.build(TORUS, {"y": TORUS.const(F(-1, q))})
    return a, v


class TestNabla:
    def test_zero_twist_is_exterior_derivative(self):
        rng = random.Random(1)
        zero = make_jetform(TORUS, 1, 4, 1, ZERO1, [{}])
        for degree in (0, 1):
            w = rand_jetform(rng, 4, degree, 3)
            assert jetforms_equal(nabla(zero, w), jetform_d(w))

    def test_constant_jet_against_linear_twist(self):
        # [t dy, 1] contracts the fiber derivative of the twist: -dy
        a = make_jetform(TORUS, 1, 3, 1, ZERO1, [{(1,): dcoord(TORUS, "y")}])
        one = make_jetform(TORUS, 1, 3, 0, ZERO1,
                           [{(0,): Form.function(TORUS.const(1))}])
        out = nabla(a, one)
        assert out.coefficient(0, (0,)) == -dcoord(TORUS, "y")
        assert all(mi_degree(i) == 0 for c in out.comps for i, _ in c)

    def test_degree_and_source_guards(self):
        rng = random.Random(2)
        w = rand_jetform(rng, 3, 0, 2)
        with pytest.raises(ValueError, match="degree 1"):
            nabla(w, w)
        shifted = SourceMap(TORUS, (TORUS.cos("x"),))
        a = make_jetform(TORUS, 1, 3, 1, shifted,
                         [{(1,): dcoord(TORUS, "y")}])
        with pytest.raises(ValueError, match="source"):
            nabla(a, w)

    def test_squares_to_zero_exact(self):
        # the twists are flat as polynomials and the fiber degrees keep
        # every intermediate inside the stored range, so equality is exact
        # at all indices
        rng = random.Random(41)
        for _ in range(10):
            a = gauge(linear_section(rng, 5), flat_tangent_cord(rng, 5))
            assert not any(True for c in curvature(a).comps for _ in c)
            w = rand_jetform(rng, 5, rng.choice((0, 1)), 3)
            out = nabla(a, nabla(a, w))
            assert all(not comp for comp in out.comps)

    def test_nonflat_negative_control(self):
        rng = random.Random(9)
        a = rand_jetform(rng, 5, 1, 2)
        assert any(True for c in curvature(a).comps for _ in c)
        w = rand_jetform(rng, 5, 0, 2)
        out = nabla(a, nabla(a, w))
        assert any(True for c in out.comps for _ in c)

    def test_graded_leibniz(self):
        rng = random.Random(17)
        for _ in range(6):
            a = gauge(linear_section(rng, 5), flat_tangent_cord(rng, 5))
            for dz, dw in ((0, 0), (0, 1), (1, 0), (1, 1)):
                z = rand_jetform(rng, 5, dz, 2)
                w = rand_jetform(rng, 5, dw, 2)
                lhs = nabla(a, bracket(z, w))
                sign = -1 if dz % 2 else 1
                rhs = jf_sub(bracket(nabla(a, z), w),
                             jf_scale(bracket(z, nabla(a, w)), -sign))
                assert jetforms_equal(lhs, rhs)


class TestTwistedComplex:
    def test_certified_cord_accepted(self):
        a0 = dcoord(CYL, "y") + Form.build(
            CYL, 1, {(0,): CYL.coord("y") * CYL.cos("x")})
        v = VectorField.build(CYL, {"y": CYL.const(-1)})
        cord = gv_cord(a0, v, 5)
        cx = TwistedComplex(cord)
        w = make_jetform(CYL, 1, 5, 0,
                         SourceMap.zero(CYL, 1),
                         [{(0,): Form.function(CYL.sin("x"))}])
        assert jetforms_equal(cx.differential(w), nabla(cord, w))

    def test_uncertified_cord_rejected(self):
        rng = random.Random(3)
        curved = rand_jetform(rng, 4, 1, 2)
        cord = make_quantum_cord(curved)
        assert cord.flat_order < cord.order
        with pytest.raises(ValueError, match="flat"):
            TwistedComplex(cord)


class TestPhiTransport:
    def test_identity_section(self):
        rng = random.Random(5)
        a = flat_tangent_cord(rng, 4)
        w = rand_jetform(rng, 4, 1, 4)
        y = identity_gauge(TORUS, 1, 4)
        assert jetforms_equal(phi_transport(y, a, a, w), w)

    def test_halving_arrow(self):
        # Y = t/2: the transport reads W at t/2 and divides by Y' = 1/2
        y = make_gauge_section(TORUS, 1, 3, ZERO1, ZERO1, [{(1,): F(1, 2)}])
        a = make_jetform(TORUS, 1, 3, 1, ZERO1, [{}])
        b = gauge(y, a)
        w = make_jetform(TORUS, 1, 3, 1, ZERO1,
                         [{(1,): dcoord(TORUS, "y"),
                           (2,): dcoord(TORUS, "x")}])
        out = phi_transport(y, a, b, w)
        assert out.coefficient(0, (1,)) == dcoord(TORUS, "y")
        assert out.coefficient(0, (2,)) == dcoord(TORUS, "x") * F(1, 2)

    def test_chain_map_linear_sections_exact(self):
        # no flatness is needed: the intertwining identity is formal, and
        # a linear section keeps every transported polynomial polynomial
        rng = random.Random(99)
        for _ in range(10):
            a = rand_jetform(rng, 5, 1, 5)
            y = linear_section(rng, 5)
            b = gauge(y, a)
            w = rand_jetform(rng, 5, rng.choice((0, 1)), 5)
            lhs = nabla(b, phi_transport(y, a, b, w))
            rhs = phi_transport(y, a, b, nabla(a, w))
            assert jetforms_equal(lhs, rhs)

    def test_chain_map_general_sections_below_top(self):
        rng = random.Random(23)
        for _ in range(6):
            a = rand_jetform(rng, 5, 1, 5)
            y = general_section(rng, 5)
            b = gauge(y, a)
            w = rand_jetform(rng, 5, rng.choice((0, 1)), 5)
            lhs = nabla(b, phi_transport(y, a, b, w))
            rhs = phi_transport(y, a, b, nabla(a, w))
            assert agrees_through(lhs, rhs, 4)

    def test_roundtrip_is_identity(self):
        rng = random.Random(31)
        for _ in range(6):
            a = flat_tangent_cord(rng, 5)
            y = general_section(rng, 5)
            b = gauge(y, a)
            z = section_inverse(y)
            w = rand_jetform(rng, 5, rng.choice((0, 1)), 5)
            back = phi_transport(z, b, gauge(z, b), phi_transport(y, a, b, w))
            assert jetforms_equal(back, w)

    def test_unrelated_section_rejected(self):
        rng = random.Random(7)
        a = flat_tangent_cord(rng, 4)
        y = general_section(rng, 4)
        b = gauge(y, a)
        other = make_gauge_section(TORUS, 1, 4, ZERO1, ZERO1, [{(1,): 3}])
        w = rand_jetform(rng, 4, 0, 3)
        with pytest.raises(ValueError, match="gauge relation"):
            phi_transport(other, a, b, w)


class TestBottDifferential:
    def test_trivial_pair_on_closed_horizontal(self):
        a, v = slope_pair(0, 1)
        w = Form.build(TORUS, 1, {(0,): TORUS.cos("x")})
        assert bott_differential(a, v, w).is_zero()

    def test_function_with_no_leaf_variation(self):
        a, v = slope_pair(0, 1)
        w = Form.build(TORUS, 0, {(): TORUS.sin("x")})
        out = bott_differential(a, v, w)
        assert out.component((0,)) == TORUS.cos("x")
        assert out.component((1,)).is_zero()

    def test_non_horizontal_rejected(self):
        a, v = slope_pair(0, 1)
        with pytest.raises(ValueError, match="horizontal"):
            bott_differential(a, v, Form.build(TORUS, 1,
                                               {(1,): TORUS.const(1)}))

    def test_normalization_rejected(self):
        a, _ = slope_pair(0, 1)
        bad = VectorField.build(TORUS, {"y": TORUS.const(1)})
        with pytest.raises(ValueError, match="normalization"):
            bott_differential(a, bad, Form.build(TORUS, 0,
                                                 {(): TORUS.cos("x")}))

    def test_result_is_horizontal(self):
        rng = random.Random(11)
        a, v = slope_pair(1, 2)
        for _ in range(6):
            w = Form.build(TORUS, 0, {(): rand_field(rng)})
            out = bott_differential(a, v, w)
            assert contract(v, out).is_zero()

    def test_squares_to_zero_on_functions(self):
        # the defining pair satisfies da = L_V(a) ^ a, which is what the
        # square of the horizontal differential contracts against
        a0 = dcoord(CYL, "y") + Form.build(
            CYL, 1, {(0,): CYL.coord("y") * CYL.cos("x")})
        v = VectorField.build(CYL, {"y": CYL.const(-1)})
        assert exterior_derivative(a0) == \
            Form.build(CYL, 2, {(0, 1): -(CYL.cos("x"))})
        rng = random.Random(13)
        for _ in range(4):
            f = CYL.const(rand_fraction(rng)) + \
                CYL.cos("x") * rand_fraction(rng) + \
                CYL.coord("y") * rand_fraction(rng)
            w = Form.build(CYL, 0, {(): f})
            once = bott_differential(a0, v, w)
            assert contract(v, once).is_zero()
            assert bott_differential(a0, v, once).is_zero()

    def test_squares_to_zero_on_horizontal_one_forms(self):
        az = coordinate_differential(T3, "z")
        v = VectorField.build(T3, {"z": T3.const(-1)})
        rng = random.Random(19)
        for _ in range(4):
            w = Form.build(T3, 1, {(0,): T3.cos("x") * rand_fraction(rng),
                                   (1,): T3.sin("y") * rand_fraction(rng)})
            once = bott_differential(az, v, w)
            assert contract(v, once).is_zero()
            assert bott_differential(az, v, once).is_zero()


class TestFourierModel:
    def test_basis_size(self):
        assert len(FourierTruncation(TORUS, 0).basis()) == 1
        assert len(FourierTruncation(TORUS, 2).basis()) == 25
        assert len(FourierTruncation(T3, 1).basis()) == 27

    def test_non_torus_rejected(self):
        with pytest.raises(ValueError, match="periodic"):
            FourierTruncation(CYL, 3)

    def test_slope_kernels_match_lattice_counts(self):
        for (p, q), cutoff in (((0, 1), 4), ((1, 1), 4), ((1, 2), 4),
                               ((2, 3), 6), ((1, 2), 6), ((2, 3), 4)):
            a, v = slope_pair(p, q)
            got = h0_dimension(a, v, cutoff)
            # closed form for the number of modes k*(q, -p) in the box
            closed = 1 + 2 * (cutoff // max(abs(p), abs(q)))
            # independent count: brute-force enumeration of the kernel
            # condition m*q + n*p = 0 over the box
            brute = sum(1 for m in range(-cutoff, cutoff + 1)
                        for n in range(-cutoff, cutoff + 1)
                        if m * q + n * p == 0)
            assert got == closed == brute

    def test_cutoff_zero_keeps_constants(self):
        a, v = slope_pair(1, 2)
        assert h0_dimension(a, v, 0) == 1

    def test_quotient_coefficients_rejected(self):
        den = TORUS.const(2) + TORUS.cos("x")
        a = Form.build(TORUS, 1, {
            (0,): RationalField.ratio(TORUS.const(1), den),
            (1,): TORUS.const(1)})
        v = VectorField.build(TORUS, {"y": TORUS.const(-1)})
        with pytest.raises(ValueError, match="harmonic model"):
            h0_dimension(a, v, 2)

    def test_profile_diagnostics_for_slope_data(self):
        # recorded behaviour of the truncated matrices; no convergence
        # claim is attached to the higher degrees
        a, v = slope_pair(1, 2)
        profile = bott_cohomology_profile(a, v, 3)
        assert [row["degree"] for row in profile] == [0, 1, 2]
        dim0, rank0 = profile[0]["dimension"], profile[0]["rank"]
        assert dim0 == 49 and dim0 - rank0 == 3
        # the horizontal differential vanishes on truncated horizontal
        # 1-forms for constant slope data
        assert profile[1]["dimension"] == 49 and profile[1]["rank"] == 0
        # no nonzero horizontal top forms: the top diagnostic is zero
        assert profile[2]["dimension"] == 0


class TestInvariantIntegral:
    def reference_cord(self, a1, order=3):
        src = SourceMap.zero(T3, 1)
        return make_jetform(T3, 1, order, 1, src, [{(1,): a1}])

    def test_hand_computed_value(self):
        a1 = Form.build(T3, 1, {(0,): T3.cos("z"), (1,): T3.sin("z")})
        out = gv_integral(self.reference_cord(a1))
        assert out == TwoPiMultiple(F(-1), 3)

    def test_zero_and_closed_linear_coefficients(self):
        assert gv_integral(self.reference_cord(Form.zero(T3, 1))).rational \
            == 0
        closed = Form.build(T3, 1, {(0,): T3.const(F(3, 2)),
                                    (1,): T3.const(-1)})
        assert gv_integral(self.reference_cord(closed)).rational == 0

    def test_exact_correction_invariance(self):
        rng = random.Random(7)
        a1 = Form.build(T3, 1, {(0,): T3.cos("z"), (1,): T3.sin("z")})
        base = gv_integral(self.reference_cord(a1))
        for _ in range(20):
            f = T3.const(rand_fraction(rng))
            for name in ("x", "y", "z"):
                if rng.random() < 0.6:
                    f = f + T3.harmonic("cos", {name: rng.randint(1, 2)}) \
                        * rand_fraction(rng)
                if rng.random() < 0.4:
                    f = f + T3.harmonic("sin", {name: 1}) \
                        * rand_fraction(rng)
            shifted = a1 + exterior_derivative(Form.build(T3, 0, {(): f}))
            assert gv_integral(self.reference_cord(shifted)) == base

    def test_wrong_chart_rejected(self):
        a1 = Form.build(TORUS, 1, {(0,): TORUS.cos("y")})
        bad = make_jetform(TORUS, 1, 2, 1, ZERO1, [{(1,): a1}])
        with pytest.raises(ValueError, match="3-chart"):
            gv_integral(bad)
