"""Jet-valued differential forms and the gauge calculus of quantum cords.

A jet-valued p-form assigns to each fiber multi-index a p-form on the base
chart; the fiber variables are expanded around a source map s: M -> R^k.
Degree-1 forms whose curvature dA + (1/2)[A,A] vanishes are quantum cords.
Gauge sections (x-dependent groupoid arrows) act by
Y * A = (A o Y - dY) (Y')^{-1}.

Everything here is symbolic: coefficients live in the trig-polynomial ring
of chart_calculus, promoted to quotients only where an inverse demands it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .chart_calculus import (
    Chart,
    ChartMap,
    Form,
    RationalField,
    ScalarField,
    VectorField,
    contract,
    exterior_derivative,
    lie_derivative,
    pullback_field,
    pullback_form,
    sampled_minimum,
    wedge,
)
from .jet_groupoid import graded_indices, mi_degree

# ---------------------------------------------------------------------------
# source maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SourceMap:
    """k scalar fields giving the fiber basepoint over each chart point."""

    chart: Chart
    fields: tuple

    @staticmethod
    def zero(chart: Chart, k: int) -> "SourceMap":
        return SourceMap(chart, tuple(chart.zero() for _ in range(k)))

    @property
    def k(self) -> int:
        return len(self.fields)

    def is_zero(self) -> bool:
        return all(f.is_zero() for f in self.fields)

    def differentials(self) -> list:
        return [exterior_derivative(Form.function(f)) for f in self.fields]


# ---------------------------------------------------------------------------
# jet-valued forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JetForm:
    """Degree-p form with values in truncated k-jets based at source.

    comps[i] is a sorted tuple of (multi-index, Form) pairs for fiber
    component i; zero forms are never stored.
    """

    chart: Chart
    k: int
    order: int
    degree: int
    source: SourceMap
    comps: tuple

    def coefficient(self, i: int, index) -> Form:
        index = tuple(index)
        for idx, form in self.comps[i]:
            if idx == index:
                return form
        return Form.zero(self.chart, self.degree)

    def is_zero(self) -> bool:
        return all(not c for c in self.comps)


def make_jetform(chart, k, order, degree, source, comps) -> JetForm:
    """comps: list (length k) of {multi-index: Form} mappings."""
    if source.chart != chart or source.k != k:
        raise ValueError("source map does not match chart/codimension")
    indices = set(graded_indices(k, order))
    frozen = []
    for i in range(k):
        items = []
        for idx, form in comps[i].items():
            idx = tuple(idx)
            if idx not in indices:
                raise ValueError(f"fiber index {idx} out of range")
            if form.chart != chart or form.degree != degree:
                raise ValueError("coefficient form chart/degree mismatch")
            if not form.is_zero():
                items.append((idx, form))
        items.sort(key=lambda p: (mi_degree(p[0]), p[0]))
        frozen.append(tuple(items))
    return JetForm(chart, k, order, degree, source, tuple(frozen))


def jetform_zero(chart, k, order, degree, source=None) -> JetForm:
    source = source or SourceMap.zero(chart, k)
    return make_jetform(chart, k, order, degree, source,
                        [{} for _ in range(k)])


def cord_coefficients(chart, order, forms, source=None):
    """Convenience for k=1: forms[m] is the t^m coefficient."""
    comps = {(m,): f for m, f in enumerate(forms)}
    src = source if source is not None else SourceMap.zero(chart, 1)
    if isinstance(src, ScalarField):
        src = SourceMap(chart, (src,))
    degree = next((f.degree for f in forms if not f.is_zero()), 1)
    return make_jetform(chart, 1, order, degree, src, [comps])


def jetforms_equal(a: JetForm, b: JetForm) -> bool:
    """Semantic equality, ignoring any flatness certificate."""
    return (a.chart, a.k, a.order, a.degree) == \
        (b.chart, b.k, b.order, b.degree) and \
        a.source == b.source and a.comps == b.comps


def _merge(acc: dict, idx, form):
    if idx in acc:
        acc[idx] = acc[idx] + form
    else:
        acc[idx] = form


def jf_add(a: JetForm, b: JetForm) -> JetForm:
    if not jetforms_compatible(a, b) or a.degree != b.degree:
        raise ValueError("jet form mismatch in addition")
    comps = []
    for i in range(a.k):
        acc = dict(a.comps[i])
        for idx, form in b.comps[i]:
            _merge(acc, idx, form)
        comps.append(acc)
    return make_jetform(a.chart, a.k, a.order, a.degree, a.source, comps)


def jf_scale(a: JetForm, c) -> JetForm:
    comps = [{idx: form * c for idx, form in comp} for comp in a.comps]
    return make_jetform(a.chart, a.k, a.order, a.degree, a.source, comps)


def jf_sub(a: JetForm, b: JetForm) -> JetForm:
    return jf_add(a, jf_scale(b, -1))


def jetforms_compatible(a: JetForm, b: JetForm) -> bool:
    return (a.chart, a.k, a.order) == (b.chart, b.k, b.order) and \
        a.source == b.source


def jetform_map(a: JetForm, fn) -> JetForm:
    """Apply fn to every coefficient form (degree preserved)."""
    comps = [{idx: fn(form) for idx, form in comp} for comp in a.comps]
    return make_jetform(a.chart, a.k, a.order, a.degree, a.source, comps)


def jetform_d(a: JetForm) -> JetForm:
    """Exterior derivative, expanding d[(t-s)^I] against the source.

    Coefficient at I picks up da_I plus (-1)^(p+1) (I_j+1) a_{I+e_j} ^ ds_j;
    the correction at |I| = N is beyond the truncation and is dropped.
    """
    ds = a.source.differentials()
    sign = 1 if (a.degree + 1) % 2 == 0 else -1
    comps = []
    for i in range(a.k):
        table = dict(a.comps[i])
        acc: dict = {}
        for idx in graded_indices(a.k, a.order):
            total = Form.zero(a.chart, a.degree + 1)
            if idx in table:
                total = total + exterior_derivative(table[idx])
            if mi_degree(idx) < a.order:
                for j in range(a.k):
                    if ds[j].is_zero():
                        continue
                    up = list(idx)
                    up[j] += 1
                    up = tuple(up)
                    if up in table:
                        corr = wedge(table[up], ds[j]) * ((idx[j] + 1) * sign)
                        total = total + corr
            if not total.is_zero():
                acc[idx] = total
        comps.append(acc)
    return make_jetform(a.chart, a.k, a.order, a.degree + 1, a.source, comps)


def _fiber_partial(comp: dict, j: int) -> dict:
    out = {}
    for idx, form in comp.items():
        if idx[j]:
            down = list(idx)
            down[j] -= 1
            out[tuple(down)] = form * idx[j]
    return out


def _convolve_forms(xs: dict, ys: dict, order: int) -> dict:
    out: dict = {}
    for i, fx in xs.items():
        di = mi_degree(i)
        for j, fy in ys.items():
            if di + mi_degree(j) > order:
                continue
            key = tuple(a + b for a, b in zip(i, j))
            _merge(out, key, wedge(fx, fy))
    return out


def bracket(a: JetForm, b: JetForm) -> JetForm:
    """Graded bracket [A,B]_j = sum_i A_i ^ d_iB_j - (-1)^{pq} B_i ^ d_iA_j.

    Defined only when the source maps agree exactly.
    """
    if (a.chart, a.k, a.order) != (b.chart, b.k, b.order):
        raise ValueError("bracket operands live in different jet spaces")
    if a.source != b.source:
        raise ValueError("bracket requires equal source maps")
    sign = -1 if (a.degree * b.degree) % 2 else 1
    comps = []
    for j in range(a.k):
        acc: dict = {}
        for i in range(a.k):
            da = dict(a.comps[i])
            db = _fiber_partial(dict(b.comps[j]), i)
            for idx, form in _convolve_forms(da, db, a.order).items():
                _merge(acc, idx, form)
            ea = _fiber_partial(dict(a.comps[j]), i)
            eb = dict(b.comps[i])
            for idx, form in _convolve_forms(eb, ea, a.order).items():
                _merge(acc, idx, form * (-sign))
        comps.append(acc)
    return make_jetform(a.chart, a.k, a.order, a.degree + b.degree,
                        a.source, comps)


def curvature(a: JetForm) -> JetForm:
    """F_A = dA + (1/2)[A,A]."""
    if a.degree != 1:
        raise ValueError("curvature is defined for degree-1 jet forms")
    return jf_add(jetform_d(a), jf_scale(bracket(a, a), Fraction(1, 2)))


def flatness_order(a: JetForm) -> int:
    """Largest order through which the curvature vanishes (-1: fails at 0)."""
    f = curvature(a)
    failing = [mi_degree(idx) for comp in f.comps for idx, _ in comp]
    return a.order if not failing else min(failing) - 1


def curvature_recursion_residual(a: JetForm, factor: Fraction) -> JetForm:
    """Residual of the coefficient recursion
    da_m + (m+1) a_{m+1} ^ ds - factor * sum_{p+q=m+1} (p-q) a_p ^ a_q
    for k=1.  factor 1/2 reproduces the curvature; factor 1 is the
    double-counting variant, kept for cross-reporting.
    """
    if a.k != 1 or a.degree != 1:
        raise ValueError("coefficient recursion applies to k=1 cords")
    table = dict(a.comps[0])
    ds = a.source.differentials()[0]
    acc = {}
    for m in range(a.order):
        total = Form.zero(a.chart, 2)
        if (m,) in table:
            total = total + exterior_derivative(table[(m,)])
        if (m + 1,) in table and not ds.is_zero():
            total = total + wedge(table[(m + 1,)], ds) * (m + 1)
        for p in range(m + 2):
            q = m + 1 - p
            if (p,) in table and (q,) in table:
                total = total - wedge(table[(p,)], table[(q,)]) * \
                    (factor * (p - q))
        if not total.is_zero():
            acc[(m,)] = total
    return make_jetform(a.chart, 1, a.order, 2, a.source, [acc])


# ---------------------------------------------------------------------------
# quantum cords
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuantumCord(JetForm):
    """Degree-1 jet form carrying a flatness certificate.

    flat_order is the order through which the curvature was verified to
    vanish; a genuine cord has flat_order == order.
    """

    flat_order: int = -1

    def is_flat(self) -> bool:
        return self.flat_order >= self.order


def make_quantum_cord(a: JetForm) -> QuantumCord:
    if a.degree != 1:
        raise ValueError("a quantum cord is a degree-1 jet form")
    cert = flatness_order(a)
    return QuantumCord(a.chart, a.k, a.order, 1, a.source, a.comps, cert)


def is_impotent(a: JetForm) -> bool:
    """Source identically zero and every |I|=0 coefficient zero."""
    if not a.source.is_zero():
        return False
    zero_idx = (0,) * a.k
    return all(a.coefficient(i, zero_idx).is_zero() for i in range(a.k))


def pullback_cord(a: JetForm, m: ChartMap) -> JetForm:
    src = SourceMap(m.domain,
                    tuple(pullback_field(f, m) for f in a.source.fields))
    comps = [{idx: pullback_form(form, m) for idx, form in comp}
             for comp in a.comps]
    out = make_jetform(m.domain, a.k, a.order, a.degree, src, comps)
    if isinstance(a, QuantumCord):
        return make_quantum_cord(out)
    return out


# ---------------------------------------------------------------------------
# positivity bookkeeping for linear parts
# ---------------------------------------------------------------------------


def field_positivity(f):
    """(is_positive, certificate) for a coefficient field."""
    if isinstance(f, RationalField):
        g = f.num * f.den  # same sign as f, denominator squared away
    else:
        g = f
    c = g.constant_value()
    if c is not None:
        return c > 0, "constant"
    return sampled_minimum(g) > 0, "sampled"


def form_nowhere_zero_sampled(a: Form, samples: int = 24) -> bool:
    """Grid check that some component of a stays away from zero jointly."""
    chart = a.chart
    axes = []
    for i in range(chart.dim):
        if chart.periodic[i]:
            axes.append([2 * math.pi * j / samples for j in range(samples)])
        else:
            axes.append([-2.0 + 4.0 * j / (samples - 1)
                         for j in range(samples)])
    worst = math.inf
    point = {}

    def rec(i):
        nonlocal worst
        if i == chart.dim:
            mag = max((abs(f.evaluate(point)) for _, f in a.components),
                      default=0.0)
            worst = min(worst, mag)
            return
        for v in axes[i]:
            point[chart.names[i]] = v
            rec(i + 1)

    rec(0)
    return worst > 1e-9


def field_reciprocal(f, chart: Chart):
    if isinstance(f, RationalField):
        return as_ratio_one(chart) / f
    c = f.constant_value()
    if c is not None:
        if c == 0:
            raise ZeroDivisionError("reciprocal of zero field")
        return chart.const(Fraction(1) / c)
    return RationalField.ratio(chart.const(1), f)


def as_ratio_one(chart: Chart) -> RationalField:
    return RationalField.from_field(chart.const(1))


# ---------------------------------------------------------------------------
# scalar field-jets (internal): sparse {multi-index: field} dictionaries
# ---------------------------------------------------------------------------


def _fj_clean(d: dict) -> dict:
    return {i: v for i, v in d.items() if not v.is_zero()}


def _fj_add(a: dict, b: dict) -> dict:
    out = dict(a)
    for i, v in b.items():
        out[i] = out[i] + v if i in out else v
    return _fj_clean(out)


def _fj_scale(a: dict, c) -> dict:
    return _fj_clean({i: v * c for i, v in a.items()})


def _fj_mul(a: dict, b: dict, order: int) -> dict:
    out: dict = {}
    for i, va in a.items():
        di = mi_degree(i)
        for j, vb in b.items():
            if di + mi_degree(j) > order:
                continue
            key = tuple(x + y for x, y in zip(i, j))
            term = va * vb
            if key in out:
                out[key] = out[key] + term
            else:
                out[key] = term
    return _fj_clean(out)


def _jet_substitute(outer: dict, devs: list, order: int, k: int, chart):
    """Substitute zero-constant deviations into a jet with arbitrary values.

    outer maps multi-indices to anything that supports v * field; devs are
    k field-jets with no constant term.  Returns the same value kind.
    """
    powers = {(0,) * k: {(0,) * k: chart.const(1)}}
    for idx in graded_indices(k, order):
        if mi_degree(idx) == 0 or idx in powers:
            continue
        j = next(i for i, e in enumerate(idx) if e)
        down = list(idx)
        down[j] -= 1
        powers[idx] = _fj_mul(powers[tuple(down)], devs[j], order)
    out: dict = {}
    for I, value in outer.items():
        for K, fld in powers[I].items():
            term = value * fld
            if K in out:
                out[K] = out[K] + term
            else:
                out[K] = term
    return out


def _fieldjet_reciprocal(x: dict, order: int, k: int, chart) -> dict:
    zero = (0,) * k
    c0 = x.get(zero, chart.zero())
    inv0 = field_reciprocal(c0, chart)
    rest = {i: v for i, v in x.items() if i != zero}
    r = {zero: inv0}
    for _ in range(order):
        t = _fj_mul(rest, r, order)
        r = _fj_add({zero: inv0}, _fj_scale(t, -1 * inv0))
    return r


def _field_matrix_inverse(c: list, chart: Chart) -> list:
    """Exact inverse of a small matrix of fields via adjugate/determinant."""
    n = len(c)
    if n == 1:
        return [[field_reciprocal(c[0][0], chart)]]

    def minor(mat, i, j):
        return [[mat[r][s] for s in range(len(mat)) if s != j]
                for r in range(len(mat)) if r != i]

    def det(mat):
        if len(mat) == 1:
            return mat[0][0]
        total = None
        for j in range(len(mat)):
            term = mat[0][j] * det(minor(mat, 0, j))
            if j % 2:
                term = term * (-1)
            total = term if total is None else total + term
        return total

    d = det(c)
    dinv = field_reciprocal(d, chart)
    out = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            cof = det(minor(c, j, i))
            if (i + j) % 2:
                cof = cof * (-1)
            out[i][j] = cof * dinv
    return out


def _fieldjet_matrix_inverse(m: list, order: int, k: int, chart) -> list:
    n = len(m)
    zero = (0,) * k
    if n == 1:
        return [[_fieldjet_reciprocal(m[0][0], order, k, chart)]]
    c = [[m[i][j].get(zero, chart.zero()) for j in range(n)] for i in range(n)]
    cinv = _field_matrix_inverse(c, chart)
    s = [[{zero: cinv[i][j]} if not cinv[i][j].is_zero() else {}
          for j in range(n)] for i in range(n)]
    r = [[{idx: v for idx, v in m[i][j].items() if idx != zero}
          for j in range(n)] for i in range(n)]

    def mat_mul(a, b):
        out = []
        for i in range(n):
            row = []
            for j in range(n):
                acc: dict = {}
                for l in range(n):
                    for idx, v in _fj_mul(a[i][l], b[l][j], order).items():
                        acc[idx] = acc[idx] + v if idx in acc else v
                row.append(_fj_clean(acc))
            out.append(row)
        return out

    t = s
    for _ in range(order):
        rt = mat_mul(r, t)
        srt = mat_mul(s, rt)
        t = [[_fj_add(s[i][j], _fj_scale(srt[i][j], -1))
              for j in range(n)] for i in range(n)]
    return t


# ---------------------------------------------------------------------------
# gauge sections
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaugeSection:
    """x-dependent family of groupoid arrows source -> target.

    comps[i] holds the |J| >= 1 coefficients of component i; the |J| = 0
    part is the target.  positivity records how det > 0 of the linear part
    was established ("constant", "sampled", or a composite of these).
    """

    chart: Chart
    k: int
    order: int
    source: SourceMap
    target: SourceMap
    comps: tuple
    positivity: str

    def coefficient(self, i: int, index):
        index = tuple(index)
        for idx, f in self.comps[i]:
            if idx == index:
                return f
        return self.chart.zero()

    def linear_matrix(self) -> list:
        out = []
        for i in range(self.k):
            row = []
            for j in range(self.k):
                e = tuple(1 if m == j else 0 for m in range(self.k))
                row.append(self.coefficient(i, e))
            out.append(row)
        return out

    def is_identity(self) -> bool:
        if self.source != self.target:
            return False
        for i in range(self.k):
            e = tuple(1 if m == i else 0 for m in range(self.k))
            for idx, f in self.comps[i]:
                if idx == e:
                    if f != self.chart.const(1):
                        return False
                elif not f.is_zero():
                    return False
        return True


def make_gauge_section(chart, k, order, source, target, coeffs,
                       positivity=None) -> GaugeSection:
    """coeffs: list (length k) of {multi-index: field-or-number}, |J| >= 1.

    Indices above `order` are legal: composites keep their full polynomial
    degree, and consumers truncate on use.
    """
    frozen = []
    for i in range(k):
        items = []
        for idx, f in coeffs[i].items():
            idx = tuple(idx)
            if (len(idx) != k or any(e < 0 or not isinstance(e, int)
                                     for e in idx) or mi_degree(idx) == 0):
                raise ValueError(f"gauge coefficient index {idx} invalid")
            if isinstance(f, (int, Fraction)):
                f = chart.const(f)
            if not f.is_zero():
                items.append((idx, f))
        items.sort(key=lambda p: (mi_degree(p[0]), p[0]))
        frozen.append(tuple(items))
    section = GaugeSection(chart, k, order, source, target, tuple(frozen),
                           positivity or "unchecked")
    if positivity is None:
        det = _linear_det(section.linear_matrix(), chart)
        ok, cert = field_positivity(det)
        if not ok:
            raise ValueError("gauge linear part is not positive "
                             f"({cert} check failed)")
        section = GaugeSection(chart, k, order, source, target,
                               tuple(frozen), cert)
    return section


def _linear_det(mat, chart):
    n = len(mat)
    if n == 1:
        return mat[0][0]
    if n == 2:
        return mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0]
    total = None
    for j in range(n):
        sub = [[mat[r][s] for s in range(n) if s != j] for r in range(1, n)]
        term = mat[0][j] * _linear_det(sub, chart)
        if j % 2:
            term = term * (-1)
        total = term if total is None else total + term
    return total


def identity_gauge(chart, k, order, at: SourceMap = None) -> GaugeSection:
    at = at or SourceMap.zero(chart, k)
    coeffs = []
    for i in range(k):
        e = tuple(1 if m == i else 0 for m in range(k))
        coeffs.append({e: chart.const(1)})
    return make_gauge_section(chart, k, order, at, at, coeffs)


def _support_degree(comps) -> int:
    return max((mi_degree(idx) for comp in comps for idx, _ in comp),
               default=0)


def compose_sections(inner: GaugeSection, outer: GaugeSection) -> GaugeSection:
    """Pointwise arrow composition, inner applied first."""
    if (inner.chart, inner.k, inner.order) != \
            (outer.chart, outer.k, outer.order):
        raise ValueError("gauge section mismatch")
    if inner.target != outer.source:
        raise ValueError("cannot compose: inner target != outer source")
    devs = [dict(inner.comps[i]) for i in range(inner.k)]
    # Keep the full polynomial degree: truncating the composite would corrupt
    # the top coefficient of its gauge action (the Jacobian inverse at index
    # n reads the composite's coefficient at n + 1).
    full = _support_degree(outer.comps) * max(1, _support_degree(inner.comps))
    coeffs = []
    for i in range(inner.k):
        out = _jet_substitute(dict(outer.comps[i]), devs,
                              full, inner.k, inner.chart)
        coeffs.append(_fj_clean(out))
    rank = {"constant": 0, "certified": 1, "sampled": 2, "unchecked": 3}
    pos = max(inner.positivity, outer.positivity, key=lambda p: rank[p])
    return make_gauge_section(inner.chart, inner.k, inner.order,
                              inner.source, outer.target, coeffs,
                              positivity=pos)


def section_inverse(y: GaugeSection) -> GaugeSection:
    """Pointwise arrow inverse Z with Z(Y(t)) = t, for k = 1.

    Coefficients are solved through order + 1 so that compositions and
    transports against the inverse stay exact at every stored index.
    """
    if y.k != 1:
        raise ValueError("section inversion is implemented for"
                         " codimension 1")
    w = dict(y.comps[0])
    top = y.order + 1
    r1 = field_reciprocal(y.coefficient(0, (1,)), y.chart)
    powers = {1: w}
    for n in range(2, top + 1):
        powers[n] = _fj_mul(powers[n - 1], w, top)
    z = {(1,): r1}
    recip_pow = r1
    for j in range(2, top + 1):
        recip_pow = recip_pow * r1
        acc = None
        for n in range(1, j):
            part = powers[n].get((j,))
            zn = z.get((n,))
            if part is None or part.is_zero() or zn is None:
                continue
            term = zn * part
            acc = term if acc is None else acc + term
        if acc is None:
            continue
        zj = (-acc) * recip_pow
        if not zj.is_zero():
            z[(j,)] = zj
    return make_gauge_section(y.chart, 1, y.order, y.target, y.source,
                              [z], positivity=y.positivity)


def _section_differential(y: GaugeSection) -> list:
    """dY as coefficient dictionaries of 1-forms, |J| = 0 included."""
    ds = y.source.differentials()
    out = []
    for i in range(y.k):
        table = dict(y.comps[i])
        table[(0,) * y.k] = y.target.fields[i]
        acc = {}
        for idx, fld in table.items():
            d_part = exterior_derivative(Form.function(fld))
            for j in range(y.k):
                if ds[j].is_zero():
                    continue
                up = list(idx)
                up[j] += 1
                up = tuple(up)
                if up in table:
                    d_part = d_part - ds[j] * (table[up] * (idx[j] + 1))
            if not d_part.is_zero():
                acc[idx] = d_part
        out.append(acc)
    return out


def _inverse_jacobian(y: GaugeSection) -> list:
    jacobian = []
    for i in range(y.k):
        row = []
        table = dict(y.comps[i])
        for j in range(y.k):
            entry: dict = {}
            for idx, fld in table.items():
                if idx[j]:
                    down = list(idx)
                    down[j] -= 1
                    entry[tuple(down)] = fld * idx[j]
            row.append(_fj_clean(entry))
        jacobian.append(row)
    return _fieldjet_matrix_inverse(jacobian, y.order, y.k, y.chart)


def _right_multiply(parts: list, inverse: list, order: int, k: int) -> list:
    """Component j of the result is sum_m ((Y')^{-1})_{jm} parts_m: the
    fiber pushforward along Y^{-1}, which is what makes the action compose."""
    comps = []
    for j in range(k):
        acc: dict = {}
        for m in range(k):
            for I, form in parts[m].items():
                dI = mi_degree(I)
                for J, fld in inverse[j][m].items():
                    if dI + mi_degree(J) > order:
                        continue
                    key = tuple(x + z for x, z in zip(I, J))
                    _merge(acc, key, form * fld)
        comps.append(acc)
    return comps


def gauge(y: GaugeSection, a: JetForm):
    """Y * A = (A o Y - dY) (Y')^{-1}; the result is based at Y's source.

    Requires Y's target to equal A's source exactly.  Returns the same kind
    as the input (cords stay cords, with a freshly computed certificate).
    """
    if (y.chart, y.k, y.order) != (a.chart, a.k, a.order):
        raise ValueError("gauge section and jet form mismatch")
    if y.target != a.source:
        raise ValueError("gauge target differs from the form's source")
    if a.degree != 1:
        raise ValueError("the gauge action is defined on degree-1 jet forms")
    chart, k, order = a.chart, a.k, a.order

    devs = [dict(y.comps[i]) for i in range(k)]
    composed = [_jet_substitute(dict(a.comps[j]), devs, order, k, chart)
                for j in range(k)]
    dy = _section_differential(y)
    numerator = []
    for i in range(k):
        acc = dict(composed[i])
        for idx, form in dy[i].items():
            if idx in acc:
                acc[idx] = acc[idx] - form
            else:
                acc[idx] = -form
        numerator.append({idx: f for idx, f in acc.items()
                          if not f.is_zero()})

    comps = _right_multiply(numerator, _inverse_jacobian(y), order, k)
    out = make_jetform(chart, k, order, 1, y.source, comps)
    if isinstance(a, QuantumCord):
        return make_quantum_cord(out)
    return out


def jet_transport(y: GaugeSection, w: JetForm) -> JetForm:
    """(W o Y)(Y')^{-1}: moves jet forms of any degree along a gauge section.

    This is the degree-preserving companion of the gauge action: curvatures
    transform this way, and it is the chain map between twisted complexes.
    """
    if (y.chart, y.k, y.order) != (w.chart, w.k, w.order):
        raise ValueError("gauge section and jet form mismatch")
    if y.target != w.source:
        raise ValueError("transport target differs from the form's source")
    chart, k, order = w.chart, w.k, w.order
    devs = [dict(y.comps[i]) for i in range(k)]
    composed = [_jet_substitute(dict(w.comps[j]), devs, order, k, chart)
                for j in range(k)]
    comps = _right_multiply(composed, _inverse_jacobian(y), order, k)
    return make_jetform(chart, k, order, w.degree, y.source, comps)


# ---------------------------------------------------------------------------
# GV and MC constructions
# ---------------------------------------------------------------------------


def _certified_k1_cord(chart, order, coeffs) -> QuantumCord:
    """Cord from k=1 coefficients supplied through order+1.

    The top curvature coefficient depends on a_{order+1}, so the extra
    coefficient lets flatness through the stored order be checked honestly
    before it is discarded.
    """
    zero = SourceMap.zero(chart, 1)
    ext = make_jetform(chart, 1, order + 1, 1, zero,
                       [{(m,): f for m, f in enumerate(coeffs)}])
    cert = min(flatness_order(ext), order)
    jf = make_jetform(chart, 1, order, 1, zero,
                      [{idx: f for idx, f in ext.comps[0]
                        if mi_degree(idx) <= order}])
    return QuantumCord(chart, 1, order, 1, zero, jf.comps, cert)


def gv_cord(a0: Form, v: VectorField, order: int) -> QuantumCord:
    """Exponential cord a_n = L_V^n(a0)/n! for a defining pair (a0, V)."""
    if a0.degree != 1:
        raise ValueError("the defining form must have degree 1")
    minus_one = Form.function(a0.chart.const(-1))
    if contract(v, a0) != minus_one:
        raise ValueError("normalization failed: iota_V(a0) != -1")
    coeffs = [a0]
    for n in range(order + 1):
        coeffs.append(lie_derivative(v, coeffs[n]) * Fraction(1, n + 1))
    return _certified_k1_cord(a0.chart, order, coeffs)


def jet_contraction(v: VectorField, a: JetForm) -> dict:
    """iota_V applied to each coefficient of a k=1 degree-1 form: a field-jet."""
    out = {}
    for idx, form in a.comps[0]:
        f = contract(v, form).component(())
        if not f.is_zero():
            out[idx] = f
    return out


def degree0_fields(x: JetForm) -> dict:
    """Coefficients of a degree-0 k=1 jet form as a field-jet dict."""
    if x.degree != 0 or x.k != 1:
        raise ValueError("expected a degree-0 jet form with k=1")
    return {idx: form.component(()) for idx, form in x.comps[0]}


def mc_cord(a0: Form, v: VectorField, x: JetForm, order: int) -> QuantumCord:
    """Cord solving L_V(B) + [B, X] + dX = 0 with b_0 = x_0 a0.

    Each order is divided by the invertible jet built from x_0, which must
    be strictly negative (constant sign or sampled).
    """
    minus_one = Form.function(a0.chart.const(-1))
    if contract(v, a0) != minus_one:
        raise ValueError("normalization failed: iota_V(a0) != -1")
    chart = a0.chart
    xf = degree0_fields(x)
    x0 = xf.get((0,), chart.zero())
    ok, _ = field_positivity(-1 * x0)
    if not ok:
        raise ValueError("x_0 must be strictly negative")

    b = [a0 * x0]
    for n in range(order + 1):
        total = lie_derivative(v, b[n]) + exterior_derivative(
            Form.function(xf.get((n,), chart.zero())))
        for i in range(n + 1):
            j = n + 1 - i
            xj = xf.get((j,))
            if xj is None or xj.is_zero():
                continue
            total = total + b[i] * (xj * (j - i))
        recip = field_reciprocal(x0 * (n + 1), chart)
        b.append(total * recip)
    return _certified_k1_cord(chart, order, b)


# ---------------------------------------------------------------------------
# fiber transitivity and stabilizer solvers (k = 1)
# ---------------------------------------------------------------------------


def _check_k1_normalized(a: JetForm, v: VectorField) -> dict:
    if a.k != 1:
        raise ValueError("solvers are implemented for codimension 1")
    c = jet_contraction(v, a)
    c0 = c.get((0,), a.chart.zero())
    if c0 != a.chart.const(-1):
        raise ValueError("normalization failed: iota_V(a_0) != -1")
    return c


def fiber_solve(a: QuantumCord, v: VectorField, x: JetForm) -> GaugeSection:
    """Gauge section Y with iota_V(Y * A) = X, solved order by order.

    The order-0 relation forces y_1 = -1/x_0 > 0; each further order is
    linear in the next unknown coefficient.  The index-N relation pins
    y_{N+1}, which the section keeps so its gauge action satisfies the
    defining equation at every stored index.
    """
    c = _check_k1_normalized(a, v)
    chart, order = a.chart, a.order
    xf = degree0_fields(x)
    x0 = xf.get((0,), chart.zero())
    ok, _ = field_positivity(-1 * x0)
    if not ok:
        raise ValueError("x_0 must be strictly negative")

    y = {(1,): field_reciprocal(-1 * x0, chart)}
    for n in range(1, order + 1):
        comp = _jet_substitute(c, [y], order, 1, chart)
        total = comp.get((n,), chart.zero()) - lie_derivative(
            v, y.get((n,), chart.zero()))
        for j in range(1, n + 1):
            i = n + 1 - j
            xi = xf.get((i,))
            yj = y.get((j,))
            if xi is None or yj is None:
                continue
            total = total - (xi * yj) * j
        recip = field_reciprocal(x0 * (n + 1), chart)
        y[(n + 1,)] = total * recip
    zero = SourceMap.zero(chart, 1)
    return make_gauge_section(chart, 1, order, zero, zero, [_fj_clean(y)])


def stabilizer_solve(a: QuantumCord, v: VectorField) -> GaugeSection:
    """The unique gauge section fixing A; the recursion pins it to the
    identity, which the caller can assert via is_identity()."""
    if is_impotent(a):
        raise ValueError("impotent cords have non-trivial stabilizers")
    if not form_nowhere_zero_sampled(a.coefficient(0, (0,))):
        raise ValueError("zeroth coefficient vanishes somewhere (sampled)")
    c = _check_k1_normalized(a, v)
    chart, order = a.chart, a.order
    y = {(1,): chart.const(1)}
    for n in range(1, order + 1):
        comp = _jet_substitute(c, [y], order, 1, chart)
        total = comp.get((n,), chart.zero()) - lie_derivative(
            v, y.get((n,), chart.zero()))
        for i in range(1, n + 1):
            j = n + 1 - i
            yi = y.get((i,))
            cj = c.get((j,))
            if yi is None or cj is None:
                continue
            total = total - (yi * cj) * i
        y[(n + 1,)] = total * Fraction(-1, n + 1)
    zero = SourceMap.zero(chart, 1)
    return make_gauge_section(chart, 1, order, zero, zero, [_fj_clean(y)])


# ---------------------------------------------------------------------------
# concordance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Concord:
    """Flat cord on chart x [0,1] interpolating two gauge-equivalent cords."""

    cord: QuantumCord
    base_chart: Chart
    s_name: str

    def restrict(self, value) -> QuantumCord:
        incl = _slice_inclusion(self.base_chart, self.cord.chart,
                                self.s_name, value)
        return pullback_cord(self.cord, incl)

    def split(self):
        """(A_s, B_s) with the full cord equal to A_s + B_s ds."""
        ext = self.cord.chart
        s_idx = ext.index(self.s_name)
        a_comps = []
        b_comps = []
        for comp in self.cord.comps:
            a_acc, b_acc = {}, {}
            for idx, form in comp:
                tangent = {key: f for key, f in form.components
                           if s_idx not in key}
                normal = form.component((s_idx,))
                if tangent:
                    a_acc[idx] = Form.build(ext, 1, tangent)
                if not normal.is_zero():
                    b_acc[idx] = Form.function(normal)
            a_comps.append(a_acc)
            b_comps.append(b_acc)
        a_s = make_jetform(ext, self.cord.k, self.cord.order, 1,
                           self.cord.source, a_comps)
        b_s = make_jetform(ext, self.cord.k, self.cord.order, 0,
                           self.cord.source, b_comps)
        return a_s, b_s

    def split_residual(self) -> JetForm:
        """d/ds A_s - (d_M B_s + [A_s, B_s]); zero for a genuine concordance."""
        a_s, b_s = self.split()
        ext = self.cord.chart
        s_idx = ext.index(self.s_name)
        dds = jetform_map(a_s, lambda f: f.map_components(
            lambda fld: fld.partial(self.s_name)))
        db = jetform_d(b_s)
        db_tangent = jetform_map(db, lambda f: Form.build(
            ext, 1, {key: fld for key, fld in f.components
                     if s_idx not in key}))
        nabla = jf_add(db_tangent, bracket(a_s, b_s))
        return jf_sub(dds, nabla)


def _slice_inclusion(base: Chart, ext: Chart, s_name: str, value) -> ChartMap:
    assignments = {}
    for i, name in enumerate(ext.names):
        if name == s_name:
            assignments[name] = Fraction(value)
        elif ext.periodic[i]:
            assignments[name] = {name: 1}
        else:
            assignments[name] = base.coord(name)
    return ChartMap.build(base, ext, assignments)


def _extension_projection(base: Chart, ext: Chart) -> ChartMap:
    assignments = {}
    for i, name in enumerate(base.names):
        if base.periodic[i]:
            assignments[name] = {name: 1}
        else:
            assignments[name] = ext.coord(name)
    return ChartMap.build(ext, base, assignments)


def smoothstep(chart: Chart, name: str) -> ScalarField:
    s = chart.coord(name)
    return s * s * (chart.const(3) - 2 * s)


def concord_from_gauge(a: QuantumCord, y: GaugeSection,
                       s_name: str = "s") -> Concord:
    """Interpolate the gauge orbit: Z = t + h(s)(Y - t) with smoothstep h.

    Needs a source-0 cord and a gauge section in the 0 -> 0 fiber, so that
    every intermediate Z is still an arrow.  The linear part is sampled
    along s in [0,1] and rejected if positivity fails.
    """
    if not a.source.is_zero():
        raise ValueError("concordance construction needs a source-0 cord")
    if not (y.source.is_zero() and y.target.is_zero()):
        raise ValueError("gauge section must fix the zero source")
    base = a.chart
    if s_name in base.names:
        raise ValueError(f"chart already has a coordinate {s_name!r}")
    ext = Chart(base.names + (s_name,), base.periodic + (False,))
    proj = _extension_projection(base, ext)

    a_ext = pullback_cord(a, proj)
    h = smoothstep(ext, s_name)
    coeffs = []
    for i in range(y.k):
        e = tuple(1 if m == i else 0 for m in range(y.k))
        acc = {}
        for idx, fld in y.comps[i]:
            lifted = pullback_field(fld, proj)
            if idx == e:
                acc[idx] = ext.const(1) + h * (lifted - 1)
            else:
                acc[idx] = h * lifted
        if e not in acc:
            acc[e] = ext.const(1)
        coeffs.append(acc)

    # positivity along the deformation: sample s in [0,1] only
    zero_ext = SourceMap.zero(ext, y.k)
    probe = make_gauge_section(ext, y.k, y.order, zero_ext, zero_ext,
                               [dict(c) for c in coeffs],
                               positivity="sampled")
    det = _linear_det(probe.linear_matrix(), ext)
    if isinstance(det, RationalField):
        det = det.num * det.den
    grid = 24
    point = {}
    base_axes = []
    for i in range(base.dim):
        if base.periodic[i]:
            base_axes.append([2 * math.pi * j / grid for j in range(grid)])
        else:
            base_axes.append([-2.0 + 4.0 * j / (grid - 1)
                              for j in range(grid)])

    def rec(i):
        if i == base.dim:
            for j in range(grid + 1):
                point[s_name] = j / grid
                if det.evaluate(point) <= 0:
                    raise ValueError(
                        "linear part loses positivity at s="
                        f"{point[s_name]:.3f}, x={dict(point)}")
            return
        for v in base_axes[i]:
            point[base.names[i]] = v
            rec(i + 1)

    rec(0)
    z = make_gauge_section(ext, y.k, y.order, zero_ext, zero_ext, coeffs,
                           positivity="sampled")
    c = gauge(z, a_ext)
    return Concord(c, base, s_name)
