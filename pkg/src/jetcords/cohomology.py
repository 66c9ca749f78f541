"""Twisted complexes of jet-valued forms and a finite Fourier model.

The differential twisted by a degree-1 jet form A is nabla_A(W) = dW + [A, W];
it squares to zero when A is flat, and transporting along a gauge section
intertwines the differentials of gauge-related base forms.  On a torus chart
the horizontal complex of a defining pair (a, V) is modelled exactly on the
finite-dimensional space of harmonics with bounded frequency, where kernel
ranks are decided by fraction-free elimination over the integers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

from .chart_calculus import (
    COS,
    SIN,
    Chart,
    Form,
    RationalField,
    ScalarField,
    TwoPiMultiple,
    VectorField,
    contract,
    exterior_derivative,
    integrate_torus,
    lie_derivative,
    wedge,
)
from .cord_core import (
    GaugeSection,
    JetForm,
    QuantumCord,
    bracket,
    gauge,
    jetform_d,
    jetforms_equal,
    jet_transport,
    jf_add,
)

__all__ = [
    "FourierTruncation",
    "TwistedComplex",
    "bott_cohomology_profile",
    "bott_differential",
    "gv_integral",
    "h0_dimension",
    "nabla",
    "phi_transport",
]


# ---------------------------------------------------------------------------
# the twisted differential
# ---------------------------------------------------------------------------


def nabla(a: JetForm, w: JetForm) -> JetForm:
    """dW + [A, W], the differential twisted by a degree-1 jet form."""
    if a.degree != 1:
        raise ValueError("the twisting form must have degree 1")
    if a.source != w.source:
        raise ValueError("twisted differential requires equal source maps")
    return jf_add(jetform_d(w), bracket(a, w))


@dataclass(frozen=True)
class TwistedComplex:
    """The complex (Omega^*_{s_A}, nabla_A) of a certified-flat cord.

    The constructor is the only flatness gate: nabla itself accepts any
    degree-1 twist so that the failure of nabla^2 = 0 on a curved form
    stays observable.
    """

    base: QuantumCord

    def __post_init__(self):
        if self.base.flat_order != self.base.order:
            raise ValueError("twisted complex requires a certified-flat cord")

    def differential(self, w: JetForm) -> JetForm:
        return nabla(self.base, w)


def phi_transport(y: GaugeSection, a: JetForm, b: JetForm,
                  w: JetForm) -> JetForm:
    """(W o Y)(Y')^{-1} for a section with Y * A = B.

    The gauge relation is re-checked on every call; transporting along an
    unrelated section is a domain error, not a different chain map.
    """
    if not jetforms_equal(gauge(y, a), b):
        raise ValueError("gauge relation Y * A = B does not hold")
    if a.source != w.source:
        raise ValueError("the form must share the base form's source")
    return jet_transport(y, w)


# ---------------------------------------------------------------------------
# the horizontal complex of a defining pair
# ---------------------------------------------------------------------------


def _check_defining_pair(a: Form, v: VectorField):
    if a.degree != 1:
        raise ValueError("the defining form must have degree 1")
    if contract(v, a) != Form.function(a.chart.const(-1)):
        raise ValueError("normalization failed: iota_V(a) != -1")


def bott_differential(a: Form, v: VectorField, w: Form) -> Form:
    """dw + a ^ L_V(w) - L_V(a) ^ w on iota_V-horizontal forms.

    The correction form is recomputed as L_V(a) here; horizontality of w
    is a precondition, horizontality of the result a consequence.
    """
    _check_defining_pair(a, v)
    if w.degree > 0 and not contract(v, w).is_zero():
        raise ValueError("the form is not horizontal: iota_V(w) != 0")
    return _bott_raw(a, lie_derivative(v, a), v, w)


def _bott_raw(a: Form, b: Form, v: VectorField, w: Form) -> Form:
    lw = lie_derivative(v, w)
    out = exterior_derivative(w) + wedge(a, lw)
    if not b.is_zero():
        out = out - wedge(b, w)
    return out


@dataclass(frozen=True)
class FourierTruncation:
    """All harmonics of frequency max-norm <= cutoff on a torus chart."""

    chart: Chart
    cutoff: int

    def __post_init__(self):
        if not all(self.chart.periodic):
            raise ValueError("the harmonic model needs a fully periodic"
                             " chart")
        if self.cutoff < 0:
            raise ValueError("cutoff must be non-negative")

    def basis(self) -> list:
        """One field per canonical harmonic: (2*cutoff+1)^dim in total."""
        chart, d = self.chart, self.cutoff
        fields = [chart.const(1)]
        for freq in itertools.product(range(-d, d + 1), repeat=chart.dim):
            lead = next((f for f in freq if f), 0)
            if lead <= 0:
                continue
            combo = {chart.names[i]: f for i, f in enumerate(freq) if f}
            fields.append(chart.harmonic(COS, combo))
            fields.append(chart.harmonic(SIN, combo))
        return fields


def _field_rows(field, comp_idx, rows: dict, col: int):
    if isinstance(field, RationalField):
        raise ValueError("quotient coefficients fall outside the harmonic"
                         " model")
    for t in field.terms:
        if any(t.mono):
            raise ValueError("monomial coefficients fall outside the"
                             " harmonic model")
        key = (comp_idx, t.kind, t.freq)
        rows.setdefault(key, {})[col] = t.coeff


def _form_rows(form: Form, rows: dict, col: int):
    for idx, field in form.components:
        _field_rows(field, idx, rows, col)


def _exact_rank(rows: list) -> int:
    """Rank by fraction-free (Bareiss) elimination.

    Rows are scaled to integers first; every update divides exactly by the
    previous pivot, so the entries stay integral throughout.
    """
    m = []
    for row in rows:
        den = 1
        for x in row:
            den = den * x.denominator // math.gcd(den, x.denominator)
        m.append([int(x * den) for x in row])
    rank, prev = 0, 1
    ncols = len(m[0]) if m else 0
    for col in range(ncols):
        if rank == len(m):
            break
        piv = next((r for r in range(rank, len(m)) if m[r][col]), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        pv = m[rank][col]
        for r in range(rank + 1, len(m)):
            f = m[r][col]
            if not f and prev == 1:
                continue
            row, top = m[r], m[rank]
            for c in range(col, ncols):
                row[c] = (row[c] * pv - f * top[c]) // prev
        prev = pv
        rank += 1
    return rank


def _densify(rows: dict, ncols: int) -> list:
    out = []
    for entries in rows.values():
        row = [Fraction(0)] * ncols
        for c, val in entries.items():
            row[c] = val
        out.append(row)
    return out


def h0_dimension(a: Form, v: VectorField, cutoff: int) -> int:
    """Exact kernel dimension of the horizontal differential on functions.

    Assembles the matrix of f -> df + L_V(f) a - f L_V(a) over the harmonic
    basis and subtracts its rank; frequencies enter as exact integers, so
    borderline ranks are decided, not estimated.
    """
    _check_defining_pair(a, v)
    basis = FourierTruncation(a.chart, cutoff).basis()
    b = lie_derivative(v, a)
    rows: dict = {}
    for col, h in enumerate(basis):
        image = _bott_raw(a, b, v, Form.build(a.chart, 0, {(): h}))
        _form_rows(image, rows, col)
    return len(basis) - _exact_rank(_densify(rows, len(basis)))


# ---------------------------------------------------------------------------
# truncated ranks in higher degree (diagnostics only)
# ---------------------------------------------------------------------------


def _rref_kernel(rows: list, ncols: int) -> list:
    """Kernel basis of a Fraction matrix, one sparse dict per free column."""
    m = [row[:] for row in rows]
    pivots = []
    r = 0
    for col in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][col]), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][col]
        m[r] = [x * inv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][col]:
                f = m[i][col]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(col)
        r += 1
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        vec = {fc: Fraction(1)}
        for i, pc in enumerate(pivots):
            if m[i][fc]:
                vec[pc] = -m[i][fc]
        basis.append(vec)
    return basis


def bott_cohomology_profile(a: Form, v: VectorField, cutoff: int) -> list:
    """Per degree: dimension of the truncated horizontal space and the rank
    of the horizontal differential on it.

    The alternating combinations (kernel at p minus rank at p-1) are ranks
    of truncated matrices only; nothing here claims convergence to the
    cohomology of the pair.
    """
    _check_defining_pair(a, v)
    chart = a.chart
    basis = FourierTruncation(chart, cutoff).basis()
    b = lie_derivative(v, a)
    profile = []
    for p in range(chart.dim + 1):
        idxs = list(itertools.combinations(range(chart.dim), p))
        gens = [(idx, h) for idx in idxs for h in basis]
        columns = {g: c for c, g in enumerate(gens)}

        if p == 0:
            horiz = [{c: Fraction(1)} for c in range(len(gens))]
        else:
            crows: dict = {}
            for (idx, h), c in columns.items():
                gen = Form.build(chart, p, {idx: h})
                _form_rows(contract(v, gen), crows, c)
            horiz = _rref_kernel(_densify(crows, len(gens)), len(gens))

        images = {}
        for g, c in columns.items():
            idx, h = g
            images[c] = _bott_raw(a, b, v, Form.build(chart, p, {idx: h}))
        orows: dict = {}
        for col, vec in enumerate(horiz):
            total = Form.zero(chart, p + 1)
            for c, coef in vec.items():
                total = total + images[c].map_components(
                    lambda f, k=coef: f * k)
            _form_rows(total, orows, col)
        profile.append({"degree": p, "dimension": len(horiz),
                        "rank": _exact_rank(_densify(orows, len(horiz)))})
    return profile


# ---------------------------------------------------------------------------
# the invariant integral
# ---------------------------------------------------------------------------


def gv_integral(a: JetForm) -> TwoPiMultiple:
    """Exact integral of a_1 ^ d(a_1) over a fully periodic 3-chart."""
    chart = a.chart
    if chart.dim != 3 or not all(chart.periodic):
        raise ValueError("the invariant integral needs a fully periodic"
                         " 3-chart")
    if a.k != 1 or a.degree != 1:
        raise ValueError("expected a codimension-one degree-1 jet form")
    a1 = a.coefficient(0, (1,))
    return integrate_torus(wedge(a1, exterior_derivative(a1)))
