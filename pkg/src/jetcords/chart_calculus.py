"""Exact exterior calculus on product charts R^m x T^p.

Scalar functions are trigonometric polynomials: finite sums of
coeff * x^alpha * {1, cos, sin}(k . theta) with rational coefficients,
monomials in the non-periodic coordinates and integer frequency vectors in
the periodic ones.  The ring is closed under products (product-to-sum) and
partial derivatives, and is an integral domain, so quotients compare by
cross-multiplication.

Floats appear only in evaluation and in the numeric fallbacks of path
integration; all algebra is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from scipy.integrate import quad

Rational = Fraction

ONE, COS, SIN = "one", "cos", "sin"


@dataclass(frozen=True)
class Chart:
    """Named coordinates, each affine (R) or periodic (angle on T)."""

    names: tuple
    periodic: tuple

    def __post_init__(self):
        if len(self.names) != len(self.periodic):
            raise ValueError("one periodicity flag per coordinate")
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate coordinate names")

    @property
    def dim(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValueError(f"no coordinate {name!r} in chart {self.names}")

    def is_periodic(self, name: str) -> bool:
        return self.periodic[self.index(name)]

    # --- field constructors ---

    def const(self, value) -> "ScalarField":
        return ScalarField.from_terms(self, [FieldTerm.constant(self, value)])

    def zero(self) -> "ScalarField":
        return ScalarField(self, ())

    def coord(self, name: str) -> "ScalarField":
        """The coordinate function itself; periodic angles are not global
        functions and are rejected."""
        i = self.index(name)
        if self.periodic[i]:
            raise ValueError(f"{name!r} is an angle; use cos/sin of it")
        mono = tuple(1 if j == i else 0 for j in range(self.dim))
        return ScalarField.from_terms(
            self, [FieldTerm(Fraction(1), mono, ONE, (0,) * self.dim)])

    def harmonic(self, kind: str, freqs: dict, coeff=1) -> "ScalarField":
        """cos or sin of an integer combination of angles."""
        freq = [0] * self.dim
        for name, k in freqs.items():
            i = self.index(name)
            if not self.periodic[i]:
                raise ValueError(f"{name!r} is not periodic")
            freq[i] = int(k)
        term = FieldTerm(Fraction(coeff), (0,) * self.dim, kind, tuple(freq))
        return ScalarField.from_terms(self, [term])

    def cos(self, name: str, k: int = 1) -> "ScalarField":
        return self.harmonic(COS, {name: k})

    def sin(self, name: str, k: int = 1) -> "ScalarField":
        return self.harmonic(SIN, {name: k})


@dataclass(frozen=True)
class FieldTerm:
    """coeff * x^mono * kind(freq . theta), canonical form.

    Monomial exponents vanish on periodic coordinates and frequencies vanish
    on non-periodic ones.  kind ONE forces zero frequency; sin of zero
    frequency is never stored (it is zero); the leading nonzero frequency
    entry is positive, the sign being absorbed into the coefficient for sin.
    """

    coeff: Fraction
    mono: tuple
    kind: str
    freq: tuple

    @staticmethod
    def constant(chart: Chart, value) -> "FieldTerm":
        z = (0,) * chart.dim
        return FieldTerm(Fraction(value), z, ONE, z)

    @staticmethod
    def canonical(coeff: Fraction, mono, kind, freq):
        """Return the canonical term, or None if it is zero."""
        if coeff == 0:
            return None
        freq = tuple(freq)
        if not any(freq):
            if kind == SIN:
                return None
            kind = ONE
            return FieldTerm(coeff, tuple(mono), ONE, freq)
        lead = next(f for f in freq if f)
        if lead < 0:
            freq = tuple(-f for f in freq)
            if kind == SIN:
                coeff = -coeff
        return FieldTerm(coeff, tuple(mono), kind, freq)

    def sort_key(self):
        return (sum(self.mono), self.mono, self.kind, self.freq)


def _merge_terms(chart, terms):
    acc: dict = {}
    for t in terms:
        if t is None:
            continue
        key = (t.mono, t.kind, t.freq)
        acc[key] = acc.get(key, Fraction(0)) + t.coeff
    kept = [FieldTerm(c, m, k, f) for (m, k, f), c in acc.items() if c != 0]
    kept.sort(key=FieldTerm.sort_key)
    return ScalarField(chart, tuple(kept))


def _term_product(a: FieldTerm, b: FieldTerm):
    """Product-to-sum expansion of two canonical terms."""
    coeff = a.coeff * b.coeff
    mono = tuple(x + y for x, y in zip(a.mono, b.mono))
    if a.kind == ONE:
        return [FieldTerm.canonical(coeff, mono, b.kind, b.freq)]
    if b.kind == ONE:
        return [FieldTerm.canonical(coeff, mono, a.kind, a.freq)]
    plus = tuple(x + y for x, y in zip(a.freq, b.freq))
    minus = tuple(x - y for x, y in zip(a.freq, b.freq))
    half = coeff / 2
    if a.kind == COS and b.kind == COS:
        parts = [(half, COS, minus), (half, COS, plus)]
    elif a.kind == SIN and b.kind == SIN:
        parts = [(half, COS, minus), (-half, COS, plus)]
    elif a.kind == SIN and b.kind == COS:
        parts = [(half, SIN, plus), (half, SIN, minus)]
    else:  # cos * sin
        parts = [(half, SIN, plus), (-half, SIN, minus)]
    out = []
    for c, kind, freq in parts:
        if kind == COS and not any(freq):
            out.append(FieldTerm.canonical(c, mono, ONE, freq))
        else:
            out.append(FieldTerm.canonical(c, mono, kind, freq))
    return out


@dataclass(frozen=True)
class ScalarField:
    """Trig polynomial in canonical form; equality is structural."""

    chart: Chart
    terms: tuple

    @staticmethod
    def from_terms(chart, terms) -> "ScalarField":
        canon = [FieldTerm.canonical(t.coeff, t.mono, t.kind, t.freq)
                 for t in terms]
        return _merge_terms(chart, canon)

    def is_zero(self) -> bool:
        return not self.terms

    def constant_value(self):
        """The rational value, if the field is a constant; else None."""
        if not self.terms:
            return Fraction(0)
        if len(self.terms) == 1:
            t = self.terms[0]
            if t.kind == ONE and not any(t.mono):
                return t.coeff
        return None

    def zero_frequency_part(self) -> Fraction:
        """Mean over the torus directions of the monomial-free part."""
        for t in self.terms:
            if t.kind == ONE and not any(t.mono):
                return t.coeff
        return Fraction(0)

    def _match(self, other):
        if self.chart != other.chart:
            raise ValueError("fields live on different charts")

    def __add__(self, other):
        if isinstance(other, RationalField):
            return NotImplemented
        if not isinstance(other, ScalarField):
            other = self.chart.const(other)
        self._match(other)
        return _merge_terms(self.chart, list(self.terms) + list(other.terms))

    __radd__ = __add__

    def __neg__(self):
        return ScalarField(self.chart, tuple(
            FieldTerm(-t.coeff, t.mono, t.kind, t.freq) for t in self.terms))

    def __sub__(self, other):
        if isinstance(other, RationalField):
            return NotImplemented
        if not isinstance(other, ScalarField):
            other = self.chart.const(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, RationalField):
            return NotImplemented
        if not isinstance(other, ScalarField):
            c = Fraction(other)
            return ScalarField(self.chart, tuple(
                FieldTerm(t.coeff * c, t.mono, t.kind, t.freq)
                for t in self.terms)) if c else self.chart.zero()
        self._match(other)
        out = []
        for a in self.terms:
            for b in other.terms:
                out.extend(_term_product(a, b))
        return _merge_terms(self.chart, out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("use RationalField for negative powers")
        result = self.chart.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * (Fraction(1) / Fraction(other))
        return RationalField.ratio(self, other)

    def partial(self, name: str) -> "ScalarField":
        i = self.chart.index(name)
        out = []
        for t in self.terms:
            if self.chart.periodic[i]:
                k = t.freq[i]
                if k and t.kind == COS:
                    out.append(FieldTerm.canonical(
                        -t.coeff * k, t.mono, SIN, t.freq))
                elif k and t.kind == SIN:
                    out.append(FieldTerm.canonical(
                        t.coeff * k, t.mono, COS, t.freq))
            else:
                e = t.mono[i]
                if e:
                    mono = list(t.mono)
                    mono[i] = e - 1
                    out.append(FieldTerm.canonical(
                        t.coeff * e, tuple(mono), t.kind, t.freq))
        return _merge_terms(self.chart, out)

    def evaluate(self, point: dict) -> float:
        total = 0.0
        for t in self.terms:
            v = float(t.coeff)
            for i, e in enumerate(t.mono):
                if e:
                    v *= float(point[self.chart.names[i]]) ** e
            if t.kind != ONE:
                phase = sum(k * float(point[self.chart.names[i]])
                            for i, k in enumerate(t.freq) if k)
                v *= math.cos(phase) if t.kind == COS else math.sin(phase)
            total += v
        return total

    def max_harmonic_norm(self) -> int:
        return max((max(abs(k) for k in t.freq) if any(t.freq) else 0)
                   for t in self.terms) if self.terms else 0

    def __str__(self):
        if not self.terms:
            return "0"
        bits = []
        for t in self.terms:
            parts = []
            if t.coeff != 1 or (not any(t.mono) and t.kind == ONE):
                parts.append(str(t.coeff))
            for i, e in enumerate(t.mono):
                if e:
                    nm = self.chart.names[i]
                    parts.append(nm if e == 1 else f"{nm}^{e}")
            if t.kind != ONE:
                arg = "+".join(
                    (f"{k}*" if abs(k) != 1 else ("-" if k == -1 else ""))
                    + self.chart.names[i]
                    for i, k in enumerate(t.freq) if k)
                parts.append(f"{t.kind}({arg})")
            bits.append("*".join(parts))
        return " + ".join(bits)


def sampled_minimum(field, samples: int = 48, box: float = 2.0) -> float:
    """Minimum of the field on a sampling grid: 2*pi-grid on angles, a
    [-box, box] grid on affine coordinates.  A heuristic, not a proof."""
    chart = field.chart
    axes = []
    for i in range(chart.dim):
        if chart.periodic[i]:
            axes.append([2 * math.pi * j / samples for j in range(samples)])
        else:
            axes.append([-box + 2 * box * j / (samples - 1)
                         for j in range(samples)])
    best = math.inf
    point = {}

    def rec(i):
        nonlocal best
        if i == chart.dim:
            best = min(best, field.evaluate(point))
            return
        for v in axes[i]:
            point[chart.names[i]] = v
            rec(i + 1)

    rec(0)
    return best


@dataclass(frozen=True)
class RationalField:
    """Quotient of trig polynomials.

    positivity records what is known about the denominator: "constant" and
    "certified" are by construction, "sampled" means a grid check passed,
    "mixed" means the grid saw both signs (no global positivity claim).
    Equality is cross-multiplied, so representatives need not match.
    """

    num: ScalarField
    den: ScalarField
    positivity: str

    @staticmethod
    def from_field(f: ScalarField) -> "RationalField":
        return RationalField(f, f.chart.const(1), "constant")

    @staticmethod
    def ratio(num: ScalarField, den: ScalarField,
              certified: bool = False) -> "RationalField":
        c = den.constant_value()
        if c is not None:
            if c == 0:
                raise ZeroDivisionError("zero denominator field")
            return RationalField(num * (Fraction(1) / c),
                                 num.chart.const(1), "constant")
        if certified:
            return RationalField(num, den, "certified")
        m = sampled_minimum(den)
        if m <= 0:
            neg = sampled_minimum(-den)
            if neg <= 0:
                # sign changes on the sample grid: still a valid element of
                # the fraction field, but no global positivity claim
                return RationalField(num, den, "mixed")
            return RationalField(-num, -den, "sampled")
        return RationalField(num, den, "sampled")

    @property
    def chart(self):
        return self.num.chart

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def constant_value(self):
        if self.den.constant_value() == 1:
            return self.num.constant_value()
        if self.is_zero():
            return Fraction(0)
        n, d = self.num.constant_value(), self.den.constant_value()
        if n is not None and d is not None:
            return n / d
        return None

    def _positivity_join(self, other):
        rank = {"constant": 0, "certified": 1, "sampled": 2, "mixed": 3}
        a, b = self.positivity, other.positivity
        return a if rank[a] >= rank[b] else b

    def __add__(self, other):
        other = as_ratio(other, self.chart)
        if self.den == other.den:
            return RationalField(self.num + other.num, self.den,
                                 self.positivity)
        return RationalField(self.num * other.den + other.num * self.den,
                             self.den * other.den,
                             self._positivity_join(other))

    __radd__ = __add__

    def __neg__(self):
        return RationalField(-self.num, self.den, self.positivity)

    def __sub__(self, other):
        return self + (-as_ratio(other, self.chart))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = as_ratio(other, self.chart)
        return RationalField(self.num * other.num, self.den * other.den,
                             self._positivity_join(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_ratio(other, self.chart)
        if other.num.is_zero():
            raise ZeroDivisionError("division by zero field")
        flipped = RationalField.ratio(other.den, other.num)
        return self * flipped

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, ScalarField)):
            other = as_ratio(other, self.chart)
        if not isinstance(other, RationalField):
            return NotImplemented
        return self.num * other.den == other.num * self.den

    def __hash__(self):
        raise TypeError("RationalField is not hashable")

    def partial(self, name: str) -> "RationalField":
        # quotient rule; denominator positivity is inherited
        n = self.num.partial(name) * self.den - self.num * self.den.partial(name)
        return RationalField(n, self.den * self.den, self.positivity)

    def evaluate(self, point: dict) -> float:
        return self.num.evaluate(point) / self.den.evaluate(point)

    def __str__(self):
        if self.den.constant_value() == 1:
            return str(self.num)
        return f"({self.num}) / ({self.den})"


def as_ratio(x, chart: Chart) -> RationalField:
    if isinstance(x, RationalField):
        return x
    if isinstance(x, ScalarField):
        return RationalField.from_field(x)
    return RationalField.from_field(chart.const(x))


def field_zero_like(sample):
    """Additive zero in the same coefficient ring as sample."""
    if isinstance(sample, RationalField):
        return as_ratio(0, sample.chart)
    return sample.chart.zero()


# ---------------------------------------------------------------------------
# forms and vector fields
# ---------------------------------------------------------------------------


def _wedge_key(i_tuple, j_tuple):
    """Merge two strictly increasing index tuples; None on repeats."""
    merged = list(i_tuple) + list(j_tuple)
    sign = 1
    # insertion sort, counting transpositions: tuples are tiny
    for a in range(1, len(merged)):
        b = a
        while b > 0 and merged[b - 1] > merged[b]:
            merged[b - 1], merged[b] = merged[b], merged[b - 1]
            sign = -sign
            b -= 1
    for a in range(1, len(merged)):
        if merged[a - 1] == merged[a]:
            return None, None
    return sign, tuple(merged)


@dataclass(frozen=True)
class Form:
    """Differential form with trig-polynomial (or quotient) coefficients.

    components maps strictly increasing coordinate index tuples to fields;
    zero components are dropped.
    """

    chart: Chart
    degree: int
    components: tuple

    @staticmethod
    def build(chart, degree, comps: dict) -> "Form":
        kept = []
        for idx, f in comps.items():
            idx = tuple(idx)
            if len(idx) != degree or list(idx) != sorted(set(idx)):
                raise ValueError(f"bad index tuple {idx} for degree {degree}")
            if not f.is_zero():
                kept.append((idx, f))
        kept.sort(key=lambda p: p[0])
        return Form(chart, degree, tuple(kept))

    @staticmethod
    def function(f) -> "Form":
        return Form.build(f.chart, 0, {(): f})

    @staticmethod
    def zero(chart, degree) -> "Form":
        return Form(chart, degree, ())

    def component(self, idx):
        idx = tuple(idx)
        for i, f in self.components:
            if i == idx:
                return f
        return self.chart.zero()

    def is_zero(self) -> bool:
        return not self.components

    def map_components(self, fn) -> "Form":
        return Form.build(self.chart, self.degree,
                          {i: fn(f) for i, f in self.components})

    def _match(self, other):
        if self.chart != other.chart or self.degree != other.degree:
            raise ValueError("form chart/degree mismatch")

    def __add__(self, other):
        if other == 0:
            return self
        self._match(other)
        comps = dict(self.components)
        for i, f in other.components:
            comps[i] = comps[i] + f if i in comps else f
        return Form.build(self.chart, self.degree, comps)

    __radd__ = __add__

    def __neg__(self):
        return Form(self.chart, self.degree,
                    tuple((i, -f) for i, f in self.components))

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        if isinstance(scalar, Form):
            raise TypeError("use wedge for form products")
        return Form.build(self.chart, self.degree,
                          {i: f * scalar for i, f in self.components})

    __rmul__ = __mul__

    def __str__(self):
        if not self.components:
            return "0"
        bits = []
        for idx, f in self.components:
            basis = "^".join(f"d{self.chart.names[i]}" for i in idx)
            bits.append(f"({f}) {basis}".strip())
        return " + ".join(bits)


def coordinate_differential(chart: Chart, name: str) -> Form:
    return Form.build(chart, 1, {(chart.index(name),): chart.const(1)})


def wedge(a: Form, b: Form) -> Form:
    if a.chart != b.chart:
        raise ValueError("wedge across different charts")
    comps: dict = {}
    for i, f in a.components:
        for j, g in b.components:
            sign, key = _wedge_key(i, j)
            if key is None:
                continue
            term = (f * g) * sign if sign == -1 else f * g
            comps[key] = comps[key] + term if key in comps else term
    return Form.build(a.chart, a.degree + b.degree, comps)


def exterior_derivative(a: Form) -> Form:
    chart = a.chart
    comps: dict = {}
    for idx, f in a.components:
        for j in range(chart.dim):
            df = f.partial(chart.names[j])
            if df.is_zero():
                continue
            sign, key = _wedge_key((j,), idx)
            if key is None:
                continue
            term = df * sign if sign == -1 else df
            comps[key] = comps[key] + term if key in comps else term
    return Form.build(chart, a.degree + 1, comps)


@dataclass(frozen=True)
class VectorField:
    chart: Chart
    components: tuple  # one field per coordinate

    @staticmethod
    def build(chart, comps: dict) -> "VectorField":
        out = [chart.zero()] * chart.dim
        for name, f in comps.items():
            if isinstance(f, (int, Fraction)):
                f = chart.const(f)
            out[chart.index(name)] = f
        return VectorField(chart, tuple(out))

    def component(self, name: str):
        return self.components[self.chart.index(name)]


def contract(v: VectorField, a: Form) -> Form:
    """Interior product; an antiderivation of degree -1."""
    if a.degree == 0:
        raise ValueError("cannot contract a 0-form")
    comps: dict = {}
    for idx, f in a.components:
        for pos, i in enumerate(idx):
            vi = v.components[i]
            if vi.is_zero():
                continue
            rest = idx[:pos] + idx[pos + 1:]
            term = f * vi
            if pos % 2:
                term = -term
            comps[rest] = comps[rest] + term if rest in comps else term
    return Form.build(a.chart, a.degree - 1, comps)


def lie_derivative(v: VectorField, target):
    """L_V of a scalar field or a form (Cartan's formula)."""
    if isinstance(target, (ScalarField, RationalField)):
        chart = target.chart
        total = field_zero_like(target)
        for i, vi in enumerate(v.components):
            if not vi.is_zero():
                total = total + vi * target.partial(chart.names[i])
        return total
    if target.degree == 0:
        inner = lie_derivative(v, target.component(()))
        return Form.build(target.chart, 0, {(): inner})
    return contract(v, exterior_derivative(target)) + \
        exterior_derivative(contract(v, target))


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoPiMultiple:
    """Exact value rational * (2*pi)^power."""

    rational: Fraction
    power: int

    def value(self) -> float:
        return float(self.rational) * (2 * math.pi) ** self.power

    def __add__(self, other):
        if other == 0:
            return self
        if self.rational == 0:
            return other
        if other.rational == 0:
            return self
        if other.power != self.power:
            raise ValueError("cannot add different powers of 2*pi")
        return TwoPiMultiple(self.rational + other.rational, self.power)

    __radd__ = __add__

    def __mul__(self, c):
        return TwoPiMultiple(self.rational * Fraction(c), self.power)

    __rmul__ = __mul__

    def __str__(self):
        return f"{self.rational} * (2*pi)^{self.power}"


def integrate_torus(top: Form) -> TwoPiMultiple:
    """Integral of a top-degree form over a pure torus chart."""
    chart = top.chart
    if not all(chart.periodic):
        raise ValueError("torus integration needs an all-periodic chart")
    if top.degree != chart.dim:
        raise ValueError("not a top-degree form")
    f = top.component(tuple(range(chart.dim)))
    if isinstance(f, RationalField):
        raise ValueError("torus integration of quotients is not supported")
    for t in f.terms:
        if any(t.mono):
            raise ValueError("monomial dependence survives on a torus chart")
    return TwoPiMultiple(f.zero_frequency_part(), chart.dim)


@dataclass(frozen=True)
class Loop:
    """Closed path: angles wind linearly, affine coordinates stay fixed.

    theta_i(u) = start_i + 2*pi*winding_i*u for u in [0, 1]; start values are
    rationals (radians for angles).
    """

    chart: Chart
    start: tuple
    windings: tuple

    @staticmethod
    def build(chart, start: dict, windings: dict) -> "Loop":
        s = [Fraction(0)] * chart.dim
        w = [0] * chart.dim
        for name, v in start.items():
            s[chart.index(name)] = Fraction(v)
        for name, k in windings.items():
            i = chart.index(name)
            if not chart.periodic[i]:
                raise ValueError(f"cannot wind non-periodic {name!r}")
            w[i] = int(k)
        return Loop(chart, tuple(s), tuple(w))

    def point(self, u: float) -> dict:
        out = {}
        for i, name in enumerate(self.chart.names):
            out[name] = float(self.start[i]) + 2 * math.pi * self.windings[i] * u
        return out


@dataclass(frozen=True)
class PathIntegral:
    value: float
    abs_err: float
    exact: TwoPiMultiple | None  # set when every term integrated in closed form


def integrate_path(a: Form, loop: Loop) -> PathIntegral:
    """Integral of a 1-form along a winding loop.

    Trig-polynomial coefficients integrate in closed form except for
    resonant terms (nonzero frequency orthogonal to the winding) at an
    irrational phase, which fall back to a float of the constant value.
    Quotient coefficients are integrated numerically.
    """
    if a.degree != 1:
        raise ValueError("path integration needs a 1-form")
    chart = a.chart
    if any(isinstance(f, RationalField) for _, f in a.components):
        def integrand(u):
            p = loop.point(u)
            total = 0.0
            for (i,), f in a.components:
                w = loop.windings[i]
                if w:
                    total += f.evaluate(p) * 2 * math.pi * w
            return total
        val, err = quad(integrand, 0.0, 1.0, limit=200)
        return PathIntegral(val, err, None)

    exact_total = TwoPiMultiple(Fraction(0), 1)
    float_total = 0.0
    float_err = 0.0
    exact_ok = True
    for (i,), f in a.components:
        w = loop.windings[i]
        if not w:
            continue
        for t in f.terms:
            mono_val = Fraction(1)
            for j, e in enumerate(t.mono):
                if e:
                    mono_val *= loop.start[j] ** e
            resonance = sum(k * loop.windings[j]
                            for j, k in enumerate(t.freq))
            if t.kind == ONE:
                exact_total = exact_total + TwoPiMultiple(
                    t.coeff * mono_val * w, 1)
            elif resonance != 0:
                continue  # integrates to zero over whole periods
            else:
                phase = sum(k * float(loop.start[j])
                            for j, k in enumerate(t.freq))
                if phase == 0.0 and t.kind == COS:
                    exact_total = exact_total + TwoPiMultiple(
                        t.coeff * mono_val * w, 1)
                    continue
                base = math.cos(phase) if t.kind == COS else math.sin(phase)
                contrib = float(t.coeff * mono_val) * base * 2 * math.pi * w
                float_total += contrib
                float_err += abs(contrib) * 1e-14
                exact_ok = False
    value = exact_total.value() + float_total
    return PathIntegral(value, float_err,
                        exact_total if exact_ok else None)


# ---------------------------------------------------------------------------
# chart maps and pullbacks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChartMap:
    """Map between charts that keeps trig polynomials closed under pullback.

    Each periodic target coordinate is an integer combination of domain
    angles; each affine target coordinate is an arbitrary field on the
    domain.  That is exactly the class for which cos/sin and monomials
    substitute without leaving the ring.
    """

    domain: Chart
    codomain: Chart
    angle_map: tuple   # per codomain coord: tuple of ints over domain coords
    field_map: tuple   # per codomain coord: ScalarField or None

    @staticmethod
    def build(domain: Chart, codomain: Chart, assignments: dict) -> "ChartMap":
        angles = [None] * codomain.dim
        fields = [None] * codomain.dim
        for name, rule in assignments.items():
            j = codomain.index(name)
            if codomain.periodic[j]:
                row = [0] * domain.dim
                for dn, w in rule.items():
                    i = domain.index(dn)
                    if not domain.periodic[i]:
                        raise ValueError(
                            f"angle {name!r} must pull back from angles")
                    row[i] = int(w)
                angles[j] = tuple(row)
            else:
                if isinstance(rule, (int, Fraction)):
                    rule = domain.const(rule)
                if not isinstance(rule, ScalarField):
                    raise ValueError(f"affine coordinate {name!r} needs a "
                                     "field or constant")
                fields[j] = rule
        for j, name in enumerate(codomain.names):
            if codomain.periodic[j] and angles[j] is None:
                raise ValueError(f"no rule for angle {name!r}")
            if not codomain.periodic[j] and fields[j] is None:
                raise ValueError(f"no rule for coordinate {name!r}")
        return ChartMap(domain, codomain, tuple(angles), tuple(fields))

    @staticmethod
    def identity(chart: Chart) -> "ChartMap":
        assignments = {}
        for i, name in enumerate(chart.names):
            if chart.periodic[i]:
                assignments[name] = {name: 1}
            else:
                assignments[name] = chart.coord(name)
        return ChartMap.build(chart, chart, assignments)

    def coordinate_pullbacks(self) -> list:
        """d(f*x_j) for each codomain coordinate, as 1-forms on the domain."""
        out = []
        for j in range(self.codomain.dim):
            if self.codomain.periodic[j]:
                comps = {}
                for i, w in enumerate(self.angle_map[j]):
                    if w:
                        comps[(i,)] = self.domain.const(w)
                out.append(Form.build(self.domain, 1, comps))
            else:
                out.append(exterior_derivative(Form.function(self.field_map[j])))
        return out


def pullback_field(f, m: ChartMap):
    if isinstance(f, RationalField):
        num = pullback_field(f.num, m)
        den = pullback_field(f.den, m)
        return RationalField.ratio(num, den,
                                   certified=(f.positivity == "certified"))
    if f.chart != m.codomain:
        raise ValueError("field does not live on the map's codomain")
    dom = m.domain
    total = dom.zero()
    for t in f.terms:
        part = dom.const(t.coeff)
        for j, e in enumerate(t.mono):
            if e:
                part = part * m.field_map[j] ** e
        if t.kind != ONE:
            freq = [0] * dom.dim
            for j, kj in enumerate(t.freq):
                if kj:
                    for i, w in enumerate(m.angle_map[j]):
                        freq[i] += kj * w
            term = FieldTerm.canonical(Fraction(1), (0,) * dom.dim,
                                       t.kind, tuple(freq))
            if term is None:
                continue  # sin of zero frequency
            harm = ScalarField.from_terms(dom, [term])
            part = part * harm
        total = total + part
    return total


def pullback_form(a: Form, m: ChartMap) -> Form:
    if a.chart != m.codomain:
        raise ValueError("form does not live on the map's codomain")
    if a.degree == 0:
        return Form.function(pullback_field(a.component(()), m))
    dxs = m.coordinate_pullbacks()
    total = Form.zero(m.domain, a.degree)
    for idx, f in a.components:
        piece = Form.function(pullback_field(f, m))
        for j in idx:
            piece = wedge(piece, dxs[j])
        total = total + piece
    return total


# ---------------------------------------------------------------------------
# antiderivatives
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChartRestriction:
    """Token acknowledging that an antiderivative in an angle is only a
    function after restricting the chart (the linear part is not periodic)."""

    reason: str


def antiderivative(f: ScalarField, name: str,
                   restriction: ChartRestriction | None = None):
    """Primitive of f in one coordinate.

    Returns (field, linear_coeff): the trig-polynomial part plus
    linear_coeff * theta for a periodic coordinate.  A nonzero linear part
    requires an explicit ChartRestriction token.
    """
    chart = f.chart
    i = chart.index(name)
    out = []
    linear = []
    for t in f.terms:
        if chart.periodic[i]:
            k = t.freq[i]
            if k == 0:
                linear.append(t)
            elif t.kind == COS:
                out.append(FieldTerm.canonical(
                    t.coeff / k, t.mono, SIN, t.freq))
            else:
                out.append(FieldTerm.canonical(
                    -t.coeff / k, t.mono, COS, t.freq))
        else:
            e = t.mono[i]
            mono = list(t.mono)
            mono[i] = e + 1
            out.append(FieldTerm.canonical(
                t.coeff / (e + 1), tuple(mono), t.kind, t.freq))
    linear_field = _merge_terms(chart, linear) if chart.periodic[i] \
        else chart.zero()
    if not linear_field.is_zero() and restriction is None:
        raise ValueError(
            f"antiderivative in angle {name!r} has a linear part; "
            "pass a ChartRestriction token to accept a non-periodic result")
    return _merge_terms(chart, out), linear_field
