"""Monodromy of impotent cords: float-jet transport along loops.

On the deformation slab the defining relation turns a loop into the fiber
ODE t'(u) = sum_m f_m(u) t^m, where f_m du is the pullback of the m-th
coefficient form.  The jet coefficients of t(u) satisfy a triangular system
that is integrated jointly by fixed-step RK4 with Richardson extrapolation.
"""

import math
from dataclasses import dataclass

from .chart_calculus import Loop, integrate_path
from .cord_core import JetForm, is_impotent

__all__ = [
    "HolonomyJet",
    "Loop",
    "ToleranceNotMet",
    "Word",
    "conjugation_check",
    "first_order_check",
    "integrate_jet_ode",
    "jet_compose",
    "jet_invert",
    "monodromy_word",
    "section_jet_at",
    "transport",
]


class ToleranceNotMet(ValueError):
    """Richardson error estimate exceeded the requested tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


@dataclass(frozen=True)
class HolonomyJet:
    """Invertible float jet c_1 t + ... + c_N t^N with error estimates.

    The constant coefficient is structurally absent (impotent transport
    keeps t = 0 fixed) and c_1 must stay positive.
    """

    order: int
    coeffs: tuple
    errs: tuple

    def __post_init__(self):
        if len(self.coeffs) != self.order or len(self.errs) != self.order:
            raise ValueError("coefficient count does not match the order")
        if self.coeffs[0] <= 0:
            raise ValueError("linear coefficient must be positive")

    @staticmethod
    def identity(order: int) -> "HolonomyJet":
        return HolonomyJet(order, (1.0,) + (0.0,) * (order - 1),
                           (0.0,) * order)

    @property
    def linear(self) -> float:
        return self.coeffs[0]

    def max_err(self) -> float:
        return max(self.errs)


def _series_mul_nc(a: list, b: list, order: int) -> list:
    """Product of two series with no constant term; slot n holds t^(n+1)."""
    out = [0.0] * order
    for i, va in enumerate(a):
        if va == 0.0:
            continue
        for j in range(order - i - 1):
            out[i + j + 1] += va * b[j]
    return out


def _series_powers(c: list, order: int) -> list:
    """[T, T^2, ..., T^order] for the no-constant series T."""
    powers = [list(c)]
    for _ in range(order - 1):
        powers.append(_series_mul_nc(powers[-1], c, order))
    return powers


def jet_compose(first: HolonomyJet, second: HolonomyJet) -> HolonomyJet:
    """Jet of (second o first): first is applied first."""
    if first.order != second.order:
        raise ValueError("cannot compose jets of different orders")
    order = first.order
    powers = _series_powers(list(first.coeffs), order)
    out = [0.0] * order
    for m in range(1, order + 1):
        sm = second.coeffs[m - 1]
        if sm:
            for n in range(order):
                out[n] += sm * powers[m - 1][n]
    err = first.max_err() + second.max_err()
    return HolonomyJet(order, tuple(out), (err,) * order)


def jet_invert(jet: HolonomyJet) -> HolonomyJet:
    """The series inverse: jet_compose(jet, inverse) is the identity."""
    order = jet.order
    powers = _series_powers(list(jet.coeffs), order)
    g = [0.0] * order
    c1 = jet.coeffs[0]
    for n in range(1, order + 1):
        total = 1.0 if n == 1 else 0.0
        for m in range(1, n):
            total -= g[m - 1] * powers[m - 1][n - 1]
        g[n - 1] = total / c1 ** n
    return HolonomyJet(order, tuple(g), tuple(jet.errs))


@dataclass(frozen=True)
class Word:
    """Path-ordered word in generator loops: ((index, +/-1), ...)."""

    letters: tuple

    def __post_init__(self):
        letters = tuple((int(i), int(e)) for i, e in self.letters)
        object.__setattr__(self, "letters", letters)
        for i, e in letters:
            if i < 0 or e not in (1, -1):
                raise ValueError(f"bad word letter ({i}, {e})")


def integrate_jet_ode(fvec, order: int, nsteps: int, init=None) -> list:
    """Fixed-step RK4 for the triangular jet system c' = rhs(fvec(u), c).

    fvec(u) returns the coefficient functions [f_1(u), ..., f_M(u)] of the
    scalar ODE t' = sum_m f_m(u) t^m; the jet starts at the identity unless
    init overrides it.
    """
    c = list(init) if init is not None else [1.0] + [0.0] * (order - 1)
    h = 1.0 / nsteps

    def rhs(fv, state):
        v = [0.0] * order
        powers = _series_powers(state, order)
        for m, fm in enumerate(fv[:order], start=1):
            if fm:
                pw = powers[m - 1]
                for n in range(order):
                    if pw[n]:
                        v[n] += fm * pw[n]
        return v

    for s in range(nsteps):
        u = s * h
        f0 = fvec(u)
        fh = fvec(u + h / 2)
        f1 = fvec(u + h)
        k1 = rhs(f0, c)
        k2 = rhs(fh, [c[i] + h / 2 * k1[i] for i in range(order)])
        k3 = rhs(fh, [c[i] + h / 2 * k2[i] for i in range(order)])
        k4 = rhs(f1, [c[i] + h * k3[i] for i in range(order)])
        c = [c[i] + h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i])
             for i in range(order)]
    return c


def _loop_coefficient_functions(a: JetForm, loop: Loop):
    comps = []
    for m in range(1, a.order + 1):
        form = a.coefficient(0, (m,))
        terms = []
        for (i,), fld in form.components:
            w = loop.windings[i]
            if w:
                terms.append((fld, 2 * math.pi * w))
        comps.append(terms)

    def fvec(u):
        p = loop.point(u)
        return [math.fsum(f.evaluate(p) * s for f, s in terms)
                for terms in comps]

    return fvec


def transport(a: JetForm, loop: Loop, step: float = 1e-3,
              tol: float | None = None) -> HolonomyJet:
    """Holonomy jet of an impotent cord along a loop.

    Integrates at the given step and at half of it; the returned
    coefficients are the Richardson combination (16 c_half - c_full)/15
    with the coefficient-wise discrepancy /15 as the error estimate.
    """
    if a.k != 1 or a.degree != 1:
        raise ValueError("transport needs a codimension-1 degree-1 cord")
    if not is_impotent(a):
        raise ValueError("transport requires an impotent cord")
    if a.chart != loop.chart:
        raise ValueError("loop lives on a different chart")
    order = a.order
    fvec = _loop_coefficient_functions(a, loop)
    nsteps = max(1, round(1.0 / step))
    full = integrate_jet_ode(fvec, order, nsteps)
    half = integrate_jet_ode(fvec, order, 2 * nsteps)
    coeffs = tuple((16 * half[i] - full[i]) / 15 for i in range(order))
    errs = tuple(abs(half[i] - full[i]) / 15 for i in range(order))
    if tol is not None and max(errs) > tol:
        raise ToleranceNotMet(
            f"achieved error estimate {max(errs):.3e} exceeds {tol:.3e}",
            achieved=max(errs))
    return HolonomyJet(order, coeffs, errs)


def _reversed(loop: Loop) -> Loop:
    # same angular track traversed backwards; start is unchanged modulo
    # full periods, which the trig-polynomial fields cannot see
    return Loop(loop.chart, loop.start, tuple(-w for w in loop.windings))


def monodromy_word(a: JetForm, generators: list, word,
                   step: float = 1e-3) -> HolonomyJet:
    """Path-ordered holonomy of a word: the first letter acts first.

    Inverse letters are transported along the reversed loop (their own ODE
    runs), not inverted numerically, so the inverse law is a genuine check.
    """
    if not isinstance(word, Word):
        word = Word(tuple(word))
    if not generators:
        raise ValueError("no generator loops given")
    base = generators[0].start
    for g in generators:
        if g.chart != generators[0].chart or g.start != base:
            raise ValueError("generators must share the basepoint")
    cache: dict = {}
    result = HolonomyJet.identity(a.order)
    for i, e in word.letters:
        if i >= len(generators):
            raise ValueError(f"word references generator {i}")
        if (i, e) not in cache:
            loop = generators[i] if e == 1 else _reversed(generators[i])
            cache[(i, e)] = transport(a, loop, step=step)
        result = jet_compose(result, cache[(i, e)])
    return result


def first_order_check(a: JetForm, loop: Loop, step: float = 1e-3) -> dict:
    """Linear coefficient, two routes: transported c_1 against
    exp(path integral of the linear coefficient form)."""
    jet = transport(a, loop, step=step)
    integ = integrate_path(a.coefficient(0, (1,)), loop)
    expected = math.exp(integ.value)
    rel = abs(jet.linear - expected) / abs(expected)
    return {
        "linear": jet.linear,
        "integral_route": expected,
        "rel_err": rel,
        "integral_exact": integ.exact is not None,
    }


def section_jet_at(y, point: dict, order: int) -> HolonomyJet:
    """Numeric arrow of a k=1 source-0 gauge section at a chart point."""
    if y.k != 1:
        raise ValueError("numeric section jets are defined for k=1")
    if not (y.source.is_zero() and y.target.is_zero()):
        raise ValueError("section must fix the zero source")
    coeffs = [y.coefficient(0, (m,)).evaluate(point)
              for m in range(1, order + 1)]
    return HolonomyJet(order, tuple(coeffs), (0.0,) * order)


def conjugation_check(a: JetForm, b: JetForm, y, loop: Loop,
                      step: float = 1e-3) -> dict:
    """Monodromy of B = Y * A against both conjugation orientations.

    The report carries both residuals and names the passing orientation;
    basepoint-change gives one orientation, but the gauge statement leaves
    it open, so both are measured.
    """
    phi_a = transport(a, loop, step=step)
    phi_b = transport(b, loop, step=step)
    y0 = section_jet_at(y, loop.point(0.0), a.order)
    y0_inv = jet_invert(y0)
    left = jet_compose(jet_compose(y0, phi_a), y0_inv)   # Y^-1 o phi o Y
    right = jet_compose(jet_compose(y0_inv, phi_a), y0)  # Y o phi o Y^-1

    def residual(cand):
        # relative per coefficient: the jets grow exponentially in the
        # order, so an absolute gap would drown in float roundoff
        return max(abs(cand.coeffs[i] - phi_b.coeffs[i])
                   / max(1.0, abs(phi_b.coeffs[i]))
                   for i in range(a.order))

    res_left = residual(left)
    res_right = residual(right)
    orientation = "inverse-outside" if res_left <= res_right \
        else "inverse-inside"
    return {
        "residual_inverse_outside": res_left,
        "residual_inverse_inside": res_right,
        "orientation": orientation,
        "residual": min(res_left, res_right),
    }
