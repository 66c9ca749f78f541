"""Finite arc covers of the circle: cocycle extraction and gluing.

An impotent cord on the circle is trivialized over each arc by the jet
section solving dY = -Y' . A anchored at the arc midpoint; on overlaps
Y_a o Y_b^{-1} is locally constant and the constants form a cocycle whose
ordered full-loop product represents the cord up to jet conjugacy.  In the
other direction an exact cocycle on a complete cover is glued into local
cords through a positive trig-polynomial partition; the pieces coincide
exactly precisely when the cocycle is a coboundary, and otherwise disagree
by the partition tails, which are quantified rather than hidden.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

from scipy.integrate import quad

from .chart_calculus import Chart, Form, RationalField, ScalarField
from .cord_core import QuantumCord, cord_coefficients, is_impotent, \
    jetforms_equal
from .holonomy import HolonomyJet, integrate_jet_ode, jet_compose, jet_invert
from .jet_groupoid import GroupoidArrow, arrow_compose, arrow_invert, \
    identity_arrow, make_arrow, make_jet

__all__ = [
    "Cocycle",
    "CocycleExtractionError",
    "Cover",
    "HaefligerClass",
    "ReconstructedCord",
    "bump_model_report",
    "classes_equal",
    "coboundary_transform",
    "conjugating_arrow",
    "exact_arrow",
    "extract_cocycle",
    "full_loop_product",
    "haefliger_class",
    "make_cocycle",
    "make_cover",
    "reconstruct_cord",
    "reconstructed_monodromy",
    "roundtrip_class",
    "three_arc_cover",
]

_TAU = 2 * math.pi
_SEAM_SAMPLES = 5


def _ceil_steps(span: float, step: float) -> int:
    return max(1, math.ceil(abs(span) / step))


def _floored(x: float, floor: float = 1.0) -> float:
    return max(floor, abs(x))


# --- covers -----------------------------------------------------------------


@dataclass(frozen=True)
class Cover:
    """Ordered open arcs covering the circle once around.

    Arcs are (start, end) in turns with 0 <= start < 1 and length < 1,
    sorted by start; consecutive arcs (and the last with the first) must
    overlap in a single component.  centers, when present, are exact
    points (cos, sin) on the unit circle used as trig bump apexes for
    gluing; exponent is the bump power.
    """

    chart: Chart
    arcs: tuple
    centers: tuple
    exponent: int

    def __post_init__(self):
        if self.chart.dim != 1 or not self.chart.periodic[0]:
            raise ValueError("a cover lives on a one-dimensional angle chart")
        if len(self.arcs) < 3:
            raise ValueError("need at least three arcs")
        for s, e in self.arcs:
            if not (0 <= s < 1):
                raise ValueError("arc starts must lie in [0, 1)")
            if not (s < e < s + 1):
                raise ValueError("arcs must be nonempty and shorter than "
                                 "a full turn")
        starts = [s for s, _ in self.arcs]
        if sorted(starts) != starts or len(set(starts)) != len(starts):
            raise ValueError("arcs must be sorted by distinct starts")
        n = len(self.arcs)
        for i in range(n):
            if self.overlap(i, (i + 1) % n) is None:
                raise ValueError(f"arcs {i} and {(i + 1) % n} do not meet")
        for i in range(n):
            for j in range(i + 2, n):
                self.overlap(i, j)  # rejects two-component intersections
        if self.centers is not None:
            if len(self.centers) != n:
                raise ValueError("one bump center per arc")
            for i, (c, s) in enumerate(self.centers):
                if c * c + s * s != 1:
                    raise ValueError("bump centers must lie on the unit "
                                     "circle exactly")
                if not self._contains(i, _angle_turn(c, s)):
                    raise ValueError(f"center {i} is outside its arc")
            if len(set(self.centers)) != n:
                raise ValueError("bump centers must be distinct")
            if self.exponent < 1:
                raise ValueError("bump exponent must be positive")

    @property
    def n(self) -> int:
        return len(self.arcs)

    def _contains(self, i: int, turn: float) -> bool:
        s, e = self.arcs[i]
        u = turn - math.floor(turn)
        return s < u < e or s < u + 1 < e

    def overlap(self, i: int, j: int):
        """The common window in turns, or None; the representative sits
        inside arc j's interval.  Two-component intersections are
        rejected outright."""
        if i == j:
            return self.arcs[i]
        si, ei = self.arcs[i]
        sj, ej = self.arcs[j]
        found = None
        for shift in (Fraction(-1), Fraction(0), Fraction(1)):
            lo, hi = max(si + shift, sj), min(ei + shift, ej)
            if lo < hi:
                if found is not None:
                    raise ValueError(f"arcs {i} and {j} meet in two "
                                     "components")
                found = (lo, hi)
        return found

    def complete(self) -> bool:
        return all(self.overlap(i, j) is not None
                   for i in range(self.n) for j in range(i + 1, self.n))

    def triple_meets(self, i: int, j: int, k: int) -> bool:
        si, ei = self.arcs[i]
        for a in (-1, 0, 1):
            sj, ej = self.arcs[j][0] + a, self.arcs[j][1] + a
            for b in (-1, 0, 1):
                sk, ek = self.arcs[k][0] + b, self.arcs[k][1] + b
                if max(si, sj, sk) < min(ei, ej, ek):
                    return True
        return False

    def lift(self, i: int, turn: Fraction) -> Fraction:
        """Translate of turn by whole turns landing inside arc i."""
        s, e = self.arcs[i]
        for shift in (Fraction(-1), Fraction(0), Fraction(1)):
            if s <= turn + shift <= e:
                return turn + shift
        raise ValueError(f"{turn} does not lift into arc {i}")

    def anchor(self, i: int) -> Fraction:
        s, e = self.arcs[i]
        return (s + e) / 2

    def seam_windows(self):
        """Forward seam after each arc; the wrap seam is shifted down so
        it sits just above arc 0's start."""
        wins = []
        for i in range(self.n):
            lo, hi = self.overlap(i, (i + 1) % self.n)
            if lo >= 1:
                lo, hi = lo - 1, hi - 1
            wins.append((lo, hi))
        return wins

    def domains(self):
        """Per-arc integration windows between consecutive seam midpoints;
        they tile one full turn."""
        wins = self.seam_windows()
        mids = [(lo + hi) / 2 for lo, hi in wins]
        out = [(0, mids[-1], mids[0])]
        for i in range(1, self.n):
            hi = mids[i] if i < self.n - 1 else mids[-1] + 1
            out.append((i, mids[i - 1], hi))
        return out

    def bump_fields(self):
        """Trig bumps (1 + cos(x - center))^exponent and their sum; exact
        and strictly positive since the centers are distinct."""
        if self.centers is None:
            raise ValueError("this cover carries no bump centers")
        name = self.chart.names[0]
        bumps = []
        for c, s in self.centers:
            base = (self.chart.const(1) + self.chart.cos(name) * c
                    + self.chart.sin(name) * s)
            bumps.append(base ** self.exponent)
        total = bumps[0]
        for b in bumps[1:]:
            total = total + b
        return bumps, total

    def tail_masses(self):
        """Fraction of each normalized bump's mass lying outside its arc."""
        bumps, total = self.bump_fields()
        masses = []
        for i, b in enumerate(bumps):
            lam = _FieldEval(b)
            tot = _FieldEval(total)
            s, e = (float(x) * _TAU for x in self.arcs[i])

            def f(x):
                return lam(x) / tot(x)

            inside, _ = quad(f, s, e, limit=200)
            whole, _ = quad(f, s, s + _TAU, limit=200)
            masses.append(max(0.0, (whole - inside) / whole))
        return tuple(masses)

    def stray_seam_weight(self, samples: int = 50) -> float:
        """Largest weight any non-adjacent bump reaches inside a seam
        window; this is what bounds the gluing error of the pieces."""
        bumps, total = self.bump_fields()
        evs = [_FieldEval(b) for b in bumps]
        tot = _FieldEval(total)
        worst = 0.0
        for i, (lo, hi) in enumerate(self.seam_windows()):
            adjacent = {i, (i + 1) % self.n}
            for s in range(samples + 1):
                x = float(lo + (hi - lo) * Fraction(s, samples)) * _TAU
                t = tot(x)
                for g in range(self.n):
                    if g not in adjacent:
                        worst = max(worst, evs[g](x) / t)
        return worst


def _angle_turn(c: Fraction, s: Fraction) -> float:
    return math.atan2(float(s), float(c)) / _TAU % 1.0


def make_cover(chart: Chart, arcs, centers=None, exponent: int = 5) -> Cover:
    arcs = tuple((Fraction(s), Fraction(e)) for s, e in arcs)
    if centers is not None:
        centers = tuple((Fraction(c), Fraction(s)) for c, s in centers)
    return Cover(chart, arcs, centers, exponent)


def three_arc_cover(chart: Chart = None) -> Cover:
    """Three arcs whose bump centers are rational unit-circle points
    roughly antipodal to the opposite seams, keeping off-arc tails at
    the 1e-9 scale for exponent 5."""
    if chart is None:
        chart = Chart(("x",), (True,))
    arcs = [(Fraction(73, 288), Fraction(397, 576)),
            (Fraction(349, 576), Fraction(574, 576)),
            (Fraction(263, 288), Fraction(385, 288))]
    centers = [(Fraction(-24, 25), Fraction(7, 25)),
               (Fraction(7, 25), Fraction(-24, 25)),
               (Fraction(3, 5), Fraction(4, 5))]
    return make_cover(chart, arcs, centers)


# --- fast pointwise evaluation ----------------------------------------------


class _FieldEval:
    """Float evaluator with coefficients converted once; handles trig
    polynomials and their certified quotients on a periodic chart."""

    def __init__(self, field):
        if isinstance(field, RationalField):
            self.num = self._compile(field.num)
            self.den = self._compile(field.den)
        else:
            self.num = self._compile(field)
            self.den = None

    @staticmethod
    def _compile(field: ScalarField):
        out = []
        for t in field.terms:
            if any(t.mono):
                raise ValueError("monomial terms have no place on a circle")
            kind = 0 if t.kind == "one" else (1 if t.kind == "cos" else 2)
            out.append((float(t.coeff), kind, float(t.freq[0])))
        return out

    @staticmethod
    def _ev(terms, x):
        s = 0.0
        for c, kind, f in terms:
            if kind == 0:
                s += c
            elif kind == 1:
                s += c * math.cos(f * x)
            else:
                s += c * math.sin(f * x)
        return s

    def __call__(self, x: float) -> float:
        v = self._ev(self.num, x)
        if self.den is None:
            return v
        return v / self._ev(self.den, x)


# --- cocycles ----------------------------------------------------------------


class CocycleExtractionError(RuntimeError):
    """Seam constancy or cocycle-law residual exceeded the tolerance."""

    def __init__(self, message: str, deviation: float):
        super().__init__(message)
        self.deviation = deviation


@dataclass(frozen=True)
class Cocycle:
    """Locally constant transition jets over a cover's overlaps.

    arrows holds every ordered overlapping pair (i, j) with i != j; the
    diagonal is the identity.  kind is "exact" (GroupoidArrow entries,
    laws verified exactly) or "numeric" (HolonomyJet entries, laws
    verified within the recorded residual).
    """

    cover: Cover
    order: int
    kind: str
    arrows: tuple
    law_residual: float

    def arrow(self, i: int, j: int):
        if i == j:
            if self.kind == "exact":
                return identity_arrow(1, self.order, (0,))
            return HolonomyJet.identity(self.order)
        for key, a in self.arrows:
            if key == (i, j):
                return a
        raise KeyError((i, j))

    def pairs(self):
        return [key for key, _ in self.arrows]


def exact_arrow(order: int, coeffs: dict) -> GroupoidArrow:
    """Arrow of the one-dimensional jet groupoid at the origin with the
    given exact coefficients {exponent: value}; the linear one must be
    present and positive."""
    jet = make_jet(1, order, (0,),
                   {(m,): Fraction(c) for m, c in coeffs.items()})
    return make_arrow([jet])


def _is_exact(a) -> bool:
    return isinstance(a, GroupoidArrow)


def _jet_coeffs(a, order: int):
    if _is_exact(a):
        return [float(a.components[0].coefficient((m,)))
                for m in range(1, order + 1)]
    return list(a.coeffs)


def _as_holonomy(a, order: int) -> HolonomyJet:
    if isinstance(a, HolonomyJet):
        return a
    return HolonomyJet(order, tuple(_jet_coeffs(a, order)), (0.0,) * order)


def _jet_deviation(a: HolonomyJet, b: HolonomyJet) -> float:
    return max(abs(x - y) / _floored(x)
               for x, y in zip(a.coeffs, b.coeffs))


def make_cocycle(cover: Cover, arrows: dict, tol: float = 1e-8) -> Cocycle:
    """Validate and close up transition data given on overlapping pairs.

    Missing reverse arrows are filled by inversion; supplied ones must
    satisfy the inverse law, and wherever three arcs share points the
    triple law c_kj = c_ki o c_ij must hold, exactly for exact entries
    and within tol (relative, floored at 1) otherwise.
    """
    if not arrows:
        raise ValueError("no transition arrows given")
    exact = all(_is_exact(a) for a in arrows.values())
    if not exact and any(_is_exact(a) for a in arrows.values()):
        raise TypeError("transition arrows must be all exact or all numeric")
    orders = {a.order for a in arrows.values()}
    if len(orders) != 1:
        raise ValueError("transition arrows must share one order")
    order = orders.pop()
    full = {}
    for (i, j), a in arrows.items():
        if i == j or not (0 <= i < cover.n and 0 <= j < cover.n):
            raise ValueError(f"bad arc pair {(i, j)}")
        if cover.overlap(i, j) is None:
            raise ValueError(f"arcs {i} and {j} do not meet")
        if _is_exact(a):
            if a.k != 1 or a.source != (0,) or a.target != (0,):
                raise ValueError("transition arrows live on the fiber "
                                 "origin with one jet component")
            if a.components[0].coefficient((1,)) <= 0:
                raise ValueError("transition jets must preserve the fiber "
                                 "orientation")
        full[(i, j)] = a
    residual = 0.0
    for (i, j), a in list(full.items()):
        inv = arrow_invert(a) if exact else jet_invert(a)
        if (j, i) not in full:
            full[(j, i)] = inv
        elif exact:
            if full[(j, i)] != inv:
                raise ValueError(f"arrows {(i, j)} and {(j, i)} are not "
                                 "inverse")
        else:
            residual = max(residual, _jet_deviation(full[(j, i)], inv))
    for i, j in list(full):
        for k in range(cover.n):
            if k in (i, j) or (k, i) not in full or (k, j) not in full:
                continue
            # the law binds only where all three arcs share points
            if not cover.triple_meets(i, j, k):
                continue
            composed = (arrow_compose(full[(i, j)], full[(k, i)]) if exact
                        else jet_compose(full[(i, j)], full[(k, i)]))
            if exact:
                if composed != full[(k, j)]:
                    raise ValueError(f"triple law fails on ({k}, {i}, {j})")
            else:
                residual = max(residual,
                               _jet_deviation(full[(k, j)], composed))
    if not exact and residual > tol:
        raise CocycleExtractionError(
            f"cocycle law residual {residual:.3e} exceeds {tol:.3e}",
            residual)
    ordered = tuple(sorted(full.items()))
    return Cocycle(cover, order, "exact" if exact else "numeric",
                   ordered, residual)


def coboundary_transform(c: Cocycle, sections) -> Cocycle:
    """Replace every arrow by d_i o c_ij o d_j^{-1} for per-arc constants
    d; the class is unchanged."""
    if len(sections) != c.cover.n:
        raise ValueError("one section per arc")
    if c.kind == "exact" and not all(_is_exact(d) for d in sections):
        raise TypeError("an exact cocycle needs exact sections")
    out = {}
    for (i, j), a in c.arrows:
        if i < j:
            if c.kind == "exact":
                di, dj = sections[i], sections[j]
                out[(i, j)] = arrow_compose(
                    arrow_compose(arrow_invert(dj), a), di)
            else:
                di = _as_holonomy(sections[i], c.order)
                dj = _as_holonomy(sections[j], c.order)
                out[(i, j)] = jet_compose(jet_compose(jet_invert(dj), a), di)
    return make_cocycle(c.cover, out,
                        tol=max(1e-8, c.law_residual * 10 + 1e-12))


# --- extraction ---------------------------------------------------------------


def _cord_evaluators(a, cover: Cover, order: int):
    """Per-arc coefficient evaluators for the t^m dx components."""
    if isinstance(a, ReconstructedCord):
        if a.cover.arcs != cover.arcs:
            raise ValueError("piecewise cord and cover disagree on arcs")
        return [[_FieldEval(p.coefficient(0, (m,)).component((0,)))
                 for m in range(1, order + 1)] for p in a.pieces]
    if not is_impotent(a):
        raise ValueError("extraction requires an impotent cord")
    if a.chart.dim != 1 or not a.chart.periodic[0]:
        raise ValueError("extraction lives on a one-dimensional angle chart")
    row = [_FieldEval(a.coefficient(0, (m,)).component((0,)))
           for m in range(1, order + 1)]
    return [row] * cover.n


def _section_rhs(funs, order: int):
    """Right side of the section system dY = -Y' . A, coefficientwise
    dy_m/dx = -sum_{j<=m} (m - j + 1) y_{m-j+1} a_j(x)."""

    def f(x, y):
        a = [g(x) for g in funs]
        out = []
        for m in range(1, order + 1):
            s = 0.0
            for j in range(1, m + 1):
                s += (m - j + 1) * y[m - j] * a[j - 1]
            out.append(-s)
        return out

    return f


def _rk4(f, y, x0: float, x1: float, nsteps: int):
    h = (x1 - x0) / nsteps
    for i in range(nsteps):
        x = x0 + i * h
        k1 = f(x, y)
        k2 = f(x + h / 2, [u + h / 2 * v for u, v in zip(y, k1)])
        k3 = f(x + h / 2, [u + h / 2 * v for u, v in zip(y, k2)])
        k4 = f(x + h, [u + h * v for u, v in zip(y, k3)])
        y = [u + h / 6 * (a + 2 * b + 2 * c + d)
             for u, a, b, c, d in zip(y, k1, k2, k3, k4)]
    return y


def _section_at(rhs, order: int, anchor: float, x: float, step: float):
    y = [1.0] + [0.0] * (order - 1)
    if x != anchor:
        y = _rk4(rhs, y, anchor, x, _ceil_steps(x - anchor, _TAU * step))
    return HolonomyJet(order, tuple(y), (0.0,) * order)


def extract_cocycle(a, cover: Cover, tolerance: float = 1e-6,
                    step: float = 5e-4) -> Cocycle:
    """Transition jets of an impotent cord over the cover.

    The anchored section is integrated from each arc midpoint to sample
    points of every overlap; the sampled products Y_i o Y_j^{-1} must be
    constant within tolerance (relative, floored at 1) or the extraction
    is rejected with the worst deviation attached.
    """
    order = a.order
    evals = _cord_evaluators(a, cover, order)
    rhs = [_section_rhs(row, order) for row in evals]
    anchors = [float(cover.anchor(i)) * _TAU for i in range(cover.n)]
    arrows = {}
    worst = 0.0
    for i in range(cover.n):
        for j in range(i + 1, cover.n):
            win = cover.overlap(i, j)
            if win is None:
                continue
            lo, hi = win
            samples = []
            for s in range(1, _SEAM_SAMPLES + 1):
                u = lo + (hi - lo) * Fraction(s, _SEAM_SAMPLES + 1)
                xi = float(cover.lift(i, u)) * _TAU
                xj = float(cover.lift(j, u)) * _TAU
                yi = _section_at(rhs[i], order, anchors[i], xi, step)
                yj = _section_at(rhs[j], order, anchors[j], xj, step)
                samples.append(jet_compose(jet_invert(yj), yi))
            mean = [sum(s.coeffs[m] for s in samples) / len(samples)
                    for m in range(order)]
            spread = [max(abs(s.coeffs[m] - mean[m]) for s in samples)
                      for m in range(order)]
            worst = max(worst, max(sp / _floored(mu)
                                   for sp, mu in zip(spread, mean)))
            arrows[(i, j)] = HolonomyJet(order, tuple(mean), tuple(spread))
    if worst > tolerance:
        raise CocycleExtractionError(
            f"overlap constancy deviation {worst:.3e} exceeds "
            f"{tolerance:.3e}", worst)
    return make_cocycle(cover, arrows, tol=tolerance)


# --- reconstruction -----------------------------------------------------------


class _DenFrac:
    """num / (U^a T^b) with a fixed pair of positive trig denominators."""

    __slots__ = ("num", "a", "b")

    def __init__(self, num: ScalarField, a: int = 0, b: int = 0):
        self.num, self.a, self.b = num, a, b


class _DenFamily:
    """Arithmetic for _DenFrac over one arc's denominators U and T;
    keeping the denominators monomial is what makes exact gluing
    affordable at useful orders."""

    def __init__(self, U: ScalarField, T: ScalarField):
        self.U, self.T = U, T
        self.Ud, self.Td = U.partial(U.chart.names[0]), \
            T.partial(T.chart.names[0])
        self._pU = [U.chart.const(1), U]
        self._pT = [T.chart.const(1), T]

    def _pow(self, cache, base, n):
        while len(cache) <= n:
            cache.append(cache[-1] * base)
        return cache[n]

    def pow_u(self, n):
        return self._pow(self._pU, self.U, n)

    def pow_t(self, n):
        return self._pow(self._pT, self.T, n)

    def mul(self, f, g):
        return _DenFrac(f.num * g.num, f.a + g.a, f.b + g.b)

    def add(self, f, g):
        a, b = max(f.a, g.a), max(f.b, g.b)
        nf = f.num * self.pow_u(a - f.a) * self.pow_t(b - f.b)
        ng = g.num * self.pow_u(a - g.a) * self.pow_t(b - g.b)
        return _DenFrac(nf + ng, a, b)

    def deriv(self, f):
        n = (f.num.partial(self.U.chart.names[0]) * self.U * self.T
             - f.num * (self.Ud * self.T * f.a + self.U * self.Td * f.b))
        return _DenFrac(n, f.a + 1, f.b + 1)

    def to_field(self, f) -> RationalField:
        return RationalField.ratio(f.num, self.pow_u(f.a) * self.pow_t(f.b),
                                   certified=True)


def _series_mul(fam, A: dict, B: dict, order: int) -> dict:
    out = {}
    for i, fa in A.items():
        for j, fb in B.items():
            if i + j <= order:
                t = fam.mul(fa, fb)
                out[i + j] = fam.add(out[i + j], t) if i + j in out else t
    return out


def _series_powers(fam, A: dict, order: int) -> list:
    powers = [A]
    for _ in range(order - 1):
        powers.append(_series_mul(fam, powers[-1], A, order))
    return powers


def _series_reversion(fam, W: dict, order: int) -> dict:
    """Z with Z(W(t)) = t through order; W[1] = U/T so 1/w1 = T/U stays
    in the family."""
    powers = _series_powers(fam, W, order)
    Z = {1: _DenFrac(fam.pow_t(2), 1, 1)}
    for j in range(2, order + 1):
        acc = None
        for n in range(1, j):
            pj = powers[n - 1].get(j)
            if pj is None or n not in Z:
                continue
            t = fam.mul(Z[n], pj)
            acc = t if acc is None else fam.add(acc, t)
        if acc is not None:
            Z[j] = _DenFrac(-(acc.num * fam.pow_t(j)), acc.a + j, acc.b)
    return Z


def _series_compose(fam, outer: dict, inner: dict, order: int) -> dict:
    powers = _series_powers(fam, inner, order)
    out = {}
    for j, fo in outer.items():
        for m, p in powers[j - 1].items():
            t = fam.mul(fo, p)
            out[m] = fam.add(out[m], t) if m in out else t
    return out


@dataclass(frozen=True)
class ReconstructedCord:
    """Glued local cords over a cover.

    cord is the single global cord when the pieces coincide exactly
    (equivalent to the cocycle being a coboundary) and None otherwise;
    seam_gap is the largest sampled coefficient disagreement across
    overlaps, stray_weight the non-adjacent partition weight inside the
    seam windows that drives it, and tail_masses the per-bump off-arc
    mass fractions.
    """

    cover: Cover
    order: int
    pieces: tuple
    cord: QuantumCord
    seam_gap: float
    stray_weight: float
    tail_masses: tuple

    def is_glued(self) -> bool:
        return self.cord is not None


def reconstruct_cord(c: Cocycle, order: int = None) -> ReconstructedCord:
    """Glue an exact cocycle on a complete cover into local cords.

    Over arc i the inverse section W = sum_g lam_g c_gi has trig-rational
    coefficients; its cord dW o W^{-1} is computed in a common-denominator
    series family, which is exact at every stored index.  The pieces are
    flat outright: a one-dimensional chart carries no 2-forms.
    """
    if c.kind != "exact":
        raise TypeError("gluing needs exact transition arrows; numeric "
                        "cocycles only support class and monodromy queries")
    cover = c.cover
    if not cover.complete():
        raise ValueError("gluing needs every pair of arcs to meet: the "
                         "partition weights have full support")
    if cover.centers is None:
        raise ValueError("gluing needs bump centers on the cover")
    if order is None:
        order = c.order
    if order > c.order:
        raise ValueError("cannot glue above the cocycle's order")
    chart = cover.chart
    bumps, total = cover.bump_fields()
    pieces = []
    for al in range(cover.n):
        u = {}
        for m in range(1, order + 1):
            num = None
            for g in range(cover.n):
                cm = c.arrow(g, al).components[0].coefficient((m,))
                if cm:
                    t = bumps[g] * cm
                    num = t if num is None else num + t
            if num is not None and num.terms:
                u[m] = num
        fam = _DenFamily(u[1], total)
        W = {m: _DenFrac(num, 0, 1) for m, num in u.items()}
        Z = _series_reversion(fam, W, order)
        dW = {m: fam.deriv(f) for m, f in W.items()}
        A = _series_compose(fam, dW, Z, order)
        forms = [Form.zero(chart, 1)]
        for m in range(1, order + 1):
            if m in A:
                field = fam.to_field(A[m])
                forms.append(Form.build(chart, 1, {(0,): field}))
            else:
                forms.append(Form.zero(chart, 1))
        jf = cord_coefficients(chart, order, forms)
        # no 2-forms on a one-dimensional chart: flatness is structural
        pieces.append(QuantumCord(jf.chart, 1, order, 1, jf.source,
                                  jf.comps, order))
    glued = all(jetforms_equal(pieces[0], p) for p in pieces[1:])
    gap = 0.0
    if not glued:
        for i in range(cover.n):
            for j in range(i + 1, cover.n):
                win = cover.overlap(i, j)
                if win is None:
                    continue
                lo, hi = win
                for m in range(1, order + 1):
                    fi = _FieldEval(pieces[i].coefficient(0, (m,))
                                    .component((0,)))
                    fj = _FieldEval(pieces[j].coefficient(0, (m,))
                                    .component((0,)))
                    for s in range(1, _SEAM_SAMPLES + 1):
                        x = float(lo + (hi - lo)
                                  * Fraction(s, _SEAM_SAMPLES + 1)) * _TAU
                        gap = max(gap, abs(fi(x) - fj(x)))
    return ReconstructedCord(cover, order, tuple(pieces),
                             pieces[0] if glued else None, gap,
                             cover.stray_seam_weight(), cover.tail_masses())


def reconstructed_monodromy(rec: ReconstructedCord, step: float = 1e-3,
                            refine: bool = True) -> HolonomyJet:
    """Once-around transport of the glued pieces, each integrated over
    its window between seam midpoints; refinement runs a half step and
    combines the two fourth-order results."""

    def run(h):
        acc = None
        for piece, lo, hi in rec.cover.domains():
            funs = [_FieldEval(rec.pieces[piece].coefficient(0, (m,))
                               .component((0,)))
                    for m in range(1, rec.order + 1)]
            x0, x1 = float(lo) * _TAU, float(hi) * _TAU

            def fv(t, x0=x0, x1=x1, funs=funs):
                x = x0 + t * (x1 - x0)
                return [f(x) * (x1 - x0) for f in funs]

            acc = integrate_jet_ode(fv, rec.order,
                                    _ceil_steps(x1 - x0, _TAU * h), init=acc)
        return acc

    coarse = run(step)
    if not refine:
        return HolonomyJet(rec.order, tuple(coarse), (0.0,) * rec.order)
    fine = run(step / 2)
    combined = tuple((16 * f - c) / 15 for f, c in zip(fine, coarse))
    errs = tuple(abs(f - c) / 15 for f, c in zip(fine, coarse))
    return HolonomyJet(rec.order, combined, errs)


# --- classes ------------------------------------------------------------------


def full_loop_product(c: Cocycle) -> HolonomyJet:
    """Ordered product of the forward transitions once around the cover:
    the factor into arc i+1 is applied after everything accumulated so
    far, and the wrap factor closes the loop."""
    acc = HolonomyJet.identity(c.order)
    for i in range(c.cover.n):
        factor = _as_holonomy(c.arrow((i + 1) % c.cover.n, i), c.order)
        acc = jet_compose(acc, factor)
    return acc


@dataclass(frozen=True)
class HaefligerClass:
    """Holonomy germs up to joint jet conjugacy; rank 1 for circle
    covers, rank 2 for a pair of commuting torus generators."""

    generators: tuple

    def __post_init__(self):
        if len(self.generators) not in (1, 2):
            raise ValueError("a class carries one or two generators")
        orders = {g.order for g in self.generators}
        if len(orders) != 1:
            raise ValueError("generators must share one order")
        if len(self.generators) == 2:
            g, h = self.generators
            gh, hg = jet_compose(g, h), jet_compose(h, g)
            dev = _jet_deviation(gh, hg)
            if dev > 1e-6:
                raise ValueError(f"generators do not commute "
                                 f"(residual {dev:.3e})")

    @property
    def rank(self) -> int:
        return len(self.generators)

    @property
    def order(self) -> int:
        return self.generators[0].order


def haefliger_class(c) -> HaefligerClass:
    """Class of a cocycle (its full-loop product) or of holonomy jets
    given directly."""
    if isinstance(c, Cocycle):
        return HaefligerClass((full_loop_product(c),))
    if isinstance(c, HolonomyJet):
        return HaefligerClass((c,))
    return HaefligerClass(tuple(c))


def _compose_coeffs(a, b):
    """Coefficients of b(a(t)) for plain float lists without constants."""
    n = len(a)
    powers = [list(a)]
    for _ in range(n - 1):
        prev, nxt = powers[-1], [0.0] * n
        for i, ca in enumerate(prev):
            if ca:
                for j, cb in enumerate(a):
                    if i + j + 1 < n:
                        nxt[i + j + 1] += ca * cb
        powers.append(nxt)
    out = [0.0] * n
    for j, cb in enumerate(b):
        if cb:
            for m, cp in enumerate(powers[j]):
                out[m] += cb * cp
    return out


def _conjugacy_residual(w, g, h):
    left = _compose_coeffs(g, w)
    right = _compose_coeffs(w, h)
    floor = max(1.0, max(abs(x) for x in left))
    return max(abs(x - y) for x, y in zip(left, right)) / floor


def conjugating_arrow(g: HolonomyJet, h: HolonomyJet,
                      tol: float = 1e-8) -> HolonomyJet:
    """Orientation-preserving w with w o g = h o w, or None.

    Solved greedily order by order: away from resonance the pivot is w_m
    with factor g1^m - g1; at g1 = 1 the leading nonlinear coefficients
    fix w1 by a real root and each later order pins the next unknown
    through the probe below.  Orders whose residual admits no pivot are
    obstructions and decide non-conjugacy.
    """
    if g.order != h.order:
        raise ValueError("jets must share one order")
    n = g.order
    gc, hc = list(g.coeffs), list(h.coeffs)
    scale = max(1.0, max(map(abs, gc)), max(map(abs, hc)))
    if abs(gc[0] - hc[0]) > tol * scale:
        return None
    w = [0.0] * n

    def residual_at(m):
        return (_compose_coeffs(gc, w)[m] - _compose_coeffs(w, hc)[m])

    if abs(gc[0] - 1.0) > tol * scale:
        w[0] = 1.0
    else:
        p = None
        for m in range(1, n):
            big_g = abs(gc[m]) > tol * scale
            big_h = abs(hc[m]) > tol * scale
            if big_g or big_h:
                if not (big_g and big_h):
                    return None
                p = m
                break
        if p is None:
            return HolonomyJet.identity(n)
        ratio = gc[p] / hc[p]
        if ratio <= 0:
            return None  # would need an orientation-reversing conjugator
        w[0] = ratio ** (1.0 / p)
    pinned = [True] + [False] * (n - 1)
    for m in range(1, n):
        r = residual_at(m)
        pivot = None
        for j in range(m, 0, -1):
            if pinned[j]:
                continue
            w[j] += 1.0
            coef = residual_at(m) - r
            w[j] -= 1.0
            if abs(coef) > 1e-7 * scale:
                pivot = (j, coef)
                break
        if pivot is None:
            if abs(r) > tol * max(scale, max(map(abs, w))):
                return None
            continue
        j, coef = pivot
        w[j] -= r / coef
        pinned[j] = True
    if _conjugacy_residual(w, gc, hc) > tol:
        return None
    return HolonomyJet(n, tuple(w), (0.0,) * n)


def _is_identity_jet(g: HolonomyJet, tol: float) -> bool:
    target = (1.0,) + (0.0,) * (g.order - 1)
    return all(abs(a - b) <= tol * _floored(a)
               for a, b in zip(g.coeffs, target))


def classes_equal(a: HaefligerClass, b: HaefligerClass,
                  tol: float = 1e-6) -> bool:
    """Joint conjugacy of the generator tuples.

    For rank 2 a conjugator of one non-identity pair settles the other:
    any two solutions differ by a centralizer element, and the second
    generator commutes with the first, so it is fixed by that element.
    """
    if a.rank != b.rank or a.order != b.order:
        return False
    if a.rank == 1:
        return conjugating_arrow(a.generators[0], b.generators[0],
                                 tol) is not None
    ids_a = [_is_identity_jet(g, tol) for g in a.generators]
    ids_b = [_is_identity_jet(g, tol) for g in b.generators]
    if ids_a != ids_b:
        return False
    live = [i for i in range(2) if not ids_a[i]]
    if not live:
        return True
    lead = live[0]
    w = conjugating_arrow(a.generators[lead], b.generators[lead], tol)
    if w is None:
        return False
    for i in live[1:]:
        if _conjugacy_residual(list(w.coeffs), list(a.generators[i].coeffs),
                               list(b.generators[i].coeffs)) > tol:
            return False
    return True


# --- roundtrip and pipeline comparison ----------------------------------------


def roundtrip_class(c: Cocycle, tolerance: float = 1e-6,
                    step: float = 5e-4) -> dict:
    """Glue an exact cocycle, re-extract transitions from the pieces and
    compare the full-loop products up to conjugacy."""
    rec = reconstruct_cord(c)
    back = extract_cocycle(rec, c.cover, tolerance=tolerance, step=step)
    inp = full_loop_product(c)
    out = full_loop_product(back)
    w = conjugating_arrow(inp, out, tol=max(tolerance, 1e-8))
    residual = (None if w is None else
                _conjugacy_residual(list(w.coeffs), list(inp.coeffs),
                                    list(out.coeffs)))
    return {
        "input_product": list(inp.coeffs),
        "roundtrip_product": list(out.coeffs),
        "linear_rel_err": abs(inp.linear - out.linear) / abs(inp.linear),
        "same_class": w is not None,
        "conjugacy_residual": residual,
        "glued_exactly": rec.is_glued(),
        "seam_gap": rec.seam_gap,
        "stray_weight": rec.stray_weight,
        "tail_masses": list(rec.tail_masses),
    }


def _smoothstep(t: float):
    if t <= 0.0:
        return 0.0, 0.0
    if t >= 1.0:
        return 1.0, 0.0
    return ((6 * t - 15) * t + 10) * t ** 3, ((30 * t - 60) * t + 30) * t ** 2


def _float_reversion(w):
    n = len(w)
    powers = [list(w)]
    for _ in range(n - 1):
        prev, nxt = powers[-1], [0.0] * n
        for i, ca in enumerate(prev):
            if ca:
                for j, cb in enumerate(w):
                    if i + j + 1 < n:
                        nxt[i + j + 1] += ca * cb
        powers.append(nxt)
    z = [0.0] * n
    z[0] = 1.0 / w[0]
    for j in range(1, n):
        s = sum(z[nn - 1] * powers[nn - 1][j] for nn in range(1, j + 1))
        z[j] = -s / w[0] ** (j + 1)
    return z


def _smooth_weight_cord(c: Cocycle, order: int):
    """Pointwise cord coefficients of the gluing with polynomial ramp
    weights confined to the seam windows; the weights vanish identically
    off their arcs, so the pieces agree exactly and adjacent transitions
    suffice."""
    cover = c.cover
    wins = cover.seam_windows()
    cf = {}
    for i in range(cover.n):
        for g in ((i - 1) % cover.n, i, (i + 1) % cover.n):
            cf[(g, i)] = _jet_coeffs(c.arrow(g, i), order)

    def field(piece, u):
        lo, hi = wins[(piece - 1) % cover.n]
        rp, rpd = _smoothstep((u - float(lo)) / float(hi - lo))
        rpd /= float(hi - lo)
        lo2, hi2 = wins[piece]
        if piece == cover.n - 1:
            lo2, hi2 = lo2 + 1, hi2 + 1  # wrap seam closes the turn
        rn, rnd = _smoothstep((u - float(lo2)) / float(hi2 - lo2))
        rnd /= float(hi2 - lo2)
        lam = {(piece - 1) % cover.n: (1 - rp, -rpd),
               piece: (rp * (1 - rn), rpd * (1 - rn) - rp * rnd),
               (piece + 1) % cover.n: (rn, rnd)}
        w = [0.0] * order
        wd = [0.0] * order
        for g, (lv, ld) in lam.items():
            cg = cf[(g, piece)]
            for m in range(order):
                w[m] += lv * cg[m]
                wd[m] += ld * cg[m] / _TAU
        z = _float_reversion(w)
        return _compose_coeffs(z, wd)

    return field


def _smooth_monodromy(c: Cocycle, order: int, step: float) -> HolonomyJet:
    cover = c.cover
    field = _smooth_weight_cord(c, order)
    wins = cover.seam_windows()
    acc = None
    for piece, lo, hi in cover.domains():
        pw = wins[(piece - 1) % cover.n]
        nw = wins[piece]
        if piece == cover.n - 1:
            nw = (nw[0] + 1, nw[1] + 1)
        # the ramps are only piecewise polynomial: break at window edges
        cuts = [lo] + [x for x in (pw[1], nw[0]) if lo < x < hi] + [hi]
        for s0, s1 in zip(cuts, cuts[1:]):
            x0, x1 = float(s0) * _TAU, float(s1) * _TAU

            def fv(t, s0=s0, s1=s1, x0=x0, x1=x1, piece=piece):
                u = float(s0) + t * float(s1 - s0)
                return [y * (x1 - x0) for y in field(piece, u)]

            acc = integrate_jet_ode(fv, order,
                                    _ceil_steps(x1 - x0, _TAU * step),
                                    init=acc)
    return HolonomyJet(order, tuple(acc), (0.0,) * order)


def bump_model_report(c: Cocycle, step: float = 1e-3) -> dict:
    """Compare the trig-bump gluing against smoothstep weights with
    exact compact support.

    Trig weights keep every coefficient an exact trig rational at the
    price of off-arc tails; the polynomial ramps glue exactly but exist
    only pointwise in floats.  Both monodromies must be conjugate to the
    full-loop product; their residuals quantify the trade."""
    rec = reconstruct_cord(c)
    prod = full_loop_product(c)
    trig = reconstructed_monodromy(rec, step=step)
    smooth = _smooth_monodromy(c, c.order, step)
    wins = c.cover.seam_windows()
    field = _smooth_weight_cord(c, c.order)
    gap = 0.0
    for i in range(c.cover.n):
        lo, hi = wins[i]
        j = (i + 1) % c.cover.n
        for s in range(1, _SEAM_SAMPLES + 1):
            u = float(lo + (hi - lo) * Fraction(s, _SEAM_SAMPLES + 1))
            # the wrap window sits below the last piece's domain
            a = field(i, u + 1 if i == c.cover.n - 1 else u)
            b = field(j, u)
            gap = max(gap, max(abs(x - y) for x, y in zip(a, b)))

    def against(mono):
        w = conjugating_arrow(prod, mono, tol=1e-5)
        res = (None if w is None else
               _conjugacy_residual(list(w.coeffs), list(prod.coeffs),
                                   list(mono.coeffs)))
        return {"monodromy": list(mono.coeffs),
                "linear_rel_err": abs(mono.linear - prod.linear)
                / abs(prod.linear),
                "conjugate_to_product": w is not None,
                "conjugacy_residual": res}

    return {
        "product": list(prod.coeffs),
        "trig_weights": {**against(trig), "seam_gap": rec.seam_gap,
                         "stray_weight": rec.stray_weight,
                         "tail_masses": list(rec.tail_masses)},
        "smooth_weights": {**against(smooth), "seam_gap": gap},
    }
