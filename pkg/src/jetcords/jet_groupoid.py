"""Exact truncated power series in k variables and the groupoid of quantized
diffeomorphisms.

A jet is a formal power series based at a rational point, truncated at a fixed
total degree N.  Invertible k-tuples of jets with positive-determinant linear
part are the arrows of the quantum groupoid; composition is series
substitution, inner argument first.

All coefficients are exact rationals.  No floating point enters this module.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import gcd

Rational = Fraction

# A multi-index is a k-tuple of non-negative exponents.
MultiIndex = tuple


def mi_degree(index: MultiIndex) -> int:
    return sum(index)


@lru_cache(maxsize=None)
def graded_indices(k: int, order: int) -> tuple:
    """All multi-indices of degree <= order in graded-lexicographic order.

    Graded-lex is the repo's canonical ordering; nothing downstream depends
    on the choice beyond determinism.
    """
    by_degree: list[list[tuple]] = [[] for _ in range(order + 1)]

    def fill(prefix, remaining, slots):
        if slots == 0:
            idx = tuple(prefix)
            by_degree[order - remaining].append(idx)
            return
        for e in range(remaining + 1):
            fill(prefix + [e], remaining - e, slots - 1)

    # enumerate per degree to get the graded part of the order right
    out = []
    for d in range(order + 1):
        level = []

        def walk(prefix, left, slots):
            if slots == 1:
                level.append(tuple(prefix) + (left,))
                return
            for e in range(left, -1, -1):
                walk(prefix + [e], left - e, slots - 1)

        walk([], d, k)
        level.sort(reverse=True)
        out.extend(level)
    return tuple(out)


@lru_cache(maxsize=None)
def _tables(k: int, order: int):
    """Position table, product pair table and power-recursion splits.

    pairs: flat list of (pos_a, pos_b, pos_result) with deg(a)+deg(b) <= order.
    splits[pos]: (variable j, pos of I - e_j) for I != 0, used by the
    substitution kernel's power recursion.
    """
    indices = graded_indices(k, order)
    pos = {idx: p for p, idx in enumerate(indices)}
    pairs = []
    for pa, ia in enumerate(indices):
        da = mi_degree(ia)
        for pb, ib in enumerate(indices):
            if da + mi_degree(ib) > order:
                continue
            ic = tuple(a + b for a, b in zip(ia, ib))
            pairs.append((pa, pb, pos[ic]))
    splits = [None] * len(indices)
    for p, idx in enumerate(indices):
        if mi_degree(idx) == 0:
            continue
        j = next(i for i, e in enumerate(idx) if e > 0)
        prev = list(idx)
        prev[j] -= 1
        splits[p] = (j, pos[tuple(prev)])
    return indices, pos, tuple(pairs), tuple(splits)


# ---------------------------------------------------------------------------
# dense integer kernel
#
# A dense series is (nums, den): a list of integer numerators over the graded
# index list, sharing one positive denominator.  Sparse Fraction storage is
# converted to this form only inside the arithmetic kernels.
# ---------------------------------------------------------------------------


def _dense_normalize(nums, den):
    g = den
    for n in nums:
        if n:
            g = gcd(g, n)
            if g == 1:
                return nums, den
    if g > 1:
        nums = [n // g for n in nums]
        den //= g
    return nums, den


def _dense_mul(a, da, b, db, pairs, size):
    out = [0] * size
    for pa, pb, pc in pairs:
        na = a[pa]
        if na:
            nb = b[pb]
            if nb:
                out[pc] += na * nb
    return _dense_normalize(out, da * db)


def _dense_add_scaled(acc, dacc, term, dterm, num_scale, den_scale):
    """acc/dacc += (num_scale/den_scale) * term/dterm, exactly."""
    tden = dterm * den_scale
    g = gcd(dacc, tden)
    lhs = tden // g
    rhs = dacc // g
    nums = [n * lhs for n in acc]
    for p, t in enumerate(term):
        if t:
            nums[p] += t * num_scale * rhs
    return _dense_normalize(nums, dacc * lhs)


def _substitute(outer_dense, dev_dense, k, order):
    """Substitute deviation series (zero constant term) into outer series.

    outer_dense: list over components of (nums, den); dev_dense: k deviations.
    Returns list of (nums, den) in the same dense layout.
    """
    indices, _, pairs, splits = _tables(k, order)
    size = len(indices)
    unit = [0] * size
    unit[0] = 1
    powers: list = [(unit, 1)]
    for p in range(1, size):
        j, prev = splits[p]
        nums, den = _dense_mul(*powers[prev], *dev_dense[j], pairs, size)
        powers.append((nums, den))
    results = []
    for onums, oden in outer_dense:
        acc, dacc = [0] * size, 1
        for p, coeff in enumerate(onums):
            if coeff:
                acc, dacc = _dense_add_scaled(acc, dacc, *powers[p], coeff, oden)
        results.append((acc, dacc))
    return results


# ---------------------------------------------------------------------------
# jets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Jet:
    """Truncated power series based at a rational point.

    coeffs is a graded-lex sorted tuple of (multi-index, nonzero Fraction)
    pairs; canonical form makes equality structural.
    """

    k: int
    order: int
    basepoint: tuple
    coeffs: tuple

    def coefficient(self, index: MultiIndex) -> Fraction:
        for idx, c in self.coeffs:
            if idx == index:
                return c
        return Fraction(0)

    @property
    def constant_term(self) -> Fraction:
        return self.coefficient((0,) * self.k)

    def linear_part(self) -> list:
        """Row i of the k x k linear-coefficient matrix is d(self)/d t_i? No:
        entry [j] is the coefficient of (t_j - x_j)."""
        out = []
        for j in range(self.k):
            e = tuple(1 if i == j else 0 for i in range(self.k))
            out.append(self.coefficient(e))
        return out

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError("cannot extend a jet beyond its truncation order")
        kept = tuple((i, c) for i, c in self.coeffs if mi_degree(i) <= order)
        return Jet(self.k, order, self.basepoint, kept)

    def _dense(self):
        indices, pos, _, _ = _tables(self.k, self.order)
        den = 1
        for _, c in self.coeffs:
            den = den * c.denominator // gcd(den, c.denominator)
        nums = [0] * len(indices)
        for idx, c in self.coeffs:
            nums[pos[idx]] = c.numerator * (den // c.denominator)
        return nums, den

    def __add__(self, other):
        if isinstance(other, Jet):
            _check_match(self, other)
            merged = dict(self.coeffs)
            for idx, c in other.coeffs:
                merged[idx] = merged.get(idx, Fraction(0)) + c
            return make_jet(self.k, self.order, self.basepoint, merged)
        return self + constant_jet(self.k, self.order, self.basepoint, other)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.k, self.order, self.basepoint,
                   tuple((i, -c) for i, c in self.coeffs))

    def __sub__(self, other):
        if not isinstance(other, Jet):
            other = constant_jet(self.k, self.order, self.basepoint, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            return jet_mul(self, other)
        c = Fraction(other)
        return Jet(self.k, self.order, self.basepoint,
                   tuple((i, v * c) for i, v in self.coeffs if v * c != 0))

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative jet powers are not defined")
        result = constant_jet(self.k, self.order, self.basepoint, 1)
        for _ in range(n):
            result = jet_mul(result, self)
        return result


def make_jet(k: int, order: int, basepoint, coeffs) -> Jet:
    """Canonicalize a mapping {multi-index: rational} into a Jet."""
    base = tuple(Fraction(b) for b in basepoint)
    if len(base) != k:
        raise ValueError(f"basepoint must have {k} coordinates")
    indices, pos, _, _ = _tables(k, order)
    items = []
    for idx, c in coeffs.items():
        idx = tuple(idx)
        c = Fraction(c)
        if len(idx) != k or mi_degree(idx) > order:
            raise ValueError(f"multi-index {idx} out of range for k={k}, N={order}")
        if c != 0:
            items.append((pos[idx], idx, c))
    items.sort()
    return Jet(k, order, base, tuple((idx, c) for _, idx, c in items))


def constant_jet(k: int, order: int, basepoint, value) -> Jet:
    return make_jet(k, order, basepoint, {(0,) * k: Fraction(value)})


def _from_dense(k, order, basepoint, nums, den) -> Jet:
    indices, _, _, _ = _tables(k, order)
    coeffs = tuple((indices[p], Fraction(n, den))
                   for p, n in enumerate(nums) if n)
    return Jet(k, order, basepoint, coeffs)


def _check_match(a: Jet, b: Jet):
    if a.k != b.k or a.order != b.order:
        raise ValueError("jet dimension/order mismatch: "
                         f"({a.k},{a.order}) vs ({b.k},{b.order})")
    if a.basepoint != b.basepoint:
        raise ValueError("jet basepoint mismatch")


def jet_mul(a: Jet, b: Jet) -> Jet:
    """Exact product truncated to the shared order."""
    _check_match(a, b)
    _, _, pairs, _ = _tables(a.k, a.order)
    size = len(graded_indices(a.k, a.order))
    na, da = a._dense()
    nb, db = b._dense()
    nums, den = _dense_mul(na, da, nb, db, pairs, size)
    return _from_dense(a.k, a.order, a.basepoint, nums, den)


# ---------------------------------------------------------------------------
# groupoid arrows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JetVector:
    """k jets sharing basepoint and truncation order."""

    components: tuple

    def __post_init__(self):
        first = self.components[0]
        for c in self.components[1:]:
            _check_match(first, c)
        if len(self.components) != first.k:
            raise ValueError("a jet vector needs exactly k components")


def _det(matrix) -> Fraction:
    """Determinant by fraction-free elimination (k is small)."""
    m = [row[:] for row in matrix]
    n = len(m)
    det = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if m[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            m[col], m[pivot] = m[pivot], m[col]
            det = -det
        det *= m[col][col]
        inv = 1 / m[col][col]
        for r in range(col + 1, n):
            factor = m[r][col] * inv
            for c in range(col, n):
                m[r][c] -= factor * m[col][c]
    return det


def _matrix_inverse(matrix):
    n = len(matrix)
    aug = [list(row) + [Fraction(int(i == j)) for j in range(n)]
           for i, row in enumerate(matrix)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            raise ValueError("singular matrix")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [v * inv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [v - factor * p for v, p in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


@dataclass(frozen=True)
class GroupoidArrow:
    """Arrow of the quantum groupoid: an invertible jet vector.

    source is the shared basepoint, target the vector of constant terms;
    the linear-part determinant must be strictly positive.
    """

    components: tuple
    source: tuple
    target: tuple

    def __post_init__(self):
        first = self.components[0]
        if len(self.components) != first.k:
            raise ValueError("an arrow needs exactly k jet components")
        for c in self.components[1:]:
            _check_match(first, c)
        if self.source != first.basepoint:
            raise ValueError("arrow source must equal the jet basepoint")
        if self.target != tuple(c.constant_term for c in self.components):
            raise ValueError("arrow target must equal the constant terms")
        if _det(self.linear_matrix()) <= 0:
            raise ValueError("arrow linear part must have positive determinant")

    @property
    def k(self) -> int:
        return self.components[0].k

    @property
    def order(self) -> int:
        return self.components[0].order

    def linear_matrix(self):
        """Entry [i][j] is the coefficient of (t_j - x_j) in component i."""
        return [c.linear_part() for c in self.components]

    def truncate(self, order: int) -> "GroupoidArrow":
        return GroupoidArrow(tuple(c.truncate(order) for c in self.components),
                             self.source, self.target)


def make_arrow(components) -> GroupoidArrow:
    components = tuple(components)
    source = components[0].basepoint
    target = tuple(c.constant_term for c in components)
    return GroupoidArrow(components, source, target)


def identity_arrow(k: int, order: int, at) -> GroupoidArrow:
    at = tuple(Fraction(a) for a in at)
    comps = []
    for i in range(k):
        e = tuple(1 if j == i else 0 for j in range(k))
        comps.append(make_jet(k, order, at, {(0,) * k: at[i], e: 1}))
    return make_arrow(comps)


def arrow_compose(inner: GroupoidArrow, outer: GroupoidArrow) -> GroupoidArrow:
    """Composite arrow: substitute inner into outer (inner applied first).

    inner: x -> y and outer: y -> z give x -> z, truncated at the shared
    order.  The linear part is the product of linear parts, so determinant
    positivity is preserved.
    """
    if inner.k != outer.k or inner.order != outer.order:
        raise ValueError("arrow dimension/order mismatch")
    if inner.target != outer.source:
        raise ValueError(f"cannot compose: inner target {inner.target} "
                         f"!= outer source {outer.source}")
    k, order = inner.k, inner.order
    devs = []
    for i, comp in enumerate(inner.components):
        dev = comp - constant_jet(k, order, inner.source, inner.target[i])
        devs.append(dev._dense())
    outer_dense = [c._dense() for c in outer.components]
    subbed = _substitute(outer_dense, devs, k, order)
    comps = tuple(_from_dense(k, order, inner.source, nums, den)
                  for nums, den in subbed)
    return GroupoidArrow(comps, inner.source, outer.target)


def arrow_invert(Y: GroupoidArrow) -> GroupoidArrow:
    """Inverse arrow, exact mod degree N+1.

    Linear part by exact matrix inversion; higher orders by the contraction
    P <- id - h(P) where M.(Y - y) = id + h and h has degree >= 2, which
    settles one degree per pass.
    """
    k, order = Y.k, Y.order
    L = Y.linear_matrix()
    M = _matrix_inverse(L)  # positive determinant guarantees invertibility

    indices, pos, pairs, _ = _tables(k, order)
    size = len(indices)

    def unit_vector(i):
        nums = [0] * size
        e = tuple(1 if j == i else 0 for j in range(k))
        nums[pos[e]] = 1
        return nums

    # deviation of Y from its target, as raw dense series
    devs = []
    for i, comp in enumerate(Y.components):
        dev = comp - constant_jet(k, order, Y.source, Y.target[i])
        devs.append(dev._dense())

    # G = M . dev has identity linear part; h = G - id has degree >= 2
    h = []
    for i in range(k):
        acc, dacc = [0] * size, 1
        for j in range(k):
            c = M[i][j]
            if c:
                acc, dacc = _dense_add_scaled(acc, dacc, *devs[j],
                                              c.numerator, c.denominator)
        e = tuple(1 if j == i else 0 for j in range(k))
        acc[pos[e]] -= dacc  # subtract the identity monomial
        h.append(_dense_normalize(acc, dacc))

    ident = [(unit_vector(i), 1) for i in range(k)]
    P = ident
    for _ in range(max(order - 1, 0)):
        hp = _substitute(h, [p for p in P], k, order)
        P = []
        for i in range(k):
            nums, den = hp[i]
            base, dbase = ident[i]
            merged, dmerged = _dense_add_scaled(
                [n * den for n in base], dbase * den, nums, den, -dbase, dbase)
            P.append(_dense_normalize(merged, dmerged))

    # W(u) = x + P(M.(u - y)); build the linear deviations M.(u - y) and
    # substitute them into P.
    lin_devs = []
    for i in range(k):
        nums = [0] * size
        den = 1
        for j in range(k):
            c = M[i][j]
            if c:
                e = tuple(1 if m == j else 0 for m in range(k))
                g = gcd(den, c.denominator)
                scale = c.denominator // g
                nums = [n * scale for n in nums]
                den *= scale
                nums[pos[e]] += c.numerator * (den // c.denominator)
        lin_devs.append(_dense_normalize(nums, den))
    final = _substitute(P, lin_devs, k, order)

    comps = []
    for i in range(k):
        nums, den = final[i]
        jet = _from_dense(k, order, Y.target, nums, den)
        comps.append(jet + constant_jet(k, order, Y.target, Y.source[i]))
    return GroupoidArrow(tuple(comps), Y.target, Y.source)


def jet_matrix_inverse(matrix) -> list:
    """Inverse of a k x k matrix of jets sharing basepoint and order.

    Constant part inverted exactly, then the geometric-series correction
    T <- S - S.R.T absorbs the higher-order remainder one degree per pass.
    """
    n = len(matrix)
    ref = matrix[0][0]
    k, order, base = ref.k, ref.order, ref.basepoint
    for row in matrix:
        if len(row) != n:
            raise ValueError("matrix must be square")
        for entry in row:
            _check_match(ref, entry)

    C = [[entry.constant_term for entry in row] for row in matrix]
    if _det(C) == 0:
        raise ValueError("singular constant term")
    Cinv = _matrix_inverse(C)
    S = [[constant_jet(k, order, base, Cinv[i][j]) for j in range(n)]
         for i in range(n)]
    R = [[matrix[i][j] - constant_jet(k, order, base, C[i][j])
          for j in range(n)] for i in range(n)]

    def mat_mul(A, B):
        return [[sum((jet_mul(A[i][m], B[m][j]) for m in range(n)),
                     constant_jet(k, order, base, 0))
                 for j in range(n)] for i in range(n)]

    T = S
    for _ in range(order):
        SRT = mat_mul(S, mat_mul(R, T))
        T = [[S[i][j] - SRT[i][j] for j in range(n)] for i in range(n)]
    return T
