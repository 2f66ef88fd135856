"""Deterministic affine loops: finite-monoid WNT and polynomial bounds.

An affine relation is x' = A x + b with a guard on x.  When the monoid of
powers of A is finite, the trajectory from any point is eventually
periodic in shape: A^(B+i+kC) = A^(B+i) and the offsets drift by a
constant vector per period, so "the guard holds forever" collapses to a
finite conjunction of linear conditions (the exact weakest
non-termination set).  When the nonzero eigenvalues of A are merely roots
of unity, entries of A^k are polynomials in k per residue class and
sign conditions on leading coefficients give sufficient termination
preconditions.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm

from .linarith import EQ, LE, LT, LinTerm
from .presburger import Conj, Dnf

Matrix = tuple[tuple[int, ...], ...]


def mat(rows) -> Matrix:
    return tuple(tuple(int(v) for v in r) for r in rows)


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    n = len(a)
    m = len(b[0])
    k = len(b)
    return tuple(
        tuple(sum(a[i][t] * b[t][j] for t in range(k)) for j in range(m))
        for i in range(n)
    )


def mat_vec(a: Matrix, v: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(sum(a[i][j] * v[j] for j in range(len(v))) for i in range(len(a)))


def identity(n: int) -> Matrix:
    return tuple(tuple(1 if i == j else 0 for j in range(n)) for i in range(n))


def mat_pow(a: Matrix, e: int) -> Matrix:
    out = identity(len(a))
    base = a
    while e:
        if e & 1:
            out = mat_mul(out, base)
        e >>= 1
        if e:
            base = mat_mul(base, base)
    return out


@dataclass(frozen=True)
class AffineRel:
    """x' = A x + b with a guard; the conjunctive case is C x >= d rows."""

    n_vars: int
    a: Matrix
    b: tuple[int, ...]
    guard: tuple[tuple[tuple[int, ...], int], ...]  # rows (c, d): c.x >= d

    def guard_holds(self, point) -> bool:
        return all(
            sum(ci * xi for ci, xi in zip(c, point)) >= d for c, d in self.guard
        )

    def step(self, point):
        return mat_vec(self.a, point) + tuple()  # type: ignore

    def apply(self, point):
        img = mat_vec(self.a, point)
        return tuple(x + y for x, y in zip(img, self.b))


def _totient(n: int) -> int:
    out = n
    p = 2
    m = n
    while p * p <= m:
        if m % p == 0:
            while m % p == 0:
                m //= p
            out -= out // p
        p += 1
    if m > 1:
        out -= out // m
    return out


def _order_lcm(n: int) -> int:
    """lcm of all d with totient(d) <= n (d ranges up to 2n^2)."""
    out = 1
    for d in range(1, 2 * n * n + 1):
        if _totient(d) <= n:
            out = lcm(out, d)
    return out


def is_finite_monoid(a: Matrix) -> bool:
    """True iff the set of powers of A is finite.

    The nilpotent part dies by the dimension and the orders of
    root-of-unity eigenvalues divide L = lcm{d : totient(d) <= N}, so the
    monoid is finite exactly when A^(N+L) = A^N.
    """
    n = len(a)
    if n == 0:
        return True
    L = _order_lcm(n)
    an = mat_pow(a, n)
    return mat_mul(an, mat_pow(a, L)) == an


def power_cycle(a: Matrix, bound: int = 512):
    """(prefix, period) of the power sequence; None if no repeat in bound."""
    seen: dict[Matrix, int] = {}
    cur = identity(len(a))
    for i in range(bound):
        if cur in seen:
            start = seen[cur]
            return start, i - start
        seen[cur] = i
        cur = mat_mul(cur, a)
    return None


def trajectory_offsets(rel: AffineRel, upto: int) -> list[tuple[int, ...]]:
    """s_k = sum_{j<k} A^j b for k = 0..upto."""
    n = rel.n_vars
    out = [tuple(0 for _ in range(n))]
    power = identity(n)
    for _ in range(upto):
        step = mat_vec(power, rel.b)
        out.append(tuple(x + y for x, y in zip(out[-1], step)))
        power = mat_mul(power, rel.a)
    return out


def finite_monoid_wnt(rel: AffineRel, names: list[str] | None = None) -> Dnf:
    """Exact weakest non-termination set of a finite-monoid affine relation.

    With A^(B+C) = A^B the state at step B+i+mC is
    A^(B+i) x + s_(B+i) + m*D_i where D_i = A^(B+i) s_C; a guard row holds
    for all m >= 0 iff its drift against D_i is nonnegative and the base
    instance holds.  Steps before B contribute plain guard instances.
    """
    if not is_finite_monoid(rel.a):
        raise ValueError("matrix does not generate a finite monoid")
    cyc = power_cycle(rel.a)
    assert cyc is not None
    B, C = cyc
    # verify the derived offset identity  s_(k+C) = s_k + A^k s_C
    s = trajectory_offsets(rel, B + 2 * C + 1)
    for k in range(B + C):
        lhs = s[k + C]
        rhs = tuple(
            x + y for x, y in zip(s[k], mat_vec(mat_pow(rel.a, k), s[C]))
        )
        if lhs != rhs:
            raise AssertionError("trajectory offset identity failed")
    if names is None:
        names = [f"x{i}" for i in range(rel.n_vars)]
    rows = []

    def guard_rows_at(power: Matrix, offset):
        out = []
        for c, d in rel.guard:
            # c . (power x + offset) >= d
            coeffs = {}
            for j in range(rel.n_vars):
                coef = sum(c[i] * power[i][j] for i in range(rel.n_vars))
                coeffs[names[j]] = coeffs.get(names[j], 0) + coef
            const = sum(ci * oi for ci, oi in zip(c, offset))
            # row form: d - c.power.x - const <= 0
            out.append((LinTerm({k: -v for k, v in coeffs.items()}, d - const), LE))
        return out

    for k in range(B):
        rows.extend(guard_rows_at(mat_pow(rel.a, k), s[k]))
    for i in range(C):
        power = mat_pow(rel.a, B + i)
        drift = mat_vec(power, s[C])
        for (c, d), row in zip(rel.guard, guard_rows_at(power, s[B + i])):
            slope = sum(ci * di for ci, di in zip(c, drift))
            if slope < 0:
                return Dnf()  # the row eventually fails from every state
            rows.append(row)
    conj = Conj.make(rows)
    dnf = Dnf()
    dnf.add(conj)
    return dnf


@dataclass(frozen=True)
class HomogenizedRel:
    a_h: Matrix
    c_h: tuple[tuple[int, ...], ...]  # rows, guard as C_h x_h >= 0


def homogenize(rel: AffineRel) -> HomogenizedRel:
    n = rel.n_vars
    a_h = tuple(
        tuple(list(rel.a[i]) + [rel.b[i]]) for i in range(n)
    ) + ((0,) * n + (1,),)
    c_h = tuple(tuple(list(c) + [-d]) for c, d in rel.guard)
    return HomogenizedRel(a_h, c_h)


# ---------------------------------------------------------------------------
# polynomially bounded matrices
# ---------------------------------------------------------------------------


def char_poly(a: Matrix) -> list[Fraction]:
    """Coefficients of det(xI - A), ascending order, by Faddeev-LeVerrier."""
    n = len(a)
    coeffs = [Fraction(0)] * (n + 1)
    coeffs[n] = Fraction(1)
    m = [[Fraction(0)] * n for _ in range(n)]
    for k in range(1, n + 1):
        # M_k = A*M_{k-1} + c_{n-k+1} I ; c_{n-k} = -tr(A*M_k)/k
        m = [
            [sum(Fraction(a[i][t]) * m[t][j] for t in range(n)) for j in range(n)]
            for i in range(n)
        ]
        for i in range(n):
            m[i][i] += coeffs[n - k + 1]
        tr = sum(
            sum(Fraction(a[i][t]) * m[t][i] for t in range(n)) for i in range(n)
        )
        coeffs[n - k] = -tr / k
    return coeffs


def _poly_divmod(num: list[Fraction], den: list[Fraction]):
    num = list(num)
    q = [Fraction(0)] * max(0, len(num) - len(den) + 1)
    while len(num) >= len(den) and any(v != 0 for v in num):
        if num[-1] == 0:
            num.pop()
            continue
        shift = len(num) - len(den)
        factor = num[-1] / den[-1]
        q[shift] = factor
        for i, dv in enumerate(den):
            num[shift + i] -= factor * dv
        num.pop()
    while num and num[-1] == 0:
        num.pop()
    return q, num


def _poly_deriv(p: list[Fraction]) -> list[Fraction]:
    return [p[i] * i for i in range(1, len(p))]


def _poly_gcd(a: list[Fraction], b: list[Fraction]) -> list[Fraction]:
    a, b = list(a), list(b)
    while b and any(v != 0 for v in b):
        _, r = _poly_divmod(a, b)
        a, b = b, r
    if a:
        lead = a[-1]
        a = [v / lead for v in a]
    return a


def _unity_order(a: Matrix) -> int | None:
    """Smallest L with every nonzero eigenvalue an L-th root of unity.

    char(A) = x^m q(x) with q(0) != 0; the squarefree part of q must
    divide x^L - 1 (repeated root-of-unity eigenvalues are allowed, so the
    divisibility is tested on the radical).  None when no such L exists.
    """
    n = len(a)
    if n == 0:
        return 1
    p = char_poly(a)
    while p and p[0] == 0:
        p = p[1:]
    if not p or len(p) == 1:
        return 1  # nilpotent: no nonzero eigenvalues
    q = p
    sf = _poly_divmod(q, _poly_gcd(q, _poly_deriv(q)))[0] if len(q) > 1 else q
    for L in range(1, _order_lcm(n) + 1):
        xl1 = [Fraction(0)] * (L + 1)
        xl1[0] = Fraction(-1)
        xl1[L] = Fraction(1)
        _, rem = _poly_divmod(xl1, sf)
        if not rem:
            return L
    return None


def is_polynomially_bounded(a: Matrix) -> bool:
    return _unity_order(a) is not None


@dataclass(frozen=True)
class PolyClosedForm:
    """Per residue r < L, polynomials p[r][i][j] with A^(kL+r) = p(k).

    Valid for every k with k*L + r >= valid_from; small exponents are the
    explicitly stored prefix powers.
    """

    n: int
    L: int
    valid_from: int
    polys: list  # polys[r][i][j] = list of Fraction coefficients in k
    prefix: list  # prefix[e] = A^e for e < valid_from + L

    def power_entry(self, r: int, i: int, j: int) -> list[Fraction]:
        return self.polys[r][i][j]

    def at(self, exponent: int) -> Matrix:
        if exponent < len(self.prefix):
            return self.prefix[exponent]
        r = exponent % self.L
        k = exponent // self.L
        return tuple(
            tuple(_poly_eval_int(self.polys[r][i][j], k) for j in range(self.n))
            for i in range(self.n)
        )


def _poly_eval(p: list[Fraction], k: int) -> Fraction:
    out = Fraction(0)
    for c in reversed(p):
        out = out * k + c
    return out


def _poly_eval_int(p: list[Fraction], k: int) -> int:
    v = _poly_eval(p, k)
    if v.denominator != 1:
        raise AssertionError("polynomial closed form not integer-valued")
    return v.numerator


def _interpolate(points: list[tuple[int, Fraction]]) -> list[Fraction]:
    """Lagrange interpolation, coefficients ascending."""
    n = len(points)
    coeffs = [Fraction(0)] * n
    for idx, (xi, yi) in enumerate(points):
        basis = [Fraction(1)]
        denom = Fraction(1)
        for jdx, (xj, _) in enumerate(points):
            if jdx == idx:
                continue
            # multiply basis by (x - xj)
            nxt = [Fraction(0)] * (len(basis) + 1)
            for d, c in enumerate(basis):
                nxt[d] -= c * xj
                nxt[d + 1] += c
            basis = nxt
            denom *= xi - xj
        scale = yi / denom
        for d, c in enumerate(basis):
            coeffs[d] += c * scale
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return coeffs


class NotPolynomiallyBounded(ValueError):
    pass


def poly_matrix_power(a: Matrix) -> PolyClosedForm:
    """Closed form of the powers of A when nonzero eigenvalues are roots of 1.

    Entries of A^(kL+r) are interpolated as polynomials of degree < N per
    residue r and re-verified at extra sample points.
    """
    n = len(a)
    L = _unity_order(a)
    if L is None:
        raise NotPolynomiallyBounded(f"matrix {a} has a non-root-of-unity eigenvalue")
    valid_from = n
    prefix = [identity(n)]
    for _ in range(valid_from + L):
        prefix.append(mat_mul(prefix[-1], a))
    polys = []
    for r in range(L):
        k0 = 0
        while k0 * L + r < valid_from:
            k0 += 1
        pts_k = list(range(k0, k0 + n))
        extra = list(range(k0 + n, k0 + n + 3))
        powers = {k: mat_pow(a, k * L + r) for k in pts_k + extra}
        grid = []
        for i in range(n):
            row = []
            for j in range(n):
                p = _interpolate([(k, Fraction(powers[k][i][j])) for k in pts_k])
                for k in extra:
                    if _poly_eval(p, k) != powers[k][i][j]:
                        raise AssertionError("degree bound violated in closed form")
                row.append(p)
            grid.append(row)
        polys.append(grid)
    return PolyClosedForm(n, L, valid_from, polys, prefix)


def sufficient_termination(
    rel: AffineRel,
    include_prefix_violations: bool = False,
    names: list[str] | None = None,
) -> Dnf:
    """A disjunction of linear systems disjoint from the recurrent set.

    For each guard row and residue, the row value after kL+r steps is a
    polynomial in k with coefficients linear in the start state; any state
    making the leading surviving coefficient negative (all higher ones
    zero) violates the guard eventually and therefore terminates.
    """
    h = homogenize(rel)
    closed = poly_matrix_power(h.a_h)
    n_h = rel.n_vars + 1
    if names is None:
        names = [f"x{i}" for i in range(rel.n_vars)]
    dnf = Dnf()

    for c_row in h.c_h:
        for r in range(closed.L):
            # P(k) = c_row . A_h^(kL+r) . x_h, polynomial in k with
            # LinTerm coefficients over the start state (x_{N} = 1).
            degree = max(len(closed.polys[r][i][j]) for i in range(n_h) for j in range(n_h))
            coeffs = [LinTerm() for _ in range(degree)]
            for j in range(n_h):
                # coefficient of x_h[j] as a polynomial in k
                poly = [Fraction(0)] * degree
                for i in range(n_h):
                    ci = c_row[i]
                    if ci == 0:
                        continue
                    for d, v in enumerate(closed.polys[r][i][j]):
                        poly[d] += ci * v
                var_term = LinTerm({names[j]: 1}) if j < rel.n_vars else LinTerm({}, 1)
                for d in range(degree):
                    if poly[d] != 0:
                        coeffs[d] = coeffs[d] + poly[d] * var_term
            # drop identically-zero leading coefficients
            while coeffs and not coeffs[-1].coeffs and coeffs[-1].const == 0:
                coeffs.pop()
            for t in range(len(coeffs) - 1, -1, -1):
                rows = [(coeffs[d], EQ) for d in range(t + 1, len(coeffs))]
                rows.append((coeffs[t], LT))
                dnf.add(Conj.make(rows))
    if include_prefix_violations:
        L = closed.L
        s = trajectory_offsets(rel, L * rel.n_vars + 1)
        for k in range(L * rel.n_vars):
            power = mat_pow(rel.a, k)
            for c, d in rel.guard:
                coeffs = {}
                for j in range(rel.n_vars):
                    coeffs[names[j]] = sum(c[i] * power[i][j] for i in range(rel.n_vars))
                const = sum(ci * oi for ci, oi in zip(c, s[k]))
                # violation: c.(A^k x + s_k) < d
                dnf.add(Conj.make([(LinTerm(coeffs, const - d), LT)]))
    return dnf
