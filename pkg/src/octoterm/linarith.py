"""Exact rational linear arithmetic: terms, systems, LP, and Farkas search.

Everything is computed over ``fractions.Fraction`` -- no floating point.
The solver is a two-phase primal simplex with Bland's rule, so it always
terminates.  Strict inequalities are handled symbolically: constants are
pairs ``a + b*eps`` for an infinitesimal ``eps``, compared lexicographically,
which makes feasibility of mixed strict/non-strict systems exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

Rational = Fraction

LE = "<="
LT = "<"
EQ = "=="

_REL_SET = (LE, LT, EQ)


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


class LinTerm:
    """Linear term ``const + sum coeffs[v] * v`` with exact coefficients."""

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs: Mapping[str, object] | None = None, const=0):
        cs = {}
        if coeffs:
            for v, c in coeffs.items():
                c = _frac(c)
                if c != 0:
                    cs[v] = c
        self.coeffs = cs
        self.const = _frac(const)

    @classmethod
    def var(cls, name: str, coef=1) -> "LinTerm":
        return cls({name: coef})

    @classmethod
    def of(cls, const) -> "LinTerm":
        return cls({}, const)

    def variables(self):
        return self.coeffs.keys()

    def coef(self, v: str) -> Fraction:
        return self.coeffs.get(v, Fraction(0))

    def eval(self, valuation: Mapping[str, object]) -> Fraction:
        total = self.const
        for v, c in self.coeffs.items():
            total += c * _frac(valuation[v])
        return total

    def subst(self, assignment: Mapping[str, "LinTerm"]) -> "LinTerm":
        out = LinTerm({}, self.const)
        for v, c in self.coeffs.items():
            if v in assignment:
                out = out + c * assignment[v]
            else:
                out = out + LinTerm({v: c})
        return out

    def scale_to_integers(self) -> "LinTerm":
        """Multiply by the positive lcm of denominators."""
        denoms = [self.const.denominator] + [c.denominator for c in self.coeffs.values()]
        mult = 1
        for d in denoms:
            mult = mult * d // _gcd(mult, d)
        return mult * self

    def __add__(self, other):
        if isinstance(other, LinTerm):
            cs = dict(self.coeffs)
            for v, c in other.coeffs.items():
                cs[v] = cs.get(v, Fraction(0)) + c
            return LinTerm(cs, self.const + other.const)
        return LinTerm(self.coeffs, self.const + _frac(other))

    __radd__ = __add__

    def __neg__(self):
        return LinTerm({v: -c for v, c in self.coeffs.items()}, -self.const)

    def __sub__(self, other):
        return self + (-other if isinstance(other, LinTerm) else LinTerm({}, -_frac(other)))

    def __rsub__(self, other):
        return (-self) + _frac(other)

    def __mul__(self, k):
        k = _frac(k)
        return LinTerm({v: c * k for v, c in self.coeffs.items()}, self.const * k)

    __rmul__ = __mul__

    def is_constant(self) -> bool:
        return not self.coeffs

    def __eq__(self, other):
        return (
            isinstance(other, LinTerm)
            and self.coeffs == other.coeffs
            and self.const == other.const
        )

    def __hash__(self):
        return hash((frozenset(self.coeffs.items()), self.const))

    def __repr__(self):
        parts = []
        for v in sorted(self.coeffs):
            parts.append(f"{self.coeffs[v]}*{v}")
        if self.const != 0 or not parts:
            parts.append(str(self.const))
        return " + ".join(parts)


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return abs(a)


Row = tuple[LinTerm, str]


class LinSys:
    """Conjunction of rows ``term rel 0`` over a declared variable universe."""

    __slots__ = ("rows", "variables")

    def __init__(self, rows: Iterable[Row], variables: Sequence[str] | None = None):
        self.rows = tuple((t, r) for t, r in rows)
        for t, r in self.rows:
            if r not in _REL_SET:
                raise ValueError(f"bad relation {r!r}")
        if variables is None:
            seen = []
            for t, _ in self.rows:
                for v in t.coeffs:
                    if v not in seen:
                        seen.append(v)
            variables = sorted(seen)
        else:
            declared = set(variables)
            for t, _ in self.rows:
                missing = set(t.coeffs) - declared
                if missing:
                    raise ValueError(f"undeclared variables {sorted(missing)}")
        self.variables = tuple(variables)

    def with_rows(self, extra: Iterable[Row]) -> "LinSys":
        extra = tuple(extra)
        names = list(self.variables)
        for t, _ in extra:
            for v in t.coeffs:
                if v not in names:
                    names.append(v)
        return LinSys(self.rows + extra, names)

    def __repr__(self):
        return "LinSys[%s]" % "; ".join(f"{t} {r} 0" for t, r in self.rows)


# ---------------------------------------------------------------------------
# eps-extended rationals (for strict inequalities)
# ---------------------------------------------------------------------------


class Eps:
    """Constant ``a + b*eps`` with eps an infinitesimal; lexicographic order."""

    __slots__ = ("a", "b")

    def __init__(self, a=0, b=0):
        self.a = _frac(a)
        self.b = _frac(b)

    def __add__(self, o):
        return Eps(self.a + o.a, self.b + o.b)

    def __sub__(self, o):
        return Eps(self.a - o.a, self.b - o.b)

    def __neg__(self):
        return Eps(-self.a, -self.b)

    def scale(self, k: Fraction) -> "Eps":
        return Eps(self.a * k, self.b * k)

    def key(self):
        return (self.a, self.b)

    def __eq__(self, o):
        return self.a == o.a and self.b == o.b

    def __lt__(self, o):
        return self.key() < o.key()

    def __le__(self, o):
        return self.key() <= o.key()

    def is_zero(self):
        return self.a == 0 and self.b == 0

    def __repr__(self):
        return f"{self.a}+{self.b}e" if self.b else str(self.a)


_EPS0 = Eps(0, 0)


# ---------------------------------------------------------------------------
# simplex core: maximize c.x subject to A x <= b, x >= 0
# ---------------------------------------------------------------------------


class _Tableau:
    """Dense-free primal simplex: rows are sparse column->value dicts."""

    def __init__(self, ncols: int, rows_a: list[dict[int, Fraction]], rhs: list[Eps]):
        self.n = ncols
        self.m = len(rows_a)
        # columns: 0..n-1 structural, n..n+m-1 slacks, n+m auxiliary
        self.width = self.n + self.m + 1
        self.a: list[dict[int, Fraction]] = []
        for i, row in enumerate(rows_a):
            full = {j: v for j, v in row.items() if v != 0}
            full[self.n + i] = Fraction(1)
            self.a.append(full)
        self.rhs = list(rhs)
        self.basis = [self.n + i for i in range(self.m)]
        self.obj: dict[int, Fraction] = {}
        self.objval = Eps(0, 0)

    def set_objective(self, coefs: dict[int, Fraction]) -> None:
        obj = {j: c for j, c in coefs.items() if c != 0}
        val = Eps(0, 0)
        for i, bv in enumerate(self.basis):
            c = obj.pop(bv, Fraction(0))
            if c == 0:
                continue
            for j, v in self.a[i].items():
                if j == bv:
                    continue
                nv = obj.get(j, Fraction(0)) - c * v
                if nv:
                    obj[j] = nv
                else:
                    obj.pop(j, None)
            val = val + self.rhs[i].scale(c)
        self.obj = obj
        self.objval = val

    def pivot(self, r: int, c: int) -> None:
        row = self.a[r]
        piv = row[c]
        if piv != 1:
            inv = 1 / piv
            row = {j: v * inv for j, v in row.items()}
            self.a[r] = row
            self.rhs[r] = self.rhs[r].scale(inv)
        for i in range(self.m):
            if i == r:
                continue
            tgt = self.a[i]
            f = tgt.get(c)
            if not f:
                continue
            for j, v in row.items():
                nv = tgt.get(j, Fraction(0)) - f * v
                if nv:
                    tgt[j] = nv
                else:
                    tgt.pop(j, None)
            self.rhs[i] = self.rhs[i] - self.rhs[r].scale(f)
        f = self.obj.get(c)
        if f:
            obj = self.obj
            for j, v in row.items():
                nv = obj.get(j, Fraction(0)) - f * v
                if nv:
                    obj[j] = nv
                else:
                    obj.pop(j, None)
            self.objval = self.objval + self.rhs[r].scale(f)
        self.basis[r] = c

    def _leave_for(self, c: int) -> int | None:
        best = None
        best_ratio = None
        for i in range(self.m):
            aic = self.a[i].get(c)
            if aic and aic > 0:
                ratio = self.rhs[i].scale(1 / aic)
                if (
                    best is None
                    or ratio < best_ratio
                    or (ratio == best_ratio and self.basis[i] < self.basis[best])
                ):
                    best = i
                    best_ratio = ratio
        return best

    def maximize(self, allowed_width: int) -> str:
        while True:
            enter = None
            for j, v in self.obj.items():
                if j < allowed_width and v > 0 and (enter is None or j < enter):
                    enter = j  # Bland: smallest eligible index
            if enter is None:
                return "optimal"
            leave = self._leave_for(enter)
            if leave is None:
                return "unbounded"
            self.pivot(leave, enter)

    def solution(self) -> list[Eps]:
        vals = [Eps(0, 0) for _ in range(self.width)]
        for i, bv in enumerate(self.basis):
            vals[bv] = self.rhs[i]
        return vals


def _build(sys: LinSys, extra_nonneg: Sequence[str] = ()):
    """Normalize to (names, pm-split columns, A, b) standard form."""
    names = list(sys.variables)
    nonneg = set(extra_nonneg)
    cols: list[tuple[str, int]] = []  # (var, sign)
    col_of: dict[str, list[int]] = {}
    for v in names:
        if v in nonneg:
            col_of[v] = [len(cols)]
            cols.append((v, 1))
        else:
            col_of[v] = [len(cols), len(cols) + 1]
            cols.append((v, 1))
            cols.append((v, -1))
    rows_a: list[dict[int, Fraction]] = []
    rhs: list[Eps] = []

    def add_le(coeffs: Mapping[str, Fraction], bound: Eps):
        row: dict[int, Fraction] = {}
        for v, c in coeffs.items():
            idx = col_of[v]
            row[idx[0]] = row.get(idx[0], Fraction(0)) + c
            if len(idx) == 2:
                row[idx[1]] = row.get(idx[1], Fraction(0)) - c
        rows_a.append(row)
        rhs.append(bound)

    for t, rel in sys.rows:
        b = -t.const
        if rel == LE:
            add_le(t.coeffs, Eps(b, 0))
        elif rel == LT:
            add_le(t.coeffs, Eps(b, -1))
        else:
            add_le(t.coeffs, Eps(b, 0))
            add_le({v: -c for v, c in t.coeffs.items()}, Eps(-b, 0))
    return names, cols, col_of, rows_a, rhs


def _solve(sys: LinSys, objective: LinTerm | None, extra_nonneg: Sequence[str] = ()):
    names, cols, col_of, rows_a, rhs = _build(sys, extra_nonneg)
    tab = _Tableau(len(cols), rows_a, rhs)
    aux = tab.n + tab.m
    neg = [i for i in range(tab.m) if rhs[i] < _EPS0]
    if neg:
        for i in range(tab.m):
            tab.a[i][aux] = Fraction(-1)
        tab.set_objective({aux: Fraction(-1)})
        worst = min(range(tab.m), key=lambda i: tab.rhs[i].key())
        tab.pivot(worst, aux)
        status = tab.maximize(tab.width)
        assert status == "optimal"
        if not tab.objval.is_zero():
            return "infeasible", None, None
        if aux in tab.basis:
            r = tab.basis.index(aux)
            for j in sorted(tab.a[r]):
                if j != aux and tab.a[r][j] != 0:
                    tab.pivot(r, j)
                    break
        for i in range(tab.m):
            tab.a[i].pop(aux, None)
        tab.obj.pop(aux, None)
    coefs: dict[int, Fraction] = {}
    if objective is not None:
        for v, c in objective.coeffs.items():
            idx = col_of.get(v)
            if idx is None:
                continue  # objective var unconstrained by sys: handled by caller
            coefs[idx[0]] = coefs.get(idx[0], Fraction(0)) + c
            if len(idx) == 2:
                coefs[idx[1]] = coefs.get(idx[1], Fraction(0)) - c
    tab.set_objective(coefs)
    status = tab.maximize(aux)
    vals = tab.solution()
    model: dict[str, Eps] = {}
    for v in names:
        idx = col_of[v]
        val = vals[idx[0]]
        if len(idx) == 2:
            val = val - vals[idx[1]]
        model[v] = val
    if status == "unbounded":
        return "unbounded", None, model
    return "optimal", tab.objval, model


# ---------------------------------------------------------------------------
# public results and operations
# ---------------------------------------------------------------------------


class PolyhedronLP:
    """One phased tableau per system; each sup() warm-starts from the
    current feasible basis, which makes batched objective queries cheap."""

    def __init__(self, sys: LinSys, extra_nonneg: Sequence[str] = ()):
        self.sys = sys
        names, cols, col_of, rows_a, rhs = _build(sys, extra_nonneg)
        self.col_of = col_of
        self.tab = _Tableau(len(cols), rows_a, rhs)
        tab = self.tab
        aux = tab.n + tab.m
        self.aux = aux
        self.feasible = True
        if any(r < _EPS0 for r in rhs):
            for i in range(tab.m):
                tab.a[i][aux] = Fraction(-1)
            tab.set_objective({aux: Fraction(-1)})
            worst = min(range(tab.m), key=lambda i: tab.rhs[i].key())
            tab.pivot(worst, aux)
            status = tab.maximize(tab.width)
            assert status == "optimal"
            if not tab.objval.is_zero():
                self.feasible = False
                return
            if aux in tab.basis:
                r = tab.basis.index(aux)
                for j in sorted(tab.a[r]):
                    if j != aux and tab.a[r][j] != 0:
                        tab.pivot(r, j)
                        break
            for i in range(tab.m):
                tab.a[i].pop(aux, None)
            tab.obj.pop(aux, None)

    def sup(self, obj: LinTerm):
        if not self.feasible:
            return Infeasible()
        if any(v not in self.col_of for v in obj.coeffs):
            return Unbounded()
        coefs: dict[int, Fraction] = {}
        for v, c in obj.coeffs.items():
            idx = self.col_of[v]
            coefs[idx[0]] = coefs.get(idx[0], Fraction(0)) + c
            if len(idx) == 2:
                coefs[idx[1]] = coefs.get(idx[1], Fraction(0)) - c
        self.tab.set_objective(coefs)
        status = self.tab.maximize(self.aux)
        if status == "unbounded":
            return Unbounded()
        return Value(self.tab.objval.a + obj.const)

    def entails_le(self, t: LinTerm) -> bool:
        """Every rational point satisfies t <= 0 (vacuous when empty)."""
        if not self.feasible:
            return True
        res = self.sup(t)
        return isinstance(res, Value) and res.value <= 0


@dataclass(frozen=True)
class Feasible:
    model: dict


@dataclass(frozen=True)
class Infeasible:
    pass


@dataclass(frozen=True)
class Unbounded:
    pass


@dataclass(frozen=True)
class Value:
    value: Fraction


def _materialize(model: dict[str, Eps], sys: LinSys) -> dict[str, Fraction]:
    """Substitute a concrete small positive value for eps and check rows."""
    delta = Fraction(1)
    for t, rel in sys.rows:
        a = t.const
        b = Fraction(0)
        for v, c in t.coeffs.items():
            ev = model[v]
            a += c * ev.a
            b += c * ev.b
        # need a + b*delta <rel> 0 for all small positive delta
        if b > 0:
            if rel == LT and a == 0:
                # value must stay strictly negative: impossible along +b
                # (cannot happen for a simplex model of a feasible system)
                raise AssertionError("eps materialization failed")
            if a < 0:
                delta = min(delta, (-a) / b / 2)
    out = {v: ev.a + ev.b * delta for v, ev in model.items()}
    for t, rel in sys.rows:
        val = t.eval(out)
        ok = val <= 0 if rel == LE else (val < 0 if rel == LT else val == 0)
        if not ok:
            raise AssertionError("LP model fails a row; solver bug")
    return out


def lp_feasible(sys: LinSys, nonneg: Sequence[str] = ()):
    """Exact feasibility over the rationals; Feasible carries a model."""
    status, _, model = _solve(sys, None, nonneg)
    if status == "infeasible":
        return Infeasible()
    for v in nonneg:
        if v in model and model[v].a < 0:
            raise AssertionError("nonneg var went negative; solver bug")
    return Feasible(_materialize(model, sys))


def lp_sup(sys: LinSys, obj: LinTerm):
    """Supremum of obj over the rational polyhedron of sys."""
    free = [v for v in obj.coeffs if v not in sys.variables]
    if free:
        status, _, _ = _solve(sys, None)
        return Infeasible() if status == "infeasible" else Unbounded()
    status, val, _ = _solve(sys, obj)
    if status == "infeasible":
        return Infeasible()
    if status == "unbounded":
        return Unbounded()
    return Value(val.a + obj.const)


def lp_inf(sys: LinSys, obj: LinTerm):
    res = lp_sup(sys, -obj)
    if isinstance(res, Value):
        return Value(-res.value)
    return res


def negate_row(row: Row) -> list[Row]:
    t, rel = row
    if rel == LE:
        return [(-t, LT)]
    if rel == LT:
        return [(-t, LE)]
    return [(t, LT), (-t, LT)]


def entails(sys: LinSys, row: Row) -> bool:
    """True iff every rational solution of sys satisfies the row."""
    for neg in negate_row(row):
        if isinstance(lp_feasible(sys.with_rows([neg])), Feasible):
            return False
    return True


def term_of_pair(p: int, q: int, variables: Sequence[str]) -> LinTerm:
    """Octagonal term u_p - u_q for dual indices over the given variables."""
    t = LinTerm()
    sp = 1 if p % 2 == 0 else -1
    sq = 1 if q % 2 == 0 else -1
    t = t + LinTerm({variables[p // 2]: sp})
    t = t - LinTerm({variables[q // 2]: sq})
    return t


# ---------------------------------------------------------------------------
# Farkas-style template search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TemplateRow:
    """Row ``sum coeffs[v](u)*v + const(u) <= 0`` with unknown-linear parts."""

    coeffs: Mapping[str, LinTerm]
    const: LinTerm


@dataclass(frozen=True)
class Witness:
    assignment: dict


def farkas_template(sys: LinSys, template_rows: Sequence[TemplateRow]):
    """Find unknowns making every template row a consequence of sys.

    Each template row must be derivable as a nonnegative combination of the
    system rows (equality rows get sign-free multipliers) plus a nonnegative
    slack; the certificate conditions are linear in the multipliers and the
    unknowns, so one exact LP feasibility call decides the search.
    Returns Witness or None.
    """
    meta_rows: list[Row] = []
    nonneg: list[str] = []
    sys_rows = []
    for t, rel in sys.rows:
        if rel == LT:
            raise ValueError("strict rows are not supported in Farkas search")
        sys_rows.append((t, rel))
    for r_idx, trow in enumerate(template_rows):
        lams = []
        for i, (t, rel) in enumerate(sys_rows):
            lam = f"_lam{r_idx}_{i}"
            lams.append(lam)
            if rel == LE:
                nonneg.append(lam)
        # coefficient matching: sum_i lam_i * a_i[v] == coeffs[v](u)
        vs = set()
        for t, _ in sys_rows:
            vs.update(t.coeffs)
        vs.update(trow.coeffs.keys())
        for v in sorted(vs):
            expr = LinTerm()
            for lam, (t, _) in zip(lams, sys_rows):
                c = t.coef(v)
                if c != 0:
                    expr = expr + LinTerm({lam: c})
            expr = expr - trow.coeffs.get(v, LinTerm())
            meta_rows.append((expr, EQ))
        # constant: sum_i lam_i * c_i + (-const(u)) >= 0 is wrong way;
        # rows are t_i <= 0 i.e. a_i.v <= -c_i, so bound b_i = -c_i and we
        # need sum lam_i * b_i <= -const(u).
        bound = LinTerm()
        for lam, (t, _) in zip(lams, sys_rows):
            bound = bound + LinTerm({lam: -t.const})
        meta_rows.append((bound + trow.const, LE))
    unknowns = set()
    for trow in template_rows:
        unknowns.update(trow.const.coeffs)
        for e in trow.coeffs.values():
            unknowns.update(e.coeffs)
    meta = LinSys(meta_rows)
    res = lp_feasible(meta, nonneg)
    if isinstance(res, Infeasible):
        return None
    model = res.model
    return Witness({u: model.get(u, Fraction(0)) for u in sorted(unknowns)})


# ---------------------------------------------------------------------------
# Fourier-Motzkin over the rationals (testing oracle for the simplex)
# ---------------------------------------------------------------------------


def fm_feasible(rows: Sequence[Row]) -> bool:
    """Rational feasibility by Fourier-Motzkin elimination (oracle use)."""
    work: list[tuple[LinTerm, str]] = []
    for t, rel in rows:
        if rel == EQ:
            work.append((t, LE))
            work.append((-t, LE))
        else:
            work.append((t, rel))
    while True:
        vs = sorted({v for t, _ in work for v in t.coeffs})
        if not vs:
            break
        v = vs[0]
        pos, neg, rest = [], [], []
        for t, rel in work:
            c = t.coef(v)
            if c > 0:
                pos.append((t, rel, c))
            elif c < 0:
                neg.append((t, rel, c))
            else:
                rest.append((t, rel))
        new = rest
        for tp, rp, cp in pos:
            for tn, rn, cn in neg:
                # tp has +v, tn has -v: eliminate
                comb = tp * (1 / cp) + tn * (1 / (-cn))
                rel = LT if (rp == LT or rn == LT) else LE
                new.append((comb, rel))
        work = new
    for t, rel in work:
        c = t.const
        if rel == LE and c > 0:
            return False
        if rel == LT and c >= 0:
            return False
    return True
