"""Octagonal constraints as coherent DBMs over dual variables.

An octagonal constraint over m integer variables x_0..x_{m-1} is a
conjunction of atoms ``+-x_i +- x_j <= c``.  It is stored as a 2m x 2m DBM
over the dual variables u_{2i} = +x_i and u_{2i+1} = -x_i, so every atom
becomes a pair of coherent difference bounds (entry (p,q) always mirrors
entry (bar q, bar p), where bar flips the sign index).

The canonical form is the *tight* closure: the DBM closure strengthened
with the integer halving bounds ``M[p][q] <= floor(M[p][bar p]/2) +
floor(M[bar q][q]/2)``.  Tightly closed octagons are integer-hull exact:
every finite bound is attained by an integer point, entailment and
equivalence are entrywise comparisons, and dropping dual rows/columns
projects variables away exactly.

Relations over N program variables are octagons over 2N variables, ordered
x_0..x_{N-1}, x'_0..x'_{N-1}.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .dbm import (
    INF,
    Dbm,
    dbm_project,
    ext_min,
    fw_close,
    compose_matrix,
)

# Atom kinds: (sign_i, i, sign_j, j, c) encodes  sign_i*x_i + sign_j*x_j <= c.
# Unary bounds sign*x_i <= c are written with i == j as 2*sign*x_i <= 2c.
OctAtom = tuple[int, int, int, int, int]


def _bar(p: int) -> int:
    return p ^ 1


def _pos(i: int) -> int:
    return 2 * i


def _neg(i: int) -> int:
    return 2 * i + 1


@dataclass(frozen=True)
class Octagon:
    """num_vars variables; ``dbm`` is None exactly for the empty octagon."""

    num_vars: int
    dbm: Dbm | None
    tight: bool = False

    @property
    def is_bottom(self) -> bool:
        return self.dbm is None

    def __post_init__(self):
        if self.dbm is not None and self.dbm.dim != 2 * self.num_vars:
            raise ValueError("dual DBM dimension must be 2*num_vars")


def bottom(num_vars: int) -> Octagon:
    return Octagon(num_vars, None, tight=True)


def top(num_vars: int) -> Octagon:
    return Octagon(num_vars, Dbm.unconstrained(2 * num_vars), tight=True)


def oct_encode(atoms: Iterable[OctAtom], num_vars: int) -> Octagon:
    """Build the (raw, unclosed) coherent DBM of a list of octagonal atoms."""
    m = Dbm.unconstrained(2 * num_vars)
    rows = m.rows
    for si, i, sj, j, c in atoms:
        if not (0 <= i < num_vars and 0 <= j < num_vars):
            raise ValueError("variable index out of range")
        if si not in (-1, 1) or sj not in (-1, 1):
            raise ValueError("atom signs must be +-1")
        if i == j and si != sj:
            raise ValueError("x_i - x_i atoms are not octagonal constraints")
        # si*x_i + sj*x_j <= c  <=>  u_p - u_q <= c  with p = dual(si, i),
        # q = dual(-sj, j): u_p = si*x_i and u_q = -sj*x_j.
        p = _pos(i) if si == 1 else _neg(i)
        q = _pos(j) if sj == -1 else _neg(j)
        for a, b in ((p, q), (_bar(q), _bar(p))):
            if a == b:
                if c < 0:
                    # unsatisfiable atom on a zero difference
                    rows[a][a] = ext_min(rows[a][a], c)
                continue
            rows[a][b] = ext_min(rows[a][b], c)
    return Octagon(num_vars, m, tight=False)


def oct_decode(o: Octagon) -> list[OctAtom]:
    """All finite atoms of a (coherent) octagon, one per coherent entry pair."""
    if o.is_bottom:
        raise ValueError("cannot decode the empty octagon")
    atoms: list[OctAtom] = []
    rows = o.dbm.rows
    dim = o.dbm.dim
    for p in range(dim):
        for q in range(dim):
            if p == q or rows[p][q] == INF:
                continue
            if (_bar(q), _bar(p)) < (p, q):
                continue  # coherent twin already emitted
            i, si = p // 2, 1 if p % 2 == 0 else -1
            j, sj = q // 2, -1 if q % 2 == 0 else 1
            atoms.append((si, i, sj, j, rows[p][q]))
    return atoms


def is_coherent(o: Octagon) -> bool:
    if o.is_bottom:
        return True
    rows = o.dbm.rows
    dim = o.dbm.dim
    return all(
        rows[p][q] == rows[_bar(q)][_bar(p)]
        for p in range(dim)
        for q in range(dim)
    )


def _halving_consistent(closed: Dbm) -> bool:
    rows = closed.rows
    for p in range(closed.dim):
        a = rows[p][_bar(p)]
        b = rows[_bar(p)][p]
        if a == INF or b == INF:
            continue
        if a // 2 + b // 2 < 0:
            return False
    return True


def _tighten(closed: Dbm) -> Dbm:
    rows = closed.rows
    dim = closed.dim
    halves = [INF if rows[p][_bar(p)] == INF else rows[p][_bar(p)] // 2 for p in range(dim)]
    out = []
    for p in range(dim):
        hp = halves[p]
        row = []
        for q in range(dim):
            v = rows[p][q]
            if hp != INF:
                hq = halves[_bar(q)]
                if hq != INF:
                    v = ext_min(v, hp + hq)
            row.append(v)
        out.append(row)
    return Dbm(out)


def tight_close(o: Octagon) -> Octagon:
    """Canonical form: DBM closure plus integer halving; bottom if empty.

    Octagonal consistency is the DBM consistency of the closure together
    with non-negative halved (p, bar p) cycles.
    """
    if o.is_bottom:
        return o
    if o.tight:
        return o
    closed = fw_close(o.dbm)
    if closed is None or not _halving_consistent(closed):
        return bottom(o.num_vars)
    return Octagon(o.num_vars, _tighten(closed), tight=True)


def is_consistent_oct(o: Octagon) -> bool:
    return not tight_close(o).is_bottom


def _require_tight(o: Octagon, what: str) -> None:
    if not o.is_bottom and not o.tight:
        raise ValueError(f"{what} requires a tightly closed octagon")


def oct_leq(a: Octagon, b: Octagon) -> bool:
    a = tight_close(a)
    b = tight_close(b)
    if a.is_bottom:
        return True
    if b.is_bottom:
        return False
    if a.num_vars != b.num_vars:
        raise ValueError("variable count mismatch")
    for ra, rb in zip(a.dbm.rows, b.dbm.rows):
        for va, vb in zip(ra, rb):
            if vb == INF:
                continue
            if va == INF or va > vb:
                return False
    return True


def oct_eq(a: Octagon, b: Octagon) -> bool:
    a = tight_close(a)
    b = tight_close(b)
    if a.is_bottom or b.is_bottom:
        return a.is_bottom and b.is_bottom
    return a.num_vars == b.num_vars and a.dbm.rows == b.dbm.rows


def oct_exists(o: Octagon, drop: Iterable[int]) -> Octagon:
    """Existentially drop variables; exact on tightly closed input."""
    dropset = set(drop)
    if o.is_bottom:
        return bottom(o.num_vars - len(dropset))
    _require_tight(o, "projection")
    keep_vars = [i for i in range(o.num_vars) if i not in dropset]
    keep = []
    for i in keep_vars:
        keep.append(_pos(i))
        keep.append(_neg(i))
    return Octagon(len(keep_vars), dbm_project(o.dbm, keep), tight=True)


def oct_meet_raw(a: Octagon, b: Octagon) -> Octagon:
    """Entrywise min of the two constraint matrices (conjunction, unclosed)."""
    if a.num_vars != b.num_vars:
        raise ValueError("variable count mismatch")
    if a.is_bottom or b.is_bottom:
        return bottom(a.num_vars)
    rows = [
        [ext_min(x, y) for x, y in zip(ra, rb)]
        for ra, rb in zip(a.dbm.rows, b.dbm.rows)
    ]
    return Octagon(a.num_vars, Dbm(rows), tight=False)


def oct_compose(a: Octagon, b: Octagon, n_program_vars: int) -> Octagon:
    """Relational composition of octagonal relations over (x, x').

    Both inputs are octagons over 2*n_program_vars variables.  The glued
    3-block dual matrix is tightly closed before the middle block is erased,
    which keeps the result integer-exact.
    """
    N = n_program_vars
    if a.num_vars != 2 * N or b.num_vars != 2 * N:
        raise ValueError("relation octagons must span (x, x')")
    if a.is_bottom or b.is_bottom:
        return bottom(2 * N)
    glued = compose_matrix(a.dbm, b.dbm, 2 * N)
    closed = fw_close(glued)
    if closed is None or not _halving_consistent(closed):
        return bottom(2 * N)
    tight = _tighten(closed)
    keep = list(range(2 * N)) + list(range(4 * N, 6 * N))
    return Octagon(2 * N, dbm_project(tight, keep), tight=True)


def identity_relation(n_program_vars: int) -> Octagon:
    atoms: list[OctAtom] = []
    for i in range(n_program_vars):
        atoms.append((1, i, -1, n_program_vars + i, 0))
        atoms.append((-1, i, 1, n_program_vars + i, 0))
    return tight_close(oct_encode(atoms, 2 * n_program_vars))


def pre_image_set(r: Octagon, n_program_vars: int) -> Octagon:
    """exists x'. R(x, x'): the top-left dual block of the tight relation."""
    r = tight_close(r)
    return oct_exists(r, range(n_program_vars, 2 * n_program_vars))


def lift_set_to_relation(s: Octagon, n_program_vars: int, primed: bool) -> Octagon:
    """Embed a set over N variables as a relation constraint on x or x'."""
    if s.num_vars != n_program_vars:
        raise ValueError("set arity mismatch")
    if s.is_bottom:
        return bottom(2 * n_program_vars)
    shift = n_program_vars if primed else 0
    atoms = [
        (si, i + shift, sj, j + shift, c) for (si, i, sj, j, c) in oct_decode(s)
    ]
    return oct_encode(atoms, 2 * n_program_vars)


def max_coef(o: Octagon) -> int:
    """Largest absolute finite off-diagonal coefficient; 0 when unconstrained."""
    if o.is_bottom:
        return 0
    best = 0
    rows = o.dbm.rows
    for p in range(o.dbm.dim):
        for q in range(o.dbm.dim):
            if p != q and rows[p][q] != INF:
                best = max(best, abs(rows[p][q]))
    return best


def _sys_dual_sups(sys, num_vars: int, dim: int, names=None):
    """Per-dual-entry integer suprema of a linear system; None if infeasible."""
    from .linarith import PolyhedronLP, Unbounded, term_of_pair

    poly = PolyhedronLP(sys)
    if not poly.feasible:
        return None
    if names is None:
        names = sys.variables
    entry = [[0 if p == q else None for q in range(dim)] for p in range(dim)]
    for p in range(dim):
        for q in range(dim):
            if p == q:
                continue
            res = poly.sup(term_of_pair(p, q, names))
            if isinstance(res, Unbounded):
                entry[p][q] = INF
            else:
                entry[p][q] = res.value.numerator // res.value.denominator
    return entry


def oct_hull(items: Sequence) -> Octagon:
    """Smallest octagon containing every item; bottom for an empty union.

    Items are ``Octagon`` values or ``linarith.LinSys`` polyhedra over an
    ordered variable list; inconsistent items are skipped.  Per octagonal
    term the bound is the max over items of the tight entry (octagons) or
    the floored rational supremum (systems); the result is tightly closed.
    """
    from .linarith import LinSys

    num_vars = None
    sups = []
    for it in items:
        if isinstance(it, Octagon):
            arity = it.num_vars
        elif isinstance(it, LinSys):
            arity = len(it.variables)
        else:
            raise TypeError(f"cannot hull {type(it).__name__}")
        if num_vars is None:
            num_vars = arity
        elif num_vars != arity:
            raise ValueError("variable count mismatch in hull")
    if num_vars is None:
        raise ValueError("cannot hull an empty collection of unknown arity")
    dim = 2 * num_vars
    for it in items:
        if isinstance(it, Octagon):
            t = tight_close(it)
            if not t.is_bottom:
                sups.append(t.dbm.rows)
        else:
            entry = _sys_dual_sups(it, num_vars, dim)
            if entry is not None:
                sups.append(entry)
    if not sups:
        return bottom(num_vars)
    rows = []
    for p in range(dim):
        row = []
        for q in range(dim):
            if p == q:
                row.append(0)
                continue
            vals = [e[p][q] for e in sups]
            row.append(INF if any(v == INF for v in vals) else max(vals))
        rows.append(row)
    return tight_close(Octagon(num_vars, Dbm(rows), tight=False))
