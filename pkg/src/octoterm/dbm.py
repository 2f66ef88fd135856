"""Difference bounds matrices (DBMs) over the integers extended with infinity.

A DBM of dimension m encodes the constraint ``/\\ { v_i - v_j <= M[i][j] }``
over integer variables v_0..v_{m-1}; the entry ``INF`` means "no bound".
Closing a consistent matrix with Floyd-Warshall yields the unique canonical
form (zero diagonal, triangle inequality), on which entailment, equivalence,
projection and relational composition are simple entrywise operations.

Entries are Python ints (arbitrary precision) or ``INF``.  Closure dispatches
to a vectorized int64 kernel when the input provably cannot overflow it and
falls back to exact bignum arithmetic otherwise.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

INF = math.inf

# int64 kernel limits: finite inputs below _NP_SAFE cannot reach the inf
# sentinel through dim doublings (mu_k <= 2*mu_{k-1} during closure).
_NP_INF = 1 << 61
_NP_CLAMP = 1 << 59


def is_finite(v) -> bool:
    return v is not INF and v != INF


def ext_add(a, b):
    """Addition on Z u {INF}; INF absorbs."""
    if a == INF or b == INF:
        return INF
    return a + b


def ext_min(a, b):
    return a if a <= b else b


class Dbm:
    """Square matrix of int-or-INF bounds.

    Instances are treated as immutable by every public operation; internal
    code builds a fresh ``rows`` list and never aliases an argument's rows.
    """

    __slots__ = ("dim", "rows")

    def __init__(self, rows: Sequence[Sequence]):
        self.dim = len(rows)
        self.rows = [list(r) for r in rows]
        for r in self.rows:
            if len(r) != self.dim:
                raise ValueError("DBM must be square")

    @classmethod
    def unconstrained(cls, dim: int) -> "Dbm":
        rows = [[INF] * dim for _ in range(dim)]
        for i in range(dim):
            rows[i][i] = 0
        return cls(rows)

    def copy(self) -> "Dbm":
        return Dbm(self.rows)

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def __eq__(self, other) -> bool:
        return isinstance(other, Dbm) and self.rows == other.rows

    def __hash__(self):
        return hash(tuple(tuple(r) for r in self.rows))

    def __repr__(self) -> str:
        def fmt(v):
            return "oo" if v == INF else str(v)

        return "Dbm([%s])" % ", ".join(
            "[" + ", ".join(fmt(v) for v in r) + "]" for r in self.rows
        )

    def max_abs_finite(self) -> int:
        best = 0
        for r in self.rows:
            for v in r:
                if v != INF and abs(v) > best:
                    best = abs(v)
        return best


def _fw_bigint(rows: list[list], dim: int):
    for i in range(dim):
        d = rows[i][i]
        if d != INF and d < 0:
            return None
        rows[i][i] = 0
    for k in range(dim):
        rk = rows[k]
        for i in range(dim):
            ri = rows[i]
            rik = ri[k]
            if rik == INF:
                continue
            for j in range(dim):
                w = rk[j]
                if w == INF:
                    continue
                cand = rik + w
                if cand < ri[j]:
                    ri[j] = cand
            if ri[i] < 0:
                return None
    return rows


def _fw_numpy(rows: list[list], dim: int):
    a = np.empty((dim, dim), dtype=np.int64)
    for i, r in enumerate(rows):
        for j, v in enumerate(r):
            a[i, j] = _NP_INF if v == INF else v
    d = np.diagonal(a)
    if bool((d < 0).any()):
        return None
    np.fill_diagonal(a, 0)
    for k in range(dim):
        np.minimum(a, a[:, k : k + 1] + a[k : k + 1, :], out=a)
        a[a >= _NP_CLAMP] = _NP_INF
        if bool((np.diagonal(a) < 0).any()):
            return None
    out = a.tolist()
    for i in range(dim):
        row = out[i]
        for j in range(dim):
            if row[j] >= _NP_CLAMP:
                row[j] = INF
    return out


def fw_close(m: Dbm) -> Dbm | None:
    """Floyd-Warshall closure; ``None`` when a negative cycle exists."""
    dim = m.dim
    rows = [list(r) for r in m.rows]
    if dim == 0:
        return Dbm(rows)
    mu = m.max_abs_finite()
    # While no negative cycle lies within the processed node set, every
    # intermediate entry is a simple-path weight, so magnitudes stay below
    # 2*(dim+1)*(mu+1); past the first negative cycle the diagonal test
    # fires at that same iteration.
    if 2 * (dim + 1) * (mu + 1) < _NP_CLAMP // 4:
        res = _fw_numpy(rows, dim)
        return None if res is None else Dbm(res)
    res = _fw_bigint(rows, dim)
    return None if res is None else Dbm(res)


def is_consistent(m: Dbm) -> bool:
    return fw_close(m) is not None


def is_closed(m: Dbm) -> bool:
    rows = m.rows
    dim = m.dim
    for i in range(dim):
        if rows[i][i] != 0:
            return False
    for k in range(dim):
        for i in range(dim):
            rik = rows[i][k]
            if rik == INF:
                continue
            for j in range(dim):
                if rows[k][j] == INF:
                    continue
                if rows[i][j] > rik + rows[k][j]:
                    return False
    return True


def dbm_leq(a: Dbm, b: Dbm) -> bool:
    """Entailment of closed consistent DBMs: a implies b iff a <= b entrywise."""
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    for ra, rb in zip(a.rows, b.rows):
        for va, vb in zip(ra, rb):
            if vb == INF:
                continue
            if va == INF or va > vb:
                return False
    return True


def dbm_eq(a: Dbm, b: Dbm) -> bool:
    return a.dim == b.dim and a.rows == b.rows


def dbm_project(m: Dbm, keep: Iterable[int]) -> Dbm:
    """Restrict a closed consistent DBM to the given indices (in order).

    The result is the closed DBM of the projection (existential elimination
    of the dropped variables).
    """
    idx = list(keep)
    return Dbm([[m.rows[i][j] for j in idx] for i in idx])


def dbm_min(a: Dbm, b: Dbm) -> Dbm:
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    return Dbm(
        [
            [ext_min(x, y) for x, y in zip(ra, rb)]
            for ra, rb in zip(a.rows, b.rows)
        ]
    )


def dbm_add_rate(a: Dbm, rate: Dbm, n: int) -> Dbm:
    """Entrywise a + n*rate; INF absorbs (in either operand)."""
    if a.dim != rate.dim:
        raise ValueError("dimension mismatch")
    out = []
    for ra, rl in zip(a.rows, rate.rows):
        row = []
        for x, l in zip(ra, rl):
            if x == INF or l == INF:
                row.append(INF)
            else:
                row.append(x + n * l)
        out.append(row)
    return Dbm(out)


def compose_matrix(a: Dbm, b: Dbm, half: int) -> Dbm:
    """Assemble the 3-block matrix gluing relation DBMs a and b.

    Both arguments are 2*half x 2*half matrices over (v, v'); the middle
    block is min(bottom-right of a, top-left of b).  Closing the result and
    erasing the middle rows/columns yields the composition a o b.
    """
    n = half
    dim = 3 * n
    rows = [[INF] * dim for _ in range(dim)]
    for i in range(n):
        for j in range(n):
            rows[i][j] = a.rows[i][j]
            rows[i][n + j] = a.rows[i][n + j]
            rows[n + i][j] = a.rows[n + i][j]
            rows[n + i][n + j] = ext_min(a.rows[n + i][n + j], b.rows[i][j])
            rows[n + i][2 * n + j] = b.rows[i][n + j]
            rows[2 * n + i][n + j] = b.rows[n + i][j]
            rows[2 * n + i][2 * n + j] = b.rows[n + i][n + j]
    return Dbm(rows)


def dbm_compose(a: Dbm, b: Dbm) -> Dbm | None:
    """Relational composition of two 2N x 2N relation DBMs; None if empty."""
    if a.dim != b.dim or a.dim % 2 != 0:
        raise ValueError("relation DBMs must share an even dimension")
    n = a.dim // 2
    glued = fw_close(compose_matrix(a, b, n))
    if glued is None:
        return None
    keep = list(range(n)) + list(range(2 * n, 3 * n))
    return dbm_project(glued, keep)
