"""Shared constructors for the relations and programs used across tests."""

from __future__ import annotations

import random

from octoterm.dbm import INF, Dbm
from octoterm.octagon import Octagon, oct_encode

# Difference-bounds relation over x1..x4 whose pre-image sequence is the
# canonical periodic example (prefix 3, period 3, rate -1 on column 4).
# Variable indices: x1..x4 = 0..3, primed = 4..7.
PERIODIC_ATOMS = [
    (1, 1, -1, 4, -1),  # x2 - x1' <= -1
    (1, 2, -1, 5, 0),   # x3 - x2' <= 0
    (1, 0, -1, 6, 0),   # x1 - x3' <= 0
    (1, 7, -1, 3, 0),   # x4' - x4 <= 0
    (1, 6, -1, 3, 0),   # x3' - x4 <= 0
]


def periodic_relation() -> Octagon:
    return oct_encode(PERIODIC_ATOMS, 8)


# Octagonal relation over (x1, x2): x1+x2 <= 5, x1'-x1 <= -2, x2'-x2 <= -3,
# x2'-x1' <= 1.  Indices: x1=0, x2=1, x1'=2, x2'=3.
TIGHT_EXAMPLE_ATOMS = [
    (1, 0, 1, 1, 5),
    (1, 2, -1, 0, -2),
    (1, 3, -1, 1, -3),
    (1, 3, -1, 2, 1),
]


def tight_example_relation() -> Octagon:
    return oct_encode(TIGHT_EXAMPLE_ATOMS, 4)


TIGHT_EXAMPLE_GOLDEN = [
    [0, INF, INF, 5, INF, INF, INF, 2],
    [INF, 0, INF, INF, INF, -2, INF, -1],
    [INF, 5, 0, INF, INF, 3, INF, 4],
    [INF, INF, INF, 0, INF, INF, INF, -3],
    [-2, INF, INF, 3, 0, INF, INF, 0],
    [INF, INF, INF, INF, INF, 0, INF, 1],
    [-1, 2, -3, 4, 1, 0, 0, 0],
    [INF, INF, INF, INF, INF, INF, INF, 0],
]


def seven_branch_relations():
    """The seven summary disjuncts of the three-branch program, over (x, y).

    Indices: x=0, y=1, x'=2, y'=3.
    """

    def enc(atoms):
        return oct_encode(atoms, 4)

    r1 = enc([(1, 0, 1, 0, -2), (1, 3, -1, 0, 0), (1, 3, -1, 2, 1), (-1, 3, 1, 2, -1)])
    r2 = enc([(-1, 3, -1, 3, -2), (1, 3, -1, 0, 0), (1, 3, -1, 2, 1), (-1, 3, 1, 2, -1)])
    r3 = enc([(-1, 3, -1, 3, 0), (1, 3, -1, 1, -1), (1, 0, -1, 2, 0), (-1, 0, 1, 2, 0),
              (1, 2, 1, 2, -2)])
    r4 = enc([(-1, 2, -1, 2, -2), (1, 0, -1, 2, 0), (-1, 0, 1, 2, 0),
              (-1, 3, -1, 3, 0), (1, 3, -1, 1, -1)])
    r5 = enc([(1, 0, -1, 2, 0), (-1, 0, 1, 2, 0), (1, 2, 1, 2, -2),
              (1, 1, -1, 3, 0), (-1, 1, 1, 3, 0), (1, 3, 1, 3, 0)])
    r6 = enc([(-1, 2, -1, 2, -2), (1, 0, -1, 2, 0), (-1, 0, 1, 2, 0),
              (1, 1, -1, 3, 0), (-1, 1, 1, 3, 0), (1, 3, 1, 3, 0)])
    r7 = enc([(-1, 2, -1, 2, -2), (-1, 3, -1, 3, 0), (1, 2, -1, 0, -1), (1, 3, -1, 2, 0)])
    return [r1, r2, r3, r4, r5, r6, r7]


BRANCHING_PROGRAM = """
vars x, y;
init l1;
l1 -> l2 : x != 0 && id(x,y);
l2 -> l3 : id(x,y);
l3 -> l4 : y' == x && x' == x;
l4 -> l1 : x' == x - 1 && y' == y;
l2 -> l5 : id(x,y);
l5 -> l6 : y > 0 && id(x,y);
l6 -> l1 : y' == y - 1 && x' == x;
l5 -> l7 : y <= 0 && id(x,y);
l7 -> l1 : id(x,y);
l1 -> l8 : x == 0 && id(x,y);
"""

TWO_PHASE_PROGRAM = """
vars x, y, y0, m, n;
init l1;
l1 -> l2 : y0' == y && id(x, y, m, n);
l2 -> l2 : x < m && x' == x + 1 && y' == y + 1 && id(m, n, y0);
l2 -> l5 : x >= m && id(x, y, m, n, y0);
l5 -> l5 : x < n && x' == x + 1 && y' == y - 1 && id(m, n, y0);
l5 -> l8 : x >= n && id(x, y, m, n, y0);
l8 -> l8 : y == y0 && id(x, y, m, n, y0);
l8 -> l10 : y != y0 && id(x, y, m, n, y0);
"""


def random_oct_relation(rng: random.Random, n_vars: int, max_coef: int = 4,
                        n_atoms: int | None = None) -> Octagon:
    """Random octagonal relation over (x, x'); may be inconsistent."""
    atoms = []
    total = n_atoms if n_atoms is not None else rng.randint(2, 2 * n_vars + 3)
    for _ in range(total):
        i = rng.randrange(2 * n_vars)
        j = rng.randrange(2 * n_vars)
        si = rng.choice((1, -1))
        sj = rng.choice((1, -1))
        if i == j and si != sj:
            sj = si
        atoms.append((si, i, sj, j, rng.randint(-max_coef, max_coef)))
    return oct_encode(atoms, 2 * n_vars)


def random_guarded_relation(rng: random.Random, n_vars: int, max_coef: int = 4) -> Octagon:
    """Random relation biased toward consistency: per-variable updates with
    octagonal guards, closer to loop bodies."""
    atoms = []
    for i in range(n_vars):
        d = rng.randint(-2, 2)
        style = rng.randrange(3)
        if style == 0:
            # x'_i = x_i + d
            atoms.append((1, n_vars + i, -1, i, d))
            atoms.append((-1, n_vars + i, 1, i, -d))
        elif style == 1:
            atoms.append((1, n_vars + i, -1, i, d))  # x'_i <= x_i + d
        else:
            atoms.append((-1, n_vars + i, 1, i, d))  # x'_i >= x_i - d
    for _ in range(rng.randint(0, n_vars + 1)):
        i = rng.randrange(n_vars)
        j = rng.randrange(n_vars)
        si = rng.choice((1, -1))
        sj = rng.choice((1, -1))
        if i == j and si != sj:
            sj = si
        atoms.append((si, i, sj, j, rng.randint(-max_coef, max_coef)))
    return oct_encode(atoms, 2 * n_vars)
