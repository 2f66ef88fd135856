"""Linear ranking functions for octagonal relations.

A well-founded octagonal relation need not admit a linear ranking function
itself, but the strengthened witness relation R and exists x'. R^(4N^2)
always does.  Synthesis is a Farkas search over the tight constraint rows
of the witness: tight octagons are integer-hull exact, so a rational
certificate is enough, and clearing denominators gives an integer
function with decrease >= 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm

from .linarith import (
    LE,
    LinSys,
    LinTerm,
    TemplateRow,
    Value,
    entails,
    farkas_template,
    lp_inf,
)
from .octagon import (
    Octagon,
    bottom,
    lift_set_to_relation,
    oct_decode,
    oct_meet_raw,
    pre_image_set,
    tight_close,
)
from .term_oct import fast_power, wnt


def var_names(n_program_vars: int) -> list[str]:
    return [f"x{i}" for i in range(n_program_vars)] + [
        f"x{i}'" for i in range(n_program_vars)
    ]


def oct_to_linsys(o: Octagon, names: list[str]) -> LinSys:
    """The tight constraint rows of an octagon as a linear system."""
    o = tight_close(o)
    if o.is_bottom:
        raise ValueError("cannot linearize the empty octagon")
    rows = []
    for si, i, sj, j, c in oct_decode(o):
        t = LinTerm({}, -c)
        t = t + LinTerm({names[i]: si})
        t = t + LinTerm({names[j]: sj})
        rows.append((t, LE))
    return LinSys(rows, names)


@dataclass(frozen=True)
class RankingWitness:
    witness_relation: Octagon
    function: LinTerm  # integer coefficients over the unprimed variables
    decrease: int
    lower_bound: int


@dataclass(frozen=True)
class TriviallyWF:
    """The witness relation is empty; well-foundedness holds vacuously."""


@dataclass(frozen=True)
class NotFoundLrf:
    pass


def witness_relation(rel: Octagon, n_program_vars: int) -> Octagon:
    """R strengthened with the domain of R^(4N^2); bottom when that dies."""
    N = n_program_vars
    power = fast_power(rel, 4 * N * N, N)
    if power.is_bottom:
        return bottom(2 * N)
    dom = pre_image_set(power, N)
    return tight_close(
        oct_meet_raw(tight_close(rel), lift_set_to_relation(dom, N, primed=False))
    )


def _primed(f: LinTerm, n_program_vars: int) -> LinTerm:
    names = var_names(n_program_vars)
    return LinTerm(
        {names[n_program_vars + i]: f.coef(names[i]) for i in range(n_program_vars)},
        f.const,
    )


def synthesize_lrf(v: Octagon, n_program_vars: int):
    """Find an integer linear ranking function for the relation v.

    Returns RankingWitness, NotFoundLrf, or TriviallyWF for empty v.
    """
    N = n_program_vars
    v = tight_close(v)
    if v.is_bottom:
        return TriviallyWF()
    names = var_names(N)
    sys = oct_to_linsys(v, names)
    coef_names = [f"a{i}" for i in range(N)]
    # decrease: sum a_i (x_i' - x_i) + 1 <= 0
    decrease = TemplateRow(
        coeffs={
            **{names[i]: LinTerm({coef_names[i]: -1}) for i in range(N)},
            **{names[N + i]: LinTerm({coef_names[i]: 1}) for i in range(N)},
        },
        const=LinTerm({}, 1),
    )
    # bounded: h - sum a_i x_i <= 0
    bounded = TemplateRow(
        coeffs={names[i]: LinTerm({coef_names[i]: -1}) for i in range(N)},
        const=LinTerm({"h": 1}),
    )
    w = farkas_template(sys, [decrease, bounded])
    if w is None:
        return NotFoundLrf()
    scale = lcm(*(w.assignment[a].denominator for a in coef_names)) if N else 1
    f = LinTerm({names[i]: w.assignment[coef_names[i]] * scale for i in range(N)})
    # exact integer decrease and lower bound for the scaled function
    delta = lp_inf(sys, f - _primed(f, N))
    assert isinstance(delta, Value) and delta.value > 0
    decrease_val = delta.value.numerator // delta.value.denominator
    if Fraction(decrease_val) < delta.value:
        decrease_val += 1  # ceil: f is integer-valued on integer points
    proj = oct_to_linsys(pre_image_set(v, N), names[:N])
    low = lp_inf(proj, f)
    assert isinstance(low, Value)
    h = low.value.numerator // low.value.denominator
    if Fraction(h) < low.value:
        h += 1
    witness = RankingWitness(v, f, max(1, decrease_val), h)
    assert verify_lrf(v, f, witness.decrease, h, N)
    return witness


def verify_lrf(v: Octagon, f: LinTerm, decrease: int, h: int, n_program_vars: int) -> bool:
    """Both ranking conditions as exact entailments over the tight rows."""
    N = n_program_vars
    v = tight_close(v)
    if v.is_bottom:
        return True
    names = var_names(N)
    sys = oct_to_linsys(v, names)
    dec_row = (_primed(f, N) - f + decrease, LE)  # f(x) - f(x') >= decrease
    if not entails(sys, dec_row):
        return False
    proj = oct_to_linsys(pre_image_set(v, N), names[:N])
    return entails(proj, (LinTerm({}, h) - f, LE))  # f(x) >= h


def is_bounded_below(v: Octagon, f: LinTerm, n_program_vars: int) -> bool:
    proj = pre_image_set(tight_close(v), n_program_vars)
    if proj.is_bottom:
        return True
    sys = oct_to_linsys(proj, var_names(n_program_vars)[: n_program_vars])
    return isinstance(lp_inf(sys, f), Value)


@dataclass(frozen=True)
class WellFounded:
    proof: RankingWitness | TriviallyWF


@dataclass(frozen=True)
class NotWellFounded:
    wnt_set: Octagon


def prove_termination(rel: Octagon, n_program_vars: int):
    """Decide well-foundedness; produce a verified ranking witness when WF.

    If the weakest non-termination set is empty, a ranking function must
    exist on the witness relation; failing to find one indicates a bug and
    aborts loudly.
    """
    N = n_program_vars
    res = wnt(rel, N)
    if not res.set.is_bottom:
        return NotWellFounded(res.set)
    v = witness_relation(rel, N)
    if v.is_bottom:
        return WellFounded(TriviallyWF())
    found = synthesize_lrf(v, N)
    if isinstance(found, NotFoundLrf):
        raise AssertionError(
            "relation is well founded but no linear ranking function was "
            "found on the witness relation; synthesis completeness violated"
        )
    return WellFounded(found)
