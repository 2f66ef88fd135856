import random

import pytest

from octoterm.linarith import LE, LinTerm, entails
from octoterm.octagon import bottom, oct_encode, oct_eq, tight_close
from octoterm.ranking import (
    NotFoundLrf,
    NotWellFounded,
    RankingWitness,
    TriviallyWF,
    WellFounded,
    is_bounded_below,
    oct_to_linsys,
    prove_termination,
    synthesize_lrf,
    var_names,
    verify_lrf,
    witness_relation,
)
from octoterm.term_oct import is_well_founded, wnt

from helpers import periodic_relation, random_guarded_relation, seven_branch_relations


def guarded_decrement():
    return oct_encode([(1, 0, -1, 1, 1), (-1, 0, 1, 1, -1), (-1, 0, -1, 0, 0)], 2)


def identity_rel():
    return oct_encode([(1, 0, -1, 1, 0), (-1, 0, 1, 1, 0)], 2)


def test_witness_relation_trivial_cases():
    # relation whose square is empty: x >= 0, x' = x-1, x <= 0
    r = oct_encode(
        [(1, 0, -1, 1, 1), (-1, 0, 1, 1, -1), (-1, 0, -1, 0, 0), (1, 0, 1, 0, 0)], 2
    )
    assert witness_relation(r, 1).is_bottom
    # unguarded decrement is unchanged by strengthening
    d = oct_encode([(1, 0, -1, 1, 1), (-1, 0, 1, 1, -1)], 2)
    assert oct_eq(witness_relation(d, 1), tight_close(d))


def test_synthesize_on_guarded_decrement():
    w = synthesize_lrf(tight_close(guarded_decrement()), 1)
    assert isinstance(w, RankingWitness)
    assert w.function.coef("x0") == 1
    assert w.lower_bound == 0
    assert w.decrease >= 1


def test_synthesize_identity_fails():
    assert isinstance(synthesize_lrf(tight_close(identity_rel()), 1), NotFoundLrf)


def test_synthesize_bottom_trivially_wf():
    assert isinstance(synthesize_lrf(bottom(2), 1), TriviallyWF)


def test_stated_function_on_periodic_relation():
    r = periodic_relation()
    names = var_names(4)
    f = LinTerm({names[0]: -1, names[1]: -1, names[2]: -1, names[3]: 3})
    # decreasing on the relation itself with decrease 1
    sys = oct_to_linsys(tight_close(r), names)
    primed = LinTerm({names[4 + i]: f.coef(names[i]) for i in range(4)})
    assert entails(sys, (primed - f + 1, LE))
    # not bounded below without strengthening
    assert not is_bounded_below(tight_close(r), f, 4)
    wit = witness_relation(r, 4)
    assert not wit.is_bottom
    assert is_bounded_below(wit, f, 4)
    assert verify_lrf(wit, f, 1, -1000, 4)
    assert not verify_lrf(tight_close(r), f, 1, -1000, 4)


def test_prove_termination_seven_relations():
    r1, r2, r3, r4, r5, r6, r7 = seven_branch_relations()
    for r in (r2, r3, r4, r7):
        res = prove_termination(r, 2)
        assert isinstance(res, WellFounded)
        if isinstance(res.proof, RankingWitness):
            assert verify_lrf(
                res.proof.witness_relation,
                res.proof.function,
                res.proof.decrease,
                res.proof.lower_bound,
                2,
            )
    res1 = prove_termination(r1, 2)
    assert isinstance(res1, NotWellFounded)
    assert oct_eq(res1.wnt_set, tight_close(oct_encode([(1, 0, 1, 0, -2)], 2)))
    ident = prove_termination(identity_rel(), 1)
    assert isinstance(ident, NotWellFounded)


def test_verify_lrf_examples():
    v = tight_close(guarded_decrement())
    f = LinTerm({"x0": 1})
    assert verify_lrf(v, f, 1, 0, 1)
    assert not verify_lrf(v, -f, 1, 0, 1)


def test_completeness_on_samples():
    # well-founded iff the strengthened witness admits a linear ranking
    # function (empty witness counts as trivially ranked)
    rng = random.Random(77)
    found_wf = 0
    for _ in range(60):
        r = random_guarded_relation(rng, 2)
        wf = is_well_founded(r, 2)
        wit = witness_relation(r, 2)
        if wit.is_bottom:
            synth_ok = True
        else:
            synth_ok = isinstance(synthesize_lrf(wit, 2), RankingWitness)
        assert wf == synth_ok
        if wf:
            found_wf += 1
    assert found_wf >= 3


def test_wrs_preserved_by_witness():
    rng = random.Random(79)
    for _ in range(25):
        r = random_guarded_relation(rng, 2)
        wit = witness_relation(r, 2)
        assert oct_eq(wnt(r, 2).set, wnt(wit, 2).set)
