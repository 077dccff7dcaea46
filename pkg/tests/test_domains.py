"""Tests for the abstraction layer: projection, per-domain rewrite rules,
collection of unreachable material, soundness/monotonicity/idempotence
loops, termination traces, finiteness enumerations, and sorted-segment
splitting."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from shaperef.domains import (
    AbstractionParam,
    DOMAINS,
    abstract,
    measure,
    project_contents,
    split_sorted_segment,
)
from shaperef.heaps import SortedSegAtom, SymbolicHeap, normalize
from shaperef.oracle import OracleBounds, models, oracle_entails
from shaperef.syntax import parse_heap
from shaperef.terms import Const, LVar, Multiset, NIL, PVar, PureAtom, eq

from gens import (
    DATA_TERMS,
    canonical_chain_forms,
    monotonicity_trial,
    random_heap,
    random_param_multiset,
    soundness_trial,
)

MS = Multiset.of
A, B, R, X, Y = PVar("a"), PVar("b"), PVar("r"), PVar("x"), PVar("y")

SMALL_BOUNDS = OracleBounds(max_cells=4, max_extension=1, n_spare_data=1,
                            max_models=3000, max_steps=150000)


def facts_of(*pure: PureAtom):
    return SymbolicHeap(tuple(pure), ()).facts


# ---------------------------------------------------------------------------
# Projection: independent brute-force evaluator + pinned examples
# ---------------------------------------------------------------------------

def project_reference(contents: Multiset, facts, tracked: Multiset) -> Multiset:
    """Brute-force projection: partition the source keys into provable-
    equality classes, then keep per class min(source mass, tracked mass)
    occurrences of the smallest-rendering key; classes with no tracked
    budget vanish."""
    classes: list[list] = []
    for k in sorted(contents.keys(), key=str):
        for cl in classes:
            if facts.equal(k, cl[0]):
                cl.append(k)
                break
        else:
            classes.append([k])
    pairs = []
    for cl in classes:
        have = sum(contents.mult(k) for k in cl)
        budget = sum(n for t, n in tracked.items if facts.equal(t, cl[0]))
        keep = min(have, budget)
        if keep > 0:
            pairs.append((cl[0], keep))
    return MS(pairs)


def test_projection_caps_at_tracked_budget():
    assert project_contents(MS([(X, 2)]), facts_of(), MS([(X, 1)])) \
        == MS([(X, 1)])


def test_projection_of_empty_source_is_empty():
    assert project_contents(MS(), facts_of(eq(A, B)), MS([(A, 2)])) == MS()


def test_projection_merges_provably_equal_keys():
    out = project_contents(MS([(A, 1), (B, 1)]), facts_of(eq(A, B)),
                           MS([(A, 2)]))
    assert out == MS([(A, 2)])


def test_projection_drops_untracked_classes():
    out = project_contents(MS([(A, 2), (B, 1)]), facts_of(), MS([(B, 3)]))
    assert out == MS([(B, 1)])


def test_projection_matches_reference_randomized():
    rng = random.Random(990)
    checked = 0
    while checked < 1000:
        pure = []
        for _ in range(rng.randint(0, 2)):
            op = rng.choice(["=", "!=", "<="])
            pure.append(PureAtom(op, rng.choice(DATA_TERMS),
                                 rng.choice(DATA_TERMS)))
        f = facts_of(*pure)
        if f.inconsistent:
            continue
        contents = MS((rng.choice(DATA_TERMS), rng.randint(1, 3))
                      for _ in range(rng.randint(0, 3)))
        tracked = random_param_multiset(rng, max_keys=3, max_mult=2)
        out = project_contents(contents, f, tracked)
        assert out == project_reference(contents, f, tracked)
        # never invents occurrences, and is monotone in the tracked budget
        assert out.total() <= contents.total()
        grown = tracked.msum(random_param_multiset(rng, max_keys=1,
                                                   max_mult=1))
        assert out.leq(project_contents(contents, f, grown))
        checked += 1


@settings(max_examples=200, deadline=None)
@given(
    st.dictionaries(st.integers(1, 3), st.integers(1, 2), max_size=3),
    st.dictionaries(st.integers(1, 3), st.integers(1, 2), max_size=2),
    st.dictionaries(st.integers(1, 3), st.integers(1, 2), max_size=2),
)
def test_projection_properties_hypothesis(s, t, extra):
    f = facts_of()
    src = MS((Const(k), n) for k, n in s.items())
    tracked = MS((Const(k), n) for k, n in t.items())
    grown = tracked.msum(MS((Const(k), n) for k, n in extra.items()))
    out = project_contents(src, f, tracked)
    assert out == project_reference(src, f, tracked)
    assert out.leq(src)
    assert out.leq(project_contents(src, f, grown))


# ---------------------------------------------------------------------------
# Parameter validation
# ---------------------------------------------------------------------------

def test_param_rejects_unknown_domain():
    with pytest.raises(ValueError):
        AbstractionParam("foo", MS())


def test_param_rejects_logical_variables_in_tracked():
    with pytest.raises(ValueError):
        AbstractionParam("mls", MS([(LVar("d"), 1)]))


# ---------------------------------------------------------------------------
# Pinned rewrite examples (exact output and rule sequence)
# ---------------------------------------------------------------------------

EXAMPLES = [
    # id, input, domain, tracked pairs, expected rendering, expected rules
    ("mls-two-nodes-forget-data",
     "node(r,r0',{x})*node(r0',nil,{d0'})", "mls", [],
     "list(r,nil)", ["fold-at-nil"]),
    ("mls-two-nodes-track-x",
     "node(r,r0',{x})*node(r0',nil,{d0'})", "mls", [(X, 1)],
     "list(r,nil,{x:1})", ["fold-at-nil"]),
    ("mls-canonical-form-unchanged",
     "list(r,nil,{x:1})", "mls", [(X, 1)],
     "list(r,nil,{x:1})", []),
    ("mls-fold-at-witness",
     "node(r,j0',{x})*node(j0',j1',{y})*node(j1',q,_)", "mls",
     [(X, 1), (Y, 1)],
     "node(j1',q,_)*list(r,j1',{x:1,y:1})", ["fold-at-witness"]),
    ("mls-contents-merge-by-sum",
     "node(r,j0',{x})*node(j0',nil,{x})", "mls", [(X, 2)],
     "list(r,nil,{x:2})", ["fold-at-nil"]),
    ("mls-contents-sum-capped",
     "node(r,j0',{x})*node(j0',nil,{x})", "mls", [(X, 1)],
     "list(r,nil,{x:1})", ["fold-at-nil"]),
    ("mls-wild-payload-contributes-nothing",
     "node(r,j0',_)*node(j0',nil,{x})", "mls", [(X, 1)],
     "list(r,nil,{x:1})", ["fold-at-nil"]),
    ("mls-fold-under-true-conjunct",
     "node(r,j0',{x})*node(j0',nil,{y})*true", "mls", [(X, 1)],
     "list(r,nil,{x:1})*true", ["fold-at-nil"]),
    ("mls-program-var-junction-kept",
     "node(r,q,{x})*node(q,nil,{y})", "mls", [],
     "node(q,nil,{y})*node(r,q,{x})", []),
    ("mls-garbage-collected",
     "list(r,nil)*node(g0',g1',_)", "mls", [],
     "list(r,nil)*true", ["collect-garbage"]),
    ("mls-cycle-collected",
     "list(r,nil)*node(c0',c1',_)*node(c1',c0',_)", "mls", [],
     "list(r,nil)*true", ["collect-cycle"]),
    ("mls-pure-occurrence-blocks-garbage",
     "x0'!=q /\\ node(x0',g0',_)", "mls", [],
     "x0'!=q /\\ node(x0',g0',_)", []),
    ("rls-two-nodes-fold",
     "node(s,x0',_)*node(x0',nil,_)", "rls", [],
     "list(s,nil)", ["fold-at-nil"]),
    ("rls-tracked-head-protected",
     "node(r,x0',_)*node(x0',nil,_)", "rls", [(R, 1)],
     "node(r,x0',_)*node(x0',nil,_)", []),
    ("rls-emp-fixed",
     "emp", "rls", [],
     "emp", []),
    ("sls-node-pair-interval",
     "node(r,x0',{3})*node(x0',nil,{7})", "sls", [],
     "slseg(r,nil,[3,8))", ["fold-at-nil"]),
    ("sls-segment-merge",
     "slseg(r,x0',[0,4),{1:1})*slseg(x0',nil,[4,9),{5:1})", "sls",
     [(Const(1), 1), (Const(5), 1)],
     "slseg(r,nil,[0,9),{1:1,5:1})", ["fold-at-nil"]),
    ("sls-unordered-nodes-kept",
     "node(r,x0',{7})*node(x0',nil,{3})", "sls", [],
     "node(r,x0',{7})*node(x0',nil,{3})", []),
    ("sls-node-absorbed-into-segment",
     "node(r,x0',{1})*slseg(x0',nil,[2,5))", "sls", [],
     "slseg(r,nil,[1,5))", ["fold-at-nil"]),
    ("sls-segment-absorbs-node",
     "slseg(r,x0',[2,5))*node(x0',nil,{5})", "sls", [],
     "slseg(r,nil,[2,6))", ["fold-at-nil"]),
    ("sls-fold-at-witness",
     "node(r,j0',{3})*node(j0',j1',{5})*node(j1',q,{7})", "sls",
     [(Const(3), 1), (Const(5), 1)],
     "node(j1',q,{7})*slseg(r,j1',[3,6),{3:1,5:1})", ["fold-at-witness"]),
]


@pytest.mark.parametrize("src,domain,tracked,expected,rules",
                         [c[1:] for c in EXAMPLES],
                         ids=[c[0] for c in EXAMPLES])
def test_pinned_rewrite_examples(src, domain, tracked, expected, rules):
    out, trace = abstract(parse_heap(src), AbstractionParam(domain,
                                                            MS(tracked)))
    assert str(out) == expected
    assert [s.rule for s in trace.steps] == rules


def test_garbage_then_cycle_leaves_only_true():
    h = parse_heap("node(g0',g1',_)*node(c0',c1',_)*node(c1',c0',_)")
    out, trace = abstract(h, AbstractionParam("mls", MS()))
    assert str(out) == "true"
    assert [s.rule for s in trace.steps] == ["collect-garbage",
                                             "collect-cycle"]


def test_trace_steps_decrease_measure_and_render():
    h = parse_heap("node(g0',g1',_)*node(c0',c1',_)*node(c1',c0',_)")
    _, trace = abstract(h, AbstractionParam("mls", MS()))
    for step in trace.steps:
        assert measure(step.after) < measure(step.before)
    text = trace.render()
    assert "collect-garbage" in text and "~>" in text


def test_tracked_head_keeps_removal_precondition_canonical():
    # a deletion routine's loop invariant: the cell at x stays explicit
    # exactly while x is tracked
    pre = parse_heap("list(r,x)*node(x,n0',_)*list(n0',nil)")
    kept, trace = abstract(pre, AbstractionParam("rls", MS([(X, 1)])))
    assert str(kept) == str(normalize(pre))
    assert not trace.steps
    folded, trace2 = abstract(pre, AbstractionParam("rls", MS()))
    assert str(folded) == "list(r,x)*list(x,nil)"
    assert [s.rule for s in trace2.steps] == ["fold-at-nil"]


# ---------------------------------------------------------------------------
# Property loops (shared bodies; the acceptance suite reruns them at volume)
# ---------------------------------------------------------------------------

_SEEDS = {"mls": 101, "rls": 202, "sls": 303}


@pytest.mark.parametrize("domain", DOMAINS)
def test_abstraction_sound_on_random_heaps(domain):
    rng = random.Random(_SEEDS[domain])
    fails, skips = [], 0
    for _ in range(150):
        status, detail = soundness_trial(rng, domain)
        if status == "fail":
            fails.append(detail)
        elif status == "skip":
            skips += 1
    assert not fails, fails[:3]
    assert skips < 40  # the loop must mostly measure, not skip


@pytest.mark.parametrize("domain", DOMAINS)
def test_abstraction_monotone_in_tracked_multiset(domain):
    rng = random.Random(_SEEDS[domain] + 1)
    fails = []
    for i in range(200):
        status, detail = monotonicity_trial(rng, domain,
                                            oracle_check=(i % 10 == 0))
        if status == "fail":
            fails.append(detail)
    assert not fails, fails[:3]


@pytest.mark.parametrize("domain", DOMAINS)
def test_abstraction_idempotent(domain):
    rng = random.Random(_SEEDS[domain] + 2)
    for _ in range(150):
        h = random_heap(rng, domain=domain, max_atoms=3,
                        with_true=rng.random() < 0.2, n_pure=1)
        param = AbstractionParam(domain, random_param_multiset(rng))
        once, _ = abstract(h, param)
        twice, trace = abstract(once, param)
        assert str(twice) == str(once)
        assert not trace.steps


FINITENESS = [
    ("mls-tracked", "mls", [(X, 1), (Const(2), 2)],
     [X, Const(1), Const(2)], False),
    ("mls-empty", "mls", [], [X, Const(1), Const(2)], False),
    ("rls-tracked", "rls", [(R, 1)], [None], False),
    ("rls-empty", "rls", [], [None], False),
    ("sls-tracked", "sls", [(Const(2), 1)],
     [Const(1), Const(2), Const(3)], True),
    ("sls-empty", "sls", [], [Const(1), Const(2), Const(3)], True),
]


@pytest.mark.parametrize("domain,tracked,pool,nondec",
                         [c[1:] for c in FINITENESS],
                         ids=[c[0] for c in FINITENESS])
def test_canonical_forms_finite_and_stable(domain, tracked, pool, nondec):
    rng = random.Random(17)
    small = canonical_chain_forms(domain, MS(tracked), range(1, 7), pool,
                                  rng, nondecreasing=nondec)
    big = canonical_chain_forms(domain, MS(tracked), range(7, 11), pool,
                                rng, nondecreasing=nondec)
    # longer chains reach no new canonical form once the budget saturates
    assert big <= small
    assert len(small) <= 64
    for form in small:
        assert form.count("(") <= 5  # one "(" per spatial atom


def test_sorted_outputs_respect_interval_invariant():
    rng = random.Random(404)
    for _ in range(150):
        h = random_heap(rng, domain="sls", max_atoms=3, n_pure=1)
        out, _ = abstract(h, AbstractionParam("sls",
                                              random_param_multiset(rng)))
        f = out.facts
        for a in out.spatial:
            if isinstance(a, SortedSegAtom):
                for k in a.contents.keys():
                    assert f.proves_leq(a.lo, k), (h, out, k)
                    assert f.proves_lt(k, a.hi), (h, out, k)


# ---------------------------------------------------------------------------
# Sorted-segment splitting
# ---------------------------------------------------------------------------

def _seg(contents) -> SortedSegAtom:
    return SortedSegAtom(R, NIL, Const(0), Const(10), contents)


def test_split_partitions_interval_and_contents():
    left, right = split_sorted_segment(
        _seg(MS([(Const(3), 1), (Const(7), 1)])), Const(5), facts_of(),
        LVar("m"))
    assert str(left) == "slseg(r,m',[0,5),{3:1})"
    assert str(right) == "slseg(m',nil,[5,10),{7:1})"


def test_split_of_empty_contents():
    left, right = split_sorted_segment(_seg(MS()), Const(5), facts_of(),
                                       LVar("m"))
    assert left.contents.is_empty() and right.contents.is_empty()
    assert (left.lo, left.hi, right.lo, right.hi) \
        == (Const(0), Const(5), Const(5), Const(10))


def test_split_rejects_boundary_cut():
    with pytest.raises(ValueError):
        split_sorted_segment(_seg(MS()), Const(0), facts_of(), LVar("m"))


def test_split_rejects_unplaceable_key():
    with pytest.raises(ValueError):
        split_sorted_segment(_seg(MS([(Y, 1)])), Const(5), facts_of(),
                             LVar("m"))


def test_split_with_symbolic_keys_uses_order_facts():
    f = facts_of(PureAtom("<", X, Const(5)), PureAtom("<=", Const(5), Y),
                 PureAtom("<", Const(0), X), PureAtom("<", Y, Const(10)))
    left, right = split_sorted_segment(_seg(MS([(X, 1), (Y, 1)])), Const(5),
                                       f, LVar("m"))
    assert left.contents == MS([(X, 1)])
    assert right.contents == MS([(Y, 1)])


def test_split_halves_rejoin_to_the_original_claim():
    seg = _seg(MS([(Const(3), 1), (Const(7), 1)]))
    left, right = split_sorted_segment(seg, Const(5), facts_of(), LVar("m"))
    split_h = normalize(SymbolicHeap((), (left, right)))
    orig_h = normalize(SymbolicHeap((), (seg,)))
    assert oracle_entails(split_h, orig_h, bounds=SMALL_BOUNDS).holds
    assert any(True for _ in models(split_h, SMALL_BOUNDS))
    # with contents pinning both halves nonempty the directions coincide
    assert oracle_entails(orig_h, split_h, bounds=SMALL_BOUNDS).holds


def test_split_is_a_strict_strengthening_without_contents():
    # a one-cell segment satisfies the original but no two-part split, so
    # splitting may only ever be offered as an extra disjunct
    left, right = split_sorted_segment(_seg(MS()), Const(5), facts_of(),
                                       LVar("m"))
    split_h = normalize(SymbolicHeap((), (left, right)))
    orig_h = normalize(SymbolicHeap((), (_seg(MS()),)))
    assert oracle_entails(split_h, orig_h, bounds=SMALL_BOUNDS).holds
    assert not oracle_entails(orig_h, split_h, bounds=SMALL_BOUNDS).holds
