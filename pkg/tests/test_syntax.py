"""Round-trip and error tests for the canonical textual format."""

from __future__ import annotations

import random

import pytest

from shaperef.heaps import TOP, normalize
from shaperef.syntax import ParseError, parse_disj, parse_heap, parse_judgment, parse_term

from gens import random_heap


CASES = [
    "emp",
    "true",
    "false /\\ emp",
    "x=1 /\\ emp",
    "x=nil /\\ node(r,x',_) * list(x',nil,{x:1})",
    "node(x,nil,{1})",
    "node(x,y,{d'})",
    "list(x,nil)",
    "list(x,nil,{x:1,2:3})",
    "slseg(a,b,[0,10),{3:1,7:1})",
    "slseg(a,b,[lo',hi'))",
    "slseg(a,nil,[d,d+1))",
    "t!=nil /\\ res=0 /\\ true",
    "d=x /\\ true",
]


@pytest.mark.parametrize("text", CASES)
def test_round_trip_examples(text):
    h = parse_heap(text)
    assert parse_heap(str(h)) == h


def test_round_trip_random_normalized_heaps():
    rng = random.Random(13)
    for _ in range(200):
        for dom in ("mls", "rls", "sls"):
            h = random_heap(rng, dom)
            assert parse_heap(str(h)) == h


def test_parse_disj():
    d = parse_disj("d=x /\\ true \\/ t'!=nil /\\ res=0 /\\ node(t,t',{d'}) * true")
    assert len(d.heaps) == 2
    assert parse_disj("TOP") is TOP
    assert parse_disj(str(d)) == d


def test_parse_judgment():
    lhs, rhs = parse_judgment("node(x,nil,{1}) |- list(x,nil,{})")
    assert str(lhs) == "node(x,nil,{1})"
    assert str(rhs) == "list(x,nil)"


def test_parse_term_forms():
    assert str(parse_term("x'")) == "x'"
    assert str(parse_term("d+1")) == "d+1"
    assert str(parse_term("nil")) == "nil"
    assert str(parse_term("-3")) == "-3"


@pytest.mark.parametrize("bad", [
    "node(x,nil)",          # missing payload
    "list(x)",              # missing dst
    "x=",                   # missing rhs
    "node(x,nil,_) %",      # trailing garbage
    "slseg(a,b,[0,10],{})", # wrong interval bracket
])
def test_parse_errors(bad):
    with pytest.raises(ParseError):
        parse_heap(bad)


def test_multiset_bare_keys_default_to_one():
    h = parse_heap("list(x,nil,{x})")
    assert h == parse_heap("list(x,nil,{x:1})")
