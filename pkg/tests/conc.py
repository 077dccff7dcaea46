"""Concrete reference interpreter for the source language.

States are (store, heap) pairs in the oracle's model representation:
values are ints (data sort) or ("a", k) address tuples with ("a", 0) as
nil; heaps map addresses to (next value, data value) pairs.  The
interpreter is the ground truth for command-level exactness tests and for
whole-program sanity runs.

A "*" draws from a pool matched to its position, mirroring the sorted
universes the model enumerator uses: next-pointer positions range over
the allocated addresses plus nil plus one dangling address, data
positions over the integer universe, and unconstrained positions
(plain assignment, comparison operands) over both.

Order comparisons are integer comparisons: applying "<" or "<=" to nil
or an address is a runtime type fault, like dereferencing a
non-allocated address.  Faults propagate through the connectives with
strong-Kleene strength: a conjunction with one false operand is false
even if the other faults, and dually for disjunction.
"""

from __future__ import annotations

import itertools
from typing import Optional

from shaperef.lang import (AllocNode, AndC, Assert, Assign, Ast, Cond, Expr,
                           If, IntE, Load, NilE, NondetC, NondetE, NotC, OrC,
                           RelC, Store, VarE, While)
from shaperef.oracle import NIL_V

DANGLING = ("a", 990)
FAULT = "fault"


def addr_pool(heap: dict) -> list:
    return sorted(heap) + [NIL_V, DANGLING]


def mixed_pool(heap: dict, data: list) -> list:
    return list(data) + sorted(heap) + [NIL_V, DANGLING]


def expr_choices(e: Expr, store: dict, heap: dict, data: list,
                 position: str = "any") -> list:
    """Possible values of an expression; '*' branches over its position pool."""
    if isinstance(e, VarE):
        return [store[e.name]]
    if isinstance(e, NilE):
        return [NIL_V]
    if isinstance(e, IntE):
        return [e.value]
    if isinstance(e, NondetE):
        if position == "next":
            return addr_pool(heap)
        if position == "data":
            return list(data)
        return mixed_pool(heap, data)
    raise TypeError(f"not an expression: {e}")


def rel_holds(op: str, a, b):
    """Three-valued comparison: True, False, or FAULT (bad order operand)."""
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if not isinstance(a, int) or not isinstance(b, int):
        return FAULT
    return a <= b if op == "<=" else a < b


def _k_and(x, y):
    if x is False or y is False:
        return False
    if x is FAULT or y is FAULT:
        return FAULT
    return True


def _k_or(x, y):
    if x is True or y is True:
        return True
    if x is FAULT or y is FAULT:
        return FAULT
    return False


def _k_not(x):
    return FAULT if x is FAULT else not x


def cond_choices(c: Cond, store: dict, heap: dict, data: list) -> set:
    """Truth values the condition can take: True, False, and/or FAULT."""
    if isinstance(c, NondetC):
        return {True, False}
    if isinstance(c, RelC):
        return {rel_holds(c.op, a, b)
                for a in expr_choices(c.lhs, store, heap, data)
                for b in expr_choices(c.rhs, store, heap, data)}
    if isinstance(c, AndC):
        return {_k_and(x, y)
                for x in cond_choices(c.lhs, store, heap, data)
                for y in cond_choices(c.rhs, store, heap, data)}
    if isinstance(c, OrC):
        return {_k_or(x, y)
                for x in cond_choices(c.lhs, store, heap, data)
                for y in cond_choices(c.rhs, store, heap, data)}
    if isinstance(c, NotC):
        return {_k_not(x) for x in cond_choices(c.sub, store, heap, data)}
    raise TypeError(f"not a condition: {c}")


def _pick(rng, choices: set):
    return rng.choice(sorted(choices, key=str))


def _fresh_addr(heap: dict) -> tuple:
    k = max((a[1] for a in heap), default=0)
    return ("a", k + 1)


def step(s, store: dict, heap: dict, data: list) -> list[tuple]:
    """All successor states of one simple statement.

    Returns a list of ("ok", store', heap') and/or ("fault", None, None)
    entries; a fault is a dereference of a non-allocated address.
    """
    if isinstance(s, Assign):
        return [("ok", {**store, s.var: v}, dict(heap))
                for v in expr_choices(s.expr, store, heap, data)]
    if isinstance(s, AllocNode):
        addr = _fresh_addr(heap)
        new_heap = dict(heap)
        new_heap[addr] = (NIL_V, 0)  # placeholder, filled per choice below
        out = []
        for nv in expr_choices(s.nxt, store, new_heap, data, position="next"):
            for dv in expr_choices(s.data, store, new_heap, data,
                                   position="data"):
                h2 = dict(heap)
                h2[addr] = (nv, dv)
                out.append(("ok", {**store, s.var: addr}, h2))
        return out
    if isinstance(s, Load):
        a = store[s.src]
        if a not in heap:
            return [("fault", None, None)]
        nx, d = heap[a]
        v = nx if s.field == "next" else d
        return [("ok", {**store, s.var: v}, dict(heap))]
    if isinstance(s, Store):
        a = store[s.dst]
        if a not in heap:
            return [("fault", None, None)]
        nx, d = heap[a]
        out = []
        for v in expr_choices(s.expr, store, heap, data, position=s.field):
            h2 = dict(heap)
            h2[a] = (v, d) if s.field == "next" else (nx, v)
            out.append(("ok", dict(store), h2))
        return out
    raise TypeError(f"not a simple statement: {s}")


def exec_program(ast: Ast, rng, data: Optional[list] = None,
                 fuel: int = 500) -> tuple[str, dict, dict]:
    """One random run; returns (status, store, heap).

    Status is "ok", "assert-fail", "fault", or "fuel".  Nondeterministic
    choices ('*' values, branch outcomes) are resolved by the rng.
    """
    data = data if data is not None else [0, 1, 2, 3]
    store: dict = {}
    heap: dict = {}
    budget = [fuel]

    def run(stmts) -> Optional[str]:
        nonlocal store, heap
        for s in stmts:
            if budget[0] <= 0:
                return "fuel"
            budget[0] -= 1
            if isinstance(s, (Assign, AllocNode, Load, Store)):
                results = step(s, store, heap, data)
                tag, st2, h2 = rng.choice(results)
                if tag == "fault":
                    return "fault"
                store, heap = st2, h2
            elif isinstance(s, Assert):
                pick = _pick(rng, cond_choices(s.cond, store, heap, data))
                if pick is FAULT:
                    return "fault"
                if not pick:
                    return "assert-fail"
            elif isinstance(s, If):
                pick = _pick(rng, cond_choices(s.cond, store, heap, data))
                if pick is FAULT:
                    return "fault"
                bad = run(s.then) if pick else run(s.els)
                if bad:
                    return bad
            elif isinstance(s, While):
                while True:
                    if budget[0] <= 0:
                        return "fuel"
                    pick = _pick(rng, cond_choices(s.cond, store, heap, data))
                    if pick is FAULT:
                        return "fault"
                    if not pick:
                        break
                    bad = run(s.body)
                    if bad:
                        return bad
            else:
                raise TypeError(f"not a statement: {s}")
        return None

    status = run(ast.stmts) or "ok"
    return status, store, heap


def canon_state(store: dict, heap: dict) -> tuple:
    """Canonical form of a state up to renaming of allocated addresses.

    Cells are numbered in discovery order: store variables in name order,
    then a next-pointer walk in numbering order.  Leftover unreachable
    cells get deterministic trailing numbers.  Dangling addresses (not
    nil, not allocated) canonicalize by order of first appearance.
    """
    ids: dict = {}
    dangling: dict = {}

    def visit(v):
        if not isinstance(v, tuple) or v == NIL_V:
            return
        if v in heap:
            if v not in ids:
                ids[v] = len(ids) + 1
                visit(heap[v][0])
        else:
            dangling.setdefault(v, len(dangling) + 1)

    for name in sorted(store):
        visit(store[name])
    for a in sorted(set(heap) - set(ids),
                    key=lambda a: (str(heap[a][1]), str(heap[a][0]))):
        visit(a)

    def rename(v):
        if isinstance(v, tuple):
            if v == NIL_V:
                return "nil"
            if v in ids:
                return ("c", ids[v])
            return ("d", dangling[v])
        return v

    stack = tuple((name, rename(store[name])) for name in sorted(store))
    cells = tuple(sorted((ids[a], rename(nx), rename(d))
                         for a, (nx, d) in heap.items()))
    return (stack, cells)
