"""Control-flow graphs over atomic commands, each edge carrying a local
pre/post specification.

Atomic commands and their specifications (x, y program variables; n', d',
w1' placeholders freshened per application; old_x' names the value x held
before the command):

    assume(e)        {true}              {e /\\ true}          modifies {}
    assert(e)        {e /\\ true}        {e /\\ true}          modifies {}
    x = e            {emp}               {x = e<old> /\\ emp}  modifies {x}
    x = new Node(n,d){emp}               {node(x, n<old>, d<old>)}
                                                               modifies {x}
    x = y->next      {node(y, n', d')}   {node(y<old>, n', d') /\\ x = n'}
                                                               modifies {x}
    x = y->data      {node(y, n', d')}   {node(y<old>, n', d') /\\ x = d'}
                                                               modifies {x}
    y->next = e      {node(y, n', d')}   {node(y, e, d')}      modifies {}
    y->data = e      {node(y, n', d')}   {node(y, n', e)}      modifies {}

e<old> substitutes old_x' for x when the command overwrites x, so posts
never mention the overwritten value under its program name.  A "*" in
expression position becomes a fresh placeholder (an arbitrary value); a
"*" in the data argument of an allocation leaves the payload wild.
Specifications are tight: they mention exactly the cells the command
touches, so a state without the footprint cell has no valid transition.

Branching conditions are compiled to disjunctive-normal-form case lists;
an assume edge's post is a disjunction when its condition needs one (e.g.
the negation of a conjunction).  Branch nodes carry one assume-labeled
edge per side, so every node either has a single successor or all of its
out-edges are assume edges.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Union

from . import lang
from .heaps import Disj, EMP_HEAP, NodeAtom, SymbolicHeap, TRUE_SPATIAL
from .lang import (AllocNode, AndC, Assert, Assign, Cond, Expr, If, IntE,
                   Load, NilE, NondetC, NondetE, NotC, OrC, RelC, Store,
                   VarE, While)
from .terms import (Const, LVar, NIL, PVar, PureAtom, Term, eq, leq, lt,
                    neq, subst_term)

TRUE_HEAP = SymbolicHeap((), (TRUE_SPATIAL,))


@dataclass(frozen=True)
class Assume:
    """Synthesized branch-edge command (not a source statement)."""

    cond: Cond


@dataclass(frozen=True)
class Skip:
    """Synthesized no-op edge command for degenerate empty branches."""


@dataclass(frozen=True)
class CommandSpec:
    """Tight local specification of one atomic command."""

    kind: str  # "assume" | "assert" | "assign" | "alloc" | "load" | "store" | "skip"
    label: str
    pre: SymbolicHeap
    post: Union[SymbolicHeap, Disj]
    modifies: frozenset
    cond: Optional[Cond] = None

    def post_cases(self) -> tuple[SymbolicHeap, ...]:
        if isinstance(self.post, Disj):
            return self.post.heaps
        return (self.post,)

    def __str__(self) -> str:
        return (f"{{{self.pre}}} {self.label} {{{self.post}}}")


# ---------------------------------------------------------------------------
# Expression / condition translation
# ---------------------------------------------------------------------------

class _Wildcards:
    """Numbers the arbitrary-value placeholders within one specification."""

    def __init__(self):
        self.count = 0

    def fresh(self) -> LVar:
        self.count += 1
        return LVar(f"w{self.count}")


def _expr_term(e: Expr, wild: _Wildcards) -> Term:
    if isinstance(e, VarE):
        return PVar(e.name)
    if isinstance(e, NilE):
        return NIL
    if isinstance(e, IntE):
        return Const(e.value)
    if isinstance(e, NondetE):
        return wild.fresh()
    raise TypeError(f"not an expression: {e}")


_REL_MAKERS = {"==": eq, "!=": neq, "<=": leq, "<": lt}


def negate(c: Cond) -> Cond:
    """Negation of a condition, pushed through connectives.

    A nondeterministic condition negates to itself: both branches of a
    "*" test are reachable, so assuming "not *" constrains nothing.
    """
    if isinstance(c, NondetC):
        return NondetC()
    if isinstance(c, RelC):
        flipped = {"==": RelC("!=", c.lhs, c.rhs),
                   "!=": RelC("==", c.lhs, c.rhs),
                   "<=": RelC("<", c.rhs, c.lhs),
                   "<": RelC("<=", c.rhs, c.lhs)}
        return flipped[c.op]
    if isinstance(c, AndC):
        return OrC(negate(c.lhs), negate(c.rhs))
    if isinstance(c, OrC):
        return AndC(negate(c.lhs), negate(c.rhs))
    if isinstance(c, NotC):
        return c.sub
    raise TypeError(f"not a condition: {c}")


def cond_cases(c: Cond, wild: Optional[_Wildcards] = None
               ) -> tuple[tuple[PureAtom, ...], ...]:
    """Disjunctive normal form: a tuple of conjunctive cases.

    A nondeterministic test contributes an unconstrained case; each "*"
    in a comparison operand becomes its own placeholder.
    """
    wild = wild or _Wildcards()
    if isinstance(c, NondetC):
        return ((),)
    if isinstance(c, RelC):
        atom = _REL_MAKERS[c.op](_expr_term(c.lhs, wild),
                                 _expr_term(c.rhs, wild))
        return ((atom,),)
    if isinstance(c, AndC):
        return tuple(a + b
                     for a in cond_cases(c.lhs, wild)
                     for b in cond_cases(c.rhs, wild))
    if isinstance(c, OrC):
        return cond_cases(c.lhs, wild) + cond_cases(c.rhs, wild)
    if isinstance(c, NotC):
        return cond_cases(negate(c.sub), wild)
    raise TypeError(f"not a condition: {c}")


def _cond_post(c: Cond) -> Union[SymbolicHeap, Disj]:
    heaps = tuple(SymbolicHeap(case, (TRUE_SPATIAL,))
                  for case in cond_cases(c))
    if len(heaps) == 1:
        return heaps[0]
    return Disj(heaps)


def old_var(name: str) -> LVar:
    """Placeholder naming the pre-command value of an overwritten variable."""
    return LVar(f"old_{name}")


# ---------------------------------------------------------------------------
# The specification table
# ---------------------------------------------------------------------------

Command = Union[Assume, Skip, Assign, AllocNode, Load, Store, Assert]


def spec_of(cmd: Command) -> CommandSpec:
    """Tight local pre/post specification of one atomic command."""
    if isinstance(cmd, Assume):
        return CommandSpec(kind="assume",
                           label=f"assume({lang.render_cond(cmd.cond)})",
                           pre=TRUE_HEAP,
                           post=_cond_post(cmd.cond),
                           modifies=frozenset(),
                           cond=cmd.cond)
    if isinstance(cmd, Skip):
        return CommandSpec("skip", "skip", EMP_HEAP, EMP_HEAP, frozenset())
    if isinstance(cmd, Assert):
        post = _cond_post(cmd.cond)
        return CommandSpec(kind="assert",
                           label=lang.render_stmt(cmd),
                           pre=post,
                           post=post,
                           modifies=frozenset(),
                           cond=cmd.cond)
    if isinstance(cmd, Assign):
        x = PVar(cmd.var)
        t = _expr_term(cmd.expr, _Wildcards())
        t_old = subst_term(t, {x: old_var(cmd.var)})
        return CommandSpec(kind="assign",
                           label=lang.render_stmt(cmd),
                           pre=EMP_HEAP,
                           post=SymbolicHeap((eq(x, t_old),), ()),
                           modifies=frozenset([x]))
    if isinstance(cmd, AllocNode):
        x = PVar(cmd.var)
        wild = _Wildcards()
        nxt = _expr_term(cmd.nxt, wild)
        data = None if isinstance(cmd.data, NondetE) \
            else _expr_term(cmd.data, wild)
        renaming = {x: old_var(cmd.var)}
        nxt = subst_term(nxt, renaming)
        if data is not None:
            data = subst_term(data, renaming)
        return CommandSpec(kind="alloc",
                           label=lang.render_stmt(cmd),
                           pre=EMP_HEAP,
                           post=SymbolicHeap((), (NodeAtom(x, nxt, data),)),
                           modifies=frozenset([x]))
    if isinstance(cmd, Load):
        x, y = PVar(cmd.var), PVar(cmd.src)
        n, d = LVar("n"), LVar("d")
        pre = SymbolicHeap((), (NodeAtom(y, n, d),))
        y_post = old_var(cmd.src) if cmd.var == cmd.src else y
        got = n if cmd.field == "next" else d
        post = SymbolicHeap((eq(x, got),), (NodeAtom(y_post, n, d),))
        return CommandSpec(kind="load",
                           label=lang.render_stmt(cmd),
                           pre=pre,
                           post=post,
                           modifies=frozenset([x]))
    if isinstance(cmd, Store):
        y = PVar(cmd.dst)
        n, d = LVar("n"), LVar("d")
        e = _expr_term(cmd.expr, _Wildcards())
        pre = SymbolicHeap((), (NodeAtom(y, n, d),))
        if cmd.field == "next":
            atom = NodeAtom(y, e, d)
        else:
            atom = NodeAtom(y, n, e)
        return CommandSpec(kind="store",
                           label=lang.render_stmt(cmd),
                           pre=pre,
                           post=SymbolicHeap((), (atom,)),
                           modifies=frozenset())
    raise TypeError(f"not an atomic command: {cmd}")


# ---------------------------------------------------------------------------
# Control-flow graph
# ---------------------------------------------------------------------------

Edge = tuple[str, str, CommandSpec]


@dataclass(frozen=True)
class Cfg:
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    start: str
    end: str
    loop_heads: frozenset

    @cached_property
    def _out(self) -> dict[str, tuple[Edge, ...]]:
        out: dict[str, list[Edge]] = {n: [] for n in self.nodes}
        for e in self.edges:
            out[e[0]].append(e)
        return {n: tuple(es) for n, es in out.items()}

    def out_edges(self, node: str) -> tuple[Edge, ...]:
        return self._out[node]

    def succ(self, node: str) -> tuple[str, ...]:
        return tuple(e[1] for e in self._out[node])

    def cmd(self, src: str, dst: str) -> CommandSpec:
        for a, b, spec in self._out[src]:
            if b == dst:
                return spec
        raise KeyError(f"no edge {src} -> {dst}")

    def to_dot(self) -> str:
        lines = ["digraph cfg {", "  rankdir=TB;"]
        for n in self.nodes:
            attrs = []
            if n in (self.start, self.end):
                attrs.append("shape=oval")
            else:
                attrs.append("shape=circle")
            if n in self.loop_heads:
                attrs.append("style=filled")
                attrs.append("fillcolor=lightgrey")
            lines.append(f'  "{n}" [{", ".join(attrs)}];')
        for src, dst, spec in self.edges:
            label = spec.label.replace("\\", "\\\\").replace('"', '\\"')
            lines.append(f'  "{src}" -> "{dst}" [label="{label}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_cfg(ast: lang.Ast) -> Cfg:
    """Compile a program to its control-flow graph.

    Nodes are "start", "end", and "l1", "l2", ... in creation order.  A
    while head is the node reached before its test; it carries an
    assume(cond) edge into the body (or to itself when the body is empty),
    an assume(not cond) edge past the loop, and receives the body's final
    edge back.  Loop heads are recorded as the abstraction points.
    """
    nodes: list[str] = ["start"]
    edges: list[Edge] = []
    loop_heads: set[str] = set()
    counter = [0]

    def fresh() -> str:
        counter[0] += 1
        name = f"l{counter[0]}"
        nodes.append(name)
        return name

    def seq(stmts, entry: str, target: str) -> None:
        cur = entry
        for i, s in enumerate(stmts):
            cur = one(s, cur, target if i == len(stmts) - 1 else None)

    def one(s, entry: str, target: Optional[str]) -> str:
        if isinstance(s, (Assign, AllocNode, Load, Store, Assert)):
            out = target or fresh()
            edges.append((entry, out, spec_of(s)))
            return out
        if isinstance(s, While):
            head = entry
            loop_heads.add(head)
            if s.body:
                body_entry = fresh()
                edges.append((head, body_entry, spec_of(Assume(s.cond))))
                seq(s.body, body_entry, head)
            else:
                edges.append((head, head, spec_of(Assume(s.cond))))
            out = target or fresh()
            edges.append((head, out, spec_of(Assume(negate(s.cond)))))
            return out
        if isinstance(s, If):
            head = entry
            join = target or fresh()
            if s.then:
                then_entry = fresh()
                edges.append((head, then_entry, spec_of(Assume(s.cond))))
                seq(s.then, then_entry, join)
            if s.els:
                else_entry = fresh()
                edges.append((head, else_entry,
                              spec_of(Assume(negate(s.cond)))))
                seq(s.els, else_entry, join)
            if not s.then:
                if s.els:
                    edges.append((head, join, spec_of(Assume(s.cond))))
                else:
                    mid = fresh()
                    edges.append((head, mid, spec_of(Assume(s.cond))))
                    edges.append((mid, join, spec_of(Skip())))
            if not s.els:
                edges.append((head, join, spec_of(Assume(negate(s.cond)))))
            return join
        raise TypeError(f"not a statement: {s}")

    if ast.stmts:
        seq(ast.stmts, "start", "end")
    else:
        edges.append(("start", "end", spec_of(Skip())))
    nodes.append("end")

    seen_pairs = set()
    for src, dst, _ in edges:
        if (src, dst) in seen_pairs:
            raise AssertionError(f"parallel edges {src} -> {dst}")
        seen_pairs.add((src, dst))
    by_src: dict[str, list[CommandSpec]] = {}
    for src, dst, spec in edges:
        by_src.setdefault(src, []).append(spec)
    for src, specs in by_src.items():
        if len(specs) > 1 and any(sp.kind != "assume" for sp in specs):
            raise AssertionError(f"non-assume branch at {src}")
    if any(src == "end" for src, _, _ in edges):
        raise AssertionError("edge out of end")

    return Cfg(nodes=tuple(nodes),
               edges=tuple(edges),
               start="start",
               end="end",
               loop_heads=frozenset(loop_heads))
