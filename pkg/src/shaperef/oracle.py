"""Bounded-model differential oracle for entailment.

Decides ``lhs |- rhs`` over *bounded* models by brute force: enumerate every
model of the left heap up to a size bound, and check that each satisfies the
right heap.  The satisfaction checker implements the denotational semantics
of the assertion language directly (footprint partition, segment walks,
sortedness, value-frequency lower bounds) and shares nothing with the
symbolic prover.

Values are sorted: addresses are tagged tuples ``('a', k)`` with nil =
``('a', 0)``; data values are plain ints.  Sharing an int between the two
sorts is therefore impossible by construction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from .terms import (Const, LVar, Multiset, NilTerm, Offset, PVar, PureAtom,
                    Term, term_vars)
from .heaps import (
    ListSegAtom,
    NodeAtom,
    SortedSegAtom,
    Spatial,
    SymbolicHeap,
    TrueAtom,
)

NIL_V = ("a", 0)


def _addr(k: int) -> tuple:
    return ("a", k)


class BoundsTooLarge(Exception):
    """The query is outside the oracle's enumeration budget."""


@dataclass
class OracleBounds:
    max_cells: int = 4          # total allocated cells in generated models
    max_extension: int = 1      # extra cells for a spatial-true conjunct
    n_spare_data: int = 2       # fresh data values beyond the mentioned ones
    max_models: int = 60000     # generated-model cap per query
    max_steps: int = 400000     # satisfaction-search step cap per query


@dataclass
class Model:
    env: dict[Term, object]
    heap: dict[tuple, tuple]  # addr -> (next value, data value)

    def render(self) -> str:
        def shv(v: object) -> str:
            if isinstance(v, tuple):
                return "nil" if v == NIL_V else f"a{v[1]}"
            return str(v)

        stack = ", ".join(f"{k}={shv(v)}" for k, v in
                          sorted(self.env.items(), key=lambda kv: str(kv[0])))
        cells = "; ".join(f"a{a[1]}:(next={shv(nx)},data={shv(d)})"
                          for a, (nx, d) in sorted(self.heap.items()))
        return f"[{stack}] heap=[{cells}]"


@dataclass
class OracleVerdict:
    holds: bool
    countermodel: Optional[Model] = None
    models_checked: int = 0


def _eval(t: Term, env: dict) -> object:
    if isinstance(t, Const):
        return t.value
    if isinstance(t, NilTerm):
        return NIL_V
    if isinstance(t, Offset):
        b = env.get(t.base)
        if not isinstance(b, int):
            return None
        return b + t.delta
    return env.get(t)


def _eval_pure(p: PureAtom, env: dict) -> Optional[bool]:
    """Truth of a pure atom; None if some variable is unassigned."""
    if p.op == "true":
        return True
    if p.op == "false":
        return False
    a, b = _eval(p.lhs, env), _eval(p.rhs, env)
    if a is None or b is None:
        return None
    if p.op == "=":
        return a == b
    if p.op == "!=":
        return a != b
    # order atoms only hold between integers
    if not isinstance(a, int) or not isinstance(b, int):
        return False
    return a <= b if p.op == "<=" else a < b


def _data_universe(*heaps: SymbolicHeap, n_spare: int = 2) -> list[int]:
    consts: set[int] = set()
    for h in heaps:
        for p in h.pure:
            for t in (p.lhs, p.rhs):
                if isinstance(t, Const):
                    consts.add(t.value)
                if isinstance(t, Offset):
                    consts.add(t.delta)
        for a in h.spatial:
            for ms in (
                [a.contents] if isinstance(a, (ListSegAtom, SortedSegAtom)) else []
            ):
                for k, _ in ms.items:
                    if isinstance(k, Const):
                        consts.add(k.value)
            if isinstance(a, NodeAtom) and isinstance(a.data, Const):
                consts.add(a.data.value)
            if isinstance(a, SortedSegAtom):
                for t in (a.lo, a.hi):
                    if isinstance(t, Const):
                        consts.add(t.value)
                    if isinstance(t, Offset):
                        consts.add(t.delta)
    base = sorted(consts) if consts else [1]
    hi = max(base)
    spares = [hi + i + 1 for i in range(n_spare)]
    # a value just below the minimum exercises strict lower bounds
    return sorted(set(base + spares + [min(base) - 1]))


# ---------------------------------------------------------------------------
# Satisfaction: (env, heap) |= exists(unassigned vars). h
# ---------------------------------------------------------------------------

class _SatSearch:
    def __init__(self, heap: dict, universe_data: list[int], budget: list[int]):
        self.heap = heap
        self.data = universe_data
        self.budget = budget
        addrs = set(heap.keys()) | {NIL_V}
        for nx, _ in heap.values():
            if isinstance(nx, tuple):
                addrs.add(nx)
        self.addrs = sorted(addrs)

    def _tick(self) -> None:
        self.budget[0] -= 1
        if self.budget[0] <= 0:
            raise BoundsTooLarge("satisfaction search budget exhausted")

    def run(self, h: SymbolicHeap, env: dict, allow_leftover: bool) -> bool:
        # dangling addresses reachable only through the store still belong
        # to the existential universe of the pure part
        env_addrs = {v for v in env.values() if isinstance(v, tuple)}
        self.addrs = sorted(set(self.addrs) | env_addrs)
        atoms = list(h.cells())
        has_true = h.has_true()
        cover_all = not (allow_leftover or has_true)
        return self._place(atoms, 0, dict(env), frozenset(), h, cover_all)

    # -- atom placement (footprint search) --------------------------------

    def _place(self, atoms: list, i: int, env: dict, used: frozenset,
               h: SymbolicHeap, cover_all: bool) -> bool:
        self._tick()
        if i == len(atoms):
            return self._finish_pure(h, env, used, cover_all)
        a = atoms[i]
        for env2, cells in self._placements(a, env):
            cs = frozenset(cells)
            if cs & used:
                continue
            if self._place(atoms, i + 1, env2, used | cs, h, cover_all):
                return True
        return False

    def _placements(self, a: Spatial, env: dict) -> Iterator[tuple[dict, list]]:
        if isinstance(a, NodeAtom):
            yield from self._place_node(a, env)
        elif isinstance(a, ListSegAtom):
            yield from self._place_seg(a, env, sorted_seg=False)
        elif isinstance(a, SortedSegAtom):
            yield from self._place_seg(a, env, sorted_seg=True)

    def _head_candidates(self, t: Term, env: dict) -> Iterator[tuple[object, dict]]:
        v = _eval(t, env)
        if v is not None:
            yield v, env
            return
        # unassigned head variable: try every allocated address
        for c in self.heap:
            e2 = dict(env)
            e2[t] = c
            yield c, e2

    def _place_node(self, a: NodeAtom, env: dict) -> Iterator[tuple[dict, list]]:
        for v, env0 in self._head_candidates(a.at, env):
            self._tick()
            if v not in self.heap:
                continue
            nx, d = self.heap[v]
            env2 = dict(env0)
            tv = _eval(a.nxt, env2)
            if tv is None and isinstance(a.nxt, (PVar, LVar)):
                env2[a.nxt] = nx
            elif tv != nx:
                continue
            if a.data is not None:
                dv = _eval(a.data, env2)
                if dv is None and isinstance(a.data, (PVar, LVar)):
                    env2[a.data] = d
                elif dv != d:
                    continue
            yield env2, [v]

    def _place_seg(self, a, env: dict, sorted_seg: bool) -> Iterator[tuple[dict, list]]:
        for v, env0 in self._head_candidates(a.src, env):
            self._tick()
            if v not in self.heap:
                continue
            dst_v = _eval(a.dst, env0)
            # walk the chain, proposing each stop point
            cells: list = []
            datas: list = []
            cur = v
            while True:
                if cells and cur == dst_v:
                    yield from self._seg_constraints(a, dict(env0), cells, datas, sorted_seg)
                    # keep walking: the chain may pass through dst and
                    # lasso back to it with more cells
                if cells and dst_v is None and isinstance(a.dst, (PVar, LVar)):
                    env2 = dict(env0)
                    env2[a.dst] = cur
                    yield from self._seg_constraints(a, env2, cells, datas, sorted_seg)
                if cur not in self.heap or cur in cells:
                    break
                cells = cells + [cur]
                datas = datas + [self.heap[cur][1]]
                cur = self.heap[cur][0]
                self._tick()

    def _seg_constraints(self, a, env: dict, cells: list, datas: list,
                         sorted_seg: bool) -> Iterator[tuple[dict, list]]:
        if sorted_seg:
            if any(not isinstance(d, int) for d in datas):
                return
            if any(datas[i] > datas[i + 1] for i in range(len(datas) - 1)):
                return
            for lo_v, env1 in self._bound_candidates(a.lo, env, min(datas)):
                if not all(isinstance(d, int) and lo_v <= d for d in datas):
                    continue
                for hi_v, env2 in self._bound_candidates(a.hi, env1, max(datas) + 1):
                    if not all(d < hi_v for d in datas):
                        continue
                    yield from self._contents_check(a.contents, env2, cells, datas)
        else:
            yield from self._contents_check(a.contents, env, cells, datas)

    def _bound_candidates(self, t: Term, env: dict, natural: int) -> Iterator[tuple[int, dict]]:
        v = _eval(t, env)
        if v is not None:
            if isinstance(v, int):
                yield v, env
            return
        cands = set(self.data) | {natural}
        if isinstance(t, (PVar, LVar)):
            for c in sorted(cands):
                e2 = dict(env)
                e2[t] = c
                yield c, e2
        elif isinstance(t, Offset) and isinstance(t.base, (PVar, LVar)):
            for c in sorted(cands):
                e2 = dict(env)
                e2[t.base] = c - t.delta
                yield c, e2

    def _contents_check(self, ms: Multiset, env: dict, cells: list,
                        datas: list) -> Iterator[tuple[dict, list]]:
        unassigned = [k for k, _ in ms.items if _eval(k, env) is None]
        cand_vals = sorted(set(d for d in datas if isinstance(d, int)))
        for combo in itertools.product(cand_vals, repeat=len(unassigned)):
            self._tick()
            env2 = dict(env)
            for k, val in zip(unassigned, combo):
                if isinstance(k, (PVar, LVar)):
                    env2[k] = val
                elif isinstance(k, Offset):
                    env2[k.base] = val - k.delta
            need: dict[object, int] = {}
            ok = True
            for k, n in ms.items:
                kv = _eval(k, env2)
                if kv is None:
                    ok = False
                    break
                need[kv] = need.get(kv, 0) + n
            if not ok:
                continue
            if all(sum(1 for d in datas if d == val) >= n for val, n in need.items()):
                yield env2, cells
                # distinct contents assignments can matter for the pure part,
                # so keep enumerating

    # -- pure part ------------------------------------------------------------

    def _finish_pure(self, h: SymbolicHeap, env: dict, used: frozenset,
                     cover_all: bool) -> bool:
        if cover_all and used != frozenset(self.heap.keys()):
            return False
        free = [v for v in h.vars() if v not in env]
        if not free:
            return all(_eval_pure(p, env) for p in h.pure)
        if len(free) > 4:
            raise BoundsTooLarge("too many unconstrained variables")
        universe = list(self.addrs) + list(self.data)
        for combo in itertools.product(universe, repeat=len(free)):
            self._tick()
            env2 = dict(env)
            env2.update(zip(free, combo))
            if all(_eval_pure(p, env2) for p in h.pure):
                return True
        return False


def satisfies(model: Model, h: SymbolicHeap, bounds: Optional[OracleBounds] = None,
              allow_leftover: bool = False,
              extra_data: Optional[list[int]] = None) -> bool:
    """Does the model satisfy h (with h's unassigned variables existential)?"""
    bounds = bounds or OracleBounds()
    data = extra_data if extra_data is not None else _data_universe(h, n_spare=bounds.n_spare_data)
    search = _SatSearch(model.heap, data, [bounds.max_steps])
    return search.run(h, model.env, allow_leftover)


# ---------------------------------------------------------------------------
# Model enumeration for the left-hand side
# ---------------------------------------------------------------------------

def models(h: SymbolicHeap, bounds: Optional[OracleBounds] = None,
           data_universe: Optional[list[int]] = None) -> Iterator[Model]:
    """Enumerate the models of h up to the bounds.

    Generation is structure-directed (segment lengths, canonical cell
    addresses, enumerated values for unanchored variables) and every
    candidate is filtered through the independent satisfaction checker, so
    overgeneration is harmless and undergeneration is confined to the
    size bounds.
    """
    bounds = bounds or OracleBounds()
    if h.is_false or h.facts.inconsistent:
        return
    data = data_universe if data_universe is not None else _data_universe(
        h, n_spare=bounds.n_spare_data)
    atoms = list(h.cells())
    segs = [a for a in atoms if isinstance(a, (ListSegAtom, SortedSegAtom))]
    n_fixed = sum(1 for a in atoms if isinstance(a, NodeAtom))
    ext_max = bounds.max_extension if h.has_true() else 0
    count = 0

    len_ranges = []
    for _ in segs:
        len_ranges.append(range(1, bounds.max_cells + 1))
    for seg_lens in itertools.product(*len_ranges):
        total = n_fixed + sum(seg_lens)
        if total > bounds.max_cells:
            continue
        for ext in range(0, ext_max + 1):
            for m in _models_skeleton(h, atoms, seg_lens, ext, data, bounds):
                count += 1
                if count > bounds.max_models:
                    raise BoundsTooLarge("model enumeration budget exhausted")
                yield m


def _data_position_vars(h: SymbolicHeap) -> set:
    """Variables that occur where only integer data values can live.

    Cell payloads, multiset content keys, and sorted-interval bounds are
    all data-sorted, so a variable appearing there may only range over
    ints when models are generated.
    """
    out: set = set()
    for a in h.spatial:
        if isinstance(a, NodeAtom):
            if a.data is not None:
                out.update(term_vars(a.data))
        elif isinstance(a, ListSegAtom):
            out.update(a.contents.vars())
        elif isinstance(a, SortedSegAtom):
            out.update(term_vars(a.lo))
            out.update(term_vars(a.hi))
            out.update(a.contents.vars())
    return out


def _models_skeleton(h: SymbolicHeap, atoms: list, seg_lens: tuple, ext: int,
                     data: list[int], bounds: OracleBounds) -> Iterator[Model]:
    # allocate canonical addresses per atom
    next_addr = 1
    atom_cells: list[list[tuple]] = []
    si = 0
    for a in atoms:
        if isinstance(a, NodeAtom):
            n = 1
        else:
            n = seg_lens[si]
            si += 1
        atom_cells.append([_addr(next_addr + i) for i in range(n)])
        next_addr += n
    ext_cells = [_addr(next_addr + i) for i in range(ext)]
    all_cells = [c for cs in atom_cells for c in cs] + ext_cells

    # head variables are forced to their atom's first cell
    env: dict[Term, object] = {}
    ok = True
    for a, cs in zip(atoms, atom_cells):
        head = a.at if isinstance(a, NodeAtom) else a.src
        if isinstance(head, (PVar, LVar)):
            if head in env and env[head] != cs[0]:
                ok = False
                break
            env[head] = cs[0]
        else:
            ok = False  # nil/const heads are inconsistent
            break
    if not ok:
        return

    # choice slots: end vars, payloads, remaining vars.  Values are sorted:
    # next/endpoint positions hold addresses, data positions hold ints, and
    # a variable used only in pure atoms may be either.
    choice_vars: list[tuple] = []  # (kind, key, candidates)
    addr_universe = all_cells + [NIL_V, _addr(990)]  # one dangling address
    data_vars = _data_position_vars(h)

    for a, cs in zip(atoms, atom_cells):
        t = a.nxt if isinstance(a, NodeAtom) else a.dst
        if _eval(t, env) is None and isinstance(t, (PVar, LVar)) and not any(
                cv[1] == t for cv in choice_vars):
            choice_vars.append(("var", t, list(addr_universe)))

    # payload slots per cell
    payload_terms: list[tuple] = []  # (cell, term-or-None)
    for a, cs in zip(atoms, atom_cells):
        if isinstance(a, NodeAtom):
            payload_terms.append((cs[0], a.data))
        else:
            # segment cells: every cell gets a data choice; content/sort
            # constraints are applied by the final satisfaction filter
            for c in cs:
                payload_terms.append((c, None))

    free_data_vars: list[Term] = []
    for v in h.vars():
        if v not in env and not any(cv[1] == v for cv in choice_vars):
            free_data_vars.append(v)
    for v in free_data_vars:
        if v in data_vars:
            choice_vars.append(("var", v, list(data)))
        else:
            choice_vars.append(("var", v,
                                list(data) + list(addr_universe)))

    payload_choices: list[list] = []
    for c, t in payload_terms:
        if t is None:
            payload_choices.append(list(data))
        else:
            payload_choices.append([t])  # resolved against env later

    ext_next = [list(all_cells) + [NIL_V]] * ext
    ext_data = [list(data)] * ext

    var_cands = [cv[2] for cv in choice_vars]
    for var_combo in itertools.product(*var_cands):
        env1 = dict(env)
        for (kind, key, _), val in zip(choice_vars, var_combo):
            env1[key] = val
        for pay_combo in itertools.product(*payload_choices):
            heap: dict[tuple, tuple] = {}
            bad = False
            pi = 0
            si2 = 0
            for a, cs in zip(atoms, atom_cells):
                t = a.nxt if isinstance(a, NodeAtom) else a.dst
                endv = _eval(t, env1)
                if endv is None:
                    bad = True
                    break
                for j, c in enumerate(cs):
                    nx = cs[j + 1] if j + 1 < len(cs) else endv
                    dslot = pay_combo[pi]
                    pi += 1
                    dv = dslot if isinstance(dslot, int) else _eval(dslot, env1)
                    if dv is None:
                        bad = True
                        break
                    heap[c] = (nx, dv)
                if bad:
                    break
            if bad:
                continue
            if any(_eval_pure(p, env1) is not True for p in h.pure):
                continue
            ec_space = itertools.product(*(ext_next + ext_data)) if ext else iter([()])
            for ec_combo in ec_space:
                heap2 = dict(heap)
                for k, c in enumerate(ext_cells):
                    heap2[c] = (ec_combo[k], ec_combo[ext + k])
                model = Model(env1, heap2)
                if satisfies(model, h, bounds, allow_leftover=False,
                             extra_data=data):
                    yield model


# ---------------------------------------------------------------------------
# Entailment
# ---------------------------------------------------------------------------

def oracle_entails(lhs: SymbolicHeap, rhs: SymbolicHeap,
                   modulo_true: bool = False,
                   bounds: Optional[OracleBounds] = None) -> OracleVerdict:
    """Bounded-model entailment check: every model of lhs satisfies rhs.

    Each side's logical variables are existentially quantified over that
    side alone, so the left model's logical-variable bindings are dropped
    before checking the right side.  Program variables free on the right
    only are universal (a valuation is part of the model).
    """
    bounds = bounds or OracleBounds()
    data = _data_universe(lhs, rhs, n_spare=bounds.n_spare_data)
    lhs_pvars = {v for v in lhs.vars() if isinstance(v, PVar)}
    univ = sorted((v for v in rhs.vars()
                   if isinstance(v, PVar) and v not in lhs_pvars),
                  key=lambda v: v.name)
    if len(univ) > 3:
        raise BoundsTooLarge("too many universally quantified variables")
    checked = 0
    for m in models(lhs, bounds, data_universe=data):
        base_env = {v: val for v, val in m.env.items() if isinstance(v, PVar)}
        values = sorted(m.heap.keys()) + [NIL_V, _addr(97)] + list(data)
        for combo in itertools.product(values, repeat=len(univ)):
            checked += 1
            env2 = dict(base_env)
            env2.update(zip(univ, combo))
            m2 = Model(env2, m.heap)
            if not satisfies(m2, rhs, bounds, allow_leftover=modulo_true,
                             extra_data=data):
                return OracleVerdict(False, Model(dict(m.env), m.heap),
                                     checked)
    return OracleVerdict(True, None, checked)
