"""LTL to Buchi automaton via the declarative tableau construction.

Formulas are first brought to negation normal form over literals, X, U and
R; the node-expansion algorithm yields a generalized Buchi automaton (one
acceptance set per Until subformula) which is then degeneralized with the
usual counter construction.  Edge labels are sets of literals over an atom
table shared with the caller.
"""

from __future__ import annotations

from dataclasses import dataclass

from .. import ltl
from ..expr import BoolLit, Expr
from .machine import CapExceeded


# --- negation normal form ----------------------------------------------------


@dataclass(frozen=True)
class NTrue:
    pass


@dataclass(frozen=True)
class NFalse:
    pass


@dataclass(frozen=True)
class NLit:
    atom: int
    neg: bool


@dataclass(frozen=True)
class NAnd:
    lhs: "NNF"
    rhs: "NNF"


@dataclass(frozen=True)
class NOr:
    lhs: "NNF"
    rhs: "NNF"


@dataclass(frozen=True)
class NX:
    op: "NNF"


@dataclass(frozen=True)
class NU:
    lhs: "NNF"
    rhs: "NNF"


@dataclass(frozen=True)
class NR:
    lhs: "NNF"
    rhs: "NNF"


NNF = NTrue | NFalse | NLit | NAnd | NOr | NX | NU | NR


class AtomTable:
    """Interns atom expressions so literals can refer to them by index."""

    def __init__(self):
        self.exprs: list[Expr] = []
        self._index: dict[Expr, int] = {}

    def intern(self, expr: Expr) -> int:
        i = self._index.get(expr)
        if i is None:
            i = len(self.exprs)
            self._index[expr] = i
            self.exprs.append(expr)
        return i


def to_nnf(f: ltl.Formula, table: AtomTable, neg: bool = False) -> NNF:
    if isinstance(f, ltl.Atom):
        if isinstance(f.expr, BoolLit):
            value = f.expr.value != neg
            return NTrue() if value else NFalse()
        return NLit(table.intern(f.expr), neg)
    if isinstance(f, ltl.Not):
        return to_nnf(f.operand, table, not neg)
    if isinstance(f, ltl.And):
        node = NOr if neg else NAnd
        return node(to_nnf(f.lhs, table, neg), to_nnf(f.rhs, table, neg))
    if isinstance(f, ltl.Or):
        node = NAnd if neg else NOr
        return node(to_nnf(f.lhs, table, neg), to_nnf(f.rhs, table, neg))
    if isinstance(f, ltl.Implies):
        node = NAnd if neg else NOr
        return node(to_nnf(f.lhs, table, not neg), to_nnf(f.rhs, table, neg))
    if isinstance(f, ltl.Next):
        return NX(to_nnf(f.operand, table, neg))
    if isinstance(f, ltl.Globally):
        # G a = false R a;  !G a = true U !a
        if neg:
            return NU(NTrue(), to_nnf(f.operand, table, True))
        return NR(NFalse(), to_nnf(f.operand, table, False))
    if isinstance(f, ltl.Finally):
        # F a = true U a;  !F a = false R !a
        if neg:
            return NR(NFalse(), to_nnf(f.operand, table, True))
        return NU(NTrue(), to_nnf(f.operand, table, False))
    if isinstance(f, ltl.Until):
        node = NR if neg else NU
        return node(to_nnf(f.lhs, table, neg), to_nnf(f.rhs, table, neg))
    if isinstance(f, ltl.Release):
        node = NU if neg else NR
        return node(to_nnf(f.lhs, table, neg), to_nnf(f.rhs, table, neg))
    if isinstance(f, ltl.Forall):
        raise ValueError("forall must be expanded before automaton construction")
    raise TypeError(f"unknown formula node {f!r}")


# --- tableau expansion -------------------------------------------------------


class _Node:
    __slots__ = ("id", "incoming", "new", "old", "nxt")

    def __init__(self, nid, incoming, new, old, nxt):
        self.id = nid
        self.incoming = incoming
        self.new = new
        self.old = old
        self.nxt = nxt


_INIT = -1


def _negate_lit(lit: NNF) -> NNF | None:
    if isinstance(lit, NLit):
        return NLit(lit.atom, not lit.neg)
    return None


def _expand_graph(f: NNF, cap: int) -> list[_Node]:
    nodes: list[_Node] = []
    counter = [0]

    def fresh() -> int:
        counter[0] += 1
        return counter[0]

    stack = [_Node(fresh(), {_INIT}, {f}, set(), set())]
    while stack:
        if len(nodes) > cap:
            raise CapExceeded(f"automaton construction exceeded {cap} tableau nodes")
        q = stack.pop()
        if not q.new:
            merged = False
            for r in nodes:
                if r.old == q.old and r.nxt == q.nxt:
                    r.incoming |= q.incoming
                    merged = True
                    break
            if merged:
                continue
            nodes.append(q)
            stack.append(_Node(fresh(), {q.id}, set(q.nxt), set(), set()))
            continue
        eta = q.new.pop()
        if isinstance(eta, NFalse):
            continue  # inconsistent node, discard
        if isinstance(eta, NTrue):
            stack.append(q)
            continue
        if isinstance(eta, NLit):
            if _negate_lit(eta) in q.old:
                continue
            q.old.add(eta)
            stack.append(q)
            continue
        if isinstance(eta, NAnd):
            if eta not in q.old:
                q.new |= {eta.lhs, eta.rhs} - q.old
            q.old.add(eta)
            stack.append(q)
            continue
        if isinstance(eta, NX):
            q.old.add(eta)
            q.nxt.add(eta.op)
            stack.append(q)
            continue
        if isinstance(eta, NOr):
            q1 = _Node(fresh(), set(q.incoming), set(q.new), set(q.old), set(q.nxt))
            q1.new |= {eta.lhs} - q1.old
            q1.old.add(eta)
            q2 = _Node(fresh(), set(q.incoming), set(q.new), set(q.old), set(q.nxt))
            q2.new |= {eta.rhs} - q2.old
            q2.old.add(eta)
            stack.extend((q1, q2))
            continue
        if isinstance(eta, NU):
            q1 = _Node(fresh(), set(q.incoming), set(q.new), set(q.old), set(q.nxt))
            q1.new |= {eta.lhs} - q1.old
            q1.old.add(eta)
            q1.nxt.add(eta)
            q2 = _Node(fresh(), set(q.incoming), set(q.new), set(q.old), set(q.nxt))
            q2.new |= {eta.rhs} - q2.old
            q2.old.add(eta)
            stack.extend((q1, q2))
            continue
        if isinstance(eta, NR):
            q1 = _Node(fresh(), set(q.incoming), set(q.new), set(q.old), set(q.nxt))
            q1.new |= {eta.rhs} - q1.old
            q1.old.add(eta)
            q1.nxt.add(eta)
            q2 = _Node(fresh(), set(q.incoming), set(q.new), set(q.old), set(q.nxt))
            q2.new |= ({eta.lhs, eta.rhs} - q2.old)
            q2.old.add(eta)
            stack.extend((q1, q2))
            continue
        raise TypeError(f"unexpected NNF node {eta!r}")
    return nodes


# --- automaton ----------------------------------------------------------------


@dataclass(frozen=True)
class Buchi:
    """Nondeterministic Buchi automaton over literal-set labels."""

    n_states: int
    initial: tuple[int, ...]
    edges: tuple[tuple[tuple[frozenset, int], ...], ...]  # edges[src] = ((label, dst), ...)
    accepting: frozenset
    atoms: tuple[Expr, ...]


def _collect_untils(f: NNF, acc: list):
    if isinstance(f, (NAnd, NOr, NU, NR)):
        _collect_untils(f.lhs, acc)
        _collect_untils(f.rhs, acc)
        if isinstance(f, NU) and f not in acc:
            acc.append(f)
    elif isinstance(f, NX):
        _collect_untils(f.op, acc)


def gba_of(f: NNF, cap: int):
    """Generalized Buchi automaton: (n, initial, edges, acceptance sets)."""
    nodes = _expand_graph(f, cap)
    ids = {n.id: i for i, n in enumerate(nodes)}
    n = len(nodes)
    initial = []
    edges: list[list] = [[] for _ in range(n)]
    for node in nodes:
        label = frozenset(
            (lit.atom, not lit.neg) for lit in node.old if isinstance(lit, NLit)
        )
        dst = ids[node.id]
        for src in node.incoming:
            if src == _INIT:
                initial.append((label, dst))
            elif src in ids:
                edges[ids[src]].append((label, dst))
    untils: list = []
    _collect_untils(f, untils)
    acceptance = []
    for u in untils:
        sat = frozenset(
            ids[node.id]
            for node in nodes
            if u not in node.old or u.rhs in node.old
        )
        acceptance.append(sat)
    return n, initial, edges, acceptance


def formula_to_buchi(f: ltl.Formula, *, negated: bool, cap: int = 100_000) -> Buchi:
    """Automaton for ``f`` (or its negation, with ``negated=True``).

    The returned automaton has one non-accepting virtual initial state whose
    outgoing edges carry the first letter's constraints; acceptance is
    state-based.
    """
    table = AtomTable()
    nnf = to_nnf(f, table, neg=negated)
    n, initial_edges, edges, acceptance = gba_of(nnf, cap)
    atoms = tuple(table.exprs)
    k = len(acceptance)
    if k == 0:
        init_state = n
        all_edges = [tuple(sorted(e, key=_edge_key)) for e in edges]
        all_edges.append(tuple(sorted(initial_edges, key=_edge_key)))
        return Buchi(
            n_states=n + 1,
            initial=(init_state,),
            edges=tuple(all_edges),
            accepting=frozenset(range(n + 1)),
            atoms=atoms,
        )

    # counter construction: state (q, i) owes acceptance set i; leaving a
    # state that belongs to set i advances the counter, and completing a
    # full cycle passes through the accepting copy (q, 0) with q in set 0
    def sid(q: int, i: int) -> int:
        return q * k + i

    init_state = n * k
    out: list[list] = [[] for _ in range(n * k + 1)]
    for q in range(n):
        for i in range(k):
            nxt = (i + 1) % k if q in acceptance[i] else i
            src = sid(q, i)
            for label, dst in edges[q]:
                out[src].append((label, sid(dst, nxt)))
    for label, dst in initial_edges:
        out[init_state].append((label, sid(dst, 0)))
    accepting = frozenset(sid(q, 0) for q in acceptance[0])
    return Buchi(
        n_states=n * k + 1,
        initial=(init_state,),
        edges=tuple(tuple(sorted(e, key=_edge_key)) for e in out),
        accepting=accepting,
        atoms=atoms,
    )


def _edge_key(edge):
    label, dst = edge
    return (dst, sorted(label))
