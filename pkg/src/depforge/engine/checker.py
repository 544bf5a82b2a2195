"""Explicit-state checking: LTL over machines, reachability, LTL validity.

``check_ltl`` runs nested depth-first search for an accepting lasso on the
product of the snapshot graph with the Buchi automaton of the negated
formula.  ``check_reachable`` is plain BFS.  ``ltl_valid`` decides validity
over all infinite words of a finite-domain vocabulary by emptiness of the
negation automaton alone, with per-edge satisfiability filtering.

Probabilities and rates play no role here: these semantics are possibilistic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .. import ltl
from ..expr import Binary, BoolLit, BoolType, Expr, IntLit, Ref, evaluate
from ..instantiate import InstanceModel
from .buchi import Buchi, formula_to_buchi
from .machine import CapExceeded, EngineError, ExtendedMachine, SystemMachine

DEFAULT_STATE_CAP = 5_000_000


@dataclass(frozen=True)
class Witness:
    """A finite or lasso-shaped trace of snapshots.

    For lassos, the implicit closing edge runs from the last snapshot back
    to ``snapshots[loop_start]``.  ``states`` and ``inputs`` carry the raw
    replay data, one entry per snapshot: ``inputs[k] = (invals, raise_mask)``
    is the free-input valuation of step k and the fault flags raised on the
    edge leaving it, so ``states[k+1]`` must be a successor of ``states[k]``
    under ``inputs[k]``.
    """

    kind: str  # 'finite' | 'lasso'
    snapshots: tuple[dict, ...]
    loop_start: int | None
    states: tuple = field(repr=False, default=())
    inputs: tuple = field(repr=False, default=())


@dataclass(frozen=True)
class Verdict:
    result: str  # holds | violated | reachable | unreachable
    witness: Witness | None = None
    explored: int = 0

    @property
    def positive(self) -> bool:
        return self.result in ("holds", "unreachable")


class SystemGraph:
    """Snapshot graph of a system machine: nodes are (inputs, state) pairs.

    The environment picks fresh free-input values every step and may raise
    any subset of the allowed fault flags (latching).  Successor lists are
    memoized and deterministic.
    """

    def __init__(self, machine: SystemMachine, allowed_faults, cap: int):
        self.machine = machine
        self.cap = cap
        allowed = 0
        for i, f in enumerate(machine.faults):
            if allowed_faults is None or f.id in allowed_faults:
                allowed |= 1 << i
        self.allowed = allowed
        self._inputs = machine.input_space()
        self._succ: dict = {}
        self._atom_cache: dict = {}
        self.atoms: list[Expr] = []
        self._atom_fail: str | None = None

    def set_atoms(self, atoms) -> None:
        self.atoms = list(atoms)
        self._atom_cache.clear()

    def initial_nodes(self):
        s0 = self.machine.initial_state()
        return [(iv, s0) for iv in self._inputs]

    def atom_values(self, node):
        vals = self._atom_cache.get(node)
        if vals is None:
            invals, state = node
            env = self.machine.atom_env(state, invals)
            vals = tuple(bool(evaluate(a, env)) for a in self.atoms)
            self._atom_cache[node] = vals
        return vals

    def successors(self, node):
        cached = self._succ.get(node)
        if cached is not None:
            return cached
        if len(self._succ) >= self.cap:
            raise CapExceeded(
                f"state-space cap of {self.cap} joint states exceeded"
            )
        invals, state = node
        _, flags = state
        remaining = self.allowed & ~flags
        raise_masks = _submasks(remaining)
        out = []
        seen = set()
        for rm in raise_masks:
            for succ in self.machine.successors(state, invals, rm):
                for iv in self._inputs:
                    nxt = (iv, succ)
                    if nxt not in seen:
                        seen.add(nxt)
                        out.append(nxt)
        self._succ[node] = out
        return out

    @property
    def explored(self) -> int:
        return len(self._succ)


def _submasks(mask: int):
    """All submasks of ``mask`` in ascending numeric order."""
    subs = [0]
    bit = 1
    rest = mask
    while rest:
        if rest & 1:
            subs = subs + [s | bit for s in subs]
        rest >>= 1
        bit <<= 1
    return sorted(subs)


def _system_for(target) -> SystemMachine:
    if isinstance(target, SystemMachine):
        return target
    if isinstance(target, (InstanceModel, ExtendedMachine)):
        return SystemMachine(target)
    raise TypeError(f"cannot check {target!r}")


def _allowed_for(fault_mode, machine: SystemMachine):
    if fault_mode == "all-inactive":
        return frozenset()
    if fault_mode == "free":
        return None  # everything
    if isinstance(fault_mode, (set, frozenset, list, tuple)):
        known = {f.id for f in machine.faults}
        unknown = set(fault_mode) - known
        if unknown:
            raise EngineError(f"unknown fault ids: {sorted(unknown)}")
        return frozenset(fault_mode)
    raise ValueError(f"bad fault mode {fault_mode!r}")


def _precheck_refs(machine: SystemMachine, refs):
    bad = machine.check_vocabulary(refs)
    if bad:
        raise EngineError("unknown names in formula/condition: " + ", ".join(bad))


# --- reachability -------------------------------------------------------------


def check_reachable(
    target,
    condition: Expr,
    fault_mode="free",
    *,
    cap: int = DEFAULT_STATE_CAP,
) -> Verdict:
    """Search for a snapshot satisfying ``condition``; exhaustive within cap."""
    machine = _system_for(target)
    from ..expr import free_refs

    _precheck_refs(machine, free_refs(condition))
    graph = SystemGraph(machine, _allowed_for(fault_mode, machine), cap)
    graph.set_atoms([condition])
    parent: dict = {}
    queue = []
    for node in graph.initial_nodes():
        if node not in parent:
            parent[node] = (None, None)
            queue.append(node)
    qi = 0
    while qi < len(queue):
        node = queue[qi]
        qi += 1
        if graph.atom_values(node)[0]:
            return Verdict(
                "reachable",
                _finite_witness(graph, parent, node),
                explored=len(parent),
            )
        for nxt in graph.successors(node):
            if nxt not in parent:
                parent[nxt] = (node, None)
                queue.append(nxt)
    return Verdict("unreachable", None, explored=len(parent))


def _finite_witness(graph: SystemGraph, parent, node) -> Witness:
    chain = []
    cur = node
    while cur is not None:
        chain.append(cur)
        cur = parent[cur][0]
    chain.reverse()
    machine = graph.machine
    snaps = tuple(machine.snapshot(s, iv) for (iv, s) in chain)
    states = tuple(s for (_iv, s) in chain)
    inputs = []
    for i, (iv, _s) in enumerate(chain):
        nxt = chain[i + 1] if i + 1 < len(chain) else None
        inputs.append((iv, _raise_between(chain[i], nxt)))
    return Witness("finite", snaps, None, states, tuple(inputs))


def _raise_between(node, nxt) -> int:
    if nxt is None:
        return 0
    _, state = node
    _, flags = state
    _, nstate = nxt
    _, nflags = nstate
    return nflags & ~flags


# --- LTL checking --------------------------------------------------------------


def check_ltl(
    target,
    formula: ltl.Formula,
    fault_mode="all-inactive",
    *,
    cap: int = DEFAULT_STATE_CAP,
    automaton_cap: int = 100_000,
) -> Verdict:
    """Does every infinite execution satisfy ``formula``?

    ``violated`` verdicts carry a lasso witness that replays through the
    step function.
    """
    machine = _system_for(target)
    _precheck_refs(machine, ltl.refs_of(formula))
    ba = formula_to_buchi(formula, negated=True, cap=automaton_cap)
    graph = SystemGraph(machine, _allowed_for(fault_mode, machine), cap)
    graph.set_atoms(ba.atoms)
    lasso = _ndfs(graph, ba)
    if lasso is None:
        return Verdict("holds", None, explored=graph.explored)
    nodes, loop_start = lasso
    snaps = tuple(graph.machine.snapshot(s, iv) for (iv, s) in nodes)
    states = tuple(s for (_iv, s) in nodes)
    inputs = []
    for i, (iv, _s) in enumerate(nodes):
        nxt = nodes[i + 1] if i + 1 < len(nodes) else nodes[loop_start]
        inputs.append((iv, _raise_between(nodes[i], nxt)))
    witness = Witness("lasso", snaps, loop_start, states, tuple(inputs))
    return Verdict("violated", witness, explored=graph.explored)


def _label_holds(label, atom_vals) -> bool:
    for atom_idx, polarity in label:
        if atom_vals[atom_idx] != polarity:
            return False
    return True


def _ndfs(graph: SystemGraph, ba: Buchi):
    """Nested DFS for an accepting lasso on the system x automaton product.

    Returns (system nodes of a stem+loop, loop_start) or None.  Automaton
    edges consume the valuation of the current system node.
    """
    blue: set = set()
    red: set = set()

    def product_succ(pnode):
        sys_node, q = pnode
        vals = graph.atom_values(sys_node)
        out = []
        sys_next = None
        for label, q2 in ba.edges[q]:
            if not _label_holds(label, vals):
                continue
            if sys_next is None:
                sys_next = graph.successors(sys_node)
            for nxt in sys_next:
                out.append((nxt, q2))
        return out

    for init_sys in graph.initial_nodes():
        for q0 in ba.initial:
            start = (init_sys, q0)
            if start in blue:
                continue
            blue.add(start)
            path = [start]
            on_path = {start}
            iters = [iter(product_succ(start))]
            while path:
                try:
                    nxt = next(iters[-1])
                except StopIteration:
                    node = path[-1]
                    _sys, q = node
                    if q in ba.accepting:
                        hit = _red_dfs(node, on_path, red, product_succ)
                        if hit is not None:
                            red_path, anchor = hit
                            loop_start = path.index(anchor)
                            full = path + red_path[1:-1]
                            return ([n for (n, _q) in full], loop_start)
                    path.pop()
                    on_path.discard(node)
                    iters.pop()
                    continue
                if nxt not in blue:
                    blue.add(nxt)
                    path.append(nxt)
                    on_path.add(nxt)
                    iters.append(iter(product_succ(nxt)))
    return None


def _red_dfs(seed, on_blue_path, red, product_succ):
    """Search from ``seed`` for a cycle closing on the blue DFS stack.

    The seed itself is still on the blue stack, so hitting it (or any
    ancestor) closes an accepting lasso.  Returns (red path from seed to
    the anchor inclusive, anchor) or None.
    """
    parent = {seed: None}
    stack = [seed]
    red.add(seed)
    while stack:
        node = stack.pop()
        for nxt in product_succ(node):
            if nxt in on_blue_path:
                chain = [nxt]
                cur = node
                while cur is not None:
                    chain.append(cur)
                    cur = parent[cur]
                chain.reverse()
                return chain, nxt
            if nxt not in red:
                red.add(nxt)
                parent[nxt] = node
                stack.append(nxt)
    return None


# --- validity over a finite vocabulary -----------------------------------------


def ltl_valid(
    formula: ltl.Formula,
    vocabulary: dict,
    *,
    automaton_cap: int = 100_000,
) -> Verdict:
    """Is ``formula`` true over all infinite words of valuations of
    ``vocabulary`` (name -> ValueType)?

    A ``violated`` verdict carries a lasso word: snapshots are plain
    name -> value dictionaries.
    """
    ba = formula_to_buchi(formula, negated=True, cap=automaton_cap)
    preds = [_atom_predicate(a, vocabulary) for a in ba.atoms]
    sat_cache: dict = {}

    def label_valuation(label):
        """A concrete valuation satisfying the label, or None."""
        if label in sat_cache:
            return sat_cache[label]
        choice = {}
        ok = True
        for name, vtype in vocabulary.items():
            constraints = []
            for atom_idx, polarity in label:
                var, pred = preds[atom_idx]
                if var == name:
                    constraints.append((pred, polarity))
            value = None
            for v in vtype.values():
                if all(pred(v) == polarity for pred, polarity in constraints):
                    value = v
                    break
            if value is None and constraints:
                ok = False
                break
            choice[name] = value if value is not None else vtype.default()
        result = choice if ok else None
        sat_cache[label] = result
        return result

    # NDFS over the automaton alone; edges enabled by satisfiable labels
    blue: set = set()
    red: set = set()

    def succ(q):
        return [
            (label, q2) for label, q2 in ba.edges[q] if label_valuation(label) is not None
        ]

    for q0 in ba.initial:
        if q0 in blue:
            continue
        blue.add(q0)
        path = [q0]
        entry = [None]  # label consumed entering path[i]
        on_path = {q0}
        iters = [iter(succ(q0))]
        while path:
            try:
                label, nxt = next(iters[-1])
            except StopIteration:
                q = path[-1]
                if q in ba.accepting:
                    hit = _red_word_dfs(q, on_path, red, succ)
                    if hit is not None:
                        red_labels, anchor = hit
                        word_labels = entry[1:] + red_labels
                        loop_start = path.index(anchor)
                        word = tuple(
                            dict(label_valuation(l)) for l in word_labels
                        )
                        return Verdict(
                            "violated", Witness("lasso", word, loop_start)
                        )
                path.pop()
                entry.pop()
                on_path.discard(q)
                iters.pop()
                continue
            if nxt not in blue:
                blue.add(nxt)
                path.append(nxt)
                entry.append(label)
                on_path.add(nxt)
                iters.append(iter(succ(nxt)))
    return Verdict("holds", None)


def _red_word_dfs(seed, on_blue_path, red, succ):
    """Red search over labeled automaton edges; returns the labels of the
    path from the seed to the anchor, plus the anchor itself."""
    parent = {seed: (None, None)}
    stack = [seed]
    red.add(seed)
    while stack:
        q = stack.pop()
        for label, nxt in succ(q):
            if nxt in on_blue_path:
                chain = [label]
                cur = q
                while parent[cur][0] is not None:
                    prev, plab = parent[cur]
                    chain.append(plab)
                    cur = prev
                chain.reverse()
                return chain, nxt
            if nxt not in red:
                red.add(nxt)
                parent[nxt] = (q, label)
                stack.append(nxt)
    return None


def _atom_predicate(expr: Expr, vocabulary):
    """Split an atom into (variable name, value predicate)."""
    if isinstance(expr, Ref):
        name = str(expr)
        if name not in vocabulary:
            raise EngineError(f"atom '{name}' is not in the vocabulary")
        if not isinstance(vocabulary[name], BoolType):
            raise EngineError(f"bare atom '{name}' must be boolean")
        return name, lambda v: v is True
    if isinstance(expr, Binary) and expr.op in ("==", "!=", "<", "<=", ">", ">="):
        if not isinstance(expr.lhs, Ref):
            raise EngineError(f"atom '{expr}' must compare a name with a constant")
        name = str(expr.lhs)
        if name not in vocabulary:
            raise EngineError(f"atom variable '{name}' is not in the vocabulary")
        rhs = expr.rhs
        if isinstance(rhs, IntLit):
            const = rhs.value
        elif isinstance(rhs, BoolLit):
            const = rhs.value
        elif isinstance(rhs, Ref) and len(rhs.segments) == 1 and rhs.segments[0].index is None:
            const = rhs.segments[0].name  # enumeration label
        else:
            raise EngineError(f"atom '{expr}' must compare a name with a constant")
        op = expr.op
        table = {
            "==": lambda v: v == const,
            "!=": lambda v: v != const,
            "<": lambda v: v < const,
            "<=": lambda v: v <= const,
            ">": lambda v: v > const,
            ">=": lambda v: v >= const,
        }
        return name, table[op]
    raise EngineError(f"unsupported atom '{expr}'")


# --- witness replay & serialization --------------------------------------------


def replay_witness(target, witness: Witness, fault_mode="free") -> bool:
    """Feed the witness back through the step function and verify every
    snapshot is reproduced exactly."""
    machine = _system_for(target)
    states = witness.states
    inputs = witness.inputs
    if not states:
        return False
    if states[0] != machine.initial_state():
        return False
    n = len(states)
    for k in range(n - 1):
        invals, rm = inputs[k]
        succs = machine.successors(states[k], invals, rm)
        if states[k + 1] not in succs:
            return False
    if witness.kind == "lasso":
        invals, rm = inputs[-1]
        succs = machine.successors(states[-1], invals, rm)
        if states[witness.loop_start] not in succs:
            return False
    # snapshots must match the stored states
    for k in range(n):
        if machine.snapshot(states[k], inputs[k][0]) != witness.snapshots[k]:
            return False
    return True


def witness_to_json(witness: Witness) -> dict:
    steps = []
    for i, snap in enumerate(witness.snapshots):
        steps.append(
            {
                "step": i,
                "locations": snap.get("locations", {}),
                "variables": snap.get("variables", {}),
                "ports": snap.get("ports", {}),
                "error_states": snap.get("error_states", {}),
                "raised_faults": snap.get("raised", []),
            }
            if isinstance(snap, dict) and "locations" in snap
            else {"step": i, "valuation": snap}
        )
    return {
        "kind": witness.kind,
        "loop_start": witness.loop_start,
        "steps": steps,
    }


def witness_to_text(witness: Witness) -> str:
    lines = []
    for i, snap in enumerate(witness.snapshots):
        marker = ""
        if witness.kind == "lasso" and witness.loop_start == i:
            marker = "  <- loop start"
        lines.append(f"step {i}{marker}")
        if isinstance(snap, dict) and "locations" in snap:
            for name, loc in sorted(snap["locations"].items()):
                lines.append(f"  state {name} = {loc}")
            for name, value in sorted(snap["variables"].items()):
                lines.append(f"  var {name} = {_fmt(value)}")
            for name, value in sorted(snap["ports"].items()):
                lines.append(f"  port {name} = {_fmt(value)}")
            for name, st in sorted(snap["error_states"].items()):
                lines.append(f"  error {name} = {st}")
            if snap.get("raised"):
                lines.append("  raised " + ", ".join(snap["raised"]))
        else:
            for name, value in sorted(snap.items()):
                lines.append(f"  {name} = {_fmt(value)}")
    if witness.kind == "lasso":
        lines.append(f"loop back to step {witness.loop_start}")
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)
