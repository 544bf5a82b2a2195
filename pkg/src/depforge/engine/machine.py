"""Executable semantics: leaf machines with injected faults, and the
synchronous product over an instance tree.

Discrete synchronous steps, Moore style: every leaf reads its in-ports
(connected ports deliver the driver's current out value, free ports an
environment choice), fires at most one nominal transition (stuttering when
no guard matches) and one eager error transition per layer, then stuck-at
effects of active error states override the stored values.  Fault
activation flags latch: once raised they stay raised.

Update right-hand sides are evaluated against the pre-step values
(simultaneous assignment).
"""

from __future__ import annotations

from dataclasses import dataclass

from .. import model as m
from ..expr import EnumType, Expr, IntLit, IntType, Ref
from ..instantiate import ComponentInstance, InstanceModel


class EngineError(Exception):
    """Modeling defect discovered while compiling or stepping a machine."""


class CapExceeded(EngineError):
    """Explicit resource error: a configured cap was hit, no verdict given."""


@dataclass(frozen=True)
class FaultInfo:
    """One basic event: a fault or threat transition trigger."""

    id: str  # '<instance>/<error model>/<name>' ('' instance for the root)
    instance: str
    error_model: str
    name: str
    kind: str  # 'fault' | 'threat'
    probability: float | None
    rate: float | None
    agent: str | None


def _slot_names(port) -> list[str]:
    return list(port.slots())


class ExtendedMachine:
    """A leaf instance's nominal machine composed with its error layers.

    ``step`` is relational: it returns every successor allowed by the
    nominal nondeterminism; error layers fire eagerly (first declared
    enabled transition per layer) once their fault's flag is raised and the
    vulnerability guard holds.
    """

    def __init__(self, instance: ComponentInstance):
        self.instance = instance
        self.path = instance.path
        block = instance.block
        self.in_slots: list[str] = []
        self.in_types: list = []
        self.out_slots: list[str] = []
        self.out_types: list = []
        out_init: list = []
        for port in instance.ports:
            for slot in _slot_names(port):
                if port.direction == "in":
                    self.in_slots.append(slot)
                    self.in_types.append(port.type)
                else:
                    self.out_slots.append(slot)
                    self.out_types.append(port.type)
                    out_init.append(port.init if port.init is not None else port.type.default())
        self.out_init = tuple(out_init)
        machine = instance.machine
        if machine is not None:
            self.locations = list(machine.states)
            self.initial_loc = machine.states.index(machine.initial)
            self.var_names = [v.name for v in machine.variables]
            self.var_types = [v.type for v in machine.variables]
            var_init = [v.init for v in machine.variables]
        else:
            self.locations = ["_idle"]
            self.initial_loc = 0
            self.var_names = []
            self.var_types = []
            var_init = []
        self._in_index = {s: i for i, s in enumerate(self.in_slots)}
        self._out_index = {s: i for i, s in enumerate(self.out_slots)}
        self._var_index = {v: i for i, v in enumerate(self.var_names)}
        self._enum_labels = self._collect_labels()

        self.transitions_by_loc: list[list] = [[] for _ in self.locations]
        if machine is not None:
            for t in machine.transitions:
                src = self.locations.index(t.source)
                tgt = self.locations.index(t.target)
                guard = self._compile(t.guard) if t.guard is not None else None
                updates = []
                for u in t.updates:
                    name = str(u.target)
                    if name in self._var_index:
                        kind, idx, ty = "var", self._var_index[name], self.var_types[self._var_index[name]]
                    elif name in self._out_index:
                        kind, idx, ty = "out", self._out_index[name], self.out_types[self._out_index[name]]
                    else:
                        raise EngineError(
                            f"{self.path or block}: update target '{name}' unknown"
                        )
                    updates.append((kind, idx, ty, self._compile(u.value), name))
                self.transitions_by_loc[src].append((guard, tuple(updates), tgt))

        # error layers, in declaration order
        self.layers: list[dict] = []
        self.faults: list[FaultInfo] = []
        fault_index: dict[str, int] = {}
        for em in instance.error_models:
            state_names = [s.name for s in em.states]
            layer = {
                "name": em.name,
                "states": state_names,
                "tags": [s.tag for s in em.states],
                "initial": state_names.index(em.initial),
                "transitions": [],
                "stuck": [[] for _ in state_names],
                "cia": [frozenset() for _ in state_names],
            }
            for t in em.transitions:
                trig = t.trigger
                fid = f"{self.path}/{em.name}/{trig.name}"
                if fid not in fault_index:
                    fault_index[fid] = len(self.faults)
                    self.faults.append(
                        FaultInfo(
                            fid,
                            self.path,
                            em.name,
                            trig.name,
                            trig.kind,
                            trig.probability,
                            trig.rate,
                            trig.agent,
                        )
                    )
                guard = self._compile(t.guard) if t.guard is not None else None
                layer["transitions"].append(
                    (
                        state_names.index(t.source),
                        fault_index[fid],
                        guard,
                        state_names.index(t.target),
                    )
                )
            for decl in em.effects:
                si = state_names.index(decl.state)
                cia = set(layer["cia"][si])
                for eff in decl.effects:
                    if isinstance(eff, m.CIALoss):
                        cia.add(eff.which)
                        continue
                    name = str(eff.target)
                    if name in self._out_index:
                        entry = ("out", self._out_index[name], eff.value)
                    elif name in self._var_index:
                        entry = ("var", self._var_index[name], eff.value)
                    else:
                        raise EngineError(
                            f"{self.path or block}/{em.name}: effect target "
                            f"'{name}' unknown"
                        )
                    for prev in layer["stuck"][si]:
                        if prev[:2] == entry[:2] and prev[2] != entry[2]:
                            raise EngineError(
                                f"{self.path or block}/{em.name}: conflicting "
                                f"stuck values on '{name}' in state '{decl.state}'"
                            )
                    layer["stuck"][si].append(entry)
                layer["cia"][si] = frozenset(cia)
            self.layers.append(layer)

    # -- expression compilation --

    def _collect_labels(self) -> dict[str, str]:
        labels: dict[str, str] = {}
        for ty in (*self.in_types, *self.out_types, *self.var_types):
            if isinstance(ty, EnumType):
                for lab in ty.labels:
                    labels.setdefault(lab, lab)
        return labels

    def _compile(self, expr: Expr):
        """Local expression -> fn(invals, varvals, outvals) -> value."""
        from ..expr import Binary, BoolLit, EnumLit, Unary

        path = self.path

        def build(e: Expr):
            if isinstance(e, Ref):
                name = str(e)
                if name in self._var_index:
                    i = self._var_index[name]
                    return lambda iv, vv, ov: vv[i]
                if name in self._in_index:
                    i = self._in_index[name]
                    return lambda iv, vv, ov: iv[i]
                if name in self._out_index:
                    i = self._out_index[name]
                    return lambda iv, vv, ov: ov[i]
                if len(e.segments) == 1 and e.segments[0].index is None:
                    label = self._enum_labels.get(e.segments[0].name)
                    if label is not None:
                        return lambda iv, vv, ov: label
                raise EngineError(f"{path or self.instance.block}: unknown name '{name}'")
            if isinstance(e, IntLit):
                k = e.value
                return lambda iv, vv, ov: k
            if isinstance(e, BoolLit):
                k = e.value
                return lambda iv, vv, ov: k
            if isinstance(e, EnumLit):
                k = e.label
                return lambda iv, vv, ov: k
            if isinstance(e, Unary):
                f = build(e.operand)
                if e.op == "!":
                    return lambda iv, vv, ov: not f(iv, vv, ov)
                return lambda iv, vv, ov: -f(iv, vv, ov)
            if isinstance(e, Binary):
                a = build(e.lhs)
                b = build(e.rhs)
                op = e.op
                if op == "&&":
                    return lambda iv, vv, ov: a(iv, vv, ov) and b(iv, vv, ov)
                if op == "||":
                    return lambda iv, vv, ov: a(iv, vv, ov) or b(iv, vv, ov)
                if op == "==":
                    return lambda iv, vv, ov: a(iv, vv, ov) == b(iv, vv, ov)
                if op == "!=":
                    return lambda iv, vv, ov: a(iv, vv, ov) != b(iv, vv, ov)
                if op == "<":
                    return lambda iv, vv, ov: a(iv, vv, ov) < b(iv, vv, ov)
                if op == "<=":
                    return lambda iv, vv, ov: a(iv, vv, ov) <= b(iv, vv, ov)
                if op == ">":
                    return lambda iv, vv, ov: a(iv, vv, ov) > b(iv, vv, ov)
                if op == ">=":
                    return lambda iv, vv, ov: a(iv, vv, ov) >= b(iv, vv, ov)
                if op == "+":
                    return lambda iv, vv, ov: a(iv, vv, ov) + b(iv, vv, ov)
                if op == "-":
                    return lambda iv, vv, ov: a(iv, vv, ov) - b(iv, vv, ov)
                if op == "*":
                    return lambda iv, vv, ov: a(iv, vv, ov) * b(iv, vv, ov)
                if op == "/":

                    def div(iv, vv, ov):
                        d = b(iv, vv, ov)
                        if d == 0:
                            raise EngineError(f"division by zero in '{e}'")
                        return a(iv, vv, ov) // d

                    return div
            raise EngineError(f"cannot compile expression {e!r}")

        return build(expr)

    # -- state --

    def initial_state(self):
        # initial error states are normal-tagged (validated), so no effect
        # override applies to the initial values
        variables = self.instance.machine.variables if self.instance.machine else ()
        return (
            self.initial_loc,
            tuple(v.init for v in variables),
            tuple(self.out_init),
            tuple(l["initial"] for l in self.layers),
        )

    def cia_lost(self, layer_states) -> frozenset:
        lost = set()
        for layer, si in zip(self.layers, layer_states):
            lost |= layer["cia"][si]
        return frozenset(lost)

    def step(self, state, invals, flags_on) -> list:
        """All successors of ``state`` under input ``invals`` given the
        global fault-flag predicate ``flags_on`` (callable on fault index).
        """
        loc, varvals, outvals, layer_states = state
        new_layers = []
        for layer, si in zip(self.layers, layer_states):
            nxt = si
            for (src, fidx, guard, tgt) in layer["transitions"]:
                if src != si:
                    continue
                if not flags_on(fidx):
                    continue
                if guard is not None and not guard(invals, varvals, outvals):
                    continue
                nxt = tgt
                break
            new_layers.append(nxt)
        new_layers = tuple(new_layers)

        enabled = []
        for guard, updates, tgt in self.transitions_by_loc[loc]:
            if guard is None or guard(invals, varvals, outvals):
                enabled.append((updates, tgt))
        successors = []
        if not enabled:
            candidates = [((), loc)]
        else:
            candidates = enabled
        for updates, tgt in candidates:
            vv = list(varvals)
            ov = list(outvals)
            for kind, idx, ty, fn, name in updates:
                value = fn(invals, varvals, outvals)
                if isinstance(ty, IntType) and isinstance(value, int) and not isinstance(value, bool):
                    if not (ty.lo <= value <= ty.hi):
                        raise EngineError(
                            f"{self.path or self.instance.block}: update of "
                            f"'{name}' produced {value}, outside {ty}"
                        )
                elif not ty.contains(value):
                    raise EngineError(
                        f"{self.path or self.instance.block}: update of "
                        f"'{name}' produced {value!r}, outside {ty}"
                    )
                if kind == "var":
                    vv[idx] = value
                else:
                    ov[idx] = value
            # stuck-at effects of the (possibly new) error states win
            for layer, si in zip(self.layers, new_layers):
                for ekind, idx, value in layer["stuck"][si]:
                    if ekind == "var":
                        vv[idx] = value
                    else:
                        ov[idx] = value
            successors.append((tgt, tuple(vv), tuple(ov), new_layers))
        # dedupe, preserving order
        seen = set()
        out = []
        for s in successors:
            if s not in seen:
                seen.add(s)
                out.append(s)
        return out


def inject_faults(instance: ComponentInstance) -> ExtendedMachine:
    """Compose a leaf's nominal machine with its error models."""
    if not instance.is_leaf:
        raise EngineError(f"'{instance.path}' is not a leaf instance")
    return ExtendedMachine(instance)


class SystemMachine:
    """Synchronous product of the leaf machines of an instance model.

    Connected ports are identified: a leaf in-port reads the current stored
    value of the out-port that (transitively) drives it; undriven in-ports
    are free environment inputs chosen fresh each step.  Fault activation
    flags are shared global state, raised monotonically by the environment.
    """

    def __init__(self, source: InstanceModel | ExtendedMachine):
        if isinstance(source, ExtendedMachine):
            self.leaves = [source]
            self.connections = ()
            self._instances = [source.instance]
            root_ports = []
        else:
            self.leaves = [ExtendedMachine(leaf) for leaf in source.leaves()]
            self.connections = source.connections
            self._instances = list(source.instances())
            root_ports = [
                (inst, port)
                for inst in self._instances
                for port in inst.ports
                if not inst.is_leaf
            ]
        self.faults: list[FaultInfo] = []
        for lm in self.leaves:
            self.faults.extend(lm.faults)
        if len(self.faults) != len({f.id for f in self.faults}):
            raise EngineError("duplicate fault identifiers in instance model")
        self.fault_ids = [f.id for f in self.faults]
        self._fault_index = {f.id: i for i, f in enumerate(self.faults)}

        # slot tables
        self._storage: dict[str, tuple[int, int]] = {}  # abs slot -> (leaf, out idx)
        self._leaf_in: dict[str, tuple[int, int]] = {}
        leaf_index: dict[str, int] = {}
        for li, lm in enumerate(self.leaves):
            leaf_index[lm.path] = li
            for oi, slot in enumerate(lm.out_slots):
                self._storage[_abs(lm.path, slot)] = (li, oi)
            for ii, slot in enumerate(lm.in_slots):
                self._leaf_in[_abs(lm.path, slot)] = (li, ii)
        self._driver: dict[str, str] = {}
        for conn in self.connections:
            if conn.target in self._driver:
                raise EngineError(f"'{conn.target}' is driven by two connections")
            self._driver[conn.target] = conn.source

        # composite port slots (for atom resolution and free-input typing)
        self._port_types: dict[str, object] = {}
        for inst in self._instances:
            for port in inst.ports:
                for slot in port.slots():
                    self._port_types[_abs(inst.path, slot)] = port.type

        # free inputs: undriven leaf in-slots, keyed by their resolved alias
        self.free_inputs: list[str] = []
        self.free_types: list = []
        self._free_index: dict[str, int] = {}
        self._in_bindings: list[list[tuple[str, int, int]]] = []
        for abs_slot, (li, ii) in sorted(self._leaf_in.items()):
            resolved = self._resolve(abs_slot)
            if resolved in self._storage:
                continue
            if resolved not in self._free_index:
                self._free_index[resolved] = len(self.free_inputs)
                self.free_inputs.append(resolved)
                self.free_types.append(self.leaves[li].in_types[ii])
        # any composite in-port nobody listens to still needs a value for atoms
        for slot, ty in sorted(self._port_types.items()):
            resolved = self._resolve(slot)
            if resolved in self._storage or resolved in self._free_index:
                continue
            if resolved in self._leaf_in:
                continue
            self._free_index[resolved] = len(self.free_inputs)
            self.free_inputs.append(resolved)
            self.free_types.append(ty)

        self._var_index: dict[str, tuple[int, int]] = {}
        for li, lm in enumerate(self.leaves):
            for vi, name in enumerate(lm.var_names):
                self._var_index[_abs(lm.path, name)] = (li, vi)

        self._enum_labels: set[str] = set()
        for lm in self.leaves:
            self._enum_labels.update(lm._enum_labels)
        for ty in self._port_types.values():
            if isinstance(ty, EnumType):
                self._enum_labels.update(ty.labels)

    def _resolve(self, slot: str) -> str:
        seen = set()
        while slot in self._driver:
            if slot in seen:
                raise EngineError(f"connection cycle through '{slot}'")
            seen.add(slot)
            slot = self._driver[slot]
        return slot

    # -- state & stepping --

    def initial_state(self):
        return (tuple(lm.initial_state() for lm in self.leaves), 0)

    def input_space(self):
        """All valuations of the free inputs, in a deterministic order."""
        combos = [()]
        for ty in self.free_types:
            combos = [c + (v,) for c in combos for v in ty.values()]
        return combos

    def gather_inputs(self, state, invals, leaf_idx: int):
        leafstates, _flags = state
        lm = self.leaves[leaf_idx]
        vals = []
        for slot in lm.in_slots:
            abs_slot = _abs(lm.path, slot)
            resolved = self._resolve(abs_slot)
            if resolved in self._storage:
                li, oi = self._storage[resolved]
                vals.append(leafstates[li][2][oi])
            else:
                vals.append(invals[self._free_index[resolved]])
        return tuple(vals)

    def successors(self, state, invals, raise_mask: int) -> list:
        """Joint successors; ``raise_mask`` latches fault flags before the
        error layers evaluate, so a fault may fire the step it is raised."""
        leafstates, flags = state
        flags2 = flags | raise_mask
        flags_on = lambda gi: bool(flags2 >> gi & 1)
        per_leaf = []
        offset = 0
        for li, lm in enumerate(self.leaves):
            iv = self.gather_inputs(state, invals, li)
            n = len(lm.faults)
            local_on = lambda fi, off=offset: flags_on(off + fi)
            per_leaf.append(lm.step(leafstates[li], iv, local_on))
            offset += n
        out = []
        for combo in _product(per_leaf):
            out.append((tuple(combo), flags2))
        return out

    # -- atom resolution --

    def atom_env(self, state, invals):
        """Environment callable for evaluating expressions on a snapshot."""
        leafstates, flags = state

        def env(ref: Ref):
            name = str(ref)
            if name in self._var_index:
                li, vi = self._var_index[name]
                return leafstates[li][1][vi]
            if name in self._port_types or name in self._leaf_in or name in self._storage:
                resolved = self._resolve(name)
                if resolved in self._storage:
                    li, oi = self._storage[resolved]
                    return leafstates[li][2][oi]
                if resolved in self._free_index:
                    return invals[self._free_index[resolved]]
            if len(ref.segments) == 1 and ref.segments[0].index is None:
                base = ref.segments[0].name
                if base in self._enum_labels:
                    return base
            raise EngineError(f"unknown name '{name}' in condition")

        return env

    def check_vocabulary(self, refs) -> list[str]:
        """Names that do not resolve on this machine (for pre-checks)."""
        bad = []
        for ref in refs:
            name = str(ref)
            if name in self._var_index or name in self._port_types:
                continue
            if name in self._leaf_in or name in self._storage:
                continue
            if len(ref.segments) == 1 and ref.segments[0].index is None and ref.segments[0].name in self._enum_labels:
                continue
            bad.append(name)
        return bad

    def snapshot(self, state, invals) -> dict:
        """Human-readable snapshot for witness traces."""
        leafstates, flags = state
        ports = {}
        for slot in sorted(self._port_types):
            resolved = self._resolve(slot)
            if resolved in self._storage:
                li, oi = self._storage[resolved]
                ports[slot] = leafstates[li][2][oi]
            elif resolved in self._free_index:
                ports[slot] = invals[self._free_index[resolved]]
        for abs_slot in sorted(self._storage):
            ports.setdefault(abs_slot, leafstates[self._storage[abs_slot][0]][2][self._storage[abs_slot][1]])
        for abs_slot in sorted(self._leaf_in):
            resolved = self._resolve(abs_slot)
            if resolved in self._storage:
                li, oi = self._storage[resolved]
                ports[abs_slot] = leafstates[li][2][oi]
            elif resolved in self._free_index:
                ports[abs_slot] = invals[self._free_index[resolved]]
        locations = {}
        variables = {}
        error_states = {}
        cia = {}
        for li, lm in enumerate(self.leaves):
            loc, varvals, outvals, layers = leafstates[li]
            key = lm.path or lm.instance.block
            locations[key] = lm.locations[loc]
            for vi, vname in enumerate(lm.var_names):
                variables[_abs(lm.path, vname)] = varvals[vi]
            for layer, si in zip(lm.layers, layers):
                error_states[f"{key}/{layer['name']}"] = layer["states"][si]
            lost = lm.cia_lost(layers)
            if lost:
                cia[key] = sorted(lost)
        return {
            "locations": locations,
            "variables": variables,
            "ports": ports,
            "error_states": error_states,
            "cia_lost": cia,
            "raised": [self.fault_ids[i] for i in range(len(self.faults)) if flags >> i & 1],
        }


def _abs(path: str, slot: str) -> str:
    return f"{path}.{slot}" if path else slot


def _product(lists):
    if not lists:
        yield ()
        return
    head, *rest = lists
    for h in head:
        for r in _product(rest):
            yield (h, *r)
