"""Fault tree analysis and FMEA over instance models with injected faults.

Minimal cut sets are computed exactly by subset exploration with monotone
pruning: fault latching makes top-event reachability monotone in the
activation set, so supersets of a known cut set are never revisited.  The
top-event probability is the exact probability (under independent
per-demand activations) that at least one cut set is fully activated, not
the OR-of-ANDs approximation.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .expr import Expr
from .instantiate import InstanceModel
from .engine.checker import DEFAULT_STATE_CAP, SystemGraph, check_reachable
from .engine.machine import EngineError, FaultInfo, SystemMachine

BASIC_EVENT_CAP = 24


@dataclass(frozen=True)
class TopLevelEvent:
    name: str
    condition: Expr


@dataclass(frozen=True)
class CutSet:
    events: frozenset

    def sort_key(self):
        return (len(self.events), tuple(sorted(self.events)))


@dataclass(frozen=True)
class BasicEvent:
    name: str
    probability: float | None


@dataclass(frozen=True)
class AndGate:
    events: tuple[str, ...]
    probability: float | None


@dataclass(frozen=True)
class FaultTree:
    """Two-level OR-of-ANDs normal form, one AND gate per minimal cut set."""

    top_event: str
    top_probability: float | None
    gates: tuple[AndGate, ...]
    basic_events: tuple[BasicEvent, ...]
    quantitative_note: str | None = None
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class FmeaRow:
    failure_mode: tuple[str, ...]  # fault ids, cardinality 1 or 2
    components: tuple[str, ...]
    local_effect: tuple[str, ...]
    system_effects: tuple[str, ...]
    probability: float | None


def _fault_table(machine: SystemMachine) -> dict[str, FaultInfo]:
    return {f.id: f for f in machine.faults}


def _check_event_cap(machine: SystemMachine):
    if len(machine.faults) > BASIC_EVENT_CAP:
        raise EngineError(
            f"{len(machine.faults)} basic events exceed the exact-engine cap "
            f"of {BASIC_EVENT_CAP}"
        )


def _reachable_with(machine: SystemMachine, condition, allowed, cap) -> bool:
    graph = SystemGraph(machine, frozenset(allowed), cap)
    graph.set_atoms([condition])
    visited = set()
    frontier = list(dict.fromkeys(graph.initial_nodes()))
    visited.update(frontier)
    while frontier:
        nxt = []
        for node in frontier:
            if graph.atom_values(node)[0]:
                return True
            for succ in graph.successors(node):
                if succ not in visited:
                    visited.add(succ)
                    nxt.append(succ)
        frontier = nxt
    return False


def minimal_cut_sets(
    instance: InstanceModel | SystemMachine,
    tle: TopLevelEvent,
    max_order: int,
    *,
    cap: int = DEFAULT_STATE_CAP,
) -> tuple[CutSet, ...]:
    """Inclusion-minimal activation sets of size <= max_order that can reach
    the top-level event, ordered by (size, lexicographic).

    A degenerate top event (reachable with every fault inactive) yields an
    empty result; compute_fault_tree reports the warning.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    machine = instance if isinstance(instance, SystemMachine) else SystemMachine(instance)
    _check_event_cap(machine)
    fault_ids = sorted(f.id for f in machine.faults)
    if _reachable_with(machine, tle.condition, frozenset(), cap):
        return ()
    found: list[frozenset] = []
    for size in range(1, min(max_order, len(fault_ids)) + 1):
        for combo in _combinations(fault_ids, size):
            s = frozenset(combo)
            if any(prev <= s for prev in found):
                continue
            if _reachable_with(machine, tle.condition, s, cap):
                found.append(s)
    return tuple(sorted((CutSet(s) for s in found), key=CutSet.sort_key))


def _combinations(items, size):
    from itertools import combinations

    return combinations(items, size)


def is_degenerate(
    instance: InstanceModel | SystemMachine,
    tle: TopLevelEvent,
    *,
    cap: int = DEFAULT_STATE_CAP,
) -> bool:
    """True when the top event is reachable with all faults inactive."""
    machine = instance if isinstance(instance, SystemMachine) else SystemMachine(instance)
    return _reachable_with(machine, tle.condition, frozenset(), cap)


def compute_fault_tree(
    instance: InstanceModel | SystemMachine,
    tle: TopLevelEvent,
    max_order: int,
    *,
    cap: int = DEFAULT_STATE_CAP,
) -> FaultTree:
    """OR-of-ANDs fault tree from the minimal cut sets, with exact
    probabilities when every involved fault carries a per-demand one."""
    machine = instance if isinstance(instance, SystemMachine) else SystemMachine(instance)
    warnings = []
    if is_degenerate(machine, tle, cap=cap):
        warnings.append(
            "top event is reachable with all faults inactive; "
            "fault tree analysis degenerates"
        )
        cut_sets: tuple[CutSet, ...] = ()
    else:
        cut_sets = minimal_cut_sets(machine, tle, max_order, cap=cap)
    table = _fault_table(machine)
    involved = sorted({e for cs in cut_sets for e in cs.events})
    note = None
    probs: dict[str, float] = {}
    for fid in involved:
        info = table[fid]
        if info.probability is None:
            kind = "rate" if info.rate is not None else "no probability"
            note = (
                f"quantitative analysis refused: '{fid}' carries {kind}; "
                "per-demand probabilities are required (rates feed the "
                "reliability path)"
            )
            break
        probs[fid] = info.probability
    quantitative = note is None and bool(cut_sets)
    gates = []
    for cs in cut_sets:
        events = tuple(sorted(cs.events))
        p = None
        if quantitative:
            p = 1.0
            for e in events:
                p *= probs[e]
        gates.append(AndGate(events, p))
    basic = tuple(
        BasicEvent(fid, probs.get(fid) if quantitative else table[fid].probability)
        for fid in involved
    )
    top_p = None
    if quantitative:
        top_p = _union_probability([cs.events for cs in cut_sets], probs)
    return FaultTree(
        top_event=tle.name,
        top_probability=top_p,
        gates=tuple(gates),
        basic_events=basic,
        quantitative_note=note,
        warnings=tuple(warnings),
    )


def _union_probability(cut_sets, probs: dict[str, float]) -> float:
    """Exact P(some cut set fully activated) under independent activations.

    Enumerates activation vectors over the involved faults when that is
    cheaper, otherwise applies inclusion-exclusion over the cut sets.
    """
    involved = sorted({e for cs in cut_sets for e in cs})
    n = len(involved)
    k = len(cut_sets)
    if k <= n and k <= 22:
        return _union_by_inclusion_exclusion(cut_sets, probs)
    if n <= 22:
        return _union_by_enumeration(cut_sets, involved, probs)
    from .engine.machine import CapExceeded

    raise CapExceeded(
        f"top probability over {n} events / {k} cut sets exceeds the exact caps"
    )


def _union_by_enumeration(cut_sets, involved, probs) -> float:
    n = len(involved)
    index = {e: i for i, e in enumerate(involved)}
    masks = []
    for cs in cut_sets:
        mask = 0
        for e in cs:
            mask |= 1 << index[e]
        masks.append(mask)
    total = 0.0
    for v in range(1 << n):
        if not any(v & m == m for m in masks):
            continue
        p = 1.0
        for i, e in enumerate(involved):
            p *= probs[e] if v >> i & 1 else 1.0 - probs[e]
        total += p
    return total


def _union_by_inclusion_exclusion(cut_sets, probs) -> float:
    sets = [frozenset(cs) for cs in cut_sets]
    k = len(sets)
    total = 0.0
    for mask in range(1, 1 << k):
        union = frozenset()
        bits = 0
        for i in range(k):
            if mask >> i & 1:
                union |= sets[i]
                bits += 1
        p = 1.0
        for e in union:
            p *= probs[e]
        total += p if bits % 2 == 1 else -p
    return total


def fmea(
    instance: InstanceModel | SystemMachine,
    tles: list[TopLevelEvent],
    cardinality: int,
    *,
    cap: int = DEFAULT_STATE_CAP,
) -> tuple[FmeaRow, ...]:
    """One row per fault set of the requested cardinality (1 or 2); the
    system effects are the top events reachable with exactly that set
    activatable."""
    if cardinality not in (1, 2):
        raise ValueError("cardinality must be 1 or 2")
    machine = instance if isinstance(instance, SystemMachine) else SystemMachine(instance)
    _check_event_cap(machine)
    table = _fault_table(machine)
    local_effects = _local_effects(machine)
    fault_ids = sorted(table)
    rows = []
    for combo in _combinations(fault_ids, cardinality):
        s = frozenset(combo)
        effects = tuple(
            tle.name for tle in tles if _reachable_with(machine, tle.condition, s, cap)
        )
        components = tuple(sorted({table[f].instance for f in combo}))
        prob = None
        if all(table[f].probability is not None for f in combo):
            prob = 1.0
            for f in combo:
                prob *= table[f].probability
        rows.append(
            FmeaRow(
                failure_mode=tuple(sorted(combo)),
                components=components,
                local_effect=tuple(local_effects[f] for f in sorted(combo)),
                system_effects=effects,
                probability=prob,
            )
        )
    rows.sort(key=lambda r: (len(r.failure_mode), r.components, r.failure_mode))
    return tuple(rows)


def _local_effects(machine: SystemMachine) -> dict[str, str]:
    """Fault id -> the error/failure state its first transition reaches."""
    out: dict[str, str] = {}
    for lm in machine.leaves:
        offset_names = [f.id for f in lm.faults]
        for layer in lm.layers:
            for (src, fidx, _guard, tgt) in layer["transitions"]:
                fid = offset_names[fidx]
                if fid not in out:
                    out[fid] = layer["states"][tgt]
    return out


def fmea_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["cardinality", "components", "failure_mode", "local_effect", "system_effects", "probability"]
    )
    for r in rows:
        writer.writerow(
            [
                len(r.failure_mode),
                ";".join(r.components),
                ";".join(r.failure_mode),
                ";".join(r.local_effect),
                ";".join(r.system_effects),
                "" if r.probability is None else repr(r.probability),
            ]
        )
    return buf.getvalue()
