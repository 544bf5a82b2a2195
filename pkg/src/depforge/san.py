"""Stochastic activity networks and the instance-model transformation.

The transformation maps every (instance, error model, state) to a place and
every rate-bearing fault/threat/repair transition to a timed activity.
Vulnerability guards and the system-failure condition are compiled into
predicates over markings by a possibilistic abstraction: for each
combination of error states, the nominal dynamics (error layers pinned,
inputs free) decide whether the guard/condition is reachable.  Predicates
are stored as textual marking expressions so the network serializes
cleanly; the simulator compiles them to bytecode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dsl.parser import parse_expr_text
from .engine.machine import CapExceeded, EngineError, ExtendedMachine, SystemMachine
from .expr import Binary, BoolLit, Expr, IntLit, Ref, Unary, evaluate
from .instantiate import InstanceModel
from .safety import TopLevelEvent

SIGMA_CAP = 4096  # cap on error-state combinations explored per predicate


@dataclass(frozen=True)
class Place:
    name: str
    initial: int


@dataclass(frozen=True)
class TimedActivity:
    name: str
    rate: float  # per hour
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    enabling: str | None = None  # marking expression; None = input tokens only


@dataclass(frozen=True)
class InstantaneousCase:
    probability: float
    outputs: tuple[str, ...]


@dataclass(frozen=True)
class InstantaneousActivity:
    name: str
    inputs: tuple[str, ...]
    cases: tuple[InstantaneousCase, ...]
    enabling: str | None = None


@dataclass(frozen=True)
class RewardVariable:
    name: str
    predicate: str  # marking expression, evaluated at the time instant
    kind: str = "instant-of-time"


@dataclass(frozen=True)
class StochasticActivityNetwork:
    places: tuple[Place, ...]
    timed: tuple[TimedActivity, ...]
    instantaneous: tuple[InstantaneousActivity, ...] = ()
    rewards: tuple[RewardVariable, ...] = ()

    def place_index(self) -> dict[str, int]:
        return {p.name: i for i, p in enumerate(self.places)}

    def validate(self) -> list[str]:
        problems = []
        index = self.place_index()
        if len(index) != len(self.places):
            problems.append("duplicate place names")
        for act in self.timed:
            if act.rate <= 0:
                problems.append(f"activity '{act.name}': rate must be positive")
            for p in (*act.inputs, *act.outputs):
                if p not in index:
                    problems.append(f"activity '{act.name}': unknown place '{p}'")
        for act in self.instantaneous:
            total = sum(c.probability for c in act.cases)
            if abs(total - 1.0) > 1e-9:
                problems.append(
                    f"activity '{act.name}': case probabilities sum to {total}"
                )
            for c in act.cases:
                if not (0 < c.probability <= 1):
                    problems.append(
                        f"activity '{act.name}': case probability {c.probability} "
                        "outside (0, 1]"
                    )
                for p in c.outputs:
                    if p not in index:
                        problems.append(f"activity '{act.name}': unknown place '{p}'")
            for p in act.inputs:
                if p not in index:
                    problems.append(f"activity '{act.name}': unknown place '{p}'")
        for rv in self.rewards:
            try:
                refs = _expr_places(parse_expr_text(rv.predicate))
            except ValueError as exc:
                problems.append(f"reward '{rv.name}': {exc}")
                continue
            for p in refs:
                if p not in index:
                    problems.append(f"reward '{rv.name}': unknown place '{p}'")
        for src in (self.timed, self.instantaneous):
            for act in src:
                if act.enabling is None:
                    continue
                try:
                    refs = _expr_places(parse_expr_text(act.enabling))
                except ValueError as exc:
                    problems.append(f"activity '{act.name}': {exc}")
                    continue
                for p in refs:
                    if p not in index:
                        problems.append(
                            f"activity '{act.name}': unknown place '{p}' in enabling"
                        )
        return problems


def _expr_places(expr: Expr) -> list[str]:
    from .expr import free_refs

    return [str(r) for r in free_refs(expr)]


# --- transformation -----------------------------------------------------------


def to_san(
    instance: InstanceModel,
    system_failure: TopLevelEvent,
    *,
    sigma_cap: int = SIGMA_CAP,
) -> StochasticActivityNetwork:
    """Transform a rate-annotated instance model into a SAN with a
    ``system_ok`` reward for the given failure condition.

    Per-demand probabilities are refused: they belong to the fault tree
    path (run fta/fmea instead).
    """
    machine = SystemMachine(instance)
    for f in machine.faults:
        if f.probability is not None:
            raise EngineError(
                f"fault '{f.id}' carries a per-demand probability; the "
                "reliability path needs rates (use the FTA/FMEA path for "
                "per-demand faults)"
            )
        if f.rate is None:
            raise EngineError(
                f"fault '{f.id}' has neither probability nor rate; "
                "reliability analysis needs a rate"
            )
    places: list[Place] = []
    layer_places: list[list[str]] = []  # aligned with _layer_list(machine)
    layers = _layer_list(machine)
    for lm, layer in layers:
        names = []
        for si, state in enumerate(layer["states"]):
            name = _place_name(lm.path, layer["name"], state)
            places.append(Place(name, 1 if si == layer["initial"] else 0))
            names.append(name)
        layer_places.append(names)

    timed: list[TimedActivity] = []
    used_names: set[str] = set()
    for (lm, layer), names in zip(layers, layer_places):
        for ti, (src, fidx, guard, tgt) in enumerate(layer["transitions"]):
            fault = lm.faults[fidx]
            base = f"{fault.id}"
            name = base if base not in used_names else f"{base}#{ti}"
            used_names.add(name)
            enabling = None
            if guard is not None:
                enabling = _guard_predicate(lm, layer, guard, layer_places, layers)
            timed.append(
                TimedActivity(
                    name=name,
                    rate=fault.rate,
                    inputs=(names[src],),
                    outputs=(names[tgt],),
                    enabling=enabling,
                )
            )

    rewards = [_system_ok_reward(machine, system_failure, layers, layer_places, sigma_cap)]
    rewards.extend(_cia_rewards(layers, layer_places))
    return StochasticActivityNetwork(
        places=tuple(places),
        timed=tuple(timed),
        instantaneous=(),
        rewards=tuple(rewards),
    )


def _layer_list(machine: SystemMachine):
    out = []
    for lm in machine.leaves:
        for layer in lm.layers:
            out.append((lm, layer))
    return out


def _place_name(path: str, em: str, state: str) -> str:
    prefix = f"{path}." if path else ""
    return f"{prefix}{em}.{state}"


def _sigma_space(layers, cap: int):
    total = 1
    for _lm, layer in layers:
        total *= len(layer["states"])
        if total > cap:
            raise CapExceeded(
                f"error-state combinations exceed the predicate cap of {cap}"
            )
    combos = [()]
    for _lm, layer in layers:
        combos = [c + (si,) for c in combos for si in range(len(layer["states"]))]
    return combos


def _pinned_leaf_initial(lm: ExtendedMachine, sigma_local):
    loc, varvals, outvals, _layers = lm.initial_state()
    vv = list(varvals)
    ov = list(outvals)
    for layer, si in zip(lm.layers, sigma_local):
        for kind, idx, value in layer["stuck"][si]:
            if kind == "var":
                vv[idx] = value
            else:
                ov[idx] = value
    return (loc, tuple(vv), tuple(ov), tuple(sigma_local))


def _pinned_reachable(machine: SystemMachine, sigma, layers, condition: Expr) -> bool:
    """Is ``condition`` reachable when every error layer is pinned to the
    given state combination and no further error transitions fire?"""
    # distribute sigma back onto the leaves
    sigma_by_leaf: dict[int, list[int]] = {}
    pos = 0
    for li, lm in enumerate(machine.leaves):
        k = len(lm.layers)
        sigma_by_leaf[li] = list(sigma[pos:pos + k])
        pos += k
    leafstates = tuple(
        _pinned_leaf_initial(lm, sigma_by_leaf[li]) for li, lm in enumerate(machine.leaves)
    )
    state0 = (leafstates, 0)
    inputs = machine.input_space()
    seen = set()
    frontier = [(iv, state0) for iv in inputs]
    seen.update(frontier)
    while frontier:
        nxt = []
        for (iv, state) in frontier:
            env = machine.atom_env(state, iv)
            if bool(evaluate(condition, env)):
                return True
            for succ in machine.successors(state, iv, 0):
                for iv2 in inputs:
                    node = (iv2, succ)
                    if node not in seen:
                        seen.add(node)
                        nxt.append(node)
        frontier = nxt
    return False


def _marking_term(layer_places, active: dict[int, int]) -> str:
    parts = [f"{layer_places[k][si]} == 1" for k, si in sorted(active.items())]
    return " && ".join(parts)


def _system_ok_reward(machine, tle: TopLevelEvent, layers, layer_places, cap) -> RewardVariable:
    failed_terms = []
    for sigma in _sigma_space(layers, cap):
        if _pinned_reachable(machine, sigma, layers, tle.condition):
            active = {k: si for k, si in enumerate(sigma)}
            failed_terms.append(f"({_marking_term(layer_places, active)})")
    if not failed_terms:
        predicate = "true"
    else:
        predicate = "!(" + " || ".join(failed_terms) + ")"
    return RewardVariable("system_ok", predicate)


def _cia_rewards(layers, layer_places):
    out = []
    for letter in ("confidentiality", "integrity", "availability"):
        lost_terms = []
        for ((lm, layer), names) in zip(layers, layer_places):
            for si, _state in enumerate(layer["states"]):
                if letter in layer["cia"][si]:
                    lost_terms.append(f"{names[si]} == 1")
        if lost_terms:
            out.append(
                RewardVariable(f"{letter}_ok", "!(" + " || ".join(lost_terms) + ")")
            )
    return out


def _guard_predicate(lm, layer, guard_fn, layer_places, layers) -> str | None:
    """Compile a vulnerability guard into a marking predicate over the
    owning leaf's own layer places: enabled in exactly the error-state
    combinations whose pinned nominal dynamics can satisfy the guard."""
    own = [(i, l2) for i, (lm2, l2) in enumerate(layers) if lm2 is lm]
    combos = [()]
    for _i, l2 in own:
        combos = [c + (si,) for c in combos for si in range(len(l2["states"]))]
        if len(combos) > SIGMA_CAP:
            raise CapExceeded("vulnerability-guard predicate exceeds the state cap")
    solo = SystemMachine(_as_instance_machine(lm))
    enabled_terms = []
    all_enabled = True
    for combo in combos:
        reachable = _pinned_guard_reachable(solo, combo, guard_fn)
        if reachable:
            active = {own[k][0]: si for k, si in enumerate(combo)}
            enabled_terms.append(f"({_marking_term(layer_places, active)})")
        else:
            all_enabled = False
    if all_enabled:
        return None
    if not enabled_terms:
        return "false"
    return " || ".join(enabled_terms)


def _as_instance_machine(lm: ExtendedMachine) -> ExtendedMachine:
    return lm


def _pinned_guard_reachable(solo: SystemMachine, sigma_local, guard_fn) -> bool:
    lm = solo.leaves[0]
    state0 = ((_pinned_leaf_initial(lm, sigma_local),), 0)
    inputs = solo.input_space()
    seen = set()
    frontier = [(iv, state0) for iv in inputs]
    seen.update(frontier)
    while frontier:
        nxt = []
        for (iv, state) in frontier:
            leafstate = state[0][0]
            local_inputs = solo.gather_inputs(state, iv, 0)
            _loc, varvals, outvals, _layers = leafstate
            if guard_fn(local_inputs, varvals, outvals):
                return True
            for succ in solo.successors(state, iv, 0):
                for iv2 in inputs:
                    node = (iv2, succ)
                    if node not in seen:
                        seen.add(node)
                        nxt.append(node)
        frontier = nxt
    return False


def san_to_json(san: StochasticActivityNetwork) -> dict:
    return {
        "schema_version": 1,
        "kind": "stochastic_activity_network",
        "places": [{"name": p.name, "initial": p.initial} for p in san.places],
        "timed_activities": [
            {
                "name": a.name,
                "rate": a.rate,
                "inputs": list(a.inputs),
                "outputs": list(a.outputs),
                "enabling": a.enabling,
            }
            for a in san.timed
        ],
        "instantaneous_activities": [
            {
                "name": a.name,
                "inputs": list(a.inputs),
                "enabling": a.enabling,
                "cases": [
                    {"probability": c.probability, "outputs": list(c.outputs)}
                    for c in a.cases
                ],
            }
            for a in san.instantaneous
        ],
        "reward_variables": [
            {"name": r.name, "kind": r.kind, "predicate": r.predicate}
            for r in san.rewards
        ],
    }


def san_from_json(data: dict) -> StochasticActivityNetwork:
    if data.get("schema_version") != 1:
        raise ValueError(
            f"unsupported schema_version {data.get('schema_version')!r}"
        )
    return StochasticActivityNetwork(
        places=tuple(Place(p["name"], p["initial"]) for p in data["places"]),
        timed=tuple(
            TimedActivity(
                a["name"],
                a["rate"],
                tuple(a["inputs"]),
                tuple(a["outputs"]),
                a.get("enabling"),
            )
            for a in data["timed_activities"]
        ),
        instantaneous=tuple(
            InstantaneousActivity(
                a["name"],
                tuple(a["inputs"]),
                tuple(
                    InstantaneousCase(c["probability"], tuple(c["outputs"]))
                    for c in a["cases"]
                ),
                a.get("enabling"),
            )
            for a in data.get("instantaneous_activities", ())
        ),
        rewards=tuple(
            RewardVariable(r["name"], r["predicate"], r.get("kind", "instant-of-time"))
            for r in data["reward_variables"]
        ),
    )
