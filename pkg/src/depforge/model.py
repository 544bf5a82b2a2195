"""Architecture model: blocks, ports, behaviors, error models, contracts.

Everything is an immutable dataclass with structural equality, so a model
can be shared freely between concurrent analyses and compared against the
result of a serialize/parse round trip.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .expr import Expr, IntLit, Ref, ValueType
from .ltl import Formula

Value = bool | int | str  # constants: bool, bounded int, enum label


@dataclass(frozen=True)
class Parameter:
    name: str
    lo: int | None = None
    hi: int | None = None
    default: int | None = None


@dataclass(frozen=True)
class PortDef:
    name: str
    direction: str  # 'in' | 'out'
    type: ValueType
    multiplicity: Expr = IntLit(1)
    init: "Value | None" = None  # out-ports only; defaults to the type's default


@dataclass(frozen=True)
class SubcomponentDef:
    name: str
    block: str
    multiplicity: Expr = IntLit(1)


@dataclass(frozen=True)
class Connection:
    """``source -> target``; ``comprehension`` names the index variable of
    an ``all i:`` fan-out, in scope inside both endpoint indices."""

    source: Ref
    target: Ref
    comprehension: str | None = None


@dataclass(frozen=True)
class VarDecl:
    name: str
    type: ValueType
    init: Value


@dataclass(frozen=True)
class Assignment:
    target: Ref
    value: Expr


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    guard: Expr | None = None
    updates: tuple[Assignment, ...] = ()


@dataclass(frozen=True)
class StateMachine:
    states: tuple[str, ...]
    initial: str
    variables: tuple[VarDecl, ...] = ()
    transitions: tuple[Transition, ...] = ()


NORMAL = "normal"
ERROR = "error"
FAILURE = "failure"


@dataclass(frozen=True)
class ErrorState:
    name: str
    tag: str = NORMAL  # normal | error | failure


@dataclass(frozen=True)
class Trigger:
    """Fault or threat event naming a basic event of the analyses.

    Exactly one of ``probability`` (per demand) and ``rate`` (per hour) may
    be set; threats may leave both unset.
    """

    kind: str  # 'fault' | 'threat'
    name: str
    agent: str | None = None
    probability: float | None = None
    rate: float | None = None


@dataclass(frozen=True)
class ErrorTransition:
    source: str
    target: str
    trigger: Trigger
    guard: Expr | None = None  # vulnerability guard over block ports/variables


@dataclass(frozen=True)
class StuckAt:
    target: Ref  # out-port or state-machine variable of the owning block
    value: Value


@dataclass(frozen=True)
class CIALoss:
    which: str  # 'confidentiality' | 'integrity' | 'availability'


Effect = StuckAt | CIALoss


@dataclass(frozen=True)
class EffectsDecl:
    state: str
    effects: tuple[Effect, ...]


@dataclass(frozen=True)
class ErrorModel:
    name: str
    states: tuple[ErrorState, ...]
    initial: str
    transitions: tuple[ErrorTransition, ...] = ()
    effects: tuple[EffectsDecl, ...] = ()

    def tag_of(self, state: str) -> str | None:
        for s in self.states:
            if s.name == state:
                return s.tag
        return None

    def effects_of(self, state: str) -> tuple[Effect, ...]:
        out: list[Effect] = []
        for decl in self.effects:
            if decl.state == state:
                out.extend(decl.effects)
        return tuple(out)


@dataclass(frozen=True)
class Contract:
    name: str
    assumption: Formula
    guarantee: Formula


@dataclass(frozen=True)
class Requirement:
    id: str
    text: str
    satisfied_by: tuple[Ref, ...] = ()  # block or block.contract references
    parent: str | None = None


@dataclass(frozen=True)
class BlockDef:
    name: str
    parameters: tuple[Parameter, ...] = ()
    ports: tuple[PortDef, ...] = ()
    subcomponents: tuple[SubcomponentDef, ...] = ()
    connections: tuple[Connection, ...] = ()
    contracts: tuple[Contract, ...] = ()
    behavior: StateMachine | None = None
    error_models: tuple[ErrorModel, ...] = ()
    allocation: str | None = None  # hardware node tag, inert for analyses

    @property
    def composite(self) -> bool:
        return bool(self.subcomponents)

    def port(self, name: str) -> PortDef | None:
        for p in self.ports:
            if p.name == name:
                return p
        return None

    def sub(self, name: str) -> SubcomponentDef | None:
        for s in self.subcomponents:
            if s.name == name:
                return s
        return None


@dataclass(frozen=True)
class TleDecl:
    """Named top-level event: an undesired condition over instance ports."""

    name: str
    condition: Expr


@dataclass(frozen=True)
class ConfigDecl:
    name: str
    bindings: tuple[tuple[str, int], ...]


@dataclass(frozen=True)
class ArchitectureModel:
    name: str
    blocks: tuple[BlockDef, ...] = ()
    requirements: tuple[Requirement, ...] = ()
    configurations: tuple[ConfigDecl, ...] = ()
    tles: tuple[TleDecl, ...] = ()
    root: str = ""

    def block(self, name: str) -> BlockDef | None:
        for b in self.blocks:
            if b.name == name:
                return b
        return None

    def tle(self, name: str) -> TleDecl | None:
        for t in self.tles:
            if t.name == name:
                return t
        return None
