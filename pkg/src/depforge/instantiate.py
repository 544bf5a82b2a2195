"""Flatten parameterized architectures into concrete instance models.

A configuration binds the root block's integer parameters; every
sub-component/port multiplicity is evaluated, arrays are expanded
element-wise (``gen[0]``, ``gen[1]``, ...) and contract atoms are rewritten
to absolute instance paths.  Pure: same model + configuration, same result.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import ltl
from . import model as m
from .expr import Binary, Expr, IntLit, Ref, Segment, Unary, ValueType, evaluate


class InstantiationError(Exception):
    pass


@dataclass(frozen=True)
class Configuration:
    name: str
    bindings: tuple[tuple[str, int], ...] = ()

    def as_dict(self) -> dict[str, int]:
        return dict(self.bindings)


@dataclass(frozen=True)
class InstancePort:
    name: str
    direction: str
    type: ValueType
    width: int
    is_array: bool  # declared with an explicit multiplicity
    init: object = None

    def slots(self) -> tuple[str, ...]:
        if not self.is_array:
            return (self.name,)
        return tuple(f"{self.name}[{i}]" for i in range(self.width))


@dataclass(frozen=True)
class InstanceConnection:
    source: str  # canonical absolute slot, e.g. 'gen[0].energy'
    target: str


@dataclass(frozen=True)
class ComponentInstance:
    path: str  # '' for the root instance
    block: str
    ports: tuple[InstancePort, ...] = ()
    contracts: tuple[m.Contract, ...] = ()  # atoms rewritten to absolute refs
    error_models: tuple[m.ErrorModel, ...] = ()
    machine: m.StateMachine | None = None
    children: tuple["ComponentInstance", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def port(self, name: str) -> InstancePort | None:
        for p in self.ports:
            if p.name == name:
                return p
        return None


@dataclass(frozen=True)
class InstanceModel:
    root: ComponentInstance
    connections: tuple[InstanceConnection, ...]
    configuration: Configuration

    def instances(self):
        def walk(inst):
            yield inst
            for ch in inst.children:
                yield from walk(ch)

        yield from walk(self.root)

    def leaves(self):
        return [i for i in self.instances() if i.is_leaf]

    def find(self, path: str) -> ComponentInstance | None:
        for inst in self.instances():
            if inst.path == path:
                return inst
        return None


def list_configurations(model: m.ArchitectureModel) -> list[Configuration]:
    """Declared configurations in order; an implicit 'default' one when the
    root block's parameters all carry defaults."""
    if model.configurations:
        return [Configuration(c.name, c.bindings) for c in model.configurations]
    root = model.block(model.root)
    if root is None:
        return []
    if all(p.default is not None for p in root.parameters):
        bindings = tuple((p.name, p.default) for p in root.parameters)
        return [Configuration("default", bindings)]
    return []


def _eval_int(expr: Expr, env: dict[str, int], what: str) -> int:
    def lookup(ref: Ref):
        if len(ref.segments) == 1 and ref.segments[0].index is None:
            name = ref.segments[0].name
            if name in env:
                return env[name]
        raise InstantiationError(f"{what}: unbound parameter '{ref}'")

    value = evaluate(expr, lookup)
    if isinstance(value, bool) or not isinstance(value, int):
        raise InstantiationError(f"{what}: expected an integer, got {value!r}")
    return value


def instantiate(model: m.ArchitectureModel, config: Configuration) -> InstanceModel:
    root_block = model.block(model.root)
    if root_block is None:
        raise InstantiationError(f"root block '{model.root}' is not defined")
    env = dict(config.bindings)
    for p in root_block.parameters:
        if p.name not in env:
            if p.default is None:
                raise InstantiationError(
                    f"configuration '{config.name}': unbound parameter '{p.name}'"
                )
            env[p.name] = p.default
        lo = p.lo
        if lo is not None and not (lo <= env[p.name] <= p.hi):
            raise InstantiationError(
                f"configuration '{config.name}': value {env[p.name]} for "
                f"'{p.name}' outside {p.lo}..{p.hi}"
            )
    connections: list[InstanceConnection] = []
    root = _build(model, root_block, "", env, connections, config)
    return InstanceModel(root, tuple(connections), config)


def _build(model, block: m.BlockDef, path: str, env: dict[str, int], connections, config) -> ComponentInstance:
    where = path or model.root
    ports = []
    for p in block.ports:
        width = _eval_int(p.multiplicity, env, f"{where}/port:{p.name}")
        if width < 1:
            raise InstantiationError(
                f"{where}/port:{p.name}: multiplicity evaluates to < 1 ({width})"
            )
        ports.append(
            InstancePort(p.name, p.direction, p.type, width, p.multiplicity != IntLit(1), p.init)
        )
    children = []
    for sub in block.subcomponents:
        sub_block = model.block(sub.block)
        if sub_block is None:
            raise InstantiationError(f"{where}/sub:{sub.name}: undefined block '{sub.block}'")
        width = _eval_int(sub.multiplicity, env, f"{where}/sub:{sub.name}")
        if width < 1:
            raise InstantiationError(
                f"{where}/sub:{sub.name}: multiplicity evaluates to < 1 ({width})"
            )
        sub_env = {}
        for sp in sub_block.parameters:
            if sp.default is None:
                raise InstantiationError(
                    f"{where}/sub:{sub.name}: parameter '{sp.name}' of "
                    f"'{sub.block}' has no default (only the root block is configured)"
                )
            sub_env[sp.name] = sp.default
        is_array = sub.multiplicity != IntLit(1)
        for i in range(width):
            child_name = f"{sub.name}[{i}]" if is_array else sub.name
            child_path = f"{path}.{child_name}" if path else child_name
            children.append(_build(model, sub_block, child_path, sub_env, connections, config))
    inst = ComponentInstance(
        path=path,
        block=block.name,
        ports=tuple(ports),
        contracts=tuple(_rewrite_contract(k, block, path, env) for k in block.contracts),
        error_models=block.error_models,
        machine=block.behavior,
        children=tuple(children),
    )
    for conn in block.connections:
        connections.extend(_expand_connection(model, block, inst, conn, path, env))
    return inst


# --- connections -------------------------------------------------------------


def _expand_connection(model, block, inst: ComponentInstance, conn: m.Connection, path, env):
    where = f"{path or model.root}/connect {conn.source} -> {conn.target}"
    if conn.comprehension is None:
        yield InstanceConnection(
            _endpoint_slot(block, inst, conn.source, path, env, where),
            _endpoint_slot(block, inst, conn.target, path, env, where),
        )
        return
    var = conn.comprehension
    bound = _comprehension_bound(block, inst, conn, env, where)
    for i in range(bound):
        env_i = dict(env)
        env_i[var] = i
        yield InstanceConnection(
            _endpoint_slot(block, inst, conn.source, path, env_i, where),
            _endpoint_slot(block, inst, conn.target, path, env_i, where),
        )


def _comprehension_bound(block, inst, conn: m.Connection, env, where) -> int:
    """Range of the fan-out variable: the width of the first entity it
    indexes directly (a sub array or a port array)."""
    var = conn.comprehension
    for ref in (conn.source, conn.target):
        for depth, seg in enumerate(ref.segments):
            idx = seg.index
            if not (isinstance(idx, Ref) and len(idx.segments) == 1 and idx.segments[0].name == var and idx.segments[0].index is None):
                continue
            if depth == 0 and len(ref.segments) == 2:
                sub = block.sub(seg.name)
                if sub is not None:
                    return _eval_int(sub.multiplicity, env, where)
            if len(ref.segments) == 1:
                port = block.port(seg.name)
                if port is not None:
                    return _eval_int(port.multiplicity, env, where)
            if depth == 1:
                subdef = block.sub(ref.segments[0].name)
                if subdef is not None:
                    sub_inst = None
                    for ch in inst.children:
                        base = ch.path.rsplit(".", 1)[-1]
                        if base == subdef.name or base.startswith(subdef.name + "["):
                            sub_inst = ch
                            break
                    if sub_inst is not None:
                        port = sub_inst.port(seg.name)
                        if port is not None:
                            return port.width
    raise InstantiationError(f"{where}: cannot determine range of '{var}'")


def _endpoint_slot(block, inst: ComponentInstance, ref: Ref, path, env, where) -> str:
    segs = ref.segments
    if len(segs) == 1:
        owner = inst
        port_seg = segs[0]
        prefix = path
    elif len(segs) == 2:
        sub_name = segs[0].name
        subdef = block.sub(sub_name)
        if subdef is None:
            raise InstantiationError(f"{where}: no sub-component '{sub_name}'")
        if subdef.multiplicity != IntLit(1):
            if segs[0].index is None:
                raise InstantiationError(
                    f"{where}: '{sub_name}' is an array and needs an index"
                )
            i = _eval_int(segs[0].index, env, where)
            width = _eval_int(subdef.multiplicity, env, where)
            if not (0 <= i < width):
                raise InstantiationError(
                    f"{where}: index {i} out of range for '{sub_name}' of width {width}"
                )
            child_name = f"{sub_name}[{i}]"
        else:
            if segs[0].index is not None:
                raise InstantiationError(f"{where}: '{sub_name}' is not an array")
            child_name = sub_name
        owner = None
        for ch in inst.children:
            if ch.path.rsplit(".", 1)[-1] == child_name:
                owner = ch
                break
        if owner is None:
            raise InstantiationError(f"{where}: unresolved endpoint '{ref}'")
        port_seg = segs[1]
        prefix = owner.path
    else:
        raise InstantiationError(f"{where}: endpoint must be 'port' or 'sub.port'")
    port = owner.port(port_seg.name)
    if port is None:
        raise InstantiationError(f"{where}: no port '{port_seg.name}' on '{owner.block}'")
    if port.is_array:
        if port_seg.index is None:
            raise InstantiationError(f"{where}: '{port.name}' is an array and needs an index")
        i = _eval_int(port_seg.index, env, where)
        if not (0 <= i < port.width):
            raise InstantiationError(
                f"{where}: index {i} out of range for '{port.name}' of width {port.width}"
            )
        slot = f"{port.name}[{i}]"
    else:
        if port_seg.index is not None:
            raise InstantiationError(f"{where}: '{port.name}' is not an array")
        slot = port.name
    return f"{prefix}.{slot}" if prefix else slot


# --- contract rewriting ------------------------------------------------------


def _rewrite_contract(contract: m.Contract, block: m.BlockDef, path: str, env) -> m.Contract:
    def rewrite(formula):
        formula = _expand_forall(formula, block, env, f"{path or block.name}/contract:{contract.name}")
        return ltl.map_atoms(formula, lambda e: _absolutize(e, path, env))

    return m.Contract(contract.name, rewrite(contract.assumption), rewrite(contract.guarantee))


def _expand_forall(f, block, env, where):
    if isinstance(f, ltl.Forall):
        body = _expand_forall(f.body, block, env, where)
        width = _forall_width(body, f.var, block, env, where)
        parts = [
            ltl.map_atoms(body, lambda e, i=i: _bind_index(e, f.var, i)) for i in range(width)
        ]
        out = parts[0]
        for p in parts[1:]:
            out = ltl.And(out, p)
        return out
    if isinstance(f, (ltl.Not, ltl.Next, ltl.Globally, ltl.Finally)):
        return type(f)(_expand_forall(f.operand, block, env, where))
    if isinstance(f, (ltl.And, ltl.Or, ltl.Implies, ltl.Until, ltl.Release)):
        return type(f)(
            _expand_forall(f.lhs, block, env, where),
            _expand_forall(f.rhs, block, env, where),
        )
    return f


def _forall_width(body, var, block, env, where) -> int:
    widths = set()
    for atom in ltl.atoms_of(body):
        for ref in _refs_in(atom):
            for seg in ref.segments:
                idx = seg.index
                if (
                    isinstance(idx, Ref)
                    and len(idx.segments) == 1
                    and idx.segments[0].name == var
                ):
                    port = block.port(seg.name)
                    if port is not None:
                        widths.add(_eval_int(port.multiplicity, env, where))
    if not widths:
        raise InstantiationError(f"{where}: 'forall {var}' indexes no port array")
    if len(widths) > 1:
        raise InstantiationError(
            f"{where}: 'forall {var}' spans arrays of different widths {sorted(widths)}"
        )
    return widths.pop()


def _refs_in(expr: Expr):
    if isinstance(expr, Ref):
        yield expr
    elif isinstance(expr, Unary):
        yield from _refs_in(expr.operand)
    elif isinstance(expr, Binary):
        yield from _refs_in(expr.lhs)
        yield from _refs_in(expr.rhs)


def _bind_index(expr: Expr, var: str, value: int) -> Expr:
    if isinstance(expr, Ref):
        segs = []
        for seg in expr.segments:
            idx = seg.index
            if idx is not None:
                idx = _bind_index(idx, var, value)
            segs.append(Segment(seg.name, idx))
        if (
            len(segs) == 1
            and segs[0].name == var
            and segs[0].index is None
        ):
            return IntLit(value)
        return Ref(tuple(segs))
    if isinstance(expr, Unary):
        return Unary(expr.op, _bind_index(expr.operand, var, value))
    if isinstance(expr, Binary):
        return Binary(expr.op, _bind_index(expr.lhs, var, value), _bind_index(expr.rhs, var, value))
    return expr


def _absolutize(expr: Expr, path: str, env) -> Expr:
    """Rewrite block-local atoms to absolute instance references and fold
    index arithmetic to literal integers."""
    if isinstance(expr, Ref):
        segs = []
        for seg in expr.segments:
            idx = seg.index
            if idx is not None and not isinstance(idx, IntLit):
                idx = IntLit(_eval_int(idx, env, f"index '{idx}'"))
            segs.append(Segment(seg.name, idx))
        if path:
            prefix = [
                Segment(name if "[" not in name else name[: name.index("[")],
                        IntLit(int(name[name.index("[") + 1:-1])) if "[" in name else None)
                for name in path.split(".")
            ]
            segs = prefix + segs
        return Ref(tuple(segs))
    if isinstance(expr, Unary):
        return Unary(expr.op, _absolutize(expr.operand, path, env))
    if isinstance(expr, Binary):
        lhs = _absolutize(expr.lhs, path, env)
        # literal right-hand sides (constants, enum labels) stay local
        rhs = expr.rhs if _is_literalish(expr.rhs) else _absolutize(expr.rhs, path, env)
        return Binary(expr.op, lhs, rhs)
    return expr


def _is_literalish(e: Expr) -> bool:
    from .expr import BoolLit

    if isinstance(e, (IntLit, BoolLit)):
        return True
    if isinstance(e, Ref) and len(e.segments) == 1 and e.segments[0].index is None:
        # bare name on a comparison RHS: an enumeration label
        return True
    return False
