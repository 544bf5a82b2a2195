"""Core well-formedness validation and requirement traceability.

Findings are data, not exceptions: ``validate_core`` always returns a
report, empty iff every structural invariant holds.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import model as m
from .expr import (
    BoolType,
    EnumType,
    IntType,
    Ref,
    TypeEnv,
    ValueType,
    evaluate,
    free_refs,
    type_of,
)
from .ltl import Formula, atoms_of


@dataclass(frozen=True)
class Finding:
    severity: str  # 'error' | 'warning'
    path: str  # element path, e.g. 'Generator/port:energy'
    message: str

    def __str__(self):
        return f"{self.severity}: {self.path}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...]

    @property
    def errors(self):
        return tuple(f for f in self.findings if f.severity == "error")

    @property
    def warnings(self):
        return tuple(f for f in self.findings if f.severity == "warning")

    @property
    def ok(self) -> bool:
        return not self.errors

    def __str__(self):
        if not self.findings:
            return "no findings"
        return "\n".join(str(f) for f in self.findings)


class _Collector:
    def __init__(self):
        self.findings: list[Finding] = []

    def error(self, path: str, message: str):
        self.findings.append(Finding("error", path, message))

    def warning(self, path: str, message: str):
        self.findings.append(Finding("warning", path, message))

    def check_expr_bool(self, expr, lookup, path: str, what: str):
        env = TypeEnv(lookup)
        t = type_of(expr, env)
        for e in env.errors:
            self.error(path, f"{what}: {e}")
        if t is not None and not isinstance(t, BoolType) and not env.errors:
            self.error(path, f"{what}: expected a boolean expression, got {t}")
        return t


def _dup_names(names) -> list[str]:
    seen = set()
    dups = []
    for n in names:
        if n in seen and n not in dups:
            dups.append(n)
        seen.add(n)
    return dups


def validate_core(model: m.ArchitectureModel) -> ValidationReport:
    """Check every structural invariant of the model; pure and idempotent."""
    c = _Collector()
    for dup in _dup_names(b.name for b in model.blocks):
        c.error(dup, "duplicate block name")
    if model.block(model.root) is None:
        c.error(model.name, f"root block '{model.root}' is not defined")
    for block in model.blocks:
        _validate_block(c, model, block)
    for dup in _dup_names(t.name for t in model.tles):
        c.error(f"tle:{dup}", "duplicate top-level event name")
    _validate_requirements(c, model)
    _validate_configurations(c, model)
    _check_containment_cycles(c, model)
    return ValidationReport(tuple(c.findings))


def _param_lookup(block: m.BlockDef, extra: tuple[str, ...] = ()):
    names = {p.name for p in block.parameters} | set(extra)

    def lookup(ref: Ref) -> ValueType | None:
        if len(ref.segments) != 1 or ref.segments[0].index is not None:
            return None
        name = ref.segments[0].name
        if name not in names:
            return None
        for p in block.parameters:
            if p.name == name:
                lo = p.lo if p.lo is not None else p.default
                hi = p.hi if p.hi is not None else p.default
                if lo is None:
                    lo, hi = 0, 1 << 20
                return IntType(lo, hi)
        return IntType(0, 1 << 20)  # comprehension index variable

    return lookup


def _check_multiplicity(c: _Collector, block: m.BlockDef, expr, path: str):
    env = TypeEnv(_param_lookup(block))
    t = type_of(expr, env)
    for e in env.errors:
        c.error(path, f"multiplicity: {e} (only block parameters are allowed)")
    if t is None:
        return
    if not isinstance(t, IntType):
        c.error(path, "multiplicity must be an integer expression")
        return
    if t.hi < 1:
        c.error(path, "multiplicity never reaches 1")
    elif t.lo < 1:
        c.warning(path, "multiplicity may evaluate below 1 for some parameter values")


def _scope_lookup(block: m.BlockDef, *, in_ports=False, out_ports=False, variables=False):
    """Build a Ref -> type lookup over selected name classes of a leaf block."""
    table: dict[str, ValueType] = {}
    for p in block.ports:
        if (p.direction == "in" and in_ports) or (p.direction == "out" and out_ports):
            table[p.name] = p.type
    if variables and block.behavior is not None:
        for v in block.behavior.variables:
            table[v.name] = v.type

    def lookup(ref: Ref) -> ValueType | None:
        if len(ref.segments) != 1:
            return None
        seg = ref.segments[0]
        # indexing into a port array is permitted wherever the port is
        return table.get(seg.name)

    return lookup


def _validate_block(c: _Collector, model: m.ArchitectureModel, block: m.BlockDef):
    bp = block.name
    for dup in _dup_names(p.name for p in block.ports):
        c.error(f"{bp}/port:{dup}", "duplicate port name")
    for dup in _dup_names(s.name for s in block.subcomponents):
        c.error(f"{bp}/sub:{dup}", "duplicate sub-component name")
    for dup in _dup_names(k.name for k in block.contracts):
        c.error(f"{bp}/contract:{dup}", "duplicate contract name")
    for dup in _dup_names(p.name for p in block.parameters):
        c.error(f"{bp}/param:{dup}", "duplicate parameter name")

    for p in block.parameters:
        if p.lo is not None and p.hi is not None and p.lo > p.hi:
            c.error(f"{bp}/param:{p.name}", f"empty parameter range {p.lo}..{p.hi}")
        if p.default is not None and p.lo is not None and not (p.lo <= p.default <= p.hi):
            c.error(f"{bp}/param:{p.name}", "default outside the declared range")

    for port in block.ports:
        pp = f"{bp}/port:{port.name}"
        if isinstance(port.type, IntType) and port.type.lo > port.type.hi:
            c.error(pp, f"empty integer domain {port.type.lo}..{port.type.hi}")
        if isinstance(port.type, EnumType) and not port.type.labels:
            c.error(pp, "enumeration needs at least one label")
        if port.init is not None:
            if port.direction != "out":
                c.error(pp, "initial values apply to out-ports only")
            elif not port.type.contains(port.init):
                c.error(pp, f"initial value {port.init!r} outside domain {port.type}")
        _check_multiplicity(c, block, port.multiplicity, pp)

    if block.composite and block.behavior is not None:
        c.error(bp, "a block with sub-components cannot have a behavior")
    if block.composite and block.error_models:
        c.error(bp, "error models attach to leaf blocks only")

    for sub in block.subcomponents:
        sp = f"{bp}/sub:{sub.name}"
        if model.block(sub.block) is None:
            c.error(sp, f"undefined block '{sub.block}'")
        _check_multiplicity(c, block, sub.multiplicity, sp)

    for i, conn in enumerate(block.connections):
        _validate_connection(c, model, block, conn, f"{bp}/connection[{i}]")

    if block.behavior is not None:
        _validate_machine(c, block, block.behavior, f"{bp}/behavior")
    for em in block.error_models:
        _validate_error_model(c, block, em, f"{bp}/errormodel:{em.name}")
    for contract in block.contracts:
        _validate_contract(c, block, contract, f"{bp}/contract:{contract.name}")


def _endpoint_type(model, block, ref: Ref, want_source: bool):
    """Resolve a connection endpoint to (port, owner_kind) or None.

    Sources are owner in-ports or sub out-ports; targets are the dual.
    """
    if len(ref.segments) == 1:
        port = block.port(ref.segments[0].name)
        if port is None:
            return None, "no such port on the owner"
        expect = "in" if want_source else "out"
        if port.direction != expect:
            side = "source" if want_source else "target"
            return None, f"{side} on the owner must be an {expect}-port"
        return port, None
    if len(ref.segments) == 2:
        sub = block.sub(ref.segments[0].name)
        if sub is None:
            return None, "no such sub-component"
        sblock = model.block(sub.block)
        if sblock is None:
            return None, f"sub-component type '{sub.block}' is undefined"
        port = sblock.port(ref.segments[1].name)
        if port is None:
            return None, f"no port '{ref.segments[1].name}' on '{sub.block}'"
        expect = "out" if want_source else "in"
        if port.direction != expect:
            side = "source" if want_source else "target"
            return None, f"{side} on a sub-component must be an {expect}-port"
        return port, None
    return None, "endpoint must be 'port' or 'sub.port'"


def _validate_connection(c, model, block, conn: m.Connection, path: str):
    extra = (conn.comprehension,) if conn.comprehension else ()
    for ref in (conn.source, conn.target):
        for seg in ref.segments:
            if seg.index is not None:
                env = TypeEnv(_param_lookup(block, extra))
                t = type_of(seg.index, env)
                for e in env.errors:
                    c.error(path, f"index: {e}")
                if t is not None and not isinstance(t, IntType):
                    c.error(path, "index must be an integer expression")
    src, err = _endpoint_type(model, block, conn.source, want_source=True)
    if err:
        c.error(path, f"source '{conn.source}': {err}")
    dst, err = _endpoint_type(model, block, conn.target, want_source=False)
    if err:
        c.error(path, f"target '{conn.target}': {err}")
    if src is not None and dst is not None and src.type != dst.type:
        c.error(
            path,
            f"type mismatch: '{conn.source}' is {src.type} but "
            f"'{conn.target}' is {dst.type}",
        )


def _validate_machine(c, block, sm: m.StateMachine, path: str):
    for dup in _dup_names(sm.states):
        c.error(path, f"duplicate state '{dup}'")
    for dup in _dup_names(v.name for v in sm.variables):
        c.error(path, f"duplicate variable '{dup}'")
    if sm.initial not in sm.states:
        c.error(path, f"initial state '{sm.initial}' is not declared")
    for v in sm.variables:
        if not v.type.contains(v.init):
            c.error(path, f"initial value {v.init!r} outside domain of '{v.name}'")
    read_scope = _scope_lookup(block, in_ports=True, variables=True)
    write_table = {p.name: p.type for p in block.ports if p.direction == "out"}
    for v in sm.variables:
        write_table[v.name] = v.type
    for i, t in enumerate(sm.transitions):
        tp = f"{path}/transition[{i}]"
        if t.source not in sm.states:
            c.error(tp, f"unknown source state '{t.source}'")
        if t.target not in sm.states:
            c.error(tp, f"unknown target state '{t.target}'")
        if t.guard is not None:
            c.check_expr_bool(t.guard, read_scope, tp, "guard")
        for u in t.updates:
            name = str(u.target)
            tgt_type = write_table.get(name)
            if tgt_type is None:
                c.error(tp, f"update target '{name}' is not a variable or out-port")
                continue
            env = TypeEnv(read_scope)
            vt = type_of(u.value, env)
            for e in env.errors:
                c.error(tp, f"update of '{name}': {e}")
            if vt is None:
                continue
            if not _assignable(vt, tgt_type):
                c.error(
                    tp,
                    f"update of '{name}': cannot assign {vt} to {tgt_type}",
                )


def _assignable(value_type: ValueType, target: ValueType) -> bool:
    if isinstance(target, BoolType):
        return isinstance(value_type, BoolType)
    if isinstance(target, IntType):
        if not isinstance(value_type, IntType):
            return False
        # reject only statically impossible assignments; exact range
        # violations surface as engine errors on the offending step
        return value_type.hi >= target.lo and value_type.lo <= target.hi
    if isinstance(target, EnumType):
        return isinstance(value_type, EnumType) and bool(
            set(value_type.labels) & set(target.labels)
        )
    return False


def _validate_error_model(c, block, em: m.ErrorModel, path: str):
    names = [s.name for s in em.states]
    for dup in _dup_names(names):
        c.error(path, f"duplicate state '{dup}'")
    if em.initial not in names:
        c.error(path, f"initial state '{em.initial}' is not declared")
    elif em.tag_of(em.initial) != m.NORMAL:
        c.error(path, "initial state must be tagged normal")

    guard_scope = _scope_lookup(block, in_ports=True, out_ports=True, variables=True)
    fault_defs: dict[str, m.Trigger] = {}
    for i, t in enumerate(em.transitions):
        tp = f"{path}/transition[{i}]"
        if t.source not in names:
            c.error(tp, f"unknown source state '{t.source}'")
        if t.target not in names:
            c.error(tp, f"unknown target state '{t.target}'")
        trig = t.trigger
        if trig.kind == "fault":
            if (trig.probability is None) == (trig.rate is None):
                c.error(
                    tp,
                    f"fault '{trig.name}' needs exactly one of a per-demand "
                    "probability or an hourly rate",
                )
        else:
            if trig.probability is not None and trig.rate is not None:
                c.error(tp, f"threat '{trig.name}' carries both probability and rate")
        if trig.probability is not None and not (0 < trig.probability <= 1):
            c.error(tp, f"probability {trig.probability} outside (0, 1]")
        if trig.rate is not None and not (trig.rate > 0):
            c.error(tp, f"rate {trig.rate} must be positive")
        prev = fault_defs.get(trig.name)
        if prev is not None and prev != trig:
            c.error(tp, f"'{trig.name}' redeclared with a different definition")
        fault_defs[trig.name] = trig
        if t.guard is not None:
            c.check_expr_bool(t.guard, guard_scope, tp, "vulnerability guard")

    target_scope = _scope_lookup(block, out_ports=True, variables=True)
    for decl in em.effects:
        ep = f"{path}/effects:{decl.state}"
        if decl.state not in names:
            c.error(ep, f"unknown state '{decl.state}'")
        elif em.tag_of(decl.state) == m.NORMAL:
            c.error(ep, "effects attach to error/failure states only")
        stuck_targets: dict[str, m.Value] = {}
        for eff in decl.effects:
            if isinstance(eff, m.CIALoss):
                continue
            t = target_scope(eff.target)
            if t is None:
                c.error(
                    ep,
                    f"'{eff.target}' is not an out-port or variable of '{block.name}'",
                )
                continue
            if not t.contains(eff.value):
                c.error(
                    ep,
                    f"effect value {eff.value!r} out of domain: "
                    f"'{eff.target}' is {t}",
                )
            key = str(eff.target)
            if key in stuck_targets and stuck_targets[key] != eff.value:
                c.error(ep, f"conflicting stuck values for '{eff.target}'")
            stuck_targets[key] = eff.value


def _validate_contract(c, block, contract: m.Contract, path: str):
    scope = _scope_lookup(
        block,
        in_ports=True,
        out_ports=True,
        variables=not block.composite,
    )

    def lookup(ref: Ref):
        t = scope(ref)
        if t is not None:
            return t
        return None

    for name, formula in (("assumption", contract.assumption), ("guarantee", contract.guarantee)):
        for atom in atoms_of(_strip_forall(formula)):
            c.check_expr_bool(atom, lookup, path, name)


def _strip_forall(f: Formula) -> Formula:
    """Replace each forall binder by its body with the index fixed to 0,
    which is enough for structural type checking."""
    from . import ltl

    if isinstance(f, ltl.Forall):
        body = ltl.map_atoms(f.body, lambda e: _subst_var(e, f.var))
        return _strip_forall(body)
    if isinstance(f, (ltl.Not, ltl.Next, ltl.Globally, ltl.Finally)):
        return type(f)(_strip_forall(f.operand))
    if isinstance(f, (ltl.And, ltl.Or, ltl.Implies, ltl.Until, ltl.Release)):
        return type(f)(_strip_forall(f.lhs), _strip_forall(f.rhs))
    return f


def _subst_var(expr, var: str):
    from .expr import Binary, IntLit, Segment, Unary

    if isinstance(expr, Ref):
        if (
            len(expr.segments) == 1
            and expr.segments[0].name == var
            and expr.segments[0].index is None
        ):
            return IntLit(0)
        segs = []
        for seg in expr.segments:
            idx = seg.index
            if idx is not None:
                idx = _subst_var(idx, var)
            segs.append(Segment(seg.name, idx))
        return Ref(tuple(segs))
    if isinstance(expr, Unary):
        return Unary(expr.op, _subst_var(expr.operand, var))
    if isinstance(expr, Binary):
        return Binary(expr.op, _subst_var(expr.lhs, var), _subst_var(expr.rhs, var))
    return expr


def _validate_requirements(c, model: m.ArchitectureModel):
    ids = [r.id for r in model.requirements]
    for dup in _dup_names(ids):
        c.error(f"requirement:{dup}", "duplicate requirement id")
    idset = set(ids)
    for r in model.requirements:
        rp = f"requirement:{r.id}"
        if r.parent is not None and r.parent not in idset:
            c.error(rp, f"parent '{r.parent}' does not exist")
        for ref in r.satisfied_by:
            if _resolve_element(model, ref) is None:
                c.error(rp, f"'{ref}' is not a block or contract")
    # parent cycles
    parent = {r.id: r.parent for r in model.requirements}
    for rid in ids:
        seen = set()
        cur = rid
        while cur is not None:
            if cur in seen:
                c.error(f"requirement:{rid}", "cyclic parent chain")
                break
            seen.add(cur)
            cur = parent.get(cur)


def _resolve_element(model: m.ArchitectureModel, ref: Ref) -> str | None:
    segs = ref.segments
    if any(s.index is not None for s in segs):
        return None
    if len(segs) == 1:
        return segs[0].name if model.block(segs[0].name) else None
    if len(segs) == 2:
        block = model.block(segs[0].name)
        if block is None:
            return None
        for k in block.contracts:
            if k.name == segs[1].name:
                return f"{segs[0].name}.{segs[1].name}"
        return None
    return None


def _validate_configurations(c, model: m.ArchitectureModel):
    root = model.block(model.root)
    for dup in _dup_names(cfg.name for cfg in model.configurations):
        c.error(f"configuration:{dup}", "duplicate configuration name")
    for cfg in model.configurations:
        cp = f"configuration:{cfg.name}"
        seen = set()
        for name, value in cfg.bindings:
            if name in seen:
                c.error(cp, f"parameter '{name}' bound twice")
            seen.add(name)
            if root is None:
                continue
            param = next((p for p in root.parameters if p.name == name), None)
            if param is None:
                c.error(cp, f"'{name}' is not a parameter of '{model.root}'")
            elif param.lo is not None and not (param.lo <= value <= param.hi):
                c.error(
                    cp,
                    f"value {value} outside the declared range "
                    f"{param.lo}..{param.hi} of '{name}'",
                )
        if root is not None:
            for p in root.parameters:
                if p.default is None and p.name not in seen:
                    c.error(cp, f"parameter '{p.name}' is not bound and has no default")
    if root is not None and not model.configurations:
        unbound = [p.name for p in root.parameters if p.default is None]
        if unbound:
            c.warning(
                model.root,
                "no configurations declared and parameters without defaults: "
                + ", ".join(unbound),
            )


def _check_containment_cycles(c, model: m.ArchitectureModel):
    # DFS over the block containment graph
    WHITE, GREY, BLACK = 0, 1, 2
    color = {b.name: WHITE for b in model.blocks}

    def visit(name: str, trail: list[str]):
        color[name] = GREY
        block = model.block(name)
        if block is not None:
            for sub in block.subcomponents:
                child = sub.block
                if child not in color:
                    continue
                if color[child] == GREY:
                    c.error(
                        name,
                        "containment cycle: " + " -> ".join(trail + [name, child]),
                    )
                elif color[child] == WHITE:
                    visit(child, trail + [name])
        color[name] = BLACK

    for b in model.blocks:
        if color[b.name] == WHITE:
            visit(b.name, [])


# --- requirement traceability ------------------------------------------------


@dataclass(frozen=True)
class TraceRow:
    requirement: str
    elements: tuple[str, ...]
    status: str  # 'direct' | 'indirect' | 'unsatisfied'


@dataclass(frozen=True)
class TraceMatrix:
    rows: tuple[TraceRow, ...]
    orphan_requirements: tuple[str, ...]
    orphan_elements: tuple[str, ...]


def trace_requirements(model: m.ArchitectureModel) -> TraceMatrix:
    """Requirement/element matrix with orphans on both axes.

    A requirement with children is 'indirect(ly satisfied)' when every child
    is satisfied (directly or indirectly); transitive over the parent links.
    """
    children: dict[str, list[str]] = {}
    for r in model.requirements:
        if r.parent is not None:
            children.setdefault(r.parent, []).append(r.id)

    satisfied: dict[str, bool] = {}

    def is_satisfied(rid: str) -> bool:
        if rid in satisfied:
            return satisfied[rid]
        req = next(r for r in model.requirements if r.id == rid)
        if req.satisfied_by:
            result = True
        else:
            kids = children.get(rid, [])
            result = bool(kids) and all(is_satisfied(k) for k in kids)
        satisfied[rid] = result
        return result

    rows = []
    for r in model.requirements:
        elements = tuple(
            e for e in (_resolve_element(model, ref) for ref in r.satisfied_by)
            if e is not None
        )
        if r.satisfied_by:
            status = "direct"
        elif is_satisfied(r.id):
            status = "indirect"
        else:
            status = "unsatisfied"
        rows.append(TraceRow(r.id, elements, status))

    orphan_reqs = tuple(row.requirement for row in rows if row.status == "unsatisfied")
    referenced = {e for row in rows for e in row.elements}
    orphan_elems = []
    for block in model.blocks:
        if block.name not in referenced:
            orphan_elems.append(block.name)
        for k in block.contracts:
            qualified = f"{block.name}.{k.name}"
            if qualified not in referenced:
                orphan_elems.append(qualified)
    return TraceMatrix(tuple(rows), orphan_reqs, tuple(orphan_elems))
