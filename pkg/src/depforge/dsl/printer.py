"""Canonical .dep serialization: 2-space indent, newline-terminated.

``parse_model([serialize_model(m)]) == m`` for every model that passes core
validation; block items are grouped by kind with declaration order preserved
inside each group.
"""

from __future__ import annotations

from .. import model as m
from ..expr import BoolType, EnumType, IntLit, IntType
from ..ltl import to_text


def _escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


def _value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _type(t) -> str:
    if isinstance(t, BoolType):
        return "bool"
    if isinstance(t, IntType):
        return f"int[{t.lo}..{t.hi}]"
    if isinstance(t, EnumType):
        return "enum {%s}" % ", ".join(t.labels)
    raise TypeError(f"unknown value type {t!r}")


def _number(x: float) -> str:
    return repr(x)


class _Writer:
    def __init__(self):
        self.lines: list[str] = []
        self.depth = 0

    def line(self, text: str = ""):
        self.lines.append("  " * self.depth + text if text else "")

    def open(self, text: str):
        self.line(text + " {")
        self.depth += 1

    def close(self):
        self.depth -= 1
        self.line("}")

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def serialize_model(model: m.ArchitectureModel) -> str:
    w = _Writer()
    w.open(f"model {model.name}")
    for block in model.blocks:
        _write_block(w, block)
    for req in model.requirements:
        _write_requirement(w, req)
    for t in model.tles:
        w.line(f"tle {t.name}: {t.condition};")
    for cfg in model.configurations:
        w.open(f"configuration {cfg.name}")
        for name, value in cfg.bindings:
            w.line(f"{name} = {value};")
        w.close()
    w.line(f"root {model.root};")
    w.close()
    return w.text()


def _mult_suffix(mult) -> str:
    if mult == IntLit(1):
        return ""
    return f"[{mult}]"


def _write_block(w: _Writer, b: m.BlockDef):
    w.open(f"block {b.name}")
    for p in b.parameters:
        bits = [f"param {p.name}"]
        if p.lo is not None:
            bits.append(f"in {p.lo}..{p.hi}")
        if p.default is not None:
            bits.append(f"= {p.default}")
        w.line(" ".join(bits) + ";")
    for port in b.ports:
        init = f" = {_value(port.init)}" if port.init is not None else ""
        w.line(
            f"port {port.direction} {port.name}{_mult_suffix(port.multiplicity)}"
            f": {_type(port.type)}{init};"
        )
    for sub in b.subcomponents:
        w.line(f"sub {sub.name}{_mult_suffix(sub.multiplicity)}: {sub.block};")
    for conn in b.connections:
        prefix = f"connect all {conn.comprehension}: " if conn.comprehension else "connect "
        w.line(f"{prefix}{conn.source} -> {conn.target};")
    if b.allocation is not None:
        w.line(f"allocate {b.allocation};")
    for c in b.contracts:
        w.open(f"contract {c.name}")
        w.line(f"assume {to_text(c.assumption)};")
        w.line(f"guarantee {to_text(c.guarantee)};")
        w.close()
    if b.behavior is not None:
        _write_machine(w, b.behavior)
    for em in b.error_models:
        _write_error_model(w, em)
    w.close()


def _write_machine(w: _Writer, sm: m.StateMachine):
    w.open("behavior")
    w.line("states " + ", ".join(sm.states) + ";")
    w.line(f"initial {sm.initial};")
    for v in sm.variables:
        w.line(f"var {v.name}: {_type(v.type)} = {_value(v.init)};")
    for t in sm.transitions:
        head = f"transition {t.source} -> {t.target}"
        if t.guard is not None:
            head += f" when {t.guard}"
        if t.updates:
            w.open(head)
            for u in t.updates:
                w.line(f"{u.target} := {u.value};")
            w.close()
        else:
            w.line(head + ";")
    w.close()


def _write_error_model(w: _Writer, em: m.ErrorModel):
    w.open(f"error model {em.name}")
    states = ", ".join(
        s.name if s.tag == m.NORMAL else f"{s.name}: {s.tag}" for s in em.states
    )
    w.line(f"states {states};")
    w.line(f"initial {em.initial};")
    for t in em.transitions:
        trig = t.trigger
        if trig.kind == "fault":
            text = f"fault {trig.name}"
        else:
            text = f"threat {trig.name} from {trig.agent}"
        if trig.probability is not None:
            text += f" prob {_number(trig.probability)}"
        elif trig.rate is not None:
            text += f" rate {_number(trig.rate)}"
        line = f"transition {t.source} -> {t.target} on {text}"
        if t.guard is not None:
            line += f" if {t.guard}"
        w.line(line + ";")
    for decl in em.effects:
        w.open(f"effects {decl.state}")
        for eff in decl.effects:
            if isinstance(eff, m.StuckAt):
                w.line(f"stuck {eff.target} at {_value(eff.value)};")
            else:
                w.line(f"lose {eff.which};")
        w.close()
    w.close()


def _write_requirement(w: _Writer, r: m.Requirement):
    text = f'requirement {r.id} "{_escape(r.text)}"'
    if r.satisfied_by:
        text += " satisfied by " + ", ".join(str(ref) for ref in r.satisfied_by)
    if r.parent is not None:
        text += f" parent {r.parent}"
    w.line(text + ";")
