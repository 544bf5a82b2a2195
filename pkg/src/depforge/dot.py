"""Deterministic DOT export: fault trees, contract trees, block diagrams.

Block structure comes in the two flavors of the auto-generated diagrams:
the definition view (block/sub-block containment) and the internal view
(sub-components plus connections).  Layout is the renderer's job; only the
graph structure is guaranteed.
"""

from __future__ import annotations

from . import model as m
from .contracts import ContractFaultTree
from .safety import FaultTree


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _p(p: float | None) -> str:
    if p is None:
        return ""
    return f"\\np={p:.6g}"


def fault_tree_to_dot(ft: FaultTree) -> str:
    lines = ["digraph fault_tree {", "  rankdir=BT;", "  node [shape=box];"]
    top = f"TOP: {ft.top_event}{_p(ft.top_probability)}"
    lines.append(f"  top [label={_q(top)} shape=invhouse];")
    if len(ft.gates) != 1:
        lines.append(f"  or0 [label={_q('OR' + _p(ft.top_probability))} shape=invtriangle];")
        lines.append("  or0 -> top;")
        or_parent = "or0"
    else:
        or_parent = "top"
    for i, gate in enumerate(ft.gates):
        gid = f"and{i}"
        lines.append(f"  {gid} [label={_q('AND' + _p(gate.probability))} shape=triangle];")
        lines.append(f"  {gid} -> {or_parent};")
        for event in gate.events:
            eid = f"e_{_ident(event)}"
            lines.append(f"  {eid} -> {gid};")
    for b in sorted(ft.basic_events, key=lambda b: b.name):
        eid = f"e_{_ident(b.name)}"
        lines.append(f"  {eid} [label={_q(b.name + _p(b.probability))} shape=circle];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _ident(name: str) -> str:
    out = []
    for ch in name:
        out.append(ch if ch.isalnum() else "_")
    return "".join(out)


def contract_tree_to_dot(tree: ContractFaultTree) -> str:
    lines = ["digraph contract_fault_tree {", "  rankdir=BT;", "  node [shape=box];"]
    shapes = {"or": "invtriangle", "and": "triangle", "basic": "circle"}
    for node in tree.nodes:
        label = node.label if node.kind == "basic" else f"{node.kind.upper()}: {node.label}"
        lines.append(
            f"  {_ident(node.id)} [label={_q(label)} shape={shapes[node.kind]}];"
        )
    for node in tree.nodes:
        for child in node.children:
            lines.append(f"  {_ident(child)} -> {_ident(node.id)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def block_definition_to_dot(model: m.ArchitectureModel, block_name: str) -> str:
    """Definition view: containment edges from a block to its sub-blocks."""
    lines = ["digraph block_definition {", "  node [shape=record];"]
    seen: set[str] = set()

    def visit(name: str):
        if name in seen:
            return
        seen.add(name)
        block = model.block(name)
        if block is None:
            return
        ports = ", ".join(f"{p.direction} {p.name}" for p in block.ports)
        label = name if not ports else f"{name}|{ports}"
        lines.append(f"  {_ident(name)} [label={_q('{' + label + '}')}];")
        for sub in block.subcomponents:
            lines.append(
                f"  {_ident(name)} -> {_ident(sub.block)} [label={_q(sub.name)}];"
            )
            visit(sub.block)

    visit(block_name)
    lines.append("}")
    return "\n".join(lines) + "\n"


def block_internal_to_dot(model: m.ArchitectureModel, block_name: str) -> str:
    """Internal view: one node per sub-component, one edge per connection."""
    block = model.block(block_name)
    if block is None:
        raise ValueError(f"no block '{block_name}'")
    lines = [f"digraph internal_{_ident(block_name)} {{", "  node [shape=box];"]
    lines.append(f"  _owner [label={_q(block_name)} shape=plaintext];")
    for sub in block.subcomponents:
        mult = "" if sub.multiplicity == m.IntLit(1) else f"[{sub.multiplicity}]"
        lines.append(
            f"  {_ident(sub.name)} [label={_q(f'{sub.name}{mult}: {sub.block}')}];"
        )
    for conn in block.connections:
        src = conn.source.segments[0].name
        dst = conn.target.segments[0].name
        src_node = _ident(src) if block.sub(src) else "_owner"
        dst_node = _ident(dst) if block.sub(dst) else "_owner"
        label = f"{conn.source} -> {conn.target}"
        lines.append(f"  {src_node} -> {dst_node} [label={_q(label)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
