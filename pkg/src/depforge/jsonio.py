"""Versioned JSON forms of every analysis result.

Every document is an envelope ``{"schema_version": 1, "kind": ..., ...}``;
loaders reject unknown versions so archived results stay trustworthy.  The
JSON schema for result archives ships in docs/result-schema.json.
"""

from __future__ import annotations

import json

from .contracts import ContractFaultTree, RefinementVerdict
from .engine.checker import Verdict, Witness, witness_to_json
from .mc import ReliabilityEstimate
from .safety import FaultTree, FmeaRow
from .validate import TraceMatrix, ValidationReport

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    pass


def envelope(kind: str, payload: dict, **meta) -> dict:
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind}
    doc.update(meta)
    doc.update(payload)
    return doc


def check_envelope(doc: dict, kind: str | None = None) -> dict:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(
            f"unsupported schema_version {version!r} (this tool reads {SCHEMA_VERSION})"
        )
    if kind is not None and doc.get("kind") != kind:
        raise SchemaError(f"expected kind '{kind}', found {doc.get('kind')!r}")
    return doc


def validation_to_json(report: ValidationReport) -> dict:
    return envelope(
        "validation_report",
        {
            "findings": [
                {"severity": f.severity, "path": f.path, "message": f.message}
                for f in report.findings
            ],
            "ok": report.ok,
        },
    )


def trace_to_json(matrix: TraceMatrix) -> dict:
    return envelope(
        "trace_matrix",
        {
            "rows": [
                {
                    "requirement": r.requirement,
                    "elements": list(r.elements),
                    "status": r.status,
                }
                for r in matrix.rows
            ],
            "orphan_requirements": list(matrix.orphan_requirements),
            "orphan_elements": list(matrix.orphan_elements),
        },
    )


def verdict_to_json(verdict: Verdict) -> dict:
    payload = {"result": verdict.result, "explored": verdict.explored}
    if verdict.witness is not None:
        payload["witness"] = witness_to_json(verdict.witness)
    return envelope("verdict", payload)


def refinement_to_json(verdict: RefinementVerdict) -> dict:
    obligations = []
    for r in verdict.per_obligation:
        entry = {
            "kind": r.obligation.kind,
            "subject": r.obligation.subject,
            "formula": _formula_text(r.obligation.formula),
            "provenance": list(r.obligation.provenance),
            "result": r.result,
        }
        if r.witness is not None:
            entry["witness"] = witness_to_json(r.witness)
        obligations.append(entry)
    return envelope(
        "refinement_verdict",
        {"overall": verdict.overall, "obligations": obligations},
    )


def _formula_text(f) -> str:
    from .ltl import to_text

    return to_text(f)


def fault_tree_to_json(ft: FaultTree) -> dict:
    return envelope(
        "fault_tree",
        {
            "top_event": ft.top_event,
            "top_probability": ft.top_probability,
            "gates": [
                {"events": list(g.events), "probability": g.probability}
                for g in ft.gates
            ],
            "basic_events": [
                {"name": b.name, "probability": b.probability}
                for b in ft.basic_events
            ],
            "quantitative_note": ft.quantitative_note,
            "warnings": list(ft.warnings),
        },
    )


def contract_tree_to_json(tree: ContractFaultTree) -> dict:
    return envelope(
        "contract_fault_tree",
        {
            "root": tree.root,
            "nodes": [
                {
                    "id": n.id,
                    "label": n.label,
                    "kind": n.kind,
                    "children": list(n.children),
                }
                for n in tree.nodes
            ],
            "warnings": list(tree.warnings),
        },
    )


def fmea_to_json(rows) -> dict:
    return envelope(
        "fmea",
        {
            "rows": [
                {
                    "cardinality": len(r.failure_mode),
                    "failure_mode": list(r.failure_mode),
                    "components": list(r.components),
                    "local_effect": list(r.local_effect),
                    "system_effects": list(r.system_effects),
                    "probability": r.probability,
                }
                for r in rows
            ]
        },
    )


def estimates_to_json(estimates) -> dict:
    return envelope(
        "reliability_estimates",
        {"estimates": [e.as_json() for e in estimates]},
    )


def dumps(doc: dict) -> str:
    """Canonical serialization: sorted keys, newline-terminated."""
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def dump_results(path: str, results: list[dict], **meta) -> None:
    doc = envelope("analysis_results", {"results": results}, **meta)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(doc))


def load_results(path: str) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    check_envelope(doc)
    if doc.get("kind") == "analysis_results":
        results = doc.get("results", [])
        for r in results:
            check_envelope(r)
        return results
    return [doc]
