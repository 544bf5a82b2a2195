"""Trade-off analysis: the same checks over several configurations.

Each cell stores the raw numeric value next to the pass/fail verdict so a
threshold change does not force a re-run.  Failures of individual checks
never abort the matrix; a configuration that fails to instantiate marks its
whole row inconclusive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import model as m
from .dsl.parser import parse_expr_text, parse_formula_text
from .engine.checker import CapExceeded, check_ltl, check_reachable
from .engine.machine import EngineError
from .instantiate import Configuration, InstanceModel, InstantiationError, instantiate
from .jsonio import envelope

CHECK_KINDS = (
    "refinement",
    "leaf-verification",
    "ltl",
    "fta-top-probability",
    "reliability",
    "reachability",
)


@dataclass(frozen=True)
class CheckSpec:
    """One column of the matrix.

    params by kind:
      refinement:          component (instance path, '' = root)
      leaf-verification:   component (leaf instance path)
      ltl:                 formula (text), fault_mode ('all-inactive'|'free')
      fta-top-probability: tle (name), max_order, threshold (pass: top <= threshold)
      reliability:         tle (name), threshold, mission_time, trials
                           (pass: estimate >= threshold)
      reachability:        condition (text) or tle (name), fault_mode,
                           expect ('unreachable'|'reachable')
    """

    name: str
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in CHECK_KINDS:
            raise ValueError(f"unknown check kind '{self.kind}'")
        for key in ("threshold",):
            value = self.params.get(key)
            if value is not None and not (0.0 <= float(value) <= 1.0):
                raise ValueError(f"{self.name}: {key} must lie in [0, 1]")


@dataclass(frozen=True)
class Cell:
    configuration: str
    check: str
    verdict: str  # 'pass' | 'fail' | 'inconclusive'
    value: float | None = None
    reason: str | None = None


@dataclass(frozen=True)
class TradeoffMatrix:
    configurations: tuple[str, ...]
    checks: tuple[str, ...]
    cells: tuple[Cell, ...]  # complete grid, row-major

    def cell(self, config: str, check: str) -> Cell:
        for c in self.cells:
            if c.configuration == config and c.check == check:
                return c
        raise KeyError((config, check))


def run_tradeoff(
    model: m.ArchitectureModel,
    configs: list[Configuration],
    checks: list[CheckSpec],
    *,
    seed: int = 1,
    parallelism: int = 1,
    state_cap: int = 5_000_000,
) -> TradeoffMatrix:
    if not configs:
        raise ValueError("configs must be nonempty")
    if not checks:
        raise ValueError("checks must be nonempty")
    rows: list[list[Cell]] = []
    jobs = []
    instances: dict[str, InstanceModel | None] = {}
    errors: dict[str, str] = {}
    for cfg in configs:
        try:
            instances[cfg.name] = instantiate(model, cfg)
        except (InstantiationError, EngineError) as exc:
            instances[cfg.name] = None
            errors[cfg.name] = str(exc)
    for cfg in configs:
        for check in checks:
            jobs.append((cfg, check))

    def run_job(job):
        cfg, check = job
        inst = instances[cfg.name]
        if inst is None:
            return Cell(
                cfg.name, check.name, "inconclusive",
                reason=f"instantiation failed: {errors[cfg.name]}",
            )
        try:
            return _run_check(model, inst, cfg, check, seed, state_cap)
        except CapExceeded as exc:
            return Cell(cfg.name, check.name, "inconclusive", reason=str(exc))
        except Exception as exc:  # individual checks never abort the matrix
            return Cell(cfg.name, check.name, "inconclusive", reason=str(exc))

    if parallelism > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            cells = list(pool.map(run_job, jobs))
    else:
        cells = [run_job(j) for j in jobs]
    return TradeoffMatrix(
        configurations=tuple(c.name for c in configs),
        checks=tuple(c.name for c in checks),
        cells=tuple(cells),
    )


def _resolve_tle(model, inst, check):
    from .safety import TopLevelEvent

    name = check.params.get("tle")
    if name is not None:
        decl = model.tle(name)
        if decl is None:
            raise EngineError(f"no top-level event '{name}' in the model")
        return TopLevelEvent(decl.name, decl.condition)
    condition = check.params.get("condition")
    if condition is None:
        raise EngineError(f"check '{check.name}' needs a 'tle' or 'condition'")
    return TopLevelEvent(check.name, parse_expr_text(condition))


def _run_check(model, inst: InstanceModel, cfg, check: CheckSpec, seed, state_cap) -> Cell:
    if check.kind == "refinement":
        from .contracts import check_refinement

        target = _find(inst, check.params.get("component", ""))
        verdict = check_refinement(inst, target)
        mapping = {"valid": "pass", "invalid": "fail", "inconclusive": "inconclusive"}
        return Cell(cfg.name, check.name, mapping[verdict.overall])
    if check.kind == "leaf-verification":
        from .contracts import verify_leaf

        target = _find(inst, check.params["component"])
        verdict, _warnings = verify_leaf(target, cap=state_cap)
        return Cell(cfg.name, check.name, "pass" if verdict.result == "holds" else "fail")
    if check.kind == "ltl":
        formula = parse_formula_text(check.params["formula"])
        fault_mode = check.params.get("fault_mode", "all-inactive")
        verdict = check_ltl(inst, formula, fault_mode, cap=state_cap)
        return Cell(cfg.name, check.name, "pass" if verdict.result == "holds" else "fail")
    if check.kind == "fta-top-probability":
        from .safety import compute_fault_tree

        tle = _resolve_tle(model, inst, check)
        max_order = int(check.params.get("max_order", 24))
        ft = compute_fault_tree(inst, tle, max_order, cap=state_cap)
        if ft.top_probability is None:
            reason = ft.quantitative_note or "; ".join(ft.warnings) or "no probability"
            return Cell(cfg.name, check.name, "inconclusive", reason=reason)
        threshold = float(check.params["threshold"])
        verdict = "pass" if ft.top_probability <= threshold else "fail"
        return Cell(cfg.name, check.name, verdict, value=ft.top_probability)
    if check.kind == "reliability":
        from .mc import simulate
        from .san import to_san

        tle = _resolve_tle(model, inst, check)
        san = to_san(inst, tle)
        mission_time = float(check.params["mission_time"])
        trials = int(check.params["trials"])
        estimates = simulate(san, mission_time, trials, seed)
        est = next(e for e in estimates if e.reward == "system_ok")
        threshold = float(check.params["threshold"])
        verdict = "pass" if est.estimate >= threshold else "fail"
        return Cell(cfg.name, check.name, verdict, value=est.estimate)
    if check.kind == "reachability":
        tle = _resolve_tle(model, inst, check)
        fault_mode = check.params.get("fault_mode", "all-inactive")
        expect = check.params.get("expect", "unreachable")
        verdict = check_reachable(inst, tle.condition, fault_mode, cap=state_cap)
        return Cell(
            cfg.name, check.name, "pass" if verdict.result == expect else "fail"
        )
    raise EngineError(f"unknown check kind '{check.kind}'")


def _find(inst: InstanceModel, path: str):
    target = inst.find(path)
    if target is None:
        raise EngineError(f"no instance at path '{path}'")
    return target


def matrix_to_json(matrix: TradeoffMatrix) -> dict:
    return envelope(
        "tradeoff_matrix",
        {
            "configurations": list(matrix.configurations),
            "checks": list(matrix.checks),
            "cells": [
                {
                    "configuration": c.configuration,
                    "check": c.check,
                    "verdict": c.verdict,
                    "value": c.value,
                    "reason": c.reason,
                }
                for c in matrix.cells
            ],
        },
    )


def checks_from_json(data) -> list[CheckSpec]:
    """Check specifications from a JSON document (list or {'checks': [...]})."""
    if isinstance(data, dict):
        data = data.get("checks", [])
    out = []
    for entry in data:
        params = {
            k: v for k, v in entry.items() if k not in ("name", "kind")
        }
        out.append(CheckSpec(entry["name"], entry["kind"], params))
    return out
