"""Monte-Carlo reliability estimation over stochastic activity networks.

Race semantics with exponential delays: at each marking every enabled
timed activity samples a delay, the minimum fires; instantaneous
activities fire immediately (case sampled by probability) and a marking
revisited within one time instant aborts the run as a livelock.  The
estimate is the fraction of trials whose reward predicate holds at mission
time, with a normal-approximation 95% interval.

The inner loop runs in the compiled kernel (depforge._mckernel) when the
extension built, falling back to the pure-Python twin otherwise; both
produce bit-identical results for a given seed.  See benchmarks/bench_mc.py
for the comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dsl.parser import parse_expr_text
from .engine.machine import EngineError
from .expr import Binary, BoolLit, Expr, IntLit, Ref, Unary
from .san import StochasticActivityNetwork

try:  # compiled extension is optional
    from . import _mckernel as _kernel

    KERNEL = "compiled"
except ImportError:  # pragma: no cover - depends on build environment
    from . import _mckernel_py as _kernel

    KERNEL = "python"

from . import _mckernel_py

OP_CONST = _mckernel_py.OP_CONST
OP_MARK = _mckernel_py.OP_MARK
_CMP_OPS = {
    "==": _mckernel_py.OP_EQ,
    "!=": _mckernel_py.OP_NE,
    "<": _mckernel_py.OP_LT,
    "<=": _mckernel_py.OP_LE,
    ">": _mckernel_py.OP_GT,
    ">=": _mckernel_py.OP_GE,
}


class SimulationError(Exception):
    pass


@dataclass(frozen=True)
class ReliabilityEstimate:
    reward: str
    mission_time: float
    trials: int
    estimate: float
    ci_lo: float
    ci_hi: float
    seed: int

    def as_json(self) -> dict:
        return {
            "reward": self.reward,
            "mission_time": self.mission_time,
            "trials": self.trials,
            "estimate": self.estimate,
            "ci95": [self.ci_lo, self.ci_hi],
            "seed": self.seed,
        }


def compile_predicate(text: str, place_index: dict[str, int]) -> list[int]:
    """Marking expression -> flat (op, arg) bytecode."""
    expr = parse_expr_text(text)
    code: list[int] = []

    def emit(e: Expr):
        if isinstance(e, BoolLit):
            code.extend((OP_CONST, 1 if e.value else 0))
            return
        if isinstance(e, IntLit):
            code.extend((OP_CONST, e.value))
            return
        if isinstance(e, Ref):
            name = str(e)
            if name not in place_index:
                raise SimulationError(f"unknown place '{name}' in predicate")
            code.extend((OP_MARK, place_index[name]))
            return
        if isinstance(e, Unary) and e.op == "!":
            emit(e.operand)
            code.extend((_mckernel_py.OP_NOT, 0))
            return
        if isinstance(e, Binary):
            if e.op in _CMP_OPS:
                emit(e.lhs)
                emit(e.rhs)
                code.extend((_CMP_OPS[e.op], 0))
                return
            if e.op == "&&":
                emit(e.lhs)
                emit(e.rhs)
                code.extend((_mckernel_py.OP_AND, 0))
                return
            if e.op == "||":
                emit(e.lhs)
                emit(e.rhs)
                code.extend((_mckernel_py.OP_OR, 0))
                return
        raise SimulationError(f"unsupported predicate construct '{e}'")

    emit(expr)
    return code


class _CompiledSan:
    """SAN flattened into the parallel arrays both kernels consume."""

    def __init__(self, san: StochasticActivityNetwork):
        problems = san.validate()
        if problems:
            raise SimulationError("invalid SAN: " + "; ".join(problems))
        index = san.place_index()
        self.reward_names = [r.name for r in san.rewards]
        self.init_marking = [p.initial for p in san.places]
        self.flat_places: list[int] = []
        bytecode: list[int] = []

        def put_places(names) -> tuple[int, int]:
            off = len(self.flat_places)
            self.flat_places.extend(index[n] for n in names)
            return off, len(names)

        def put_pred(text: str | None) -> tuple[int, int]:
            if text is None:
                return 0, 0
            off = len(bytecode)
            code = compile_predicate(text, index)
            bytecode.extend(code)
            return off, len(code)

        self.timed_rate = []
        self.timed_in_off, self.timed_in_len = [], []
        self.timed_out_off, self.timed_out_len = [], []
        self.timed_en_off, self.timed_en_len = [], []
        for act in san.timed:
            self.timed_rate.append(act.rate)
            o, l = put_places(act.inputs)
            self.timed_in_off.append(o)
            self.timed_in_len.append(l)
            o, l = put_places(act.outputs)
            self.timed_out_off.append(o)
            self.timed_out_len.append(l)
            o, l = put_pred(act.enabling)
            self.timed_en_off.append(o)
            self.timed_en_len.append(l)

        self.inst_in_off, self.inst_in_len = [], []
        self.inst_en_off, self.inst_en_len = [], []
        self.case_off, self.case_len = [], []
        self.case_prob = []
        self.case_out_off, self.case_out_len = [], []
        for act in san.instantaneous:
            o, l = put_places(act.inputs)
            self.inst_in_off.append(o)
            self.inst_in_len.append(l)
            o, l = put_pred(act.enabling)
            self.inst_en_off.append(o)
            self.inst_en_len.append(l)
            self.case_off.append(len(self.case_prob))
            self.case_len.append(len(act.cases))
            for case in act.cases:
                self.case_prob.append(case.probability)
                o, l = put_places(case.outputs)
                self.case_out_off.append(o)
                self.case_out_len.append(l)

        self.reward_off, self.reward_len = [], []
        for rv in san.rewards:
            o, l = put_pred(rv.predicate)
            self.reward_off.append(o)
            self.reward_len.append(l)
        self.bytecode = bytecode

    def run(self, mission_time: float, trials: int, seed: int, trial0: int, kernel=None):
        k = kernel or _kernel
        return k.run_trials(
            self.init_marking,
            self.timed_rate,
            self.timed_in_off, self.timed_in_len,
            self.timed_out_off, self.timed_out_len,
            self.timed_en_off, self.timed_en_len,
            self.flat_places,
            self.inst_in_off, self.inst_in_len,
            self.inst_en_off, self.inst_en_len,
            self.case_off, self.case_len,
            self.case_prob,
            self.case_out_off, self.case_out_len,
            self.reward_off, self.reward_len,
            self.bytecode,
            mission_time,
            trials,
            seed & ((1 << 64) - 1),
            trial0,
        )


def simulate(
    san: StochasticActivityNetwork,
    mission_time: float,
    trials: int,
    seed: int,
    *,
    parallelism: int = 1,
    kernel=None,
) -> list[ReliabilityEstimate]:
    """Estimate every reward variable at ``mission_time``.

    Reproducible: per-trial streams derive from (seed, trial index), so any
    ``parallelism`` yields the same estimates as a serial run.
    """
    if trials < 100:
        raise ValueError("trials must be >= 100")
    if mission_time <= 0:
        raise ValueError("mission_time must be positive")
    compiled = _CompiledSan(san)
    chunks = _chunk(trials, max(1, parallelism))
    results = []
    if parallelism <= 1 or len(chunks) == 1:
        for (t0, n) in chunks:
            results.append(compiled.run(mission_time, n, seed, t0, kernel))
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            futures = [
                pool.submit(compiled.run, mission_time, n, seed, t0, kernel)
                for (t0, n) in chunks
            ]
            results = [f.result() for f in futures]
    livelocks = [lv for (_c, lv) in results if lv >= 0]
    if livelocks:
        raise SimulationError(
            f"instantaneous-activity livelock in trial {min(livelocks)}: "
            "a marking repeated within one time instant"
        )
    totals = [0] * len(compiled.reward_names)
    for (counts, _lv) in results:
        for i, c in enumerate(counts):
            totals[i] += c
    out = []
    for name, count in zip(compiled.reward_names, totals):
        p = count / trials
        half = 1.96 * math.sqrt(p * (1.0 - p) / trials)
        out.append(
            ReliabilityEstimate(
                reward=name,
                mission_time=mission_time,
                trials=trials,
                estimate=p,
                ci_lo=max(0.0, p - half),
                ci_hi=min(1.0, p + half),
                seed=seed,
            )
        )
    return out


def _chunk(trials: int, parts: int):
    size = (trials + parts - 1) // parts
    chunks = []
    t0 = 0
    while t0 < trials:
        n = min(size, trials - t0)
        chunks.append((t0, n))
        t0 += n
    return chunks


def estimates_to_csv(estimates) -> str:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["reward", "mission_time", "trials", "estimate", "ci_lo", "ci_hi", "seed"])
    for e in estimates:
        writer.writerow(
            [e.reward, repr(e.mission_time), e.trials, repr(e.estimate), repr(e.ci_lo), repr(e.ci_hi), e.seed]
        )
    return buf.getvalue()
