"""Contract refinement, leaf verification and contract-based safety trees.

Refinement of a composite contract (A, G) against sub-contracts (Ai, Gi)
produces the standard obligation set — per-sub assumption discharge
(A and the other guarantees entail Ai) plus guarantee entailment (A and all
guarantees entail G) — with connected ports identified by substitution
before formula construction.  Obligations are decided by LTL validity over
the composite's finite vocabulary.

The safety tree models a failed component as guarantee erasure (its G
becomes `true`): a set of sub-contracts is a failure combination for the
composite when erasing exactly those guarantees breaks the entailment
obligation, mirroring cut-set minimization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import ltl
from .expr import BoolLit, EnumType, Expr, Ref, ValueType
from .engine.checker import Verdict, Witness, ltl_valid
from .engine.machine import CapExceeded, EngineError, SystemMachine
from .instantiate import ComponentInstance, InstanceModel


@dataclass(frozen=True)
class RefinementObligation:
    kind: str  # 'assumption-discharge' | 'guarantee-entailment'
    subject: str  # sub path for discharge, composite path for entailment
    formula: ltl.Formula
    provenance: tuple[str, ...]  # contract names involved


@dataclass(frozen=True)
class ObligationResult:
    obligation: RefinementObligation
    result: str  # 'holds' | 'violated' | 'inconclusive'
    witness: Witness | None = None


@dataclass(frozen=True)
class RefinementVerdict:
    overall: str  # 'valid' | 'invalid' | 'inconclusive'
    per_obligation: tuple[ObligationResult, ...]

    @property
    def valid(self) -> bool:
        return self.overall == "valid"


class _Scope:
    """Unified atom vocabulary of a composite: the composite's ports, its
    direct children's ports and leaf variables, with connected ports
    identified (each atom rewritten to its ultimate driver)."""

    def __init__(self, model: InstanceModel, composite: ComponentInstance):
        self.composite = composite
        paths = {composite.path} | {ch.path for ch in composite.children}
        self._alias: dict[str, str] = {}
        for conn in model.connections:
            if _owner(conn.target) in paths and _owner(conn.source) in paths:
                self._alias[conn.target] = conn.source
        self.types: dict[str, ValueType] = {}
        for inst in (composite, *composite.children):
            for port in inst.ports:
                for slot in port.slots():
                    self.types[_abs(inst.path, slot)] = port.type
            if inst.machine is not None:
                for v in inst.machine.variables:
                    self.types[_abs(inst.path, v.name)] = v.type
        self._labels: set[str] = set()
        for t in self.types.values():
            if isinstance(t, EnumType):
                self._labels.update(t.labels)

    def canonical(self, name: str) -> str:
        seen = set()
        while name in self._alias:
            if name in seen:
                raise EngineError(f"connection cycle through '{name}'")
            seen.add(name)
            name = self._alias[name]
        return name

    def rewrite(self, formula: ltl.Formula) -> ltl.Formula:
        return ltl.map_atoms(formula, self._rewrite_atom)

    def _rewrite_atom(self, expr: Expr) -> Expr:
        from .expr import Binary

        if isinstance(expr, Ref):
            return self._rewrite_ref(expr)
        if isinstance(expr, Binary):
            lhs = expr.lhs
            if isinstance(lhs, Ref):
                lhs = self._rewrite_ref(lhs)
            return Binary(expr.op, lhs, expr.rhs)
        return expr

    def _rewrite_ref(self, ref: Ref) -> Ref:
        name = str(ref)
        if name not in self.types:
            if len(ref.segments) == 1 and ref.segments[0].name in self._labels:
                return ref  # enumeration label
            raise EngineError(
                f"atom '{name}' does not resolve in composite "
                f"'{self.composite.path or self.composite.block}'"
            )
        canon = self.canonical(name)
        if canon == name:
            return ref
        from .dsl.parser import parse_expr_text

        out = parse_expr_text(canon)
        assert isinstance(out, Ref)
        return out

    def vocabulary_for(self, formulas) -> dict[str, ValueType]:
        vocab: dict[str, ValueType] = {}
        for f in formulas:
            for ref in ltl.refs_of(f):
                name = str(ref)
                if name in self.types:
                    vocab[name] = self.types[self.canonical(name)]
                elif len(ref.segments) == 1 and ref.segments[0].name in self._labels:
                    continue
                else:
                    raise EngineError(f"atom '{name}' outside the unified vocabulary")
        return dict(sorted(vocab.items()))


def _owner(slot: str) -> str:
    head, _, _tail = slot.rpartition(".")
    return head


def _abs(path: str, name: str) -> str:
    return f"{path}.{name}" if path else name


def _conjoin(parts) -> ltl.Formula:
    parts = list(parts)
    if not parts:
        return ltl.Atom(BoolLit(True))
    out = parts[0]
    for p in parts[1:]:
        out = ltl.And(out, p)
    return out


def _pick_contract(inst: ComponentInstance, name: str | None):
    if not inst.contracts:
        return None
    if name is None:
        return inst.contracts[0]
    for k in inst.contracts:
        if k.name == name:
            return k
    raise EngineError(f"no contract '{name}' on '{inst.path or inst.block}'")


def generate_obligations(
    model: InstanceModel,
    composite: ComponentInstance,
    *,
    contract: str | None = None,
    missing_sub_contract: str = "fail",  # 'fail' | 'skip'
):
    """Obligation list for one composite, plus the contracted children.

    Children without contracts either fail the analysis or are skipped with
    a warning (they then contribute no guarantee and need no discharge).
    """
    own = _pick_contract(composite, contract)
    if own is None:
        raise EngineError(
            f"composite '{composite.path or composite.block}' has no contract"
        )
    scope = _Scope(model, composite)
    warnings: list[str] = []
    subs = []
    for child in composite.children:
        k = _pick_contract(child, None)
        if k is None:
            if missing_sub_contract == "fail":
                raise EngineError(
                    f"sub-component '{child.path}' has no contract"
                )
            warnings.append(
                f"sub-component '{child.path}' has no contract; skipped"
            )
            continue
        subs.append((child, k))
    a = scope.rewrite(own.assumption)
    g = scope.rewrite(own.guarantee)
    sub_formulas = [
        (child, k, scope.rewrite(k.assumption), scope.rewrite(k.guarantee))
        for (child, k) in subs
    ]
    obligations = []
    for i, (child, k, ai, _gi) in enumerate(sub_formulas):
        others = [gj for j, (_c, _k, _aj, gj) in enumerate(sub_formulas) if j != i]
        premise = _conjoin([a] + others)
        obligations.append(
            RefinementObligation(
                kind="assumption-discharge",
                subject=child.path,
                formula=ltl.Implies(premise, ai),
                provenance=(own.name, k.name),
            )
        )
    premise = _conjoin([a] + [gi for (_c, _k, _ai, gi) in sub_formulas])
    obligations.append(
        RefinementObligation(
            kind="guarantee-entailment",
            subject=composite.path,
            formula=ltl.Implies(premise, g),
            provenance=(own.name, *(k.name for (_c, k) in subs)),
        )
    )
    return obligations, scope, warnings


def check_refinement(
    model: InstanceModel,
    composite: ComponentInstance,
    *,
    contract: str | None = None,
    missing_sub_contract: str = "fail",
    automaton_cap: int = 100_000,
) -> RefinementVerdict:
    """Decide every obligation by LTL validity; deterministic."""
    obligations, scope, _ = generate_obligations(
        model, composite, contract=contract, missing_sub_contract=missing_sub_contract
    )
    vocab = scope.vocabulary_for([ob.formula for ob in obligations])
    results = []
    for ob in obligations:
        try:
            verdict = ltl_valid(ob.formula, vocab, automaton_cap=automaton_cap)
            results.append(
                ObligationResult(ob, verdict.result, verdict.witness)
            )
        except CapExceeded:
            results.append(ObligationResult(ob, "inconclusive", None))
    if any(r.result == "violated" for r in results):
        overall = "invalid"
    elif any(r.result == "inconclusive" for r in results):
        overall = "inconclusive"
    else:
        overall = "valid"
    return RefinementVerdict(overall, tuple(results))


def verify_leaf(
    leaf: ComponentInstance,
    *,
    contract: str | None = None,
    cap: int = 5_000_000,
) -> tuple[Verdict, tuple[str, ...]]:
    """check_ltl of assumption -> guarantee on the leaf's own machine with
    all faults pinned inactive; vacuous (unsatisfiable) assumptions warn."""
    from .engine.checker import check_ltl

    k = _pick_contract(leaf, contract)
    if k is None:
        raise EngineError(f"leaf '{leaf.path or leaf.block}' has no contract")
    if leaf.machine is None:
        raise EngineError(f"leaf '{leaf.path or leaf.block}' has no behavior")
    warnings: list[str] = []
    formula = ltl.Implies(k.assumption, k.guarantee)
    verdict = check_ltl(leaf_machine(leaf), formula, "all-inactive", cap=cap)
    vocab = _leaf_vocabulary(leaf, [k.assumption])
    try:
        unsat = ltl_valid(ltl.Not(k.assumption), vocab)
        if unsat.result == "holds":
            warnings.append(
                f"assumption of contract '{k.name}' on "
                f"'{leaf.path or leaf.block}' is unsatisfiable; "
                "the contract holds vacuously"
            )
    except CapExceeded:
        pass
    return verdict, tuple(warnings)


def leaf_machine(leaf: ComponentInstance) -> SystemMachine:
    from .engine.machine import inject_faults

    return SystemMachine(inject_faults(leaf))


def _leaf_vocabulary(leaf: ComponentInstance, formulas) -> dict[str, ValueType]:
    types: dict[str, ValueType] = {}
    labels: set[str] = set()
    for port in leaf.ports:
        for slot in port.slots():
            types[_abs(leaf.path, slot)] = port.type
        if isinstance(port.type, EnumType):
            labels.update(port.type.labels)
    if leaf.machine is not None:
        for v in leaf.machine.variables:
            types[_abs(leaf.path, v.name)] = v.type
            if isinstance(v.type, EnumType):
                labels.update(v.type.labels)
    vocab = {}
    for f in formulas:
        for ref in ltl.refs_of(f):
            name = str(ref)
            if name in types:
                vocab[name] = types[name]
            elif len(ref.segments) == 1 and ref.segments[0].name in labels:
                continue
            else:
                raise EngineError(f"atom '{name}' unknown on leaf '{leaf.path}'")
    return dict(sorted(vocab.items()))


# --- contract-based safety analysis -------------------------------------------


@dataclass(frozen=True)
class TreeNode:
    id: str
    label: str
    kind: str  # 'or' | 'and' | 'basic'
    children: tuple[str, ...] = ()


@dataclass(frozen=True)
class ContractFaultTree:
    root: str
    nodes: tuple[TreeNode, ...]
    warnings: tuple[str, ...] = ()

    def node(self, nid: str) -> TreeNode:
        for n in self.nodes:
            if n.id == nid:
                return n
        raise KeyError(nid)

    def basic_events(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes if n.kind == "basic")


class _TreeBuilder:
    def __init__(self, model: InstanceModel, automaton_cap: int, missing_sub_contract: str):
        self.model = model
        self.automaton_cap = automaton_cap
        self.missing = missing_sub_contract
        self.nodes: dict[str, TreeNode] = {}
        self.warnings: list[str] = []
        self._in_progress: set[str] = set()

    def add(self, node: TreeNode) -> str:
        self.nodes[node.id] = node
        return node.id

    def failure_node(self, inst: ComponentInstance, env_id: str | None) -> str:
        """Failure event of ``inst``'s contract; composites get OR gates."""
        name = inst.path or "system"
        nid = f"failure:{name}"
        if nid in self.nodes or nid in self._in_progress:
            return nid
        if inst.is_leaf or not any(ch.contracts for ch in inst.children):
            return self.add(TreeNode(nid, f"{name} contract failure", "basic"))
        self._in_progress.add(nid)
        obligations, scope, warns = generate_obligations(
            self.model, inst, missing_sub_contract=self.missing
        )
        self.warnings.extend(warns)
        entailment = [ob for ob in obligations if ob.kind == "guarantee-entailment"][0]
        own = _pick_contract(inst, None)
        a = scope.rewrite(own.assumption)
        g = scope.rewrite(own.guarantee)
        subs = []
        for child in inst.children:
            ck = _pick_contract(child, None)
            if ck is not None:
                subs.append((child, scope.rewrite(ck.assumption), scope.rewrite(ck.guarantee)))
        # environment failure of this composite
        if env_id is None:
            env_id = self.add(
                TreeNode(f"env:{name}", f"{name} environment fails assumption", "basic")
            )
        # minimal guarantee-erasure sets that break the entailment
        combos = self._minimal_breaking_sets(
            a, g, [gi for (_c, _ai, gi) in subs], scope
        )
        if combos == [frozenset()]:
            self.warnings.append(
                f"entailment obligation of '{name}' is already invalid; "
                "refinement should be re-checked"
            )
            combos = []
        children_ids = [env_id]
        # child failure nodes (and their environment nodes) built on demand
        child_fail: dict[int, str] = {}

        def child_failure(i: int) -> str:
            if i not in child_fail:
                child, _ai, _gi = subs[i]
                child_env = self._child_env_node(inst, env_id, subs, i, a, scope)
                child_fail[i] = self.failure_node(child, child_env)
            return child_fail[i]

        for combo in combos:
            ids = tuple(child_failure(i) for i in sorted(combo))
            if len(ids) == 1:
                children_ids.append(ids[0])
            else:
                and_id = f"{nid}:and:" + "+".join(
                    subs[i][0].path or "system" for i in sorted(combo)
                )
                self.add(TreeNode(and_id, "joint failure", "and", ids))
                children_ids.append(and_id)
        self._in_progress.discard(nid)
        return self.add(
            TreeNode(nid, f"{name} contract failure", "or", tuple(children_ids))
        )

    def _child_env_node(self, inst, env_id, subs, i, a, scope) -> str:
        """Environment-failure event of child i: minimal erasure sets over
        the parent assumption and sibling guarantees that break the
        discharge obligation of Ai."""
        child, ai, _gi = subs[i]
        name = child.path or "system"
        nid = f"env:{name}"
        if nid in self.nodes or nid in self._in_progress:
            return nid
        self._in_progress.add(nid)
        elements: list[tuple[str, ltl.Formula | None]] = [("env", a)]
        for j, (sibling, _aj, gj) in enumerate(subs):
            if j != i:
                elements.append((f"sub:{j}", gj))
        breaking = self._minimal_discharge_breaking(ai, elements, scope)
        if breaking == [frozenset()]:
            self.warnings.append(
                f"discharge obligation of '{name}' is already invalid"
            )
            breaking = []
        children_ids = []
        for combo in breaking:
            ids = []
            for key in sorted(combo):
                if key == "env":
                    ids.append(env_id)
                else:
                    j = int(key.split(":")[1])
                    sibling = subs[j][0]
                    sib_env = self._child_env_node(inst, env_id, subs, j, a, scope)
                    ids.append(self.failure_node(sibling, sib_env))
            if len(ids) == 1:
                children_ids.append(ids[0])
            else:
                and_id = f"{nid}:and:" + "+".join(sorted(combo))
                self.add(TreeNode(and_id, "joint failure", "and", tuple(ids)))
                children_ids.append(and_id)
        self._in_progress.discard(nid)
        if not children_ids:
            # discharge unbreakable: the assumption is established no matter
            # what fails, so the environment of this child cannot fail
            return self.add(
                TreeNode(nid, f"{name} environment failure (impossible)", "or", ())
            )
        return self.add(
            TreeNode(nid, f"{name} environment fails assumption", "or", tuple(children_ids))
        )

    def _valid(self, formula, scope) -> bool:
        vocab = scope.vocabulary_for([formula])
        return ltl_valid(formula, vocab, automaton_cap=self.automaton_cap).result == "holds"

    def _minimal_breaking_sets(self, a, g, guarantees, scope):
        """Minimal subsets of guarantee indices whose erasure invalidates
        (A and remaining guarantees) -> G."""
        n = len(guarantees)
        found: list[frozenset] = []
        from itertools import combinations

        for size in range(0, n + 1):
            for combo in combinations(range(n), size):
                s = frozenset(combo)
                if any(prev <= s for prev in found):
                    continue
                premise = _conjoin([a] + [gi for j, gi in enumerate(guarantees) if j not in s])
                if not self._valid(ltl.Implies(premise, g), scope):
                    found.append(s)
        return sorted(found, key=lambda s: (len(s), sorted(s)))

    def _minimal_discharge_breaking(self, ai, elements, scope):
        """Minimal subsets of {'env', 'sub:j'...} whose erasure invalidates
        the discharge obligation of Ai."""
        keys = [k for (k, _f) in elements]
        formulas = {k: f for (k, f) in elements}
        found: list[frozenset] = []
        from itertools import combinations

        for size in range(0, len(keys) + 1):
            for combo in combinations(keys, size):
                s = frozenset(combo)
                if any(prev <= s for prev in found):
                    continue
                premise = _conjoin([formulas[k] for k in keys if k not in s])
                if not self._valid(ltl.Implies(premise, ai), scope):
                    found.append(s)
        return sorted(found, key=lambda s: (len(s), sorted(s)))


def contract_safety_tree(
    model: InstanceModel,
    composite: ComponentInstance | None = None,
    *,
    automaton_cap: int = 100_000,
    missing_sub_contract: str = "fail",
) -> ContractFaultTree:
    """Fault tree over contract failures: the top event is the failure of
    the system contract, gated by environment failure and minimal
    combinations of sub-contract failures."""
    if composite is None:
        composite = model.root
    builder = _TreeBuilder(model, automaton_cap, missing_sub_contract)
    root_id = builder.failure_node(composite, None)
    reachable: set[str] = set()
    stack = [root_id]
    while stack:
        nid = stack.pop()
        if nid in reachable:
            continue
        reachable.add(nid)
        stack.extend(builder.nodes[nid].children)
    ordered = tuple(builder.nodes[k] for k in sorted(reachable))
    return ContractFaultTree(root_id, ordered, tuple(builder.warnings))
