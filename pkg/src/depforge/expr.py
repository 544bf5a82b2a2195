"""Typed expressions over ports, variables and parameters.

One expression AST serves transition guards, update right-hand sides,
top-level-event conditions, parameter arithmetic and the atoms of temporal
formulas.  Values are plain Python ``bool``/``int``/``str`` (enumeration
labels are strings).
"""

from __future__ import annotations

from dataclasses import dataclass, field


class ExprError(Exception):
    """Raised when an expression cannot be typed or evaluated."""


# --- value types -----------------------------------------------------------


@dataclass(frozen=True)
class BoolType:
    def values(self):
        return (False, True)

    def default(self):
        return False

    def contains(self, v) -> bool:
        return isinstance(v, bool)

    def __str__(self):
        return "bool"


@dataclass(frozen=True)
class IntType:
    lo: int
    hi: int

    def values(self):
        return tuple(range(self.lo, self.hi + 1))

    def default(self):
        return self.lo

    def contains(self, v) -> bool:
        return isinstance(v, int) and not isinstance(v, bool) and self.lo <= v <= self.hi

    def __str__(self):
        return f"int[{self.lo}..{self.hi}]"


@dataclass(frozen=True)
class EnumType:
    labels: tuple[str, ...]

    def values(self):
        return self.labels

    def default(self):
        return self.labels[0]

    def contains(self, v) -> bool:
        return v in self.labels

    def __str__(self):
        return "enum {%s}" % ", ".join(self.labels)


ValueType = BoolType | IntType | EnumType


# --- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    """One step of a dotted reference, with an optional index expression."""

    name: str
    index: "Expr | None" = None


@dataclass(frozen=True)
class Ref:
    """Dotted, optionally indexed name: ``gen[i].energy``, ``level``, ..."""

    segments: tuple[Segment, ...]

    def __str__(self):
        parts = []
        for seg in self.segments:
            if seg.index is None:
                parts.append(seg.name)
            else:
                parts.append(f"{seg.name}[{seg.index}]")
        return ".".join(parts)


@dataclass(frozen=True)
class IntLit:
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class BoolLit:
    value: bool

    def __str__(self):
        return "true" if self.value else "false"


@dataclass(frozen=True)
class EnumLit:
    """An enumeration label, produced by type resolution of bare names."""

    label: str

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class Unary:
    op: str  # '!' or '-'
    operand: "Expr"

    def __str__(self):
        return f"{self.op}{_paren(self.operand, _UNARY_BIND)}"


@dataclass(frozen=True)
class Binary:
    op: str  # '||' '&&' '==' '!=' '<' '<=' '>' '>=' '+' '-' '*' '/'
    lhs: "Expr"
    rhs: "Expr"

    def __str__(self):
        prec = PRECEDENCE[self.op]
        left = _paren(self.lhs, prec)
        # left-associative: right operand needs parens at equal precedence
        right = _paren(self.rhs, prec + 1)
        return f"{left} {self.op} {right}"


Expr = Ref | IntLit | BoolLit | EnumLit | Unary | Binary

PRECEDENCE = {
    "||": 1,
    "&&": 2,
    "==": 3,
    "!=": 3,
    "<": 3,
    "<=": 3,
    ">": 3,
    ">=": 3,
    "+": 4,
    "-": 4,
    "*": 5,
    "/": 5,
}
_UNARY_BIND = 6


def _paren(e: Expr, min_prec: int) -> str:
    if isinstance(e, Binary) and PRECEDENCE[e.op] < min_prec:
        return f"({e})"
    return str(e)


# --- evaluation ------------------------------------------------------------

_COMPARISONS = ("==", "!=", "<", "<=", ">", ">=")


def evaluate(expr: Expr, env) -> bool | int | str:
    """Evaluate under ``env``, a callable mapping Ref -> value.

    Integer division truncates toward negative infinity (Python ``//``).
    """
    if isinstance(expr, IntLit):
        return expr.value
    if isinstance(expr, BoolLit):
        return expr.value
    if isinstance(expr, EnumLit):
        return expr.label
    if isinstance(expr, Ref):
        return env(expr)
    if isinstance(expr, Unary):
        v = evaluate(expr.operand, env)
        if expr.op == "!":
            return not v
        return -v
    if isinstance(expr, Binary):
        op = expr.op
        if op == "&&":
            return bool(evaluate(expr.lhs, env)) and bool(evaluate(expr.rhs, env))
        if op == "||":
            return bool(evaluate(expr.lhs, env)) or bool(evaluate(expr.rhs, env))
        a = evaluate(expr.lhs, env)
        b = evaluate(expr.rhs, env)
        if op == "==":
            return a == b
        if op == "!=":
            return a != b
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        if op == ">=":
            return a >= b
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0:
                raise ExprError(f"division by zero in '{expr}'")
            return a // b
    raise ExprError(f"cannot evaluate {expr!r}")


def free_refs(expr: Expr) -> list[Ref]:
    """All Ref leaves, in left-to-right order (index expressions included)."""
    out: list[Ref] = []

    def walk(e: Expr):
        if isinstance(e, Ref):
            out.append(e)
            for seg in e.segments:
                if seg.index is not None:
                    walk(seg.index)
        elif isinstance(e, Unary):
            walk(e.operand)
        elif isinstance(e, Binary):
            walk(e.lhs)
            walk(e.rhs)

    walk(expr)
    return out


# --- type checking ---------------------------------------------------------


@dataclass
class TypeEnv:
    """Name -> type lookup plus collected resolution errors."""

    lookup: object  # callable: Ref -> ValueType | None
    errors: list[str] = field(default_factory=list)

    def of(self, expr: Expr) -> ValueType | None:
        return type_of(expr, self)


def type_of(expr: Expr, env: TypeEnv) -> ValueType | None:
    """Infer the type of ``expr``; records problems on ``env.errors``.

    Returns None when the expression does not type-check.  Bare identifier
    leaves that do not resolve to a declared name are reported here, which
    makes this the single name-resolution point for guards, conditions and
    formula atoms.
    """
    if isinstance(expr, IntLit):
        return IntType(expr.value, expr.value)
    if isinstance(expr, BoolLit):
        return BoolType()
    if isinstance(expr, EnumLit):
        return EnumType((expr.label,))
    if isinstance(expr, Ref):
        t = env.lookup(expr)
        if t is None:
            env.errors.append(f"unknown name '{expr}'")
        return t
    if isinstance(expr, Unary):
        t = type_of(expr.operand, env)
        if t is None:
            return None
        if expr.op == "!":
            if not isinstance(t, BoolType):
                env.errors.append(f"'!' applied to non-boolean '{expr.operand}'")
                return None
            return BoolType()
        if not isinstance(t, IntType):
            env.errors.append(f"unary '-' applied to non-integer '{expr.operand}'")
            return None
        return IntType(-t.hi, -t.lo)
    if isinstance(expr, Binary):
        op = expr.op
        if op in _COMPARISONS:
            return _type_comparison(expr, env)
        lt = type_of(expr.lhs, env)
        rt = type_of(expr.rhs, env)
        if lt is None or rt is None:
            return None
        if op in ("&&", "||"):
            if not isinstance(lt, BoolType) or not isinstance(rt, BoolType):
                env.errors.append(f"'{op}' needs boolean operands in '{expr}'")
                return None
            return BoolType()
        # arithmetic
        if not isinstance(lt, IntType) or not isinstance(rt, IntType):
            env.errors.append(f"arithmetic '{op}' needs integer operands in '{expr}'")
            return None
        return _arith_bounds(op, lt, rt)
    raise ExprError(f"unknown expression node {expr!r}")


def _bare_name(e: Expr) -> str | None:
    if isinstance(e, Ref) and len(e.segments) == 1 and e.segments[0].index is None:
        return e.segments[0].name
    return None


def _type_comparison(expr: Binary, env: TypeEnv) -> ValueType | None:
    """Comparisons resolve bare names as enum labels of the opposite side.

    A declared port/variable shadows an identically-named label.
    """
    probe = TypeEnv(env.lookup)
    lt = type_of(expr.lhs, probe)
    rt = type_of(expr.rhs, probe)
    for a, b, side in ((lt, rt, expr.lhs), (rt, lt, expr.rhs)):
        if a is None and isinstance(b, EnumType):
            name = _bare_name(side)
            if name is not None and name in b.labels:
                if side is expr.lhs:
                    lt = EnumType((name,))
                else:
                    rt = EnumType((name,))
    if lt is None or rt is None:
        # re-run on the real env so the resolution errors are recorded
        if lt is None:
            type_of(expr.lhs, env)
        if rt is None:
            type_of(expr.rhs, env)
        return None
    if not _comparable(lt, rt):
        env.errors.append(f"type mismatch: cannot compare {lt} with {rt} in '{expr}'")
        return None
    if expr.op not in ("==", "!=") and not (
        isinstance(lt, IntType) and isinstance(rt, IntType)
    ):
        env.errors.append(f"ordering '{expr.op}' needs integer operands in '{expr}'")
        return None
    return BoolType()


def _comparable(a: ValueType, b: ValueType) -> bool:
    if isinstance(a, BoolType) and isinstance(b, BoolType):
        return True
    if isinstance(a, IntType) and isinstance(b, IntType):
        return True
    if isinstance(a, EnumType) and isinstance(b, EnumType):
        return bool(set(a.labels) & set(b.labels)) or True
    return False


def _arith_bounds(op: str, a: IntType, b: IntType) -> IntType:
    if op == "+":
        return IntType(a.lo + b.lo, a.hi + b.hi)
    if op == "-":
        return IntType(a.lo - b.hi, a.hi - b.lo)
    cands = []
    for x in (a.lo, a.hi):
        for y in (b.lo, b.hi):
            if op == "*":
                cands.append(x * y)
            elif y != 0:
                cands.append(x // y)
    if not cands:
        cands = [0]
    return IntType(min(cands), max(cands))
