"""Propositional LTL over finite-domain atoms.

Atoms are boolean expressions (port/variable comparisons or bare boolean
names) from :mod:`depforge.expr`.  Surface syntax and printing precedence,
loosest to tightest::

    ->   ||   &&   U R   ! G F X

``->``, ``U`` and ``R`` associate to the right.  The printer emits minimal
parentheses and round-trips through the DSL parser.
"""

from __future__ import annotations

from dataclasses import dataclass

from .expr import BoolLit, Expr, free_refs


@dataclass(frozen=True)
class Atom:
    expr: Expr


@dataclass(frozen=True)
class Not:
    operand: "Formula"


@dataclass(frozen=True)
class Next:
    operand: "Formula"


@dataclass(frozen=True)
class Globally:
    operand: "Formula"


@dataclass(frozen=True)
class Finally:
    operand: "Formula"


@dataclass(frozen=True)
class And:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Or:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Implies:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Until:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Release:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Forall:
    """Index-quantification sugar; expanded during instantiation."""

    var: str
    body: "Formula"


Formula = Atom | Not | Next | Globally | Finally | And | Or | Implies | Until | Release | Forall

_PREC_IMPLIES = 1
_PREC_OR = 2
_PREC_AND = 3
_PREC_UNTIL = 4
_PREC_UNARY = 5
_PREC_ATOM = 6

_UNARY_OPS = {Not: "!", Next: "X", Globally: "G", Finally: "F"}
_BINARY = {
    Implies: ("->", _PREC_IMPLIES),
    Or: ("||", _PREC_OR),
    And: ("&&", _PREC_AND),
    Until: ("U", _PREC_UNTIL),
    Release: ("R", _PREC_UNTIL),
}
_RIGHT_ASSOC = (Implies, Until, Release)


def _prec(f: Formula) -> int:
    t = type(f)
    if t is Atom:
        return _PREC_ATOM
    if t in _UNARY_OPS:
        return _PREC_UNARY
    if t is Forall:
        return _PREC_IMPLIES
    return _BINARY[t][1]


def to_text(f: Formula) -> str:
    """Render with minimal parentheses."""
    t = type(f)
    if t is Atom:
        return str(f.expr)
    if t in _UNARY_OPS:
        op = _UNARY_OPS[t]
        inner = to_text(f.operand)
        if _prec(f.operand) >= _PREC_UNARY:
            sep = "" if op == "!" else " "
            return f"{op}{sep}{inner}"
        return f"{op}({inner})"
    if t is Forall:
        return f"forall {f.var}: {to_text(f.body)}"
    op, prec = _BINARY[t]
    if t in _RIGHT_ASSOC:
        lneed, rneed = prec + 1, prec
    else:
        lneed, rneed = prec, prec + 1
    lhs = to_text(f.lhs)
    rhs = to_text(f.rhs)
    if _prec(f.lhs) < lneed:
        lhs = f"({lhs})"
    if _prec(f.rhs) < rneed:
        rhs = f"({rhs})"
    return f"{lhs} {op} {rhs}"


def atoms_of(f: Formula) -> list[Expr]:
    """Atom expressions in first-occurrence order."""
    seen: list[Expr] = []

    def walk(g: Formula):
        if isinstance(g, Atom):
            if g.expr not in seen:
                seen.append(g.expr)
        elif isinstance(g, (Not, Next, Globally, Finally)):
            walk(g.operand)
        elif isinstance(g, Forall):
            walk(g.body)
        else:
            walk(g.lhs)
            walk(g.rhs)

    walk(f)
    return seen


def refs_of(f: Formula):
    """All Refs appearing in the formula's atoms."""
    out = []
    for a in atoms_of(f):
        out.extend(free_refs(a))
    return out


def map_atoms(f: Formula, fn) -> Formula:
    """Rebuild the formula with ``fn`` applied to every atom expression."""
    if isinstance(f, Atom):
        return Atom(fn(f.expr))
    if isinstance(f, (Not, Next, Globally, Finally)):
        return type(f)(map_atoms(f.operand, fn))
    if isinstance(f, Forall):
        return Forall(f.var, map_atoms(f.body, fn))
    return type(f)(map_atoms(f.lhs, fn), map_atoms(f.rhs, fn))


TRUE = Atom(BoolLit(True))
FALSE = Atom(BoolLit(False))
