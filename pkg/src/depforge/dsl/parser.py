"""Recursive-descent parser for .dep files.

Recovers at statement boundaries so one malformed declaration yields one
diagnostic instead of a parse abort; arbitrary byte input never raises.
"""

from __future__ import annotations

import posixpath

from .. import model as m
from .. import ltl
from ..expr import Binary, BoolLit, Expr, IntLit, Ref, Segment, Unary
from .diagnostics import Diagnostic, SourceFile, Span, sort_key
from .lexer import Token, tokenize

_CMP_OPS = ("==", "!=", "<=", ">=", "<", ">")


class _ParseError(Exception):
    pass


class _Parser:
    def __init__(self, path: str, tokens: list[Token], diags: list[Diagnostic]):
        self.path = path
        self.toks = tokens
        self.pos = 0
        self.diags = diags

    # --- token helpers ---

    @property
    def cur(self) -> Token:
        return self.toks[self.pos]

    def at(self, kind: str, value: str | None = None) -> bool:
        t = self.cur
        return t.kind == kind and (value is None or t.value == value)

    def at_kw(self, *words: str) -> bool:
        return self.cur.kind == "keyword" and self.cur.value in words

    def at_punct(self, *vals: str) -> bool:
        return self.cur.kind == "punct" and self.cur.value in vals

    def at_word(self, *words: str) -> bool:
        """Contextual keyword: an identifier with a specific spelling."""
        return self.cur.kind == "ident" and self.cur.value in words

    def peek(self, offset: int) -> Token:
        i = min(self.pos + offset, len(self.toks) - 1)
        return self.toks[i]

    def advance(self) -> Token:
        t = self.cur
        if t.kind != "eof":
            self.pos += 1
        return t

    def error(self, message: str, span: Span | None = None):
        self.diags.append(
            Diagnostic("error", self.path, span or self.cur.span, message)
        )
        raise _ParseError

    def expect_punct(self, val: str) -> Token:
        if not self.at_punct(val):
            self.error(f"expected '{val}', found {self._show(self.cur)}")
        return self.advance()

    def expect_kw(self, word: str) -> Token:
        if not self.at_kw(word):
            self.error(f"expected '{word}', found {self._show(self.cur)}")
        return self.advance()

    def expect_word(self, word: str) -> Token:
        if not self.at_word(word):
            self.error(f"expected '{word}', found {self._show(self.cur)}")
        return self.advance()

    def expect_ident(self, what: str = "identifier") -> str:
        if self.cur.kind != "ident":
            self.error(f"expected {what}, found {self._show(self.cur)}")
        return self.advance().value

    @staticmethod
    def _show(t: Token) -> str:
        if t.kind == "eof":
            return "end of file"
        return f"'{t.value}'"

    def skip_statement(self):
        """Recovery: consume up to and including ';', or stop before '}'."""
        depth = 0
        while True:
            t = self.cur
            if t.kind == "eof":
                return
            if t.kind == "punct":
                if t.value == "{":
                    depth += 1
                elif t.value == "}":
                    if depth == 0:
                        return
                    depth -= 1
                elif t.value == ";" and depth == 0:
                    self.advance()
                    return
            self.advance()

    # --- file structure ---

    def parse_file(self):
        imports: list[str] = []
        while self.at_kw("import"):
            self.advance()
            if self.cur.kind != "string":
                self.diags.append(
                    Diagnostic("error", self.path, self.cur.span, "expected import path string")
                )
                self.skip_statement()
                continue
            imports.append(self.advance().value)
            if self.at_punct(";"):
                self.advance()
            else:
                self.diags.append(
                    Diagnostic("error", self.path, self.cur.span, "expected ';' after import")
                )
        name = None
        blocks: list[m.BlockDef] = []
        reqs: list[m.Requirement] = []
        configs: list[m.ConfigDecl] = []
        tles: list[m.TleDecl] = []
        root: tuple[str, Span] | None = None
        try:
            self.expect_kw("model")
            name = self.expect_ident("model name")
            open_brace = self.cur.span
            self.expect_punct("{")
        except _ParseError:
            return imports, None, blocks, reqs, configs, tles, None
        while not self.at_punct("}") and self.cur.kind != "eof":
            try:
                if self.at_kw("block"):
                    blocks.append(self.parse_block())
                elif self.at_kw("root"):
                    self.advance()
                    root = (self.expect_ident("root block name"), self.cur.span)
                    self.expect_punct(";")
                elif self.at_kw("requirement"):
                    reqs.append(self.parse_requirement())
                elif self.at_kw("configuration"):
                    configs.append(self.parse_configuration())
                elif self.at_word("tle"):
                    self.advance()
                    tname = self.expect_ident("top-level event name")
                    self.expect_punct(":")
                    cond = self.parse_expr()
                    self.expect_punct(";")
                    tles.append(m.TleDecl(tname, cond))
                else:
                    self.error(f"unexpected {self._show(self.cur)} in model body")
            except _ParseError:
                self.skip_statement()
        if self.cur.kind == "eof":
            self.diags.append(
                Diagnostic("error", self.path, open_brace, "unterminated model block")
            )
        else:
            self.advance()
        return imports, name, blocks, reqs, configs, tles, root

    def parse_block(self) -> m.BlockDef:
        self.expect_kw("block")
        name = self.expect_ident("block name")
        open_brace = self.cur.span
        self.expect_punct("{")
        params: list[m.Parameter] = []
        ports: list[m.PortDef] = []
        subs: list[m.SubcomponentDef] = []
        conns: list[m.Connection] = []
        contracts: list[m.Contract] = []
        behavior = None
        errmodels: list[m.ErrorModel] = []
        allocation = None
        while not self.at_punct("}") and self.cur.kind != "eof":
            try:
                if self.at_kw("param"):
                    params.append(self.parse_param())
                elif self.at_kw("port"):
                    ports.append(self.parse_port())
                elif self.at_kw("sub"):
                    subs.append(self.parse_sub())
                elif self.at_kw("connect"):
                    conns.append(self.parse_connect())
                elif self.at_kw("contract"):
                    contracts.append(self.parse_contract())
                elif self.at_kw("behavior"):
                    if behavior is not None:
                        self.error("duplicate behavior block")
                    behavior = self.parse_behavior()
                elif self.at_kw("error"):
                    errmodels.append(self.parse_error_model())
                elif self.at_kw("allocate"):
                    self.advance()
                    allocation = self.expect_ident("node tag")
                    self.expect_punct(";")
                else:
                    self.error(f"unexpected {self._show(self.cur)} in block body")
            except _ParseError:
                self.skip_statement()
        if self.cur.kind == "eof":
            self.diags.append(
                Diagnostic("error", self.path, open_brace, "unterminated block")
            )
        else:
            self.advance()
        return m.BlockDef(
            name=name,
            parameters=tuple(params),
            ports=tuple(ports),
            subcomponents=tuple(subs),
            connections=tuple(conns),
            contracts=tuple(contracts),
            behavior=behavior,
            error_models=tuple(errmodels),
            allocation=allocation,
        )

    def parse_param(self) -> m.Parameter:
        self.expect_kw("param")
        name = self.expect_ident("parameter name")
        lo = hi = default = None
        if self.at_kw("in"):
            self.advance()
            lo = self.parse_int_literal()
            self.expect_punct("..")
            hi = self.parse_int_literal()
        if self.at_punct("="):
            self.advance()
            default = self.parse_int_literal()
        self.expect_punct(";")
        return m.Parameter(name, lo, hi, default)

    def parse_port(self) -> m.PortDef:
        self.expect_kw("port")
        if self.at_kw("in"):
            direction = "in"
        elif self.at_kw("out"):
            direction = "out"
        else:
            self.error("expected 'in' or 'out' after 'port'")
        self.advance()
        name = self.expect_ident("port name")
        mult: Expr = IntLit(1)
        if self.at_punct("["):
            self.advance()
            mult = self.parse_expr()
            self.expect_punct("]")
        self.expect_punct(":")
        vtype = self.parse_value_type()
        init = None
        if self.at_punct("="):
            if direction != "out":
                self.error("only out-ports take an initial value")
            self.advance()
            init = self.parse_value_literal()
        self.expect_punct(";")
        return m.PortDef(name, direction, vtype, mult, init)

    def parse_value_type(self):
        from ..expr import BoolType, EnumType, IntType

        if self.at_kw("bool"):
            self.advance()
            return BoolType()
        if self.at_kw("int"):
            self.advance()
            self.expect_punct("[")
            lo = self.parse_int_literal()
            self.expect_punct("..")
            hi = self.parse_int_literal()
            self.expect_punct("]")
            return IntType(lo, hi)
        if self.at_kw("enum"):
            self.advance()
            self.expect_punct("{")
            labels = [self.expect_ident("enumeration label")]
            while self.at_punct(","):
                self.advance()
                labels.append(self.expect_ident("enumeration label"))
            self.expect_punct("}")
            return EnumType(tuple(labels))
        self.error("expected a value type (bool, int[lo..hi] or enum {...})")

    def parse_int_literal(self) -> int:
        neg = False
        if self.at_punct("-"):
            self.advance()
            neg = True
        if self.cur.kind != "int":
            self.error("expected integer literal")
        v = int(self.advance().value)
        return -v if neg else v

    def parse_value_literal(self):
        if self.at_kw("true"):
            self.advance()
            return True
        if self.at_kw("false"):
            self.advance()
            return False
        if self.cur.kind == "ident":
            return self.advance().value  # enumeration label
        return self.parse_int_literal()

    def parse_sub(self) -> m.SubcomponentDef:
        self.expect_kw("sub")
        name = self.expect_ident("sub-component name")
        mult: Expr = IntLit(1)
        if self.at_punct("["):
            self.advance()
            mult = self.parse_expr()
            self.expect_punct("]")
        self.expect_punct(":")
        block = self.expect_ident("block name")
        self.expect_punct(";")
        return m.SubcomponentDef(name, block, mult)

    def parse_connect(self) -> m.Connection:
        self.expect_kw("connect")
        comp = None
        if (
            self.at_word("all")
            and self.peek(1).kind == "ident"
            and self.peek(2).kind == "punct"
            and self.peek(2).value == ":"
        ):
            self.advance()
            comp = self.expect_ident("index variable")
            self.expect_punct(":")
        source = self.parse_ref()
        self.expect_punct("->")
        target = self.parse_ref()
        self.expect_punct(";")
        return m.Connection(source, target, comp)

    def parse_contract(self) -> m.Contract:
        self.expect_kw("contract")
        name = self.expect_ident("contract name")
        self.expect_punct("{")
        self.expect_kw("assume")
        assumption = self.parse_formula()
        self.expect_punct(";")
        self.expect_kw("guarantee")
        guarantee = self.parse_formula()
        self.expect_punct(";")
        self.expect_punct("}")
        return m.Contract(name, assumption, guarantee)

    def parse_behavior(self) -> m.StateMachine:
        self.expect_kw("behavior")
        self.expect_punct("{")
        self.expect_word("states")
        states = [self.expect_ident("state name")]
        while self.at_punct(","):
            self.advance()
            states.append(self.expect_ident("state name"))
        self.expect_punct(";")
        self.expect_word("initial")
        initial = self.expect_ident("initial state")
        self.expect_punct(";")
        variables: list[m.VarDecl] = []
        transitions: list[m.Transition] = []
        while not self.at_punct("}") and self.cur.kind != "eof":
            if self.at_kw("var"):
                self.advance()
                vname = self.expect_ident("variable name")
                self.expect_punct(":")
                vtype = self.parse_value_type()
                self.expect_punct("=")
                init = self.parse_value_literal()
                self.expect_punct(";")
                variables.append(m.VarDecl(vname, vtype, init))
            elif self.at_kw("transition"):
                transitions.append(self.parse_transition())
            else:
                self.error(f"unexpected {self._show(self.cur)} in behavior")
        self.expect_punct("}")
        return m.StateMachine(tuple(states), initial, tuple(variables), tuple(transitions))

    def parse_transition(self) -> m.Transition:
        self.expect_kw("transition")
        source = self.expect_ident("source state")
        self.expect_punct("->")
        target = self.expect_ident("target state")
        guard = None
        if self.at_word("when"):
            self.advance()
            guard = self.parse_expr()
        updates: list[m.Assignment] = []
        if self.at_punct("{"):
            self.advance()
            while not self.at_punct("}") and self.cur.kind != "eof":
                tgt = self.parse_ref()
                self.expect_punct(":=")
                value = self.parse_expr()
                self.expect_punct(";")
                updates.append(m.Assignment(tgt, value))
            self.expect_punct("}")
        else:
            self.expect_punct(";")
        return m.Transition(source, target, guard, tuple(updates))

    def parse_error_model(self) -> m.ErrorModel:
        self.expect_kw("error")
        self.expect_kw("model")
        name = self.expect_ident("error model name")
        self.expect_punct("{")
        self.expect_word("states")
        states = [self.parse_error_state()]
        while self.at_punct(","):
            self.advance()
            states.append(self.parse_error_state())
        self.expect_punct(";")
        self.expect_word("initial")
        initial = self.expect_ident("initial state")
        self.expect_punct(";")
        transitions: list[m.ErrorTransition] = []
        effects: list[m.EffectsDecl] = []
        while not self.at_punct("}") and self.cur.kind != "eof":
            if self.at_kw("transition"):
                transitions.append(self.parse_error_transition())
            elif self.at_kw("effects"):
                effects.append(self.parse_effects())
            else:
                self.error(f"unexpected {self._show(self.cur)} in error model")
        self.expect_punct("}")
        return m.ErrorModel(name, tuple(states), initial, tuple(transitions), tuple(effects))

    def parse_error_state(self) -> m.ErrorState:
        name = self.expect_ident("error-model state name")
        tag = m.NORMAL
        if self.at_punct(":"):
            self.advance()
            if self.at_kw("error"):
                self.advance()
                tag = m.ERROR
            else:
                word = self.expect_ident("state tag")
                if word not in (m.NORMAL, m.FAILURE):
                    self.error("state tag must be normal, error or failure")
                tag = word
        return m.ErrorState(name, tag)

    def parse_error_transition(self) -> m.ErrorTransition:
        self.expect_kw("transition")
        source = self.expect_ident("source state")
        self.expect_punct("->")
        target = self.expect_ident("target state")
        self.expect_word("on")
        trigger = self.parse_trigger()
        guard = None
        if self.at_word("if"):
            self.advance()
            guard = self.parse_expr()
        self.expect_punct(";")
        return m.ErrorTransition(source, target, trigger, guard)

    def parse_trigger(self) -> m.Trigger:
        if self.at_kw("fault"):
            self.advance()
            name = self.expect_ident("fault name")
            prob, rate = self.parse_prob_or_rate()
            return m.Trigger("fault", name, None, prob, rate)
        if self.at_kw("threat"):
            self.advance()
            name = self.expect_ident("threat name")
            self.expect_word("from")
            agent = self.expect_ident("source agent")
            prob, rate = self.parse_prob_or_rate()
            return m.Trigger("threat", name, agent, prob, rate)
        self.error("expected 'fault' or 'threat' trigger")

    def parse_prob_or_rate(self):
        prob = rate = None
        if self.at_word("prob"):
            self.advance()
            prob = self.parse_number()
        elif self.at_word("rate"):
            self.advance()
            rate = self.parse_number()
        return prob, rate

    def parse_number(self) -> float:
        if self.cur.kind not in ("int", "float"):
            self.error("expected a number")
        return float(self.advance().value)

    def parse_effects(self) -> m.EffectsDecl:
        self.expect_kw("effects")
        state = self.expect_ident("state name")
        self.expect_punct("{")
        effects: list[m.Effect] = []
        while not self.at_punct("}") and self.cur.kind != "eof":
            if self.at_word("stuck") and not (
                self.peek(1).kind == "punct" and self.peek(1).value in (".", "[")
            ):
                self.advance()
                target = self.parse_ref()
                self.expect_word("at")
                value = self.parse_value_literal()
                self.expect_punct(";")
                effects.append(m.StuckAt(target, value))
            elif self.at_word("lose"):
                self.advance()
                which = self.expect_ident("one of confidentiality/integrity/availability")
                if which not in ("confidentiality", "integrity", "availability"):
                    self.error("expected confidentiality, integrity or availability")
                self.expect_punct(";")
                effects.append(m.CIALoss(which))
            else:
                self.error(f"unexpected {self._show(self.cur)} in effects")
        self.expect_punct("}")
        return m.EffectsDecl(state, tuple(effects))

    def parse_requirement(self) -> m.Requirement:
        self.expect_kw("requirement")
        rid = self.expect_ident("requirement id")
        if self.cur.kind != "string":
            self.error("expected requirement text string")
        text = self.advance().value
        refs: list[Ref] = []
        parent = None
        if self.at_word("satisfied"):
            self.advance()
            self.expect_word("by")
            refs.append(self.parse_ref())
            while self.at_punct(","):
                self.advance()
                refs.append(self.parse_ref())
        if self.at_word("parent"):
            self.advance()
            parent = self.expect_ident("parent requirement id")
        self.expect_punct(";")
        return m.Requirement(rid, text, tuple(refs), parent)

    def parse_configuration(self) -> m.ConfigDecl:
        self.expect_kw("configuration")
        name = self.expect_ident("configuration name")
        self.expect_punct("{")
        bindings: list[tuple[str, int]] = []
        while not self.at_punct("}") and self.cur.kind != "eof":
            pname = self.expect_ident("parameter name")
            self.expect_punct("=")
            bindings.append((pname, self.parse_int_literal()))
            self.expect_punct(";")
        self.expect_punct("}")
        return m.ConfigDecl(name, tuple(bindings))

    # --- expressions ---

    def parse_ref(self) -> Ref:
        segs = [self.parse_segment()]
        while self.at_punct("."):
            self.advance()
            segs.append(self.parse_segment())
        return Ref(tuple(segs))

    def parse_segment(self) -> Segment:
        name = self.expect_ident("name")
        index = None
        if self.at_punct("["):
            self.advance()
            index = self.parse_expr()
            self.expect_punct("]")
        return Segment(name, index)

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        e = self.parse_and()
        while self.at_punct("||"):
            self.advance()
            e = Binary("||", e, self.parse_and())
        return e

    def parse_and(self) -> Expr:
        e = self.parse_cmp()
        while self.at_punct("&&"):
            self.advance()
            e = Binary("&&", e, self.parse_cmp())
        return e

    def parse_cmp(self) -> Expr:
        e = self.parse_add()
        if self.at_punct(*_CMP_OPS):
            op = self.advance().value
            return Binary(op, e, self.parse_add())
        return e

    def parse_add(self) -> Expr:
        e = self.parse_mul()
        while self.at_punct("+", "-"):
            op = self.advance().value
            e = Binary(op, e, self.parse_mul())
        return e

    def parse_mul(self) -> Expr:
        e = self.parse_unary()
        while self.at_punct("*", "/"):
            op = self.advance().value
            e = Binary(op, e, self.parse_unary())
        return e

    def parse_unary(self) -> Expr:
        if self.at_punct("!"):
            self.advance()
            return Unary("!", self.parse_unary())
        if self.at_punct("-"):
            self.advance()
            return Unary("-", self.parse_unary())
        if self.at_punct("("):
            self.advance()
            e = self.parse_expr()
            self.expect_punct(")")
            return e
        if self.at_kw("true"):
            self.advance()
            return BoolLit(True)
        if self.at_kw("false"):
            self.advance()
            return BoolLit(False)
        if self.cur.kind == "int":
            return IntLit(int(self.advance().value))
        if self.cur.kind == "ident":
            return self.parse_ref()
        self.error(f"expected expression, found {self._show(self.cur)}")

    # --- LTL formulas ---

    def parse_formula(self) -> ltl.Formula:
        return self.parse_f_implies()

    def parse_f_implies(self) -> ltl.Formula:
        f = self.parse_f_or()
        if self.at_punct("->"):
            self.advance()
            return ltl.Implies(f, self.parse_f_implies())
        return f

    def parse_f_or(self) -> ltl.Formula:
        f = self.parse_f_and()
        while self.at_punct("||"):
            self.advance()
            f = ltl.Or(f, self.parse_f_and())
        return f

    def parse_f_and(self) -> ltl.Formula:
        f = self.parse_f_until()
        while self.at_punct("&&"):
            self.advance()
            f = ltl.And(f, self.parse_f_until())
        return f

    def parse_f_until(self) -> ltl.Formula:
        f = self.parse_f_unary()
        if self.at("ident", "U"):
            self.advance()
            return ltl.Until(f, self.parse_f_until())
        if self.at("ident", "R"):
            self.advance()
            return ltl.Release(f, self.parse_f_until())
        return f

    def parse_f_unary(self) -> ltl.Formula:
        if self.at_punct("!"):
            self.advance()
            return ltl.Not(self.parse_f_unary())
        for word, node in (("G", ltl.Globally), ("F", ltl.Finally), ("X", ltl.Next)):
            if self.at("ident", word):
                self.advance()
                return node(self.parse_f_unary())
        if self.at_kw("forall"):
            self.advance()
            var = self.expect_ident("index variable")
            self.expect_punct(":")
            return ltl.Forall(var, self.parse_f_unary())
        if self.at_punct("("):
            self.advance()
            f = self.parse_formula()
            self.expect_punct(")")
            return f
        return self.parse_f_atom()

    def parse_f_atom(self) -> ltl.Formula:
        if self.at_kw("true"):
            self.advance()
            return ltl.Atom(BoolLit(True))
        if self.at_kw("false"):
            self.advance()
            return ltl.Atom(BoolLit(False))
        if self.cur.kind != "ident":
            self.error(f"expected formula atom, found {self._show(self.cur)}")
        ref = self.parse_ref()
        if self.at_punct(*_CMP_OPS):
            op = self.advance().value
            rhs = self.parse_atom_operand()
            return ltl.Atom(Binary(op, ref, rhs))
        return ltl.Atom(ref)

    def parse_atom_operand(self) -> Expr:
        if self.at_kw("true"):
            self.advance()
            return BoolLit(True)
        if self.at_kw("false"):
            self.advance()
            return BoolLit(False)
        if self.cur.kind == "ident":
            return self.parse_ref()
        return IntLit(self.parse_int_literal())


def _parse_single(src: SourceFile):
    tokens, diags = tokenize(src.path, src.text)
    p = _Parser(src.path, tokens, diags)
    try:
        result = p.parse_file()
    except _ParseError:
        result = ([], None, [], [], [], [], None)
    except RecursionError:
        diags.append(
            Diagnostic("error", src.path, Span(1, 1, 0), "input nested too deeply")
        )
        result = ([], None, [], [], [], [], None)
    return result, diags


def parse_model(sources: list[SourceFile]):
    """Parse an entry file plus the imports it names.

    ``sources[0]`` is the entry point; the remaining sources are the import
    universe, keyed by path relative to the importing file.  Returns
    ``(model | None, diagnostics)``; the model is None iff an error-severity
    diagnostic was produced.  Diagnostics are sorted by (file, line, column).
    """
    by_path = {posixpath.normpath(s.path): s for s in sources}
    diags: list[Diagnostic] = []
    loaded: dict[str, tuple] = {}
    loading: list[str] = []

    def load(path: str) -> tuple | None:
        norm = posixpath.normpath(path)
        if norm in loading:
            diags.append(
                Diagnostic("error", norm, Span(1, 1, 0), "import cycle detected")
            )
            return None
        if norm in loaded:
            return loaded[norm]
        src = by_path.get(norm)
        if src is None:
            return None
        loading.append(norm)
        result, file_diags = _parse_single(src)
        diags.extend(file_diags)
        imports, name, blocks, reqs, configs, tles, root = result
        all_blocks: list[m.BlockDef] = []
        all_reqs: list[m.Requirement] = []
        all_configs: list[m.ConfigDecl] = []
        all_tles: list[m.TleDecl] = []
        roots = []
        base = posixpath.dirname(norm)
        for imp in imports:
            resolved = posixpath.normpath(posixpath.join(base, imp))
            sub = load(resolved)
            if sub is None:
                if resolved not in loaded and resolved not in loading:
                    diags.append(
                        Diagnostic(
                            "error", norm, Span(1, 1, 0),
                            f"import '{imp}' not found",
                        )
                    )
                continue
            _, sb, sr, sc, st, srt = sub
            all_blocks.extend(sb)
            all_reqs.extend(sr)
            all_configs.extend(sc)
            all_tles.extend(st)
            if srt is not None:
                roots.append(srt)
        all_blocks.extend(blocks)
        all_reqs.extend(reqs)
        all_configs.extend(configs)
        all_tles.extend(tles)
        if root is not None:
            roots.append(root)
        merged_root = roots[0] if roots else None
        if len(roots) > 1:
            diags.append(
                Diagnostic(
                    "error", norm, Span(1, 1, 0),
                    "multiple root declarations across imported files",
                )
            )
        loading.pop()
        loaded[norm] = (name, all_blocks, all_reqs, all_configs, all_tles, merged_root)
        return loaded[norm]

    entry = posixpath.normpath(sources[0].path)
    result = load(entry)
    diags.sort(key=sort_key)
    if result is None:
        return None, diags
    name, blocks, reqs, configs, tles, root = result
    if any(d.severity == "error" for d in diags):
        return None, diags
    if name is None:
        return None, diags
    if root is None:
        diags.append(
            Diagnostic("error", entry, Span(1, 1, 0), "missing 'root' declaration")
        )
        return None, diags
    model = m.ArchitectureModel(
        name=name,
        blocks=tuple(blocks),
        requirements=tuple(reqs),
        configurations=tuple(configs),
        tles=tuple(tles),
        root=root[0],
    )
    return model, diags


def parse_expr_text(text: str) -> Expr:
    """Parse a standalone condition/guard expression (CLI helper)."""
    tokens, diags = tokenize("<expr>", text)
    p = _Parser("<expr>", tokens, diags)
    try:
        e = p.parse_expr()
    except _ParseError:
        raise ValueError("; ".join(str(d) for d in diags) or "syntax error")
    if p.cur.kind != "eof" or diags:
        raise ValueError(f"trailing input or bad expression in {text!r}")
    return e


def parse_formula_text(text: str) -> ltl.Formula:
    """Parse a standalone LTL formula (CLI helper, tests)."""
    tokens, diags = tokenize("<formula>", text)
    p = _Parser("<formula>", tokens, diags)
    try:
        f = p.parse_formula()
    except _ParseError:
        raise ValueError("; ".join(str(d) for d in diags) or "syntax error")
    if p.cur.kind != "eof" or diags:
        raise ValueError(f"trailing input or bad formula in {text!r}")
    return f
