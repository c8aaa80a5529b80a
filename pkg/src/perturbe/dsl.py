"""A straight-line expression language.

Grammar (``^`` binds tightest and is right-associative, then unary minus,
then ``* /``, then ``+ -``)::

    program := (stmt SEP)* expr SEP*
    stmt    := "let" NAME "=" expr
    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" unary)?
    atom    := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"

``SEP`` is ``;`` or a newline outside parentheses; ``#`` starts a comment.
Numbers are decimal (correctly rounded to binary64) or C99 hex floats.  A
unary minus applied directly to a number literal folds into the literal.

Evaluation is left-to-right, depth-first; each operator or function call is
one atomic operation.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Union

from .condnum import AtomicOp, evaluate
from .errors import BindingError, DomainError, EvaluationError, NonFiniteError, ParseError
from .metrics import DEFAULT_SIGNIFICANCE
from .shadow import (
    DEFAULT_POLICY,
    ErrorReport,
    PerturbationPolicy,
    TraceLog,
    TrackedPair,
    apply,
    finish,
    track,
)

__all__ = [
    "Num",
    "Var",
    "Unary",
    "Binary",
    "Let",
    "Program",
    "parse",
    "to_source",
    "parse_number",
    "eval_plain",
    "eval_tracked",
    "eval_oracle",
    "run",
]

FUNCTIONS = {
    name: AtomicOp(name)
    for name in ("sin", "cos", "tan", "asin", "acos", "sinh", "cosh", "exp", "log", "log10", "sqrt", "neg")
}
_BINOPS = {"+": AtomicOp.ADD, "-": AtomicOp.SUB, "*": AtomicOp.MUL, "/": AtomicOp.DIV, "^": AtomicOp.POW}


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float
    text: str
    span: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    span: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Unary:
    op: AtomicOp
    operand: "Node"
    span: tuple[int, int] | None = field(default=None, compare=False)
    # "-x" and "neg(x)" are the same operation; keep the spelling for printing
    call: bool = field(default=True, compare=False)


@dataclass(frozen=True)
class Binary:
    op: AtomicOp
    left: "Node"
    right: "Node"
    span: tuple[int, int] | None = field(default=None, compare=False)


Node = Union[Num, Var, Unary, Binary]


@dataclass(frozen=True)
class Let:
    name: str
    expr: Node
    span: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Program:
    lets: tuple[Let, ...]
    result: Node

    @property
    def parameters(self) -> tuple[str, ...]:
        """Free variables in order of first use."""
        bound: set[str] = set()
        seen: dict[str, None] = {}

        def visit(node):
            if isinstance(node, Var):
                if node.name not in bound:
                    seen.setdefault(node.name)
            elif isinstance(node, Unary):
                visit(node.operand)
            elif isinstance(node, Binary):
                visit(node.left)
                visit(node.right)

        for let in self.lets:
            visit(let.expr)
            bound.add(let.name)
        visit(self.result)
        return tuple(seen)

    def __str__(self) -> str:
        return to_source(self)


# --- lexer -----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<number>
        0[xX](?:[0-9a-fA-F]+(?:\.[0-9a-fA-F]*)?|\.[0-9a-fA-F]+)(?:[pP][+-]?\d+)?
      | (?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?
    )
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()=;])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # number, name, op, sep, eof
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, line_start, depth = 1, 0, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        if kind == "newline":
            if depth == 0:
                tokens.append(_Token("sep", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind == "op":
            depth += tok == "("
            depth -= tok == ")"
            tokens.append(_Token("sep" if tok == ";" else "op", tok, line, col))
        elif kind in ("number", "name"):
            tokens.append(_Token(kind, tok, line, col))
        pos = m.end()
    tokens.append(_Token("eof", "", line, len(text) - line_start + 1))
    return tokens


def parse_number(text: str) -> float:
    """Correctly rounded binary64 value of a decimal or hex-float string."""
    t = text.strip()
    body = t.lstrip("+-")
    if body[:2].lower() == "0x":
        return float.fromhex(t)
    return float(t)


# --- parser ----------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def _advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def _error(self, message: str, tok: _Token | None = None):
        tok = tok or self.tok
        what = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ParseError(f"{message}, found {what}", tok.line, tok.col)

    def _expect(self, text: str) -> _Token:
        if self.tok.text != text or self.tok.kind not in ("op", "sep"):
            self._error(f"expected {text!r}")
        return self._advance()

    def _skip_seps(self):
        while self.tok.kind == "sep":
            self._advance()

    def program(self) -> Program:
        lets: list[Let] = []
        bound: set[str] = set()
        used_free: set[str] = set()
        self._skip_seps()
        while self.tok.kind == "name" and self.tok.text == "let":
            start = self._advance()
            name_tok = self.tok
            if name_tok.kind != "name" or name_tok.text == "let":
                self._error("expected a name after 'let'")
            name = self._advance().text
            if name in FUNCTIONS:
                raise ParseError(f"cannot bind function name {name!r}", name_tok.line, name_tok.col)
            if name in bound:
                raise ParseError(f"{name!r} is already bound", name_tok.line, name_tok.col)
            if name in used_free:
                raise ParseError(f"{name!r} used before it is bound", name_tok.line, name_tok.col)
            self._expect("=")
            expr = self.expr()
            for var in _free_vars(expr, bound):
                if var == name:
                    raise ParseError(f"{name!r} used before it is bound", name_tok.line, name_tok.col)
                used_free.add(var)
            lets.append(Let(name, expr, (start.line, start.col)))
            bound.add(name)
            if self.tok.kind != "sep":
                self._error("expected ';' or newline after let binding")
            self._skip_seps()
        if self.tok.kind == "eof":
            self._error("expected an expression")
        result = self.expr()
        self._skip_seps()
        if self.tok.kind != "eof":
            if self.tok.kind == "name" and self.tok.text == "let":
                self._error("let binding after the result expression")
            self._error("expected end of program")
        return Program(tuple(lets), result)

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            tok = self._advance()
            node = Binary(_BINOPS[tok.text], node, self.term(), (tok.line, tok.col))
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            tok = self._advance()
            node = Binary(_BINOPS[tok.text], node, self.unary(), (tok.line, tok.col))
        return node

    def unary(self) -> Node:
        if self.tok.kind == "op" and self.tok.text == "-":
            tok = self._advance()
            operand = self.unary()
            if isinstance(operand, Num) and not operand.text.startswith("-"):
                return Num(-operand.value, "-" + operand.text, (tok.line, tok.col))
            return Unary(AtomicOp.NEG, operand, (tok.line, tok.col), call=False)
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            tok = self._advance()
            return Binary(AtomicOp.POW, base, self.unary(), (tok.line, tok.col))
        return base

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "number":
            self._advance()
            return Num(parse_number(tok.text), tok.text, (tok.line, tok.col))
        if tok.kind == "name":
            if tok.text == "let":
                self._error("unexpected 'let'")
            self._advance()
            if self.tok.kind == "op" and self.tok.text == "(":
                if tok.text not in FUNCTIONS:
                    raise ParseError(f"unknown function {tok.text!r}", tok.line, tok.col)
                self._advance()
                arg = self.expr()
                self._expect(")")
                return Unary(FUNCTIONS[tok.text], arg, (tok.line, tok.col))
            if tok.text in FUNCTIONS:
                raise ParseError(f"function {tok.text!r} used as a variable", tok.line, tok.col)
            return Var(tok.text, (tok.line, tok.col))
        if tok.kind == "op" and tok.text == "(":
            self._advance()
            node = self.expr()
            self._expect(")")
            return node
        self._error("expected a number, name or '('")


def _free_vars(node: Node, bound: set[str]) -> list[str]:
    out: list[str] = []
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Var):
            if n.name not in bound:
                out.append(n.name)
        elif isinstance(n, Unary):
            stack.append(n.operand)
        elif isinstance(n, Binary):
            stack.extend((n.right, n.left))
    return out


def parse(text: str) -> Program:
    return _Parser(text).program()


def _node_source(node: Node) -> str:
    if isinstance(node, Num):
        return f"({node.text})" if node.text.startswith("-") else node.text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        inner = _node_source(node.operand)
        if node.op is AtomicOp.NEG and not node.call:
            return f"(-{inner})"
        return f"{node.op.value}({inner})"
    return f"({_node_source(node.left)} {node.op.symbol} {_node_source(node.right)})"


def to_source(program: Program) -> str:
    lines = [f"let {let.name} = {_node_source(let.expr)}" for let in program.lets]
    lines.append(_node_source(program.result))
    return "\n".join(lines)


# --- evaluation --------------------------------------------------------------

Bindings = Mapping[str, Union[float, int, str]]


def _as_program(program: Program | str) -> Program:
    return parse(program) if isinstance(program, str) else program


def _check_bindings(program: Program, bindings: Bindings) -> None:
    params = program.parameters
    missing = [p for p in params if p not in bindings]
    if missing:
        raise BindingError(f"missing binding(s): {', '.join(missing)}")
    extra = sorted(set(bindings) - set(params))
    if extra:
        raise BindingError(f"unknown binding(s): {', '.join(extra)}")


def binding_value(value: float | int | str) -> float:
    if isinstance(value, str):
        return parse_number(value)
    return float(value)


def run(program: Program | str, bindings: Bindings, backend):
    """Walk ``program`` with a backend exposing ``literal``, ``variable`` and ``op``."""
    program = _as_program(program)
    _check_bindings(program, bindings)
    env = {name: backend.variable(name, bindings[name]) for name in program.parameters}

    def ev(node: Node):
        if isinstance(node, Num):
            return backend.literal(node)
        if isinstance(node, Var):
            return env[node.name]
        if isinstance(node, Unary):
            args = (ev(node.operand),)
        else:
            args = (ev(node.left), ev(node.right))
        try:
            return backend.op(node.op, args)
        except EvaluationError as exc:
            if exc.span is None:
                exc.span = node.span
            raise

    for let in program.lets:
        env[let.name] = ev(let.expr)
    return ev(program.result)


class PlainBackend:
    def __init__(self):
        self.count = 0

    def literal(self, node: Num) -> float:
        return node.value

    def variable(self, name: str, value) -> float:
        return binding_value(value)

    def op(self, op: AtomicOp, args) -> float:
        idx = self.count
        self.count += 1
        try:
            r = evaluate(op, *args)
        except DomainError as exc:
            raise EvaluationError(str(exc), lane="plain", op_index=idx) from None
        if not math.isfinite(r):
            raise NonFiniteError(f"{op.value} produced {r!r}", lane="plain", op_index=idx)
        return r


class TrackedBackend:
    def __init__(self, policy: PerturbationPolicy, log: TraceLog):
        self.policy = policy
        self.log = log

    def literal(self, node: Num) -> TrackedPair:
        return track(node.value, constant=True)

    def variable(self, name: str, value) -> TrackedPair:
        return track(binding_value(value))

    def op(self, op: AtomicOp, args) -> TrackedPair:
        return apply(op, *args, policy=self.policy, log=self.log)


def eval_plain(program: Program | str, bindings: Bindings | None = None) -> float:
    return run(program, bindings or {}, PlainBackend())


def eval_tracked(
    program: Program | str,
    bindings: Bindings | None = None,
    policy: PerturbationPolicy = DEFAULT_POLICY,
    significance: float = DEFAULT_SIGNIFICANCE,
) -> ErrorReport:
    """Run both lanes and report their difference.

    Overflow in either lane yields an ``exceptional`` report; domain errors
    raise :class:`EvaluationError`.
    """
    log = TraceLog()
    try:
        result = run(program, bindings or {}, TrackedBackend(policy, log))
    except NonFiniteError as exc:
        nan = math.nan
        return ErrorReport(nan, nan, nan, nan, nan, False, log, exceptional=True, message=str(exc))
    return finish(result, log, significance)


def eval_oracle(program: Program | str, bindings: Bindings | None = None, config=None):
    """Extended-precision value of ``program`` (a ``gmpy2.mpfr``)."""
    from .oracle import OracleConfig, oracle_eval

    return oracle_eval(_as_program(program), bindings or {}, config or OracleConfig())
