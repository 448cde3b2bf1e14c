"""Metric expression language: tokenizer, parser, printer, jet evaluator.

Grammar, loosest to tightest binding:

    expr   := term  (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'

so ``-t^2`` parses as ``-(t^2)``.  Identifiers are ASCII; numbers are decimal
with optional fraction and exponent.  The recognized functions are exactly the
jet elementary set, plus ``pi`` as a constant.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

from . import jets
from .jets import Jet3

FUNCTION_NAMES = frozenset(jets.ELEMENTARY)

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


class ExprError(ValueError):
    """Syntax or resolution failure, carrying the byte offset in the source."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (at offset {offset})")


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, offset: int):
        self.name = name
        super().__init__(f"unknown identifier {name!r}", offset)


class EvalDomainError(ArithmeticError):
    """A jet domain violation, annotated with the offending source span."""

    def __init__(self, message: str, source: str, span: tuple[int, int]):
        self.span = span
        snippet = source[span[0]:span[1]]
        super().__init__(f"{message} in {snippet!r} (span {span[0]}:{span[1]})")


# -- AST ----------------------------------------------------------------------
# Spans never take part in equality, so `==` is structural identity.

@dataclass(frozen=True)
class Num:
    value: float
    span: tuple[int, int] = field(compare=False, default=(0, 0))


@dataclass(frozen=True)
class CoordRef:
    name: str
    index: int
    span: tuple[int, int] = field(compare=False, default=(0, 0))


@dataclass(frozen=True)
class ParamRef:
    name: str
    span: tuple[int, int] = field(compare=False, default=(0, 0))


@dataclass(frozen=True)
class Neg:
    child: "Expr"
    span: tuple[int, int] = field(compare=False, default=(0, 0))


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"
    span: tuple[int, int] = field(compare=False, default=(0, 0))


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"
    span: tuple[int, int] = field(compare=False, default=(0, 0))


Expr = Union[Num, CoordRef, ParamRef, Neg, BinOp, Call]


# -- parsing -------------------------------------------------------------------

@dataclass
class _Token:
    kind: str  # 'num' | 'ident' | 'op' | 'end'
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            if bad >= len(text):
                break
            raise ExprError(f"unexpected character {text[bad]!r}", bad)
        pos = m.end()
        for kind in ("num", "ident", "op"):
            got = m.group(kind)
            if got is not None:
                tokens.append(_Token(kind, got, m.start(kind)))
                break
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, coords: Sequence[str], params):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.coords = {name: k for k, name in enumerate(coords)}
        self.params = set(params)

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, text: str):
        tok = self.peek()
        if tok.kind != "op" or tok.text != text:
            raise ExprError(f"expected {text!r}", tok.pos)
        return self.advance()

    def end_of(self, node_start: int) -> tuple[int, int]:
        prev = self.tokens[self.i - 1]
        return (node_start, prev.pos + len(prev.text))

    def parse(self) -> Expr:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExprError(f"unexpected trailing input {tok.text!r}", tok.pos)
        return node

    def expr(self) -> Expr:
        start = self.peek().pos
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            rhs = self.term()
            node = BinOp(op, node, rhs, self.end_of(start))
        return node

    def term(self) -> Expr:
        start = self.peek().pos
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            rhs = self.unary()
            node = BinOp(op, node, rhs, self.end_of(start))
        return node

    def unary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            child = self.unary()
            return Neg(child, self.end_of(tok.pos))
        return self.power()

    def power(self) -> Expr:
        start = self.peek().pos
        node = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            rhs = self.unary()
            node = BinOp("^", node, rhs, self.end_of(start))
        return node

    def atom(self) -> Expr:
        tok = self.advance()
        if tok.kind == "num":
            return Num(float(tok.text), (tok.pos, tok.pos + len(tok.text)))
        if tok.kind == "ident":
            name = tok.text
            if self.peek().kind == "op" and self.peek().text == "(":
                if name not in FUNCTION_NAMES:
                    raise UnknownIdentifierError(name, tok.pos)
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return Call(name, arg, self.end_of(tok.pos))
            if name == "pi":
                return Num(math.pi, (tok.pos, tok.pos + len(tok.text)))
            if name in self.coords:
                return CoordRef(name, self.coords[name], (tok.pos, tok.pos + len(tok.text)))
            if name in self.params:
                return ParamRef(name, (tok.pos, tok.pos + len(tok.text)))
            raise UnknownIdentifierError(name, tok.pos)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExprError(f"unexpected token {tok.text!r}" if tok.kind != "end"
                        else "unexpected end of input", tok.pos)


def parse_expr(text: str, coords: Sequence[str], params) -> Expr:
    """Parse `text` against the declared coordinate and parameter names."""
    if not text.strip():
        raise ExprError("empty expression", 0)
    return _Parser(text, coords, params).parse()


# -- printing ------------------------------------------------------------------

def format_expr(node: Expr) -> str:
    """Fully parenthesized rendering; reparsing yields a structurally equal AST."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, (CoordRef, ParamRef)):
        return node.name
    if isinstance(node, Neg):
        return f"(-{format_expr(node.child)})"
    if isinstance(node, BinOp):
        return f"({format_expr(node.left)} {node.op} {format_expr(node.right)})"
    if isinstance(node, Call):
        return f"{node.fn}({format_expr(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


# -- evaluation ------------------------------------------------------------------

def const_value(node: Expr, params: Mapping[str, float]):
    """Fold a coordinate-free subtree to a float, or return None."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, ParamRef):
        return params[node.name]
    if isinstance(node, Neg):
        v = const_value(node.child, params)
        return None if v is None else -v
    if isinstance(node, BinOp):
        lv = const_value(node.left, params)
        rv = const_value(node.right, params)
        if lv is None or rv is None:
            return None
        if node.op == "+":
            return lv + rv
        if node.op == "-":
            return lv - rv
        if node.op == "*":
            return lv * rv
        if node.op == "/":
            return None if rv == 0 else lv / rv
        return None if (lv <= 0 and rv != round(rv)) else _safe_pow(lv, rv)
    return None


def _safe_pow(base: float, exponent: float):
    try:
        return float(base**exponent)
    except (OverflowError, ValueError, ZeroDivisionError):
        return None


def eval_expr(node: Expr, env: Mapping[str, Jet3], params: Mapping[str, float],
              source: str = "") -> Jet3:
    """Evaluate over jet arithmetic.

    `env` must hold a Jet3 for every coordinate the expression references; all
    jets share one dimension.  Domain failures surface as EvalDomainError tagged
    with the node's source span.
    """
    if not env:
        raise ValueError("evaluation environment must contain at least one coordinate jet")
    dim = next(iter(env.values())).dim
    return _eval(node, env, params, dim, source)


def _eval(node: Expr, env, params, dim: int, source: str) -> Jet3:
    if isinstance(node, Num):
        return Jet3.constant(node.value, dim)
    if isinstance(node, CoordRef):
        return env[node.name]
    if isinstance(node, ParamRef):
        return Jet3.constant(params[node.name], dim)
    if isinstance(node, Neg):
        return -_eval(node.child, env, params, dim, source)
    if isinstance(node, Call):
        arg = _eval(node.arg, env, params, dim, source)
        try:
            return jets.elementary(node.fn, arg)
        except jets.JetDomainError as err:
            raise EvalDomainError(str(err), source, node.span) from err
    if isinstance(node, BinOp):
        left = _eval(node.left, env, params, dim, source)
        if node.op == "^":
            exponent = const_value(node.right, params)
            try:
                if exponent is not None:
                    return jets.pow_const(left, exponent)
                right = _eval(node.right, env, params, dim, source)
                return jets.exp(right * jets.ln(left))
            except (jets.JetDomainError, ZeroDivisionError) as err:
                raise EvalDomainError(str(err), source, node.span) from err
        right = _eval(node.right, env, params, dim, source)
        try:
            if node.op == "+":
                return left + right
            if node.op == "-":
                return left - right
            if node.op == "*":
                return left * right
            return left / right
        except ZeroDivisionError as err:
            raise EvalDomainError(str(err), source, node.span) from err
    raise TypeError(f"not an expression node: {node!r}")
