"""Constraint language for controller monitors.

Quantifier-free real arithmetic predicates::

    formula     := implication
    implication := disjunction ['->' implication]          (right associative)
    disjunction := conjunction {'||' conjunction}
    conjunction := negation {'&&' negation}
    negation    := '!' negation | 'true' | 'false' | comparison | '(' formula ')'
    comparison  := expr ('<=' | '<' | '=' | '==' | '>' | '>=') expr
    expr        := term {('+' | '-') term}
    term        := unary {('*' | '/') unary}
    unary       := '-' unary | power
    power       := primary ['^' NATURAL]
    primary     := NUMBER | NAME | '(' expr ')'

Division is only accepted by a nonzero numeric literal, so evaluation is total on
finite inputs. Syntax errors carry the 0-based column of the offending token.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Union

import numpy as np


class FormulaSyntaxError(SyntaxError):
    def __init__(self, message: str, column: int, text: str = ""):
        super().__init__(f"{message} at column {column}")
        self.column = column
        self.text = text


class UnboundVariableError(KeyError):
    pass


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Term"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Pow:
    base: "Term"
    exponent: int


@dataclass(frozen=True)
class Cmp:
    op: str  # one of <= < = > >=
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class BoolConst:
    value: bool


@dataclass(frozen=True)
class Not:
    operand: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


Term = Union[Num, Var, Neg, BinOp, Pow]
Formula = Union[Cmp, BoolConst, Not, And, Or, Implies]


# --- lexer -----------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>->|&&|\|\||<=|>=|==|[<>=!+\-*/^()])
""", re.VERBOSE)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, name, op, eof
    text: str
    column: int


def tokenize(text: str) -> list[_Tok]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        if m.lastgroup != "ws":
            tokens.append(_Tok(m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(_Tok("eof", "", len(text)))
    return tokens


# --- parser ----------------------------------------------------------------

_CMP_OPS = {"<=", "<", "=", "==", ">", ">="}
_KEYWORDS = {"true", "false"}


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0
        self.furthest: FormulaSyntaxError | None = None

    @property
    def tok(self) -> _Tok:
        return self.tokens[self.pos]

    def error(self, message: str, tok: _Tok | None = None) -> FormulaSyntaxError:
        tok = tok or self.tok
        what = "end of input" if tok.kind == "eof" else repr(tok.text)
        err = FormulaSyntaxError(f"{message}, found {what}", tok.column, self.text)
        if self.furthest is None or err.column >= self.furthest.column:
            self.furthest = err
        return err

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            raise self.error(f"expected {text!r}")

    def parse(self) -> Formula:
        node = self.implication()
        if self.tok.kind != "eof":
            raise self.error("unexpected trailing input")
        return node

    def implication(self) -> Formula:
        left = self.disjunction()
        if self.accept("->"):
            return Implies(left, self.implication())
        return left

    def disjunction(self) -> Formula:
        node = self.conjunction()
        while self.accept("||"):
            node = Or(node, self.conjunction())
        return node

    def conjunction(self) -> Formula:
        node = self.negation()
        while self.accept("&&"):
            node = And(node, self.negation())
        return node

    def negation(self) -> Formula:
        if self.accept("!"):
            return Not(self.negation())
        if self.tok.kind == "name" and self.tok.text in _KEYWORDS:
            value = self.tok.text == "true"
            self.pos += 1
            return BoolConst(value)
        start = self.pos
        try:
            return self.comparison()
        except FormulaSyntaxError as first:
            self.pos = start
            if not (self.tok.kind == "op" and self.tok.text == "("):
                raise self.furthest or first
        self.pos += 1
        try:
            node = self.implication()
            self.expect(")")
        except FormulaSyntaxError:
            raise self.furthest
        return node

    def comparison(self) -> Cmp:
        left = self.expr()
        tok = self.tok
        if tok.kind == "op" and tok.text in _CMP_OPS:
            self.pos += 1
            op = "=" if tok.text == "==" else tok.text
            return Cmp(op, left, self.expr())
        raise self.error("expected comparison operator")

    def expr(self) -> Term:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.tok.text
            self.pos += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Term:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op_tok = self.tok
            self.pos += 1
            right = self.unary()
            if op_tok.text == "/" and not (isinstance(right, Num) and right.value != 0.0):
                raise self.error("division only by a nonzero numeric constant", op_tok)
            node = BinOp(op_tok.text, node, right)
        return node

    def unary(self) -> Term:
        if self.accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self) -> Term:
        base = self.primary()
        if self.accept("^"):
            tok = self.tok
            if tok.kind != "num" or not re.fullmatch(r"\d+", tok.text):
                raise self.error("exponent must be a natural number literal")
            self.pos += 1
            return Pow(base, int(tok.text))
        return base

    def primary(self) -> Term:
        tok = self.tok
        if tok.kind == "num":
            self.pos += 1
            return Num(float(tok.text))
        if tok.kind == "name" and tok.text not in _KEYWORDS:
            self.pos += 1
            return Var(tok.text)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        raise self.error("expected number, name or '('")


def parse_formula(text: str) -> Formula:
    """Parse ``text`` into a formula AST; raises :class:`FormulaSyntaxError`."""
    return _Parser(text).parse()


def parse_term(text: str) -> Term:
    p = _Parser(text)
    node = p.expr()
    if p.tok.kind != "eof":
        raise p.error("unexpected trailing input")
    return node


# --- printing --------------------------------------------------------------

def to_text(node) -> str:
    """Fully parenthesised concrete syntax; ``parse_formula(to_text(f)) == f``."""
    match node:
        case Num(value):
            return repr(float(value))
        case Var(name):
            return name
        case Neg(operand):
            return f"-({to_text(operand)})"
        case BinOp(op, left, right):
            return f"({to_text(left)} {op} {to_text(right)})"
        case Pow(base, exponent):
            return f"(({to_text(base)})^{exponent})"
        case Cmp(op, left, right):
            return f"{to_text(left)} {op} {to_text(right)}"
        case BoolConst(value):
            return "true" if value else "false"
        case Not(operand):
            return f"!({to_text(operand)})"
        case And(left, right):
            return f"({to_text(left)} && {to_text(right)})"
        case Or(left, right):
            return f"({to_text(left)} || {to_text(right)})"
        case Implies(left, right):
            return f"({to_text(left)} -> {to_text(right)})"
    raise TypeError(f"not a formula node: {node!r}")


def variables(node) -> frozenset[str]:
    match node:
        case Var(name):
            return frozenset([name])
        case Num() | BoolConst():
            return frozenset()
        case Neg(x) | Not(x) | Pow(x, _):
            return variables(x)
        case BinOp(_, l, r) | Cmp(_, l, r) | And(l, r) | Or(l, r) | Implies(l, r):
            return variables(l) | variables(r)
    raise TypeError(f"not a formula node: {node!r}")


# --- reference interpreter -------------------------------------------------

_ARITH = {"+": lambda a, b: a + b, "-": lambda a, b: a - b, "*": lambda a, b: a * b, "/": lambda a, b: a / b}
_COMPARE = {"<=": lambda a, b: a <= b, "<": lambda a, b: a < b, "=": lambda a, b: a == b,
            ">": lambda a, b: a > b, ">=": lambda a, b: a >= b}


def evaluate(node, valuation: Mapping[str, float]):
    """Tree-walking evaluation; the compiled path is checked against this."""
    match node:
        case Num(value):
            return value
        case Var(name):
            try:
                return valuation[name]
            except KeyError:
                raise UnboundVariableError(name) from None
        case Neg(x):
            return -evaluate(x, valuation)
        case BinOp(op, l, r):
            return _ARITH[op](evaluate(l, valuation), evaluate(r, valuation))
        case Pow(b, n):
            return evaluate(b, valuation) ** n
        case Cmp(op, l, r):
            return bool(_COMPARE[op](evaluate(l, valuation), evaluate(r, valuation)))
        case BoolConst(value):
            return value
        case Not(x):
            return not evaluate(x, valuation)
        case And(l, r):
            return evaluate(l, valuation) and evaluate(r, valuation)
        case Or(l, r):
            return evaluate(l, valuation) or evaluate(r, valuation)
        case Implies(l, r):
            return (not evaluate(l, valuation)) or evaluate(r, valuation)
    raise TypeError(f"not a formula node: {node!r}")


# --- compilation -----------------------------------------------------------

def _source(node, consts: Mapping[str, float], vector: bool) -> str:
    match node:
        case Num(value):
            return repr(float(value))
        case Var(name):
            if name in consts:
                return f"({float(consts[name])!r})"
            return name
        case Neg(x):
            return f"(-{_source(x, consts, vector)})"
        case BinOp(op, l, r):
            return f"({_source(l, consts, vector)} {op} {_source(r, consts, vector)})"
        case Pow(b, n):
            return f"({_source(b, consts, vector)} ** {n})"
        case Cmp(op, l, r):
            pyop = "==" if op == "=" else op
            return f"({_source(l, consts, vector)} {pyop} {_source(r, consts, vector)})"
        case BoolConst(value):
            return "True" if value else "False"
        case Not(x):
            inner = _source(x, consts, vector)
            return f"_not({inner})" if vector else f"(not {inner})"
        case And(l, r):
            a, b = _source(l, consts, vector), _source(r, consts, vector)
            return f"_and({a}, {b})" if vector else f"({a} and {b})"
        case Or(l, r):
            a, b = _source(l, consts, vector), _source(r, consts, vector)
            return f"_or({a}, {b})" if vector else f"({a} or {b})"
        case Implies(l, r):
            a, b = _source(l, consts, vector), _source(r, consts, vector)
            return f"_or(_not({a}), {b})" if vector else f"((not {a}) or {b})"
    raise TypeError(f"not a formula node: {node!r}")


NAMESPACE = {"_and": np.logical_and, "_or": np.logical_or, "_not": np.logical_not, "_np": np}


def to_python(node, constants: Mapping[str, float] | None = None, vector: bool = False) -> str:
    """Python expression source for ``node`` with ``constants`` inlined.

    Scalar source short-circuits with ``and``/``or``; vector source uses numpy
    logical ufuncs and expects the names in ``NAMESPACE`` to be in scope.
    """
    return _source(node, dict(constants or {}), vector)


@dataclass(frozen=True)
class CompiledFormula:
    """A formula with constants folded in, callable positionally over ``args``."""

    args: tuple[str, ...]
    scalar: Callable[..., bool]
    vector: Callable[..., np.ndarray]
    source: str


def compile_formula(node, constants: Mapping[str, float] | None = None) -> CompiledFormula:
    constants = dict(constants or {})
    for name, value in constants.items():
        if not math.isfinite(value):
            raise ValueError(f"constant {name} must be finite")
    args = tuple(sorted(variables(node) - constants.keys()))
    for name in args:
        if not name.isidentifier() or name.startswith("_"):
            raise ValueError(f"invalid variable name {name!r}")
    scalar_src = f"lambda {', '.join(args)}: bool({_source(node, constants, False)})"
    vector_src = f"lambda {', '.join(args)}: _np.asarray({_source(node, constants, True)}, dtype=bool)"
    scalar = eval(scalar_src, dict(NAMESPACE))  # noqa: S307 - source generated from a parsed AST
    vector = eval(vector_src, dict(NAMESPACE))  # noqa: S307
    return CompiledFormula(args, scalar, vector, scalar_src)
