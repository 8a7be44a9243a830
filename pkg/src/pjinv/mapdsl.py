"""A small expression language for defining square mappings R^n -> R^n.

Grammar (left-associative, standard precedence, ^ binds tightest)::

    mapping := ["vars" ident {"," ident} ";"] "(" expr {"," expr} ")"
    expr    := term {("+"|"-") term}
    term    := factor {("*"|"/") factor}
    factor  := ["-"] primary {"^" integer}
    primary := number | ident | func "(" expr ")" | "(" expr ")"
    func    in {abs, cbrt, sin, cos, exp, sqrt, sign}

Variables come from a leading ``vars x,y;`` clause or default to x,y,z,w by
arity.  Mappings are square only: the component count must equal the variable
count.  cbrt is the real odd cube root (cbrt(-8) = -2).  Evaluation faults
(division by zero, sqrt of a negative, overflow, non-finite results) raise
:class:`~pjinv.errors.EvaluationError` with the component index attached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    ArityMismatchError,
    EvaluationError,
    InvalidInputError,
    MappingSyntaxError,
    UnknownIdentifierError,
)

FUNCTIONS = ("abs", "cbrt", "sin", "cos", "exp", "sqrt", "sign")
DEFAULT_VARIABLES = ("x", "y", "z", "w")


def cbrt(value: float) -> float:
    """Real odd cube root; shared by the evaluator and the built-in registry."""
    return float(np.cbrt(value))


_FUNCTION_IMPL = {
    "abs": abs,
    "cbrt": cbrt,
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "sqrt": math.sqrt,
    "sign": lambda v: float((v > 0.0) - (v < 0.0)),
}


# ---------------------------------------------------------------------------
# syntax trees
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * /
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, Bin, Pow, Call]


@dataclass(frozen=True)
class MappingExpr:
    """Parsed square mapping: one expression tree per component."""

    components: tuple
    variables: tuple
    arity: int


# ---------------------------------------------------------------------------
# tokenizer
# ---------------------------------------------------------------------------

_SINGLE = {
    "(": "LPAREN", ")": "RPAREN", ",": "COMMA", ";": "SEMI",
    "+": "OP", "-": "OP", "*": "OP", "/": "OP", "^": "CARET",
}


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int
    is_integer: bool = False


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch in _SINGLE:
            tokens.append(_Token(_SINGLE[ch], ch, line, col))
            i += 1
            col += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            start = i
            start_col = col
            while i < n and source[i].isdigit():
                i += 1
            is_int = True
            if i < n and source[i] == ".":
                is_int = False
                i += 1
                while i < n and source[i].isdigit():
                    i += 1
            if i < n and source[i] in "eE":
                j = i + 1
                if j < n and source[j] in "+-":
                    j += 1
                if j < n and source[j].isdigit():
                    is_int = False
                    i = j
                    while i < n and source[i].isdigit():
                        i += 1
            text = source[start:i]
            try:
                float(text)
            except ValueError:
                raise MappingSyntaxError(f"bad number literal '{text}'", line, start_col)
            tokens.append(_Token("NUMBER", text, line, start_col, is_integer=is_int))
            col += i - start
            continue
        if ch.isalpha() or ch == "_":
            start = i
            start_col = col
            while i < n and (source[i].isalnum() or source[i] == "_"):
                i += 1
            tokens.append(_Token("IDENT", source[start:i], line, start_col))
            col += i - start
            continue
        raise MappingSyntaxError(f"unexpected character '{ch}'", line, col)
    tokens.append(_Token("EOF", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, expected: tuple[str, ...]) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise self.fail(tok, expected)
        return self.advance()

    @staticmethod
    def fail(tok: _Token, expected: tuple[str, ...]) -> MappingSyntaxError:
        what = "end of input" if tok.kind == "EOF" else f"'{tok.text}'"
        return MappingSyntaxError(f"unexpected {what}", tok.line, tok.column, expected)

    # grammar -------------------------------------------------------------

    def mapping(self) -> tuple[list, list[str] | None]:
        declared = None
        tok = self.peek()
        if tok.kind == "IDENT" and tok.text == "vars":
            self.advance()
            declared = [self.expect("IDENT", ("variable name",)).text]
            while self.peek().kind == "COMMA":
                self.advance()
                declared.append(self.expect("IDENT", ("variable name",)).text)
            self.expect("SEMI", ("';'",))
        self.expect("LPAREN", ("'('",))
        components = [self.expr()]
        while self.peek().kind == "COMMA":
            self.advance()
            components.append(self.expr())
        tok = self.peek()
        if tok.kind != "RPAREN":
            raise self.fail(tok, ("')'", "','", "operator"))
        self.advance()
        tok = self.peek()
        if tok.kind != "EOF":
            raise self.fail(tok, ("end of input",))
        return components, declared

    def expr(self):
        node = self.term()
        while self.peek().kind == "OP" and self.peek().text in "+-":
            op = self.advance().text
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek().kind == "OP" and self.peek().text in "*/":
            op = self.advance().text
            node = Bin(op, node, self.factor())
        return node

    def factor(self):
        if self.peek().kind == "OP" and self.peek().text == "-":
            self.advance()
            return Neg(self.factor())
        node = self.primary()
        while self.peek().kind == "CARET":
            self.advance()
            sign = 1
            if self.peek().kind == "OP" and self.peek().text == "-":
                self.advance()
                sign = -1
            tok = self.expect("NUMBER", ("integer exponent",))
            if not tok.is_integer:
                raise MappingSyntaxError(
                    "exponent must be an integer", tok.line, tok.column, ("integer exponent",)
                )
            node = Pow(node, sign * int(tok.text))
        return node

    def primary(self):
        tok = self.peek()
        if tok.kind == "NUMBER":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "IDENT":
            self.advance()
            if tok.text in FUNCTIONS:
                self.expect("LPAREN", ("'('",))
                arg = self.expr()
                if self.peek().kind != "RPAREN":
                    raise self.fail(self.peek(), ("')'", "operator"))
                self.advance()
                return Call(tok.text, arg)
            # variable reference, resolved after arity is known
            return Var(-1, tok.text), tok  # marker handled below
        if tok.kind == "LPAREN":
            self.advance()
            node = self.expr()
            if self.peek().kind != "RPAREN":
                raise self.fail(self.peek(), ("')'", "operator"))
            self.advance()
            return node
        raise self.fail(tok, ("number", "identifier", "'('"))


# Var nodes come out of primary() as (Var, token) pairs so that resolution can
# report positions; unwrap them while collecting the reference list.


def _unwrap(node, refs: list):
    if isinstance(node, tuple):
        var, tok = node
        refs.append((var.name, tok.line, tok.column))
        return Var(-1, var.name)
    if isinstance(node, Neg):
        return Neg(_unwrap(node.arg, refs))
    if isinstance(node, Bin):
        return Bin(node.op, _unwrap(node.lhs, refs), _unwrap(node.rhs, refs))
    if isinstance(node, Pow):
        return Pow(_unwrap(node.base, refs), node.exponent)
    if isinstance(node, Call):
        return Call(node.fn, _unwrap(node.arg, refs))
    return node


def _resolve(node, index: dict):
    if isinstance(node, Var):
        return Var(index[node.name], node.name)
    if isinstance(node, Neg):
        return Neg(_resolve(node.arg, index))
    if isinstance(node, Bin):
        return Bin(node.op, _resolve(node.lhs, index), _resolve(node.rhs, index))
    if isinstance(node, Pow):
        return Pow(_resolve(node.base, index), node.exponent)
    if isinstance(node, Call):
        return Call(node.fn, _resolve(node.arg, index))
    return node


def parse_mapping(source: str) -> MappingExpr:
    """Parse mapping source into a :class:`MappingExpr`.

    Errors carry 1-based line/column and the expected-token set.
    """
    if not isinstance(source, str) or not source.strip():
        raise InvalidInputError("mapping source must be nonempty text")
    parser = _Parser(_tokenize(source))
    raw_components, declared = parser.mapping()

    refs: list[tuple[str, int, int]] = []
    components = [_unwrap(c, refs) for c in raw_components]
    arity = len(components)

    if declared is not None:
        if len(set(declared)) != len(declared):
            raise InvalidInputError("duplicate variable names in vars clause")
        variables = tuple(declared)
        if len(variables) != arity:
            raise ArityMismatchError(
                f"{arity} components over {len(variables)} variables; mappings must be square"
            )
    else:
        if arity > len(DEFAULT_VARIABLES):
            raise ArityMismatchError(
                f"{arity} components need an explicit vars clause "
                f"(defaults cover up to {len(DEFAULT_VARIABLES)})"
            )
        variables = DEFAULT_VARIABLES[:arity]

    index = {name: i for i, name in enumerate(variables)}
    for name, line, column in refs:
        if name not in index:
            raise UnknownIdentifierError(name, line, column)
    components = tuple(_resolve(c, index) for c in components)
    return MappingExpr(components=components, variables=variables, arity=arity)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def _eval_node(node, values: np.ndarray) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return float(values[node.index])
    if isinstance(node, Neg):
        return -_eval_node(node.arg, values)
    if isinstance(node, Bin):
        lhs = _eval_node(node.lhs, values)
        rhs = _eval_node(node.rhs, values)
        if node.op == "+":
            return lhs + rhs
        if node.op == "-":
            return lhs - rhs
        if node.op == "*":
            return lhs * rhs
        return lhs / rhs
    if isinstance(node, Pow):
        return float(_eval_node(node.base, values) ** node.exponent)
    if isinstance(node, Call):
        return float(_FUNCTION_IMPL[node.fn](_eval_node(node.arg, values)))
    raise TypeError(f"unknown node {node!r}")  # pragma: no cover


def eval_mapping(m: MappingExpr, x) -> np.ndarray:
    """Componentwise evaluation at a point of matching dimension.

    Domain faults yield EvaluationError (with the component index), never
    non-finite values.
    """
    values = np.asarray(x, dtype=float).reshape(-1)
    if values.size != m.arity:
        raise InvalidInputError(f"point has dimension {values.size}, mapping arity {m.arity}")
    out = np.empty(m.arity)
    for i, comp in enumerate(m.components):
        try:
            val = _eval_node(comp, values)
        except ZeroDivisionError:
            raise EvaluationError("division by zero", component=i, point=values) from None
        except OverflowError:
            raise EvaluationError("overflow", component=i, point=values) from None
        except ValueError as exc:
            raise EvaluationError(f"domain fault: {exc}", component=i, point=values) from None
        if not math.isfinite(val):
            raise EvaluationError("non-finite result", component=i, point=values)
        out[i] = val
    return out


# ---------------------------------------------------------------------------
# canonical printer
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _print_node(node, parent_prec: int = 0, right_side: bool = False) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        inner = _print_node(node.arg, 3)
        text = f"-{inner}"
        return f"({text})" if parent_prec > 2 or (right_side and parent_prec >= 1) else text
    if isinstance(node, Bin):
        prec = _PREC[node.op]
        lhs = _print_node(node.lhs, prec)
        rhs = _print_node(node.rhs, prec + 1, right_side=True)
        sep = f" {node.op} " if prec == 1 else node.op
        text = f"{lhs}{sep}{rhs}"
        return f"({text})" if prec < parent_prec else text
    if isinstance(node, Pow):
        base = _print_node(node.base, 5)
        if isinstance(node.base, (Bin, Neg, Pow)):
            base = f"({base})"
        return f"{base}^{node.exponent}"
    if isinstance(node, Call):
        return f"{node.fn}({_print_node(node.arg)})"
    raise TypeError(f"unknown node {node!r}")  # pragma: no cover


def print_mapping(m: MappingExpr) -> str:
    """Normalized source form; reparsing yields a structurally identical tree."""
    body = ", ".join(_print_node(c) for c in m.components)
    if m.variables != DEFAULT_VARIABLES[: m.arity]:
        return f"vars {', '.join(m.variables)}; ({body})"
    return f"({body})"


# ---------------------------------------------------------------------------
# finite-difference Jacobians
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JacobianSample:
    """Finite-difference Jacobian estimate with a near-singular entry flag.

    Entries whose magnitude exceeds the flag threshold mark directions where
    the sampled slope is blowing up (e.g. fractional-power folds).
    """

    matrix: np.ndarray
    near_singular: tuple
    step: float
    scheme: str


def jacobian_sample(
    m: MappingExpr,
    x,
    h: float = 1e-6,
    scheme: str = "forward",
    flag_threshold: float | None = None,
) -> JacobianSample:
    """Finite-difference Jacobian of a parsed mapping at x.

    `scheme` is "forward" (default, O(h)) or "central" (O(h^2), used as a
    test oracle).  The near-singular threshold defaults to 1/sqrt(h), the
    scale at which sampled slopes stop being trustworthy for steps of size h.
    Evaluation errors propagate with the probe point attached.
    """
    if h <= 0:
        raise InvalidInputError("step h must be positive")
    if scheme not in ("forward", "central"):
        raise InvalidInputError("scheme must be 'forward' or 'central'")
    threshold = flag_threshold if flag_threshold is not None else 1.0 / math.sqrt(h)
    x = np.asarray(x, dtype=float).reshape(-1)
    fx = eval_mapping(m, x) if scheme == "forward" else None
    cols = []
    for j in range(m.arity):
        xp = x.copy()
        xp[j] += h
        if scheme == "forward":
            cols.append((eval_mapping(m, xp) - fx) / h)
        else:
            xm = x.copy()
            xm[j] -= h
            cols.append((eval_mapping(m, xp) - eval_mapping(m, xm)) / (2.0 * h))
    matrix = np.stack(cols, axis=1)
    flagged = tuple(zip(*np.nonzero(np.abs(matrix) > threshold)))
    flagged = tuple((int(i), int(j)) for i, j in flagged)
    return JacobianSample(matrix=matrix, near_singular=flagged, step=h, scheme=scheme)


def to_mapping_spec(m: MappingExpr, label: str = "dsl"):
    """Wrap a parsed mapping as a MappingSpec (no analytic Jacobian)."""
    from .pseudojac import MappingSpec

    return MappingSpec(evaluate=lambda x: eval_mapping(m, x), dim=m.arity, label=label)
