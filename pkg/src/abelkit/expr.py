"""Scalar expressions in the time variable ``t``.

Coefficient functions are supplied as text (``"-0.3849*sin(t)^2"``) and parsed
by a small recursive-descent parser into an immutable tree.  A parsed
expression can be evaluated three ways:

* :meth:`ExprAst.eval` walks the tree and reports domain errors with the
  offending subexpression;
* :meth:`ExprAst.__call__` runs a compiled closure (fast path used inside the
  integrator) and falls back to the tree walker when something goes wrong;
* :meth:`ExprAst.eval_array` evaluates on a numpy array of times.

Grammar::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := ("-" | "+") unary | power
    power   := primary ("^" unary)?          # right associative
    primary := NUMBER | "t" | "pi" | "e" | NAME "(" expr ("," expr)* ")"
             | "(" expr ")"
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

__all__ = [
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "ExprDomainError",
    "Num",
    "Var",
    "Const",
    "Unary",
    "Binary",
    "Call",
    "ExprAst",
    "parse",
    "evaluate",
    "render",
    "FUNCTIONS",
    "CONSTANTS",
]


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    """Malformed expression text.

    Attributes
    ----------
    offset : int
        Byte offset (UTF-8) into the source where parsing failed.
    expected : frozenset of str
        Token kinds that would have been accepted at ``offset``.
    """

    def __init__(self, message: str, source: str, offset: int, expected=()):
        self.source = source
        self.offset = offset
        self.expected = frozenset(expected)
        exp = ""
        if self.expected:
            exp = " (expected one of: " + ", ".join(sorted(self.expected)) + ")"
        super().__init__(f"{message} at byte offset {offset}{exp}")


class UnknownIdentifierError(ExprSyntaxError):
    def __init__(self, name: str, source: str, offset: int):
        self.name = name
        super().__init__(f"unknown identifier {name!r}", source, offset)


class ExprDomainError(ExprError, ArithmeticError):
    """Evaluation left the real domain (ln of a nonpositive value, 1/0, ...)."""

    def __init__(self, message: str, subexpression: str, t: float):
        self.subexpression = subexpression
        self.t = t
        super().__init__(f"{message} in '{subexpression}' at t={t!r}")


# --------------------------------------------------------------------------
# AST nodes
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str = "t"


@dataclass(frozen=True)
class Const:
    name: str  # "pi" | "e"


@dataclass(frozen=True)
class Unary:
    op: str  # "-" | "+"
    operand: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Node = Union[Num, Var, Const, Unary, Binary, Call]

CONSTANTS = {"pi": math.pi, "e": math.e}

# name -> (arity or None for variadic >= 2)
FUNCTIONS = {
    "sin": 1,
    "cos": 1,
    "tan": 1,
    "exp": 1,
    "ln": 1,
    "sqrt": 1,
    "abs": 1,
    "min": None,
    "max": None,
}


# --------------------------------------------------------------------------
# Tokenizer / parser
# --------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # number | name | op | end
    text: str
    pos: int  # character index


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprSyntaxError(
                f"unexpected character {source[pos]!r}",
                source,
                _byte_offset(source, pos),
                {"number", "identifier", "operator"},
            )
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(source)))
    return tokens


def _byte_offset(source: str, char_index: int) -> int:
    return len(source[:char_index].encode("utf-8"))


class _Parser:
    _PRIMARY_START = frozenset({"number", "t", "pi", "e", "function", "("})

    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def _error(self, message, expected):
        raise ExprSyntaxError(
            message, self.source, _byte_offset(self.source, self.tok.pos), expected
        )

    def _expect_op(self, op: str):
        if self.tok.kind == "op" and self.tok.text == op:
            self.i += 1
            return
        found = self.tok.text or "end of input"
        self._error(f"unexpected {found!r}", {op})

    def parse(self) -> Node:
        if self.tok.kind == "end":
            self._error("empty expression", self._PRIMARY_START | {"-", "+"})
        node = self.expr()
        if self.tok.kind != "end":
            self._error(
                f"unexpected {self.tok.text!r}", {"+", "-", "*", "/", "^", "end of input"}
            )
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            return Unary(op, self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.primary()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.i += 1
            # exponent may carry its own sign: 2^-1
            return Binary("^", base, self.unary())
        return base

    def primary(self) -> Node:
        tok = self.tok
        if tok.kind == "number":
            self.i += 1
            return Num(float(tok.text))
        if tok.kind == "name":
            self.i += 1
            if tok.text == "t":
                return Var("t")
            if tok.text in CONSTANTS:
                return Const(tok.text)
            if tok.text in FUNCTIONS:
                return self._call(tok)
            raise UnknownIdentifierError(
                tok.text, self.source, _byte_offset(self.source, tok.pos)
            )
        if tok.kind == "op" and tok.text == "(":
            self.i += 1
            node = self.expr()
            self._expect_op(")")
            return node
        found = tok.text or "end of input"
        self._error(f"unexpected {found!r}", self._PRIMARY_START)

    def _call(self, name_tok: _Token) -> Node:
        self._expect_op("(")
        args = [self.expr()]
        while self.tok.kind == "op" and self.tok.text == ",":
            self.i += 1
            args.append(self.expr())
        self._expect_op(")")
        arity = FUNCTIONS[name_tok.text]
        if (arity is None and len(args) < 2) or (arity is not None and len(args) != arity):
            want = "at least 2" if arity is None else str(arity)
            raise ExprSyntaxError(
                f"{name_tok.text}() takes {want} argument(s), got {len(args)}",
                self.source,
                _byte_offset(self.source, name_tok.pos),
            )
        return Call(name_tok.text, tuple(args))


# --------------------------------------------------------------------------
# Rendering
# --------------------------------------------------------------------------


def render(node: Node) -> str:
    """Render ``node`` fully parenthesized; re-parsing yields the same tree."""
    if isinstance(node, Num):
        text = repr(float(node.value))
        return text if node.value >= 0 else f"(-{repr(-float(node.value))})"
    if isinstance(node, Var):
        return "t"
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Unary):
        return f"({node.op}{render(node.operand)})"
    if isinstance(node, Binary):
        return f"({render(node.left)}{node.op}{render(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}(" + ",".join(render(a) for a in node.args) + ")"
    raise TypeError(f"not an expression node: {node!r}")


# --------------------------------------------------------------------------
# Scalar evaluation
# --------------------------------------------------------------------------


def _pow(base: float, exponent: float) -> float:
    if base < 0 and not float(exponent).is_integer():
        raise ValueError("negative base with non-integer exponent")
    if base == 0 and exponent < 0:
        raise ZeroDivisionError("zero to a negative power")
    return math.pow(base, exponent)


def _ln(x: float) -> float:
    if x <= 0:
        raise ValueError("ln of nonpositive value")
    return math.log(x)


def _sqrt(x: float) -> float:
    if x < 0:
        raise ValueError("sqrt of negative value")
    return math.sqrt(x)


def _div(x: float, y: float) -> float:
    if y == 0:
        raise ZeroDivisionError("division by zero")
    return x / y


_SCALAR_FUNCS: dict[str, Callable] = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "ln": _ln,
    "sqrt": _sqrt,
    "abs": abs,
    "min": min,
    "max": max,
}


def evaluate(node: Node, t: float) -> float:
    """Evaluate ``node`` at ``t`` by walking the tree.

    Raises
    ------
    ExprDomainError
        With the smallest subexpression whose value is undefined or non-finite.
    """
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return t
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Unary):
        v = evaluate(node.operand, t)
        return -v if node.op == "-" else v
    if isinstance(node, Binary):
        x = evaluate(node.left, t)
        y = evaluate(node.right, t)
        try:
            if node.op == "+":
                r = x + y
            elif node.op == "-":
                r = x - y
            elif node.op == "*":
                r = x * y
            elif node.op == "/":
                r = _div(x, y)
            else:
                r = _pow(x, y)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise ExprDomainError(str(exc), render(node), t) from None
        return _finite(r, node, t)
    if isinstance(node, Call):
        args = [evaluate(a, t) for a in node.args]
        try:
            r = _SCALAR_FUNCS[node.name](*args)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise ExprDomainError(str(exc), render(node), t) from None
        return _finite(float(r), node, t)
    raise TypeError(f"not an expression node: {node!r}")


def _finite(value: float, node: Node, t: float) -> float:
    if not math.isfinite(value):
        raise ExprDomainError("non-finite result", render(node), t)
    return value


# Compiled fast path: the tree is turned into nested Python source once.
def _to_source(node: Node) -> str:
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return "t"
    if isinstance(node, Const):
        return repr(CONSTANTS[node.name])
    if isinstance(node, Unary):
        return f"({node.op}{_to_source(node.operand)})"
    if isinstance(node, Binary):
        left, right = _to_source(node.left), _to_source(node.right)
        if node.op == "/":
            return f"_div({left}, {right})"
        if node.op == "^":
            return f"_pow({left}, {right})"
        return f"({left} {node.op} {right})"
    if isinstance(node, Call):
        args = ", ".join(_to_source(a) for a in node.args)
        return f"_f_{node.name}({args})"
    raise TypeError(f"not an expression node: {node!r}")


_COMPILE_ENV = {"_div": _div, "_pow": _pow}
_COMPILE_ENV.update({f"_f_{k}": v for k, v in _SCALAR_FUNCS.items()})


def _compile(node: Node) -> Callable[[float], float]:
    code = compile(f"lambda t: {_to_source(node)}", "<expr>", "eval")
    return eval(code, dict(_COMPILE_ENV))


# --------------------------------------------------------------------------
# Array evaluation
# --------------------------------------------------------------------------

_ARRAY_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "ln": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}


def _evaluate_array(node: Node, t: np.ndarray) -> np.ndarray:
    if isinstance(node, Num):
        return np.full(t.shape, node.value)
    if isinstance(node, Var):
        return t
    if isinstance(node, Const):
        return np.full(t.shape, CONSTANTS[node.name])
    if isinstance(node, Unary):
        v = _evaluate_array(node.operand, t)
        return -v if node.op == "-" else v
    if isinstance(node, Binary):
        x = _evaluate_array(node.left, t)
        y = _evaluate_array(node.right, t)
        with np.errstate(all="ignore"):
            if node.op == "+":
                r = x + y
            elif node.op == "-":
                r = x - y
            elif node.op == "*":
                r = x * y
            elif node.op == "/":
                _check(y == 0, "division by zero", node, t)
                r = x / y
            else:
                bad = (x < 0) & (np.floor(y) != y)
                _check(bad, "negative base with non-integer exponent", node, t)
                _check((x == 0) & (y < 0), "zero to a negative power", node, t)
                r = np.power(x, y)
        _check(~np.isfinite(r), "non-finite result", node, t)
        return r
    if isinstance(node, Call):
        args = [_evaluate_array(a, t) for a in node.args]
        if node.name == "ln":
            _check(args[0] <= 0, "ln of nonpositive value", node, t)
        elif node.name == "sqrt":
            _check(args[0] < 0, "sqrt of negative value", node, t)
        with np.errstate(all="ignore"):
            if node.name == "min":
                r = np.minimum.reduce(args)
            elif node.name == "max":
                r = np.maximum.reduce(args)
            else:
                r = _ARRAY_FUNCS[node.name](args[0])
        _check(~np.isfinite(r), "non-finite result", node, t)
        return r
    raise TypeError(f"not an expression node: {node!r}")


def _check(mask: np.ndarray, message: str, node: Node, t: np.ndarray):
    if np.any(mask):
        idx = int(np.flatnonzero(np.broadcast_to(mask, t.shape))[0])
        raise ExprDomainError(message, render(node), float(t[idx]))


# --------------------------------------------------------------------------
# Public wrapper
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExprAst:
    """A parsed expression in ``t`` together with its source text.

    Instances are immutable and safe to evaluate from several threads.
    """

    root: Node
    source: str
    _fast: Callable[[float], float] = field(
        default=None, repr=False, compare=False, hash=False
    )

    def __post_init__(self):
        if self._fast is None:
            object.__setattr__(self, "_fast", _compile(self.root))

    def eval(self, t: float) -> float:
        return evaluate(self.root, float(t))

    def __call__(self, t: float) -> float:
        try:
            r = self._fast(t)
        except (ValueError, ZeroDivisionError, OverflowError):
            return self.eval(t)  # re-raises with the offending subexpression
        if r != r or r in (math.inf, -math.inf):
            return self.eval(t)
        return r

    def eval_array(self, t) -> np.ndarray:
        arr = np.asarray(t, dtype=float)
        return np.array(_evaluate_array(self.root, arr), dtype=float, copy=True)

    def render(self) -> str:
        return render(self.root)

    @property
    def is_constant(self) -> bool:
        return "t" not in _free_names(self.root)

    def __str__(self) -> str:
        return self.source


def _free_names(node: Node) -> set:
    if isinstance(node, Var):
        return {"t"}
    if isinstance(node, Unary):
        return _free_names(node.operand)
    if isinstance(node, Binary):
        return _free_names(node.left) | _free_names(node.right)
    if isinstance(node, Call):
        out = set()
        for a in node.args:
            out |= _free_names(a)
        return out
    return set()


def parse(source: str) -> ExprAst:
    """Parse ``source`` into an :class:`ExprAst`.

    >>> parse("2^3^2").eval(0.0)
    512.0
    """
    if not isinstance(source, str):
        raise TypeError("expression source must be text")
    root = _Parser(source).parse()
    return ExprAst(root, source)
