"""Template language for dynamic labels and scalar property expressions.

Templates are plain text with `${...}` interpolation holes; `$$` escapes a
literal dollar sign (a `$` not followed by `{` also reads as a literal).
Hole contents are arithmetic expressions over the per-frame variable
registry::

    "PositionX: ${obj_1.x}"
    "ratio ${distance_1 / 2.5}"
    "clock ${time() * 1000}"

Expression grammar (recursive descent)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | atom
    atom   := NUMBER | path | "time" "(" ")" | "(" expr ")"
    path   := IDENT ("." IDENT)*

Evaluation is total: any unavailable operand, division by zero, or
non-finite intermediate makes the whole expression unavailable, rendered
as "--". Numbers format with fixed decimals, ties rounding away from zero.
Parse errors carry the byte offset into the original source.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal, localcontext
from typing import Union

from .kinematics import VariableRegistry

FRAME_RATE = 30.0


class TemplateError(ValueError):
    """Parse failure with the byte offset of the offending character."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    path: str


@dataclass(frozen=True)
class Call:
    name: str  # only "time" exists


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Num, Var, Call, Unary, Binary]


@dataclass(frozen=True)
class Lit:
    raw: str  # source slice, escapes intact
    text: str  # decoded display text


@dataclass(frozen=True)
class Hole:
    raw: str  # full "${...}" slice
    expr: Expr


@dataclass(frozen=True)
class Template:
    source: str
    segments: tuple[Union[Lit, Hole], ...]

    def unparse(self) -> str:
        return "".join(s.raw for s in self.segments)

    def variables(self) -> set[str]:
        out: set[str] = set()
        for seg in self.segments:
            if isinstance(seg, Hole):
                out |= expr_variables(seg.expr)
        return out

    def render(self, registry: VariableRegistry, precision: int = 2) -> str:
        parts = []
        for seg in self.segments:
            if isinstance(seg, Lit):
                parts.append(seg.text)
            else:
                value = eval_expr(seg.expr, registry)
                parts.append("--" if value is None else format_scalar(value, precision))
        return "".join(parts)


def parse_template(src: str) -> Template:
    segments: list[Union[Lit, Hole]] = []
    lit_raw: list[str] = []
    lit_text: list[str] = []

    def flush() -> None:
        if lit_raw:
            segments.append(Lit("".join(lit_raw), "".join(lit_text)))
            lit_raw.clear()
            lit_text.clear()

    i = 0
    n = len(src)
    while i < n:
        ch = src[i]
        if ch != "$":
            lit_raw.append(ch)
            lit_text.append(ch)
            i += 1
            continue
        if i + 1 < n and src[i + 1] == "$":
            lit_raw.append("$$")
            lit_text.append("$")
            i += 2
            continue
        if i + 1 < n and src[i + 1] == "{":
            end = src.find("}", i + 2)
            if end < 0:
                raise TemplateError("unterminated interpolation", i)
            body = src[i + 2:end]
            if not body.strip():
                raise TemplateError("empty interpolation", i)
            expr = _parse_expr_at(body, i + 2)
            flush()
            segments.append(Hole(src[i:end + 1], expr))
            i = end + 1
            continue
        lit_raw.append("$")
        lit_text.append("$")
        i += 1
    flush()
    return Template(src, tuple(segments))


def parse_expression(src: str) -> Expr:
    """Parses a standalone expression (whole string); offsets are into src."""
    return _parse_expr_at(src, 0)


def eval_template(t: Template, registry: VariableRegistry, precision: int = 2) -> str:
    return t.render(registry, precision)


def eval_expr(expr: Expr, registry: VariableRegistry) -> float | None:
    """Strict unavailable propagation; never raises, never returns NaN/inf."""
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        v = registry.get(expr.path)
        return float(v) if v is not None and math.isfinite(v) else None
    if isinstance(expr, Call):
        return registry.frame / FRAME_RATE
    if isinstance(expr, Unary):
        v = eval_expr(expr.operand, registry)
        return None if v is None else -v
    left = eval_expr(expr.left, registry)
    right = eval_expr(expr.right, registry)
    if left is None or right is None:
        return None
    if expr.op == "+":
        out = left + right
    elif expr.op == "-":
        out = left - right
    elif expr.op == "*":
        out = left * right
    else:
        if right == 0.0:
            return None
        out = left / right
    return out if math.isfinite(out) else None


def expr_variables(expr: Expr) -> set[str]:
    if isinstance(expr, Var):
        return {expr.path}
    if isinstance(expr, Unary):
        return expr_variables(expr.operand)
    if isinstance(expr, Binary):
        return expr_variables(expr.left) | expr_variables(expr.right)
    return set()


def format_scalar(value: float, precision: int = 2) -> str:
    """Fixed-point formatting, round-half-away-from-zero on the shortest
    decimal form of the double (so 1.005 -> '1.01')."""
    value = float(value)
    if not math.isfinite(value):
        return "--"
    with localcontext() as ctx:
        ctx.prec = 60
        q = Decimal(repr(value)).quantize(Decimal(1).scaleb(-precision), rounding=ROUND_HALF_UP)
        if q.is_zero():
            q = abs(q)  # never display -0.00
    return str(q)


# --- expression parser -----------------------------------------------------

_MAX_DEPTH = 200  # parens/unary nesting; keeps arbitrary input from blowing the stack


class _Parser:
    def __init__(self, src: str, base: int):
        self.src = src
        self.base = base  # offset of src inside the enclosing template
        self.i = 0
        self.depth = 0

    def error(self, message: str, at: int | None = None) -> TemplateError:
        return TemplateError(message, self.base + (self.i if at is None else at))

    def skip_ws(self) -> None:
        while self.i < len(self.src) and self.src[self.i].isspace():
            self.i += 1

    def peek(self) -> str:
        return self.src[self.i] if self.i < len(self.src) else ""

    def expr(self) -> Expr:
        node = self.term()
        while True:
            self.skip_ws()
            op = self.peek()
            if op == "+" or op == "-":
                self.i += 1
                node = Binary(op, node, self.term())
            else:
                return node

    def term(self) -> Expr:
        node = self.unary()
        while True:
            self.skip_ws()
            op = self.peek()
            if op == "*" or op == "/":
                self.i += 1
                node = Binary(op, node, self.unary())
            else:
                return node

    def unary(self) -> Expr:
        self.skip_ws()
        if self.peek() == "-":
            if self.depth >= _MAX_DEPTH:
                raise self.error("expression too deeply nested")
            self.i += 1
            self.depth += 1
            try:
                return Unary("-", self.unary())
            finally:
                self.depth -= 1
        return self.atom()

    def atom(self) -> Expr:
        self.skip_ws()
        ch = self.peek()
        if not ch:
            raise self.error("expected a value")
        if ch == "(":
            if self.depth >= _MAX_DEPTH:
                raise self.error("expression too deeply nested")
            self.i += 1
            self.depth += 1
            try:
                node = self.expr()
            finally:
                self.depth -= 1
            self.skip_ws()
            if self.peek() != ")":
                raise self.error("expected ')'")
            self.i += 1
            return node
        if ch.isdigit():
            return self.number()
        if ch.isalpha() or ch == "_":
            return self.path()
        raise self.error(f"unexpected character {ch!r}")

    def number(self) -> Num:
        start = self.i
        while self.i < len(self.src) and self.src[self.i].isdigit():
            self.i += 1
        if self.peek() == ".":
            if self.i + 1 >= len(self.src) or not self.src[self.i + 1].isdigit():
                raise self.error("expected digits after decimal point", self.i)
            self.i += 1
            while self.i < len(self.src) and self.src[self.i].isdigit():
                self.i += 1
        return Num(float(self.src[start:self.i]))

    def path(self) -> Expr:
        start = self.i
        parts = [self.ident()]
        while self.peek() == ".":
            mark = self.i
            self.i += 1
            ch = self.peek()
            if not (ch.isalpha() or ch == "_"):
                raise self.error("expected identifier after '.'", mark + 1)
            parts.append(self.ident())
        name = ".".join(parts)
        self.skip_ws()
        if self.peek() == "(":
            if name != "time":
                raise self.error(f"unknown function {name!r}", start)
            self.i += 1
            self.skip_ws()
            if self.peek() != ")":
                raise self.error("time() takes no arguments")
            self.i += 1
            return Call("time")
        return Var(name)

    def ident(self) -> str:
        start = self.i
        while self.i < len(self.src) and (self.src[self.i].isalnum() or self.src[self.i] == "_"):
            self.i += 1
        return self.src[start:self.i]


def _parse_expr_at(src: str, base: int) -> Expr:
    p = _Parser(src, base)
    node = p.expr()
    p.skip_ws()
    if p.i != len(src):
        raise p.error("unexpected trailing input")
    return node
