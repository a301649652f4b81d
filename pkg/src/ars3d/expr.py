"""Expression trees for frame coefficients.

A small closed language over the variables x, y, z: infix arithmetic with
``+ - * /``, integer powers written ``base^n``, a fixed table of unary
functions, decimal literals and the constant ``pi``. The trees support exact
symbolic differentiation (the derivative of any expression is again an
expression) and compilation to fast scalar or numpy-vectorised callables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import FrameParseError

VARIABLES = ("x", "y", "z")

# function name -> (scalar impl, numpy impl)
_SCALAR_FUNCS = {
    "sin": math.sin, "cos": math.cos, "tan": math.tan,
    "exp": math.exp, "log": math.log, "sqrt": math.sqrt,
    "abs": abs, "tanh": math.tanh, "sinh": math.sinh, "cosh": math.cosh,
}
_ARRAY_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan,
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt,
    "abs": np.abs, "tanh": np.tanh, "sinh": np.sinh, "cosh": np.cosh,
}
FUNCTIONS = tuple(_SCALAR_FUNCS)


class Expr:
    """Base class for expression nodes."""

    def evaluate(self, x, y, z):
        """Evaluate at a point; accepts floats or numpy arrays."""
        table = _ARRAY_FUNCS if _any_array(x, y, z) else _SCALAR_FUNCS
        return self._ev(x, y, z, table)

    def diff(self, var: str) -> "Expr":
        """Exact partial derivative with respect to 'x', 'y' or 'z'."""
        if var not in VARIABLES:
            raise ValueError(f"unknown variable {var!r}")
        return self._diff(var)

    def __str__(self) -> str:
        return self._src("math").replace("math.", "")

    def _ev(self, x, y, z, fns):
        raise NotImplementedError

    def _diff(self, var: str) -> "Expr":
        raise NotImplementedError

    def _src(self, ns: str) -> str:
        raise NotImplementedError


def _any_array(*vals) -> bool:
    return any(isinstance(v, np.ndarray) for v in vals)


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def _ev(self, x, y, z, fns):
        return self.value

    def _diff(self, var):
        return Const(0.0)

    def _src(self, ns):
        return repr(self.value)


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def _ev(self, x, y, z, fns):
        return {"x": x, "y": y, "z": z}[self.name]

    def _diff(self, var):
        return Const(1.0) if var == self.name else Const(0.0)

    def _src(self, ns):
        return self.name


@dataclass(frozen=True)
class Add(Expr):
    a: Expr
    b: Expr

    def _ev(self, x, y, z, fns):
        return self.a._ev(x, y, z, fns) + self.b._ev(x, y, z, fns)

    def _diff(self, var):
        return add(self.a._diff(var), self.b._diff(var))

    def _src(self, ns):
        return f"({self.a._src(ns)} + {self.b._src(ns)})"


@dataclass(frozen=True)
class Sub(Expr):
    a: Expr
    b: Expr

    def _ev(self, x, y, z, fns):
        return self.a._ev(x, y, z, fns) - self.b._ev(x, y, z, fns)

    def _diff(self, var):
        return sub(self.a._diff(var), self.b._diff(var))

    def _src(self, ns):
        return f"({self.a._src(ns)} - {self.b._src(ns)})"


@dataclass(frozen=True)
class Mul(Expr):
    a: Expr
    b: Expr

    def _ev(self, x, y, z, fns):
        return self.a._ev(x, y, z, fns) * self.b._ev(x, y, z, fns)

    def _diff(self, var):
        return add(mul(self.a._diff(var), self.b),
                   mul(self.a, self.b._diff(var)))

    def _src(self, ns):
        return f"({self.a._src(ns)} * {self.b._src(ns)})"


@dataclass(frozen=True)
class Div(Expr):
    a: Expr
    b: Expr

    def _ev(self, x, y, z, fns):
        return self.a._ev(x, y, z, fns) / self.b._ev(x, y, z, fns)

    def _diff(self, var):
        # (a/b)' = (a'b - ab') / b^2
        num = sub(mul(self.a._diff(var), self.b),
                  mul(self.a, self.b._diff(var)))
        return div(num, pow_(self.b, 2))

    def _src(self, ns):
        return f"({self.a._src(ns)} / {self.b._src(ns)})"


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int

    def _ev(self, x, y, z, fns):
        return self.base._ev(x, y, z, fns) ** self.exponent

    def _diff(self, var):
        n = self.exponent
        return mul(mul(Const(float(n)), pow_(self.base, n - 1)),
                   self.base._diff(var))

    def _src(self, ns):
        return f"({self.base._src(ns)} ** {self.exponent})"


@dataclass(frozen=True)
class Neg(Expr):
    a: Expr

    def _ev(self, x, y, z, fns):
        return -self.a._ev(x, y, z, fns)

    def _diff(self, var):
        return neg(self.a._diff(var))

    def _src(self, ns):
        return f"(-{self.a._src(ns)})"


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    arg: Expr

    def _ev(self, x, y, z, fns):
        return fns[self.fn](self.arg._ev(x, y, z, fns))

    def _diff(self, var):
        u = self.arg
        du = u._diff(var)
        fn = self.fn
        if fn == "sin":
            outer = Call("cos", u)
        elif fn == "cos":
            outer = neg(Call("sin", u))
        elif fn == "tan":
            outer = div(Const(1.0), pow_(Call("cos", u), 2))
        elif fn == "exp":
            outer = Call("exp", u)
        elif fn == "log":
            outer = div(Const(1.0), u)
        elif fn == "sqrt":
            outer = div(Const(1.0), mul(Const(2.0), Call("sqrt", u)))
        elif fn == "abs":
            outer = div(u, Call("abs", u))
        elif fn == "tanh":
            outer = sub(Const(1.0), pow_(Call("tanh", u), 2))
        elif fn == "sinh":
            outer = Call("cosh", u)
        elif fn == "cosh":
            outer = Call("sinh", u)
        else:  # pragma: no cover - table is closed
            raise ValueError(f"no derivative rule for {fn}")
        return mul(outer, du)

    def _src(self, ns):
        name = "abs" if self.fn == "abs" else f"{ns}.{self.fn}"
        return f"{name}({self.arg._src(ns)})"


# ---------------------------------------------------------------------------
# folding constructors, used by diff to keep derivative trees small


def _is_const(e: Expr, v: float | None = None) -> bool:
    return isinstance(e, Const) and (v is None or e.value == v)


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return Const(0.0)
    if _is_const(b, 1.0):
        return a
    return Div(a, b)


def pow_(base: Expr, exponent: int) -> Expr:
    if exponent == 0:
        return Const(1.0)
    if exponent == 1:
        return base
    if _is_const(base):
        return Const(base.value ** exponent)
    return Pow(base, exponent)


def neg(a: Expr) -> Expr:
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.a
    return Neg(a)


# ---------------------------------------------------------------------------
# compilation


@lru_cache(maxsize=4096)
def compiled_scalar(e: Expr):
    """Fast float-in float-out callable f(x, y, z) for an expression."""
    src = e._src("math")
    return eval(f"lambda x, y, z: {src}", {"math": math, "abs": abs})


@lru_cache(maxsize=4096)
def compiled_array(e: Expr):
    """numpy-vectorised callable f(x, y, z) for an expression."""
    src = e._src("np")
    return eval(f"lambda x, y, z: {src}", {"np": np, "abs": np.abs})


# ---------------------------------------------------------------------------
# parsing


_OPS = set("+-*/^(),;=")


@dataclass(frozen=True)
class _Token:
    kind: str  # NUM | IDENT | OP | END
    text: str
    pos: int


def _line_col(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    nl = text.rfind("\n", 0, pos)
    return line, pos - nl


def _tokenize(text: str, start: int, stop: int) -> list[_Token]:
    toks = []
    i = start
    while i < stop:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in _OPS:
            toks.append(_Token("OP", c, i))
            i += 1
            continue
        if c.isdigit() or c == ".":
            j = i
            seen_dot = False
            while j < stop and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                seen_dot = seen_dot or text[j] == "."
                j += 1
            if j < stop and text[j] in "eE":
                k = j + 1
                if k < stop and text[k] in "+-":
                    k += 1
                if k < stop and text[k].isdigit():
                    while k < stop and text[k].isdigit():
                        k += 1
                    j = k
            toks.append(_Token("NUM", text[i:j], i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < stop and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(_Token("IDENT", text[i:j], i))
            i = j
            continue
        line, col = _line_col(text, i)
        raise FrameParseError(f"unexpected character {c!r}", line, col)
    toks.append(_Token("END", "", stop))
    return toks


class _Parser:
    """Recursive-descent parser for the expression grammar."""

    def __init__(self, text: str, toks: list[_Token]):
        self.text = text
        self.toks = toks
        self.i = 0

    def _peek(self) -> _Token:
        return self.toks[self.i]

    def _next(self) -> _Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def _err(self, msg: str, tok: _Token):
        line, col = _line_col(self.text, tok.pos)
        raise FrameParseError(msg, line, col)

    def parse(self) -> Expr:
        e = self.expr()
        t = self._peek()
        if t.kind != "END":
            self._err(f"unexpected token {t.text!r}", t)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self._peek().kind == "OP" and self._peek().text in "+-":
            op = self._next().text
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self._peek().kind == "OP" and self._peek().text in "*/":
            op = self._next().text
            rhs = self.factor()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def factor(self) -> Expr:
        t = self._peek()
        if t.kind == "OP" and t.text == "-":
            self._next()
            return neg(self.factor())
        if t.kind == "OP" and t.text == "+":
            self._next()
            return self.factor()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        t = self._peek()
        if t.kind == "OP" and t.text == "^":
            self._next()
            return Pow(base, self.int_exponent())
        return base

    def int_exponent(self) -> int:
        sign = 1
        t = self._peek()
        if t.kind == "OP" and t.text == "-":
            self._next()
            sign = -1
            t = self._peek()
        if t.kind != "NUM":
            self._err("malformed exponent: expected an integer", t)
        try:
            if any(c in t.text for c in ".eE"):
                raise ValueError
            n = int(t.text)
        except ValueError:
            self._err(f"malformed exponent: {t.text!r} is not an integer", t)
        self._next()
        return sign * n

    def atom(self) -> Expr:
        t = self._next()
        if t.kind == "NUM":
            return Const(float(t.text))
        if t.kind == "IDENT":
            name = t.text
            if name == "pi":
                return Const(math.pi)
            if name in VARIABLES:
                return Var(name)
            if name in _SCALAR_FUNCS:
                t2 = self._next()
                if not (t2.kind == "OP" and t2.text == "("):
                    self._err(f"function {name!r} must be called as {name}(...)", t2)
                arg = self.expr()
                t3 = self._next()
                if not (t3.kind == "OP" and t3.text == ")"):
                    self._err("expected ')'", t3)
                return Call(name, arg)
            self._err(f"unknown identifier {name!r}", t)
        if t.kind == "OP" and t.text == "(":
            e = self.expr()
            t2 = self._next()
            if not (t2.kind == "OP" and t2.text == ")"):
                self._err("expected ')'", t2)
            return e
        self._err(f"unexpected token {t.text or 'end of input'!r}", t)


def parse_expression(text: str, start: int = 0, stop: int | None = None) -> Expr:
    """Parse the slice text[start:stop] as an expression.

    Positions in error messages are line/column within the full ``text`` so
    callers embedding expressions in a larger document get accurate locations.
    """
    if stop is None:
        stop = len(text)
    toks = _tokenize(text, start, stop)
    return _Parser(text, toks).parse()
