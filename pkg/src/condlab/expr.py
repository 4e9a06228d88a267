"""A small arithmetic expression language for scenario files.

Grammar: numbers, variables, ``+ - * / ^`` (``**`` is accepted as a synonym
of ``^``), unary minus, parentheses and the functions ``exp log sin cos sinh
cosh sqrt``.  Expressions are parsed with :mod:`ast` and every node is
checked against a whitelist, so nothing outside the grammar is ever
evaluated.  Expressions can be differentiated symbolically, which lets a
warping profile given as text carry exact first and second derivatives.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import SchemaError

FUNCTIONS = {
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "sqrt": np.sqrt,
}

Node = Union["Num", "Var", "Neg", "Bin", "Fn"]


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: Node


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * / ^
    left: Node
    right: Node


@dataclass(frozen=True)
class Fn:
    name: str
    arg: Node


_BINOPS = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/", ast.Pow: "^"}


def _convert(node: ast.AST, variables: frozenset, source: str) -> Node:
    if isinstance(node, ast.Expression):
        return _convert(node.body, variables, source)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return Num(float(node.value))
    if isinstance(node, ast.Name):
        if node.id == "pi":
            return Num(math.pi)
        if node.id not in variables:
            raise SchemaError(f"unknown variable {node.id!r} in {source!r}; allowed: {sorted(variables)}")
        return Var(node.id)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        arg = _convert(node.operand, variables, source)
        return Neg(arg) if isinstance(node.op, ast.USub) else arg
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return Bin(_BINOPS[type(node.op)], _convert(node.left, variables, source), _convert(node.right, variables, source))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in FUNCTIONS:
        if len(node.args) != 1 or node.keywords:
            raise SchemaError(f"{node.func.id} takes exactly one argument in {source!r}")
        return Fn(node.func.id, _convert(node.args[0], variables, source))
    raise SchemaError(f"unsupported syntax {type(node).__name__} in {source!r}")


def parse(source: str, variables) -> Node:
    """Parse ``source`` allowing only the given variable names."""
    if not isinstance(source, str) or not source.strip():
        raise SchemaError("expression must be a non-empty string")
    text = source.replace("^", "**")
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise SchemaError(f"cannot parse expression {source!r}: {exc.msg}") from exc
    return _convert(tree, frozenset(variables), source)


def evaluate(node: Node, env: Mapping[str, np.ndarray]):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -evaluate(node.arg, env)
    if isinstance(node, Fn):
        return FUNCTIONS[node.name](evaluate(node.arg, env))
    a = evaluate(node.left, env)
    b = evaluate(node.right, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a / b
    return np.power(a, b)


def _simplify(node: Node) -> Node:
    if isinstance(node, Bin):
        l, r = node.left, node.right
        if isinstance(l, Num) and isinstance(r, Num):
            return Num(float(evaluate(node, {})))
        if node.op == "+":
            if l == Num(0.0):
                return r
            if r == Num(0.0):
                return l
        if node.op == "-" and r == Num(0.0):
            return l
        if node.op == "*":
            if Num(0.0) in (l, r):
                return Num(0.0)
            if l == Num(1.0):
                return r
            if r == Num(1.0):
                return l
        if node.op == "/" and l == Num(0.0):
            return Num(0.0)
        if node.op == "^" and r == Num(1.0):
            return l
    if isinstance(node, Neg) and isinstance(node.arg, Num):
        return Num(-node.arg.value)
    return node


def _b(op, a, b):
    return _simplify(Bin(op, a, b))


def _depends(node: Node, var: str) -> bool:
    if isinstance(node, Num):
        return False
    if isinstance(node, Var):
        return node.name == var
    if isinstance(node, (Neg, Fn)):
        return _depends(node.arg, var)
    return _depends(node.left, var) or _depends(node.right, var)


def differentiate(node: Node, var: str) -> Node:
    """Symbolic derivative with respect to ``var``."""
    if not _depends(node, var):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0)
    if isinstance(node, Neg):
        return _simplify(Neg(differentiate(node.arg, var)))
    if isinstance(node, Fn):
        u = node.arg
        du = differentiate(u, var)
        outer = {
            "exp": lambda: Fn("exp", u),
            "log": lambda: _b("/", Num(1.0), u),
            "sin": lambda: Fn("cos", u),
            "cos": lambda: Neg(Fn("sin", u)),
            "sinh": lambda: Fn("cosh", u),
            "cosh": lambda: Fn("sinh", u),
            "sqrt": lambda: _b("/", Num(0.5), Fn("sqrt", u)),
        }[node.name]()
        return _b("*", outer, du)
    l, r = node.left, node.right
    dl, dr = differentiate(l, var), differentiate(r, var)
    if node.op in "+-":
        return _b(node.op, dl, dr)
    if node.op == "*":
        return _b("+", _b("*", dl, r), _b("*", l, dr))
    if node.op == "/":
        return _b("/", _b("-", _b("*", dl, r), _b("*", l, dr)), _b("^", r, Num(2.0)))
    # power
    if not _depends(r, var):
        return _b("*", _b("*", r, _b("^", l, _b("-", r, Num(1.0)))), dl)
    # general a^b = exp(b log a)
    return _b("*", node, _b("+", _b("*", dr, Fn("log", l)), _b("/", _b("*", r, dl), l)))


def to_text(node: Node) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.arg)})"
    if isinstance(node, Fn):
        return f"{node.name}({to_text(node.arg)})"
    return f"({to_text(node.left)} {node.op} {to_text(node.right)})"


@dataclass(frozen=True)
class Expression:
    """A parsed expression bound to an ordered tuple of variable names."""

    source: str
    node: Node
    variables: tuple

    @classmethod
    def compile(cls, source: str, variables) -> "Expression":
        variables = tuple(variables)
        return cls(source, parse(source, variables), variables)

    def __call__(self, **env):
        with np.errstate(all="ignore"):
            return evaluate(self.node, env)

    def derivative(self, var: str) -> "Expression":
        d = differentiate(self.node, var)
        return Expression(to_text(d), d, self.variables)


def coordinate_env(x: np.ndarray, r=None) -> dict:
    """``x1..xn`` and ``r`` (Euclidean norm unless given) for a batch of points."""
    x = np.asarray(x, dtype=float)
    env = {f"x{i + 1}": x[..., i] for i in range(x.shape[-1])}
    env["r"] = np.linalg.norm(x, axis=-1) if r is None else r
    return env


def coordinate_variables(n: int) -> tuple:
    return tuple(f"x{i + 1}" for i in range(n)) + ("r",)


def matrix_field(rows, n: int, radius=None):
    """Batched ``(..., n, n)`` field from an ``n x n`` list of expression strings."""
    if len(rows) != n or any(len(row) != n for row in rows):
        raise SchemaError(f"matrix must be {n} x {n}")
    exprs = [[Expression.compile(str(e), coordinate_variables(n)) for e in row] for row in rows]

    def field(x):
        x = np.asarray(x, dtype=float)
        env = coordinate_env(x, radius(x) if radius is not None else None)
        out = np.empty(x.shape[:-1] + (n, n))
        for i in range(n):
            for j in range(n):
                out[..., i, j] = exprs[i][j](**env)
        return out

    return field


def radial_profile(source: str, name: str = ""):
    """A :class:`RadialProfile` in the variable ``t`` (``r`` is accepted too)."""
    from .model_space import RadialProfile

    e = Expression.compile(source, ("t", "r"))
    if _depends(e.node, "r") and _depends(e.node, "t"):
        raise SchemaError("a radial profile uses either t or r, not both")
    var = "r" if _depends(e.node, "r") else "t"
    d1 = e.derivative(var)
    d2 = d1.derivative(var)

    def call(ex):
        def f(t):
            t = np.asarray(t, dtype=float)
            return np.broadcast_to(np.asarray(ex(**{var: t}), dtype=float), t.shape).copy()

        return f

    return RadialProfile(call(e), call(d1), call(d2), name=name or source)
