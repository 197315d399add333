"""Closed-form scalar coefficient functions on a coordinate chart.

Coefficients are stored as sympy expressions restricted to a small grammar
(constants, coordinates x1..xn, sums, products, powers, sin, cos, exp), so
derivatives of any order are exact.  Numerical evaluation goes through
``lambdify`` to numpy or jax.
"""

from __future__ import annotations

import ast
from functools import cached_property

import numpy as np
import sympy as sp

_FUNCS = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp}


class ExpressionError(ValueError):
    pass


def coordinates(n: int) -> tuple:
    return sp.symbols(f"x1:{n + 1}", real=True)


def _check_nodes(e: sp.Expr, syms) -> None:
    allowed_atoms = set(syms)
    for node in sp.preorder_traversal(e):
        if node.is_Number or node in allowed_atoms:
            continue
        if node.is_Symbol:
            raise ExpressionError(f"unknown symbol {node}")
        if isinstance(node, (sp.Add, sp.Mul, sp.Pow, sp.sin, sp.cos, sp.exp)):
            continue
        if node in (sp.pi, sp.E):
            continue
        raise ExpressionError(f"unsupported node {type(node).__name__}")


class ScalarExpr:
    """Immutable scalar function of chart coordinates with exact derivatives.

    Parameters
    ----------
    expr : sympy expression in the symbols ``x1..xn``.
    n : chart dimension.
    """

    def __init__(self, expr, n: int):
        syms = coordinates(n)
        e = sp.sympify(expr)
        # rebind any plain symbols named x1..xn onto the real-valued chart symbols
        e = e.subs({sp.Symbol(s.name): s for s in syms})
        _check_nodes(e, syms)
        self.expr = e
        self.n = n

    # construction -------------------------------------------------------
    @classmethod
    def parse(cls, text: str, n: int) -> "ScalarExpr":
        """Parse the model-file grammar: literals, x1..xn, + - * / ^, sin, cos, exp."""
        syms = coordinates(n)
        names = {s.name: s for s in syms}
        try:
            tree = ast.parse(str(text).replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None

        def build(node):
            if isinstance(node, ast.Expression):
                return build(node.body)
            if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
                return sp.Rational(repr(node.value)) if isinstance(node.value, float) else sp.Integer(node.value)
            if isinstance(node, ast.Name):
                if node.id in names:
                    return names[node.id]
                raise ExpressionError(f"unknown name {node.id!r} in {text!r}")
            if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
                v = build(node.operand)
                return -v if isinstance(node.op, ast.USub) else v
            if isinstance(node, ast.BinOp):
                a, b = build(node.left), build(node.right)
                ops = {ast.Add: lambda: a + b, ast.Sub: lambda: a - b, ast.Mult: lambda: a * b,
                       ast.Div: lambda: a / b, ast.Pow: lambda: a ** b}
                for k, f in ops.items():
                    if isinstance(node.op, k):
                        return f()
            if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
                if len(node.args) != 1 or node.keywords:
                    raise ExpressionError(f"{node.func.id} takes one argument")
                return _FUNCS[node.func.id](build(node.args[0]))
            raise ExpressionError(f"unsupported syntax in {text!r}")

        return cls(build(tree), n)

    @classmethod
    def const(cls, value, n: int) -> "ScalarExpr":
        return cls(sp.nsimplify(value), n)

    @classmethod
    def coord(cls, i: int, n: int) -> "ScalarExpr":
        """Coordinate function x_{i+1} (0-based index)."""
        return cls(coordinates(n)[i], n)

    # calculus -----------------------------------------------------------
    def diff(self, *idx: int) -> "ScalarExpr":
        """Exact partial derivative along 0-based coordinate indices."""
        syms = coordinates(self.n)
        return ScalarExpr(sp.diff(self.expr, *[syms[i] for i in idx]), self.n)

    @cached_property
    def _np_fn(self):
        return sp.lambdify([coordinates(self.n)], self.expr, modules="numpy")

    def __call__(self, x) -> float:
        return float(self._np_fn(np.asarray(x, dtype=float)))

    evaluate = __call__

    def is_zero(self) -> bool:
        return self.expr == 0

    def __repr__(self):
        return f"ScalarExpr({sp.sstr(self.expr)})"

    def __str__(self):
        return sp.sstr(self.expr).replace("**", "^")

    def __eq__(self, other):
        return isinstance(other, ScalarExpr) and self.n == other.n and sp.simplify(self.expr - other.expr) == 0

    def __hash__(self):
        return hash((self.n, sp.srepr(self.expr)))


def as_expr(value, n: int) -> ScalarExpr:
    if isinstance(value, ScalarExpr):
        return value
    if isinstance(value, str):
        return ScalarExpr.parse(value, n)
    return ScalarExpr(value, n)


def matrix_function(entries, n: int, backend: str = "numpy"):
    """Compile a nested list of ScalarExpr into a single array-valued function of x."""
    return sympy_matrix_function(sp.Matrix([[e.expr for e in row] for row in entries]), n, backend)


def sympy_matrix_function(mat, n: int, backend: str = "numpy"):
    """Compile a sympy matrix in the coordinates ``x0..x{n-1}``."""
    if backend == "jax":
        import jax.numpy as jnp

        f = sp.lambdify([coordinates(n)], mat, modules="jax")
        return lambda x: jnp.asarray(f(x), dtype=jnp.float64)
    f = sp.lambdify([coordinates(n)], mat, modules="numpy")
    return lambda x: np.asarray(f(np.asarray(x, dtype=float)), dtype=float)
