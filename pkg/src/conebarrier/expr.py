"""Tiny arithmetic expression language for drift/potential/data fields.

Grammar: +, -, *, /, ** (powers), unary sign, sin/cos/exp, the variables
x and y, numeric literals and the constants pi and e.  Expressions are
compiled once into vectorized evaluators over point arrays.
"""

from __future__ import annotations

import ast

import numpy as np

from .errors import ConfigError

_ALLOWED_CALLS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_ALLOWED_NAMES = {"pi": np.pi, "e": np.e}
_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_ALLOWED_UNARY = (ast.UAdd, ast.USub)


def _check(node: ast.AST, source: str) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body, source)
    elif isinstance(node, ast.BinOp):
        if not isinstance(node.op, _ALLOWED_BINOPS):
            raise ConfigError(f"operator not allowed in {source!r}")
        _check(node.left, source)
        _check(node.right, source)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, _ALLOWED_UNARY):
            raise ConfigError(f"unary operator not allowed in {source!r}")
        _check(node.operand, source)
    elif isinstance(node, ast.Call):
        if not (isinstance(node.func, ast.Name) and node.func.id in _ALLOWED_CALLS):
            raise ConfigError(f"only sin/cos/exp calls are allowed in {source!r}")
        if len(node.args) != 1 or node.keywords:
            raise ConfigError(f"calls take exactly one argument in {source!r}")
        _check(node.args[0], source)
    elif isinstance(node, ast.Name):
        if node.id not in ("x", "y") and node.id not in _ALLOWED_NAMES:
            raise ConfigError(f"unknown name {node.id!r} in {source!r}")
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ConfigError(f"only numeric literals are allowed in {source!r}")
    else:
        raise ConfigError(f"syntax not allowed in {source!r}")


def _evaluate(node: ast.AST, x, y):
    if isinstance(node, ast.Expression):
        return _evaluate(node.body, x, y)
    if isinstance(node, ast.BinOp):
        lhs = _evaluate(node.left, x, y)
        rhs = _evaluate(node.right, x, y)
        if isinstance(node.op, ast.Add):
            return lhs + rhs
        if isinstance(node.op, ast.Sub):
            return lhs - rhs
        if isinstance(node.op, ast.Mult):
            return lhs * rhs
        if isinstance(node.op, ast.Div):
            return lhs / rhs
        return lhs ** rhs
    if isinstance(node, ast.UnaryOp):
        v = _evaluate(node.operand, x, y)
        return v if isinstance(node.op, ast.UAdd) else -v
    if isinstance(node, ast.Call):
        return _ALLOWED_CALLS[node.func.id](_evaluate(node.args[0], x, y))
    if isinstance(node, ast.Name):
        if node.id == "x":
            return x
        if node.id == "y":
            return y
        return _ALLOWED_NAMES[node.id]
    return node.value  # ast.Constant


def compile_scalar(source: str):
    """Compile an expression of x and y into a vectorized point function."""
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {source!r}: {exc}") from exc
    _check(tree, source)

    def field(pts):
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            out = _evaluate(tree, pts[0], pts[1])
            return float(np.asarray(out))
        out = _evaluate(tree, pts[:, 0], pts[:, 1])
        out = np.asarray(out, dtype=float)
        if out.ndim == 0:
            out = np.full(len(pts), float(out))
        return out

    field.source = source
    return field


def is_zero_expression(source: str) -> bool:
    """True when the expression is the literal constant zero."""
    try:
        return float(source.strip()) == 0.0
    except ValueError:
        return False


def compile_vector(source_x: str, source_y: str):
    """Compile a drift field from its two component expressions."""
    fx = compile_scalar(source_x)
    fy = compile_scalar(source_y)

    def field(pts):
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            return np.array([fx(pts), fy(pts)])
        return np.column_stack([fx(pts), fy(pts)])

    field.sources = (source_x, source_y)
    return field
