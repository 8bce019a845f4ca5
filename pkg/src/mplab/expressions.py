"""Closed-form coefficient fields written as small arithmetic expressions.

Expressions use the coordinates ``x1 .. xn``, ``absx`` (the Euclidean norm
of x), numeric literals, ``+ - * / **`` and the functions listed in
``FUNCTIONS``.  They are validated against a whitelist of AST nodes, then
compiled into numpy-vectorized callables.
"""

from __future__ import annotations

import ast
import re
from functools import lru_cache

import numpy as np

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "log": np.log,
    "tanh": np.tanh,
    "minimum": np.minimum,
    "maximum": np.maximum,
}
CONSTANTS = {"pi": np.pi, "e": np.e}

_ALLOWED_NODES = (
    ast.Expression,
    ast.BinOp,
    ast.UnaryOp,
    ast.Call,
    ast.Name,
    ast.Load,
    ast.Constant,
    ast.Add,
    ast.Sub,
    ast.Mult,
    ast.Div,
    ast.Pow,
    ast.USub,
    ast.UAdd,
)
_COORD = re.compile(r"^x([1-9][0-9]*)$")


class ExpressionError(ValueError):
    pass


def _names(n: int) -> set:
    return {f"x{i}" for i in range(1, n + 1)} | {"absx"}


def parse(source, n: int) -> ast.Expression:
    if isinstance(source, (int, float)) and not isinstance(source, bool):
        source = repr(float(source))
    if not isinstance(source, str):
        raise ExpressionError(f"expression must be a string or number, got {type(source).__name__}")
    try:
        tree = ast.parse(source.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {source!r}: {exc.msg}") from None
    allowed = _names(n)
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ExpressionError(f"{type(node).__name__} not allowed in {source!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ExpressionError(f"only numeric literals allowed in {source!r}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS or node.keywords:
                raise ExpressionError(f"unsupported call in {source!r}")
        if isinstance(node, ast.Name) and node.id not in allowed | set(FUNCTIONS) | set(CONSTANTS):
            raise ExpressionError(f"unknown name {node.id!r} in {source!r} (dimension {n})")
    return tree


@lru_cache(maxsize=4096)
def compile_expr(source: str, n: int):
    """Return ``f(x)`` evaluating the expression at a point or an (m, n) array."""
    tree = parse(source, n)
    args = ", ".join([f"x{i}" for i in range(1, n + 1)] + ["absx"])
    code = f"lambda {args}: {ast.unparse(tree.body)}"
    namespace = {"__builtins__": {}, **FUNCTIONS, **CONSTANTS}
    raw = eval(compile(code, "<coefficient>", "eval"), namespace)  # noqa: S307 - whitelisted AST

    def field(x):
        x = np.asarray(x, dtype=float)
        cols = [x[..., i] for i in range(n)]
        absx = np.sqrt(np.sum(x * x, axis=-1))
        val = raw(*cols, absx)
        return np.broadcast_to(np.asarray(val, dtype=float), x.shape[:-1]) if x.ndim > 1 else float(val)

    field.source = source
    return field


def normalize(source, n: int) -> str:
    """Canonical string form of a number or expression (validated)."""
    if isinstance(source, (int, float)) and not isinstance(source, bool):
        return repr(float(source))
    parse(source, n)
    return str(source).strip()


class _Scale(ast.NodeTransformer):
    def __init__(self, factor: float):
        self.factor = factor

    def visit_Name(self, node):
        if node.id == "absx" or _COORD.match(node.id):
            return ast.BinOp(left=ast.Constant(self.factor), op=ast.Mult(), right=node)
        return node


def substitute_scaled(source: str, n: int, factor: float) -> str:
    """Expression for ``y -> f(factor * y)`` (factor > 0, so |factor y| = factor |y|)."""
    tree = parse(source, n)
    new = _Scale(float(factor)).visit(tree)
    return ast.unparse(ast.fix_missing_locations(new).body)


def times(factor: float, source: str, n: int) -> str:
    parse(source, n)
    return f"{float(factor)!r} * ({source})"


def is_constant(source: str, n: int) -> bool:
    tree = parse(source, n)
    return not any(isinstance(node, ast.Name) and node.id not in CONSTANTS and node.id not in FUNCTIONS for node in ast.walk(tree))
