"""Expression trees for evolved regression models and their protected evaluation."""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

DIVISION_EPSILON = 1e-9
SATURATION = 1e12

BINARY = {"+", "-", "*", "/"}
UNARY = {"sin", "cos", "sqrt", "square"}

_VAR = re.compile(r"^x\[(\d+)\]$")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Call:
    op: str
    args: tuple


Node = Const | Var | Call


def leaf(token: str):
    """Turn a terminal into a tree leaf, or return it unchanged if it is an operator."""
    m = _VAR.match(token)
    if m:
        return Var(int(m.group(1)))
    try:
        return Const(float(token))
    except ValueError:
        return token


def combine(items):
    """Build the node for one rule expansion from its expanded body items.

    ``items`` holds tree nodes and operator tokens in body order.  Returns
    ``None`` when the shape is not an arithmetic expression.
    """
    if any(it is None for it in items):
        return None
    if len(items) == 1:
        return items[0]
    nodes = [isinstance(it, (Const, Var, Call)) for it in items]
    if len(items) == 3:
        a, op, b = items
        if nodes[0] and nodes[2] and op in BINARY:
            return Call(op, (a, b))
        if a == "(" and b == ")" and nodes[1]:
            return op
    if len(items) == 4 and items[0] in UNARY and items[1] == "(" and nodes[2] and items[3] == ")":
        return Call(items[0], (items[2],))
    if len(items) == 2 and items[0] in UNARY and nodes[1]:
        return Call(items[0], (items[1],))
    return None


def render_tree(node) -> str:
    """Fully parenthesized infix text."""
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Var):
        return f"x[{node.index}]"
    if len(node.args) == 1:
        return f"{node.op}({render_tree(node.args[0])})"
    a, b = node.args
    return f"({render_tree(a)} {node.op} {render_tree(b)})"


def max_variable(node) -> int:
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Call):
        return max(max_variable(a) for a in node.args)
    return -1


def evaluate(node, X) -> np.ndarray:
    """Evaluate ``node`` on every row of ``X`` (rows x features).

    Division by a near-zero denominator yields 1.0 and ``sqrt`` takes the
    absolute value of its argument.  Rows where any intermediate value leaves
    [-1e12, 1e12] (or is not finite) come back as NaN.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if max_variable(node) >= X.shape[1]:
        raise IndexError(
            f"expression uses x[{max_variable(node)}] but inputs have {X.shape[1]} columns"
        )
    bad = np.zeros(X.shape[0], dtype=bool)

    def ev(n):
        nonlocal bad
        if isinstance(n, Const):
            v = np.full(X.shape[0], n.value)
        elif isinstance(n, Var):
            v = X[:, n.index]
        else:
            args = [ev(a) for a in n.args]
            v = _apply(n.op, args)
        bad |= ~(np.abs(v) <= SATURATION)
        return v

    with np.errstate(all="ignore"):
        out = np.array(ev(node), dtype=float, copy=True)
    out[bad] = np.nan
    return out


def _apply(op, args):
    if op == "+":
        return args[0] + args[1]
    if op == "-":
        return args[0] - args[1]
    if op == "*":
        return args[0] * args[1]
    if op == "/":
        num, den = args
        safe = np.abs(den) >= DIVISION_EPSILON
        return np.where(safe, num / np.where(safe, den, 1.0), 1.0)
    if op == "sin":
        return np.sin(args[0])
    if op == "cos":
        return np.cos(args[0])
    if op == "sqrt":
        return np.sqrt(np.abs(args[0]))
    if op == "square":
        return args[0] * args[0]
    raise ValueError(f"unknown operator {op!r}")


def eval_tree(node, row) -> float:
    return float(evaluate(node, np.asarray(row, dtype=float)[None, :])[0])
