"""Operator and number expressions used inside scenario documents.

Numbers may be written as plain YAML numbers, ``[re, im]`` pairs, or short
arithmetic strings such as ``"pi/4"``. Operators are mappings with exactly
one constructor key (plus an optional ``on:`` placement)::

    {diag: [0, 1]}
    {matrix: [[[0, 0], [1, 0]], [[1, 0], [0, 0]]]}      # row-major complex pairs
    {named: pauli-x}
    {swap: 2}                                           # SWAP on C^2 (x) C^2
    {kron: [{named: pauli-z}, {named: pauli-z}]}
    {sum: [A, B]}
    {scale: 0.5, op: A}
    {exp_i: {generator: G, angle: "pi/4"}}              # exp(-i angle G)
    {haar: 4}                                           # seeded Haar unitary
    {permutation: {dim: 8, swaps: [[4, 2]]}}            # basis transpositions
    {ket: [1, 0]}                                       # pure density matrix
    {gibbs: {hamiltonian: H, beta: 1.0}}
    {on: [s, b], op: A}                                 # embed into the layout
"""

from __future__ import annotations

import ast
import math
import operator
from typing import Any

import numpy as np

from ..errors import ScenarioError
from ..layout import SetupLayout
from ..qcore import HermitianOperator, embed
from ..sampling import haar_unitaries
from ..setups import gibbs_state
from ..evolution import swap_operator

_SQ2 = 1 / math.sqrt(2)
NAMED = {
    "pauli-x": np.array([[0, 1], [1, 0]], complex),
    "pauli-y": np.array([[0, -1j], [1j, 0]], complex),
    "pauli-z": np.array([[1, 0], [0, -1]], complex),
    "hadamard": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], complex),
    "sigma-plus": np.array([[0, 0], [1, 0]], complex),
    "sigma-minus": np.array([[0, 1], [0, 0]], complex),
    "swap-generator": swap_operator(2).astype(complex),
}

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_CONSTS = {"pi": math.pi, "e": math.e}
_FUNCS = {"sqrt": math.sqrt, "exp": math.exp, "log": math.log, "sin": math.sin, "cos": math.cos}


def _eval_node(node, path):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body, path)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id in _CONSTS:
        return _CONSTS[node.id]
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left, path), _eval_node(node.right, path))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_node(node.operand, path)
        return -v if isinstance(node.op, ast.USub) else v
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS
            and len(node.args) == 1 and not node.keywords):
        return _FUNCS[node.func.id](_eval_node(node.args[0], path))
    raise ScenarioError("unsupported expression", path)


def number(value: Any, path: str = "") -> float:
    if isinstance(value, bool):
        raise ScenarioError("expected a number, got a boolean", path)
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            tree = ast.parse(value.strip(), mode="eval")
        except SyntaxError:
            raise ScenarioError(f"cannot parse number {value!r}", path) from None
        return float(_eval_node(tree, path))
    raise ScenarioError(f"expected a number, got {type(value).__name__}", path)


def complex_number(value: Any, path: str = "") -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ScenarioError("complex entries are [re, im] pairs", path)
        return complex(number(value[0], path), number(value[1], path))
    return complex(number(value, path))


class Context:
    """Layout and seeded generator shared by all expressions of one scenario."""

    def __init__(self, layout: SetupLayout | None, rng: np.random.Generator):
        self.layout = layout
        self.rng = rng


def operator_expr(expr: Any, ctx: Context, path: str) -> np.ndarray:
    """Evaluate an operator expression to a dense complex matrix."""
    if isinstance(expr, str):
        if expr not in NAMED:
            raise ScenarioError(f"unknown named operator {expr!r}", path)
        return NAMED[expr].copy()
    if isinstance(expr, list):
        return _matrix(expr, path)
    if isinstance(expr, np.ndarray):
        return np.array(expr, dtype=complex)
    if not isinstance(expr, dict):
        raise ScenarioError("operator must be a mapping, a name or a matrix", path)
    expr = dict(expr)
    on = expr.pop("on", None)
    if on is None:
        on = expr.pop(True, None)  # YAML 1.1 reads a bare `on` key as true
    if len(expr) == 2 and "scale" in expr and "op" in expr:
        m = complex_number(expr["scale"], f"{path}.scale") * operator_expr(expr["op"], ctx, f"{path}.op")
    elif on is not None and set(expr) == {"op"}:
        m = operator_expr(expr["op"], ctx, f"{path}.op")
    elif len(expr) != 1:
        raise ScenarioError(f"operator needs exactly one constructor key, got {sorted(expr)}", path)
    else:
        (key, arg), = expr.items()
        m = _construct(key, arg, ctx, f"{path}.{key}")
    if on is not None:
        if ctx.layout is None:
            raise ScenarioError("'on' placement needs a layout", path)
        labels = [on] if isinstance(on, str) else list(on)
        try:
            m = embed(m, ctx.layout, labels)
        except (KeyError, ValueError) as exc:
            raise ScenarioError(str(exc), f"{path}.on") from None
    return m


def _matrix(rows, path):
    try:
        m = np.array([[complex_number(x, f"{path}[{i}][{j}]") for j, x in enumerate(row)]
                      for i, row in enumerate(rows)], dtype=complex)
    except TypeError:
        raise ScenarioError("matrix must be a list of rows", path) from None
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ScenarioError(f"matrix must be square, got shape {m.shape}", path)
    return m


def _construct(key, arg, ctx, path):
    if key == "matrix":
        return _matrix(arg, path)
    if key == "diag":
        return np.diag([complex_number(x, f"{path}[{i}]") for i, x in enumerate(arg)])
    if key == "named":
        return operator_expr(str(arg), ctx, path)
    if key == "identity":
        return np.eye(int(arg), dtype=complex)
    if key == "zero":
        return np.zeros((int(arg), int(arg)), complex)
    if key == "swap":
        return swap_operator(int(arg)).astype(complex)
    if key == "kron":
        parts = [operator_expr(a, ctx, f"{path}[{i}]") for i, a in enumerate(arg)]
        out = parts[0]
        for p in parts[1:]:
            out = np.kron(out, p)
        return out
    if key == "sum":
        parts = [operator_expr(a, ctx, f"{path}[{i}]") for i, a in enumerate(arg)]
        if len({p.shape for p in parts}) != 1:
            raise ScenarioError("summands have different dimensions", path)
        return sum(parts)
    if key == "exp_i":
        g = HermitianOperator(operator_expr(arg["generator"], ctx, f"{path}.generator"))
        angle = number(arg.get("angle", 1.0), f"{path}.angle")
        lam, v = g.spectrum.eigenvalues, g.spectrum.eigenvectors
        return (v * np.exp(-1j * angle * lam)) @ v.conj().T
    if key == "haar":
        return haar_unitaries(1, int(arg), ctx.rng)[0]
    if key == "permutation":
        # product of basis-state transpositions
        d = int(arg["dim"])
        perm = np.arange(d)
        for i, (a, b) in enumerate(arg.get("swaps", [])):
            if not (0 <= a < d and 0 <= b < d):
                raise ScenarioError(f"swap index out of range for dim {d}", f"{path}.swaps.{i}")
            perm[[a, b]] = perm[[b, a]]
        return np.eye(d, dtype=complex)[:, perm]
    if key == "ket":
        v = np.array([complex_number(x, f"{path}[{i}]") for i, x in enumerate(arg)])
        n = np.linalg.norm(v)
        if n == 0:
            raise ScenarioError("ket must be nonzero", path)
        v = v / n
        return np.outer(v, v.conj())
    if key == "gibbs":
        h = HermitianOperator(operator_expr(arg["hamiltonian"], ctx, f"{path}.hamiltonian"))
        return gibbs_state(h, number(arg["beta"], f"{path}.beta")).matrix.copy()
    raise ScenarioError(f"unknown operator constructor {key!r}", path)
