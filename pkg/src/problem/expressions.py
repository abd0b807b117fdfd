from __future__ import annotations

import ast
from dataclasses import dataclass
from typing import Any, Callable, Mapping

import numpy as np

from src.errors import ConfigError

VARIABLES: tuple[str, ...] = ("t", "x1", "x2", "alpha")

_CONSTANTS: dict[str, float] = {"pi": float(np.pi)}

# name -> (numpy function, allowed argument counts)
_FUNCTIONS: dict[str, tuple[Callable[..., Any], tuple[int, ...]]] = {
    "pow": (np.power, (2,)),
    "sin": (np.sin, (1,)),
    "cos": (np.cos, (1,)),
    "exp": (np.exp, (1,)),
    "min": (np.minimum, (2, 3, 4)),
    "max": (np.maximum, (2, 3, 4)),
}

_BINARY: dict[type, Callable[[Any, Any], Any]] = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}

_UNARY: dict[type, Callable[[Any], Any]] = {
    ast.USub: np.negative,
    ast.UAdd: np.positive,
}


@dataclass(frozen=True, eq=False)
class Expression:
    source: str
    tree: ast.Expression

    @property
    def is_constant(self) -> bool:
        return not any(isinstance(node, ast.Name) and node.id in VARIABLES for node in ast.walk(self.tree))

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(_names(self.tree) & set(VARIABLES))

    def __call__(self, **env: Any) -> np.ndarray:
        missing = [name for name in _names(self.tree) if name not in env and name not in _CONSTANTS]
        if missing:
            raise ConfigError(f"Expression '{self.source}' needs values for {', '.join(sorted(missing))}")
        with np.errstate(all="ignore"):
            return np.asarray(_evaluate(self.tree.body, env), dtype=float)


def parse_expression(source: str | float | int) -> Expression:
    text = str(source).strip()
    if not text:
        raise ConfigError("Empty expression")
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"Cannot parse expression '{text}': {exc.msg}") from exc
    for node in ast.walk(tree):
        _check_node(node, text)
    return Expression(source=text, tree=tree)


def _check_node(node: ast.AST, text: str) -> None:
    if isinstance(node, (ast.Expression, ast.Load)):
        return
    # ast.walk also yields the operator tokens of BinOp/UnaryOp nodes.
    if isinstance(node, ast.operator):
        if type(node) not in _BINARY:
            raise ConfigError(f"Operator {type(node).__name__} is not allowed in '{text}'")
        return
    if isinstance(node, ast.unaryop):
        if type(node) not in _UNARY:
            raise ConfigError(f"Operator {type(node).__name__} is not allowed in '{text}'")
        return
    if isinstance(node, ast.BinOp):
        if type(node.op) not in _BINARY:
            raise ConfigError(f"Operator {type(node.op).__name__} is not allowed in '{text}'")
        return
    if isinstance(node, ast.UnaryOp):
        if type(node.op) not in _UNARY:
            raise ConfigError(f"Operator {type(node.op).__name__} is not allowed in '{text}'")
        return
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ConfigError(f"Only numeric constants are allowed in '{text}'")
        return
    if isinstance(node, ast.Name):
        if node.id not in VARIABLES and node.id not in _CONSTANTS and node.id not in _FUNCTIONS:
            raise ConfigError(f"Unknown name '{node.id}' in '{text}'")
        return
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            raise ConfigError(f"Only {', '.join(sorted(_FUNCTIONS))} may be called in '{text}'")
        if node.keywords:
            raise ConfigError(f"Keyword arguments are not allowed in '{text}'")
        _, arities = _FUNCTIONS[node.func.id]
        if len(node.args) not in arities:
            raise ConfigError(f"{node.func.id} takes {arities} arguments, got {len(node.args)} in '{text}'")
        return
    raise ConfigError(f"Unsupported syntax {type(node).__name__} in '{text}'")


def _evaluate(node: ast.AST, env: Mapping[str, Any]) -> Any:
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id in env:
            return env[node.id]
        if node.id in _CONSTANTS:
            return _CONSTANTS[node.id]
        raise ConfigError(f"'{node.id}' is a function, not a value")
    if isinstance(node, ast.BinOp):
        return _BINARY[type(node.op)](_evaluate(node.left, env), _evaluate(node.right, env))
    if isinstance(node, ast.UnaryOp):
        return _UNARY[type(node.op)](_evaluate(node.operand, env))
    if isinstance(node, ast.Call):
        fn, _ = _FUNCTIONS[node.func.id]  # type: ignore[attr-defined]
        args = [_evaluate(arg, env) for arg in node.args]
        result = args[0]
        if len(args) == 1:
            return fn(result)
        for arg in args[1:]:
            result = fn(result, arg)
        return result
    raise ConfigError(f"Unsupported syntax {type(node).__name__}")


def _names(tree: ast.AST) -> set[str]:
    called = {node.func.id for node in ast.walk(tree) if isinstance(node, ast.Call) and isinstance(node.func, ast.Name)}
    return {node.id for node in ast.walk(tree) if isinstance(node, ast.Name)} - called
