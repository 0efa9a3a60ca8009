"""Arithmetic expression evaluator used as the calculator retrieval tool.

Grammar: ``+ - * /``, parentheses, unary minus, decimal literals, and named
functions registered as plugins. The unicode operators ``×``, ``÷``, and
``−`` are accepted as aliases. Expressions are parsed with a small
recursive-descent parser; nothing is ever passed to ``eval``.
"""

from __future__ import annotations

import re
from typing import Callable

from .errors import CalculatorError

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>\d+\.\d+|\d+|\.\d+)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/(),]))"
)

_ALIASES = {"×": "*", "÷": "/", "−": "-"}


def _tokenize(expression: str) -> list[tuple[str, str]]:
    text = expression
    for alias, op in _ALIASES.items():
        text = text.replace(alias, op)
    tokens: list[tuple[str, str]] = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if not match:
            if text[pos:].strip() == "":
                break
            raise CalculatorError(
                f"unexpected character {text[pos:].strip()[0]!r} in expression"
            )
        pos = match.end()
        if match.group("number") is not None:
            tokens.append(("number", match.group("number")))
        elif match.group("name") is not None:
            tokens.append(("name", match.group("name")))
        else:
            tokens.append(("op", match.group("op")))
    return tokens


class _Parser:
    def __init__(self, tokens: list[tuple[str, str]], functions: dict[str, Callable]):
        self.tokens = tokens
        self.pos = 0
        self.functions = functions

    def peek(self) -> tuple[str, str] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> tuple[str, str]:
        tok = self.peek()
        if tok is None:
            raise CalculatorError("unexpected end of expression")
        self.pos += 1
        return tok

    def expect_op(self, op: str) -> None:
        tok = self.take()
        if tok != ("op", op):
            raise CalculatorError(f"expected {op!r}, got {tok[1]!r}")

    def parse(self) -> float:
        value = self.expr()
        if self.peek() is not None:
            raise CalculatorError(f"trailing input starting at {self.peek()[1]!r}")
        return value

    def expr(self) -> float:
        value = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            rhs = self.term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self) -> float:
        value = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            rhs = self.unary()
            if op == "*":
                value = value * rhs
            else:
                if rhs == 0:
                    raise CalculatorError("division by zero")
                value = value / rhs
        return value

    def unary(self) -> float:
        if self.peek() == ("op", "-"):
            self.take()
            return -self.unary()
        return self.atom()

    def atom(self) -> float:
        kind, text = self.take()
        if kind == "number":
            return float(text)
        if kind == "name":
            return self.call(text)
        if (kind, text) == ("op", "("):
            value = self.expr()
            self.expect_op(")")
            return value
        raise CalculatorError(f"unexpected token {text!r}")

    def call(self, name: str) -> float:
        if name not in self.functions:
            raise CalculatorError(f"unknown function {name!r}")
        self.expect_op("(")
        args: list[float] = []
        if self.peek() != ("op", ")"):
            args.append(self.expr())
            while self.peek() == ("op", ","):
                self.take()
                args.append(self.expr())
        self.expect_op(")")
        try:
            return float(self.functions[name](*args))
        except CalculatorError:
            raise
        except (TypeError, ValueError, ZeroDivisionError) as err:
            raise CalculatorError(f"function {name!r} failed: {err}") from err


def _atrial_fibrillation_stroke_score(
    chf: float,
    hypertension: float,
    age: float,
    diabetes: float,
    stroke_history: float,
    vascular_disease: float,
    female: float,
) -> float:
    """CHA2DS2-VASc stroke-risk points; age contributes 2 at >=75 and 1 at 65-74."""
    points = 0.0
    points += 1 if chf > 0 else 0
    points += 1 if hypertension > 0 else 0
    points += 2 if age >= 75 else (1 if age >= 65 else 0)
    points += 1 if diabetes > 0 else 0
    points += 2 if stroke_history > 0 else 0
    points += 1 if vascular_disease > 0 else 0
    points += 1 if female > 0 else 0
    return points


def _body_mass_index(weight_kg: float, height_m: float) -> float:
    if height_m <= 0:
        raise CalculatorError("height must be positive")
    return weight_kg / (height_m * height_m)


def _mean_arterial_pressure(systolic: float, diastolic: float) -> float:
    return (systolic + 2.0 * diastolic) / 3.0


DEFAULT_FUNCTIONS: dict[str, Callable] = {
    "cha2ds2_vasc": _atrial_fibrillation_stroke_score,
    "bmi": _body_mass_index,
    "mean_arterial_pressure": _mean_arterial_pressure,
}


class Calculator:
    """Expression evaluator with a pluggable function registry."""

    def __init__(self, functions: dict[str, Callable] | None = None):
        self.functions = dict(DEFAULT_FUNCTIONS)
        if functions:
            self.functions.update(functions)

    def register(self, name: str, fn: Callable) -> None:
        self.functions[name] = fn

    def evaluate(self, expression: str) -> float:
        if not expression or not expression.strip():
            raise CalculatorError("empty expression")
        return _Parser(_tokenize(expression), self.functions).parse()


def evaluate(expression: str) -> float:
    """Evaluate with the default function registry."""
    return Calculator().evaluate(expression)


def format_value(value: float) -> str:
    """Render integral results without a decimal point: 25.0 becomes ``25``."""
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)
