"""Syntax types and canonical rendering for the pseudocode language.

Programs are straight-line, one statement per line::

    var1 = [find](figures on shelf) # 7
    var4 = [subtract](var1, var3) # 7 - 10 = -3
    [return](var6) # 11

A ``[find]`` declares a quantity whose value lives in its comment, the
bracketed arithmetic operators combine previously defined variables, and
``[return]`` names the answer. All types here are immutable and safe to
share across threads.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Union

from .values import format_number


class Operator(Enum):
    FIND = "find"
    ADD = "add"
    SUBTRACT = "subtract"
    MULTIPLY = "multiply"
    DIVIDE = "divide"
    LCM = "lcm"
    GCD = "gcd"
    ROUND = "round"
    FLOOR = "floor"
    MOD = "mod"
    RETURN = "return"


# find and return are structural; the other nine are computing operations.
ARITHMETIC_OPERATORS = frozenset(
    op for op in Operator if op not in (Operator.FIND, Operator.RETURN)
)

# The four operators whose results are annotated with infix symbols and whose
# multiset is compared by the reward scorer.
BASIC_OPERATORS = (
    Operator.MULTIPLY,
    Operator.DIVIDE,
    Operator.ADD,
    Operator.SUBTRACT,
)

BASIC_SYMBOLS = {
    Operator.ADD: "+",
    Operator.SUBTRACT: "-",
    Operator.MULTIPLY: "*",
    Operator.DIVIDE: "/",
}

OPERATOR_ARITY = {
    Operator.FIND: 1,
    Operator.ADD: 2,
    Operator.SUBTRACT: 2,
    Operator.MULTIPLY: 2,
    Operator.DIVIDE: 2,
    Operator.LCM: 2,
    Operator.GCD: 2,
    Operator.ROUND: 1,
    Operator.FLOOR: 1,
    Operator.MOD: 2,
    Operator.RETURN: 1,
}

OPERATOR_BY_NAME = {op.value: op for op in Operator}


@dataclass(frozen=True)
class VarRef:
    """Reference to a previously defined variable."""

    name: str


@dataclass(frozen=True)
class CommentAnnotation:
    """Parsed view of a ``# ...`` comment.

    ``declared_value`` is the numeric value the comment claims, when one can
    be read out of it. ``unknown_flag`` is set only for the literal ``?``.
    """

    raw_text: str
    declared_value: Fraction | None = None
    unknown_flag: bool = False


# Arithmetic arguments are variable references or literals; a [find] takes a
# single free-text description.
Argument = Union[VarRef, Fraction, str]


@dataclass(frozen=True)
class Statement:
    op: Operator
    args: tuple[Argument, ...]
    target: str | None = None
    annotation: CommentAnnotation | None = None

    @property
    def is_find(self) -> bool:
        return self.op is Operator.FIND

    @property
    def is_return(self) -> bool:
        return self.op is Operator.RETURN

    @property
    def is_arithmetic(self) -> bool:
        return self.op in ARITHMETIC_OPERATORS


@dataclass(frozen=True)
class Program:
    statements: tuple[Statement, ...]


@dataclass(frozen=True)
class ProblemRecord:
    """One word problem with its reference program and answer."""

    id: str
    question: str
    gold_program: str
    gold_answer: Fraction


def render_argument(arg: Argument) -> str:
    if isinstance(arg, VarRef):
        return arg.name
    if isinstance(arg, Fraction):
        return format_number(arg)
    return str(arg)


def render_statement(stmt: Statement) -> str:
    args = ", ".join(render_argument(a) for a in stmt.args)
    text = f"[{stmt.op.value}]({args})"
    if stmt.target is not None:
        text = f"{stmt.target} = {text}"
    if stmt.annotation is not None:
        text = f"{text} # {stmt.annotation.raw_text}"
    return text


def render_program(program: Program) -> str:
    return "\n".join(render_statement(s) for s in program.statements)


def count_finds(program: Program) -> int:
    return sum(1 for s in program.statements if s.is_find)


def has_return(program: Program) -> bool:
    return any(s.is_return for s in program.statements)


def operation_counts(program: Program) -> Counter:
    """Occurrences of each computing operator, excluding find and return."""
    return Counter(s.op for s in program.statements if s.is_arithmetic)


def basic_operation_counts(program: Program) -> Counter:
    """Multiset of add/subtract/multiply/divide occurrences."""
    return Counter(
        s.op for s in program.statements if s.op in BASIC_SYMBOLS
    )
