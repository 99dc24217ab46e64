"""Generation-session orchestration.

A session drives a pluggable text generator through the program protocol:
the generator emits pseudocode, and whenever an arithmetic statement is
complete through its closing parenthesis the session pauses generation,
evaluates the statement exactly, appends the result as a comment, and
resumes with the annotated line in the context. Generator-written comments
on arithmetic lines are discarded; the solver is the single source of
numeric truth for computed values. [find] and [return] lines pass through
untouched (apart from [return] ending the session).

Parse and evaluation failures are recorded in the transcript rather than
raised, so a syntactically broken generation is data, not a crash.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Protocol, Sequence

from .interpreter import (
    Environment,
    EvalError,
    EvalOutcome,
    evaluate_statement,
    format_annotation,
    resolve_operands,
)
from .parser import ParseError, parse_line
from .program import ProblemRecord, Statement

# Default instruction block for prompting a language-model generator. The
# exact wording is a working stand-in, not a contract; swap in your own via
# the `instructions` arguments.
DEFAULT_INSTRUCTIONS = (
    "Translate the question into pseudocode, one statement per line. Declare "
    "every quantity with a [find] statement whose comment records its value "
    "(write ? when the value is unknown). Combine variables with [add], "
    "[subtract], [multiply], [divide], [lcm], [gcd], [round], [floor], or "
    "[mod]. Declare the answer with [return]."
)


class GeneratorInterface(Protocol):
    """A stateful generation session.

    ``next_chunk`` receives the full context so far (prompt plus everything
    emitted and injected) and returns the next chunk of text. An empty
    string means end of output. One session serves one problem.
    """

    def next_chunk(self, context: str) -> str: ...


@dataclass
class ScriptedGenerator:
    """Replays fixed text in fixed-size chunks, ignoring the context.

    ``chunk_size <= 0`` replays everything in a single chunk.
    """

    text: str
    chunk_size: int = 0
    _pos: int = field(default=0, init=False, repr=False)

    def next_chunk(self, context: str) -> str:
        if self._pos >= len(self.text):
            return ""
        if self.chunk_size <= 0:
            chunk = self.text[self._pos :]
        else:
            chunk = self.text[self._pos : self._pos + self.chunk_size]
        self._pos += len(chunk)
        return chunk

    @classmethod
    def from_file(cls, path: str, chunk_size: int = 0) -> "ScriptedGenerator":
        with open(path, encoding="utf-8") as fh:
            return cls(fh.read(), chunk_size)


@dataclass(frozen=True)
class SessionBudget:
    max_lines: int = 64
    max_chars: int = 16384


@dataclass(frozen=True)
class EmittedLine:
    source: str  # "generator" | "solver-injected"
    text: str


@dataclass(frozen=True)
class SessionTranscript:
    prompt: str
    emitted_lines: tuple[EmittedLine, ...]
    outcome: EvalOutcome
    halted_count: int

    @property
    def generated_source(self) -> str:
        return "\n".join(line.text for line in self.emitted_lines)


def assemble_prompt(
    question: str,
    instructions: str,
    exemplars: Sequence[ProblemRecord] = (),
    k: int = 0,
) -> str:
    """Deterministic prompt: instructions, k exemplars, question scaffold.

    Blocks are separated by one blank line and the prompt ends with the
    scaffold line the generator is expected to continue.
    """
    if k > len(exemplars):
        raise ValueError(f"requested {k} exemplars but only {len(exemplars)} are available")
    blocks: list[str] = []
    if instructions.strip():
        blocks.append(instructions.rstrip())
    for record in exemplars[:k]:
        blocks.append(
            f"Question: {record.question}\nPseudocode:\n{record.gold_program.rstrip()}"
        )
    blocks.append(f"Question: {question}\nPseudocode:\n")
    return "\n\n".join(blocks)


def strip_computed_comments(source: str) -> str:
    """Drop comments from arithmetic and [return] lines, keeping [find] values."""
    out: list[str] = []
    for raw in source.splitlines():
        stmt = parse_line(raw)
        if isinstance(stmt, Statement) and not stmt.is_find and "#" in raw:
            raw = raw.split("#", 1)[0].rstrip()
        out.append(raw)
    return "\n".join(out)


class _SessionFeed:
    """Buffers generator output, pulling chunks on demand under a budget."""

    def __init__(self, gen: GeneratorInterface, max_chars: int):
        self.gen = gen
        self.max_chars = max_chars
        self.buffer = ""
        self.ended = False
        self.consumed = 0

    def pull(self, context: str) -> bool:
        if self.ended:
            return False
        chunk = self.gen.next_chunk(context)
        if chunk == "":
            self.ended = True
            return False
        self.consumed += len(chunk)
        if self.consumed > self.max_chars:
            raise EvalError(
                "budget-exhausted", f"generator output exceeded {self.max_chars} characters"
            )
        self.buffer += chunk
        return True

    def take_line(self) -> str:
        line, _, self.buffer = self.buffer.partition("\n")
        return line

    def discard_rest_of_line(self, context: str) -> None:
        while "\n" not in self.buffer:
            if not self.pull(context):
                self.buffer = ""
                return
        _, _, self.buffer = self.buffer.partition("\n")


def _complete_arithmetic_prefix(buffer: str) -> tuple[str, Statement] | None:
    """An arithmetic statement complete through ')', if the buffer holds one."""
    close = buffer.find(")")
    if close == -1:
        return None
    if "#" in buffer[:close]:
        return None
    text = buffer[: close + 1]
    parsed = parse_line(text)
    if isinstance(parsed, Statement) and parsed.is_arithmetic:
        return text, parsed
    return None


def run_session(
    gen: GeneratorInterface,
    question: str,
    instructions: str = DEFAULT_INSTRUCTIONS,
    *,
    budget: SessionBudget = SessionBudget(),
    exemplars: Sequence[ProblemRecord] = (),
    k: int = 0,
) -> SessionTranscript:
    """Drive one generation session to completion.

    Terminates on a successful [return], on generator end-of-output, on
    budget exhaustion, or on the first parse or evaluation error. The
    transcript's ``halted_count`` equals the number of solver-injected
    comments, which equals the arithmetic statements evaluated.
    """
    prompt = assemble_prompt(question, instructions, exemplars, k)
    context = prompt
    env = Environment()
    emitted: list[EmittedLine] = []
    halted = 0
    statement_index = 0
    feed = _SessionFeed(gen, budget.max_chars)

    def finish(answer: Fraction | None, error: EvalError | None) -> SessionTranscript:
        return SessionTranscript(prompt, tuple(emitted), EvalOutcome(answer, env, error), halted)

    try:
        while True:
            if len(emitted) >= budget.max_lines:
                raise EvalError(
                    "budget-exhausted", f"line budget of {budget.max_lines} exhausted"
                )

            # Acquire the next unit: a full line, or an arithmetic statement
            # complete through ')' (the mid-line pause point).
            stmt_from_prefix: tuple[str, Statement] | None = None
            line: str | None = None
            while True:
                if "\n" in feed.buffer:
                    line = feed.take_line()
                    break
                stmt_from_prefix = _complete_arithmetic_prefix(feed.buffer)
                if stmt_from_prefix is not None:
                    feed.buffer = feed.buffer[len(stmt_from_prefix[0]) :]
                    break
                if not feed.pull(context):
                    if feed.buffer.strip():
                        line = feed.buffer
                        feed.buffer = ""
                    break

            if stmt_from_prefix is not None:
                text, stmt = stmt_from_prefix
                feed.discard_rest_of_line(context)
                stmt_text = text.strip()
            elif line is not None:
                if not line.strip():
                    continue
                parsed = parse_line(line, len(emitted) + 1)
                if isinstance(parsed, ParseError):
                    emitted.append(EmittedLine("generator", line.strip()))
                    raise EvalError("parse-error", f"{parsed.kind}: {parsed.message}")
                stmt = parsed
                if stmt.is_arithmetic:
                    stmt_text = line.split("#", 1)[0].strip().rstrip(",").rstrip()
                else:
                    stmt_text = line.strip()
            else:
                raise EvalError(
                    "generator-stalled", "generator ended before a [return] statement"
                )

            if stmt.is_arithmetic:
                try:
                    operands = resolve_operands(stmt, env)
                    value, env = evaluate_statement(stmt, env)
                except EvalError as err:
                    if err.statement_index is None:
                        err.statement_index = statement_index
                    emitted.append(EmittedLine("generator", stmt_text))
                    raise
                annotated = f"{stmt_text} {format_annotation(stmt, operands, value)}"
                emitted.append(EmittedLine("solver-injected", annotated))
                halted += 1
                context += annotated + "\n"
                statement_index += 1
                continue

            emitted.append(EmittedLine("generator", stmt_text))
            try:
                value, env = evaluate_statement(stmt, env)
            except EvalError as err:
                if err.statement_index is None:
                    err.statement_index = statement_index
                raise
            context += stmt_text + "\n"
            statement_index += 1
            if stmt.is_return:
                return finish(value, None)
    except EvalError as err:
        return finish(None, err)


GeneratorFactory = Callable[[ProblemRecord], GeneratorInterface]
