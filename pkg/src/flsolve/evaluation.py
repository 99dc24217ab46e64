"""Corpus-level evaluation: accuracy, syntax errors, and per-problem detail.

Every problem gets a fresh generator session; records are independent, so
evaluation parallelizes across processes when asked.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass
from fractions import Fraction

from .data import DatasetFile, reasoning_step_count
from .interpreter import answers_match
from .parser import parse_program, program_compiles
from .program import Program, ProblemRecord
from .rewards import DEFAULT_REWARD_CONFIG, RewardBreakdown, RewardConfig, total_reward
from .runtime import (
    DEFAULT_INSTRUCTIONS,
    GeneratorInterface,
    ScriptedGenerator,
    SessionBudget,
    run_session,
    strip_computed_comments,
)
from .values import format_number

GENERATOR_KINDS = ("gold-replay", "scripted", "empty")


@dataclass(frozen=True)
class GeneratorSpec:
    """Picklable recipe for building one generator per problem.

    ``gold-replay`` feeds each record's own program with computed comments
    removed, so correctness measures the solver round trip. ``scripted``
    feeds the same fixed text to every problem; ``empty`` produces nothing.
    """

    kind: str
    text: str = ""
    chunk_size: int = 0

    def __post_init__(self) -> None:
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown generator kind '{self.kind}'")

    def build(self, record: ProblemRecord) -> GeneratorInterface:
        if self.kind == "gold-replay":
            return ScriptedGenerator(
                strip_computed_comments(record.gold_program), self.chunk_size
            )
        if self.kind == "scripted":
            return ScriptedGenerator(self.text, self.chunk_size)
        return ScriptedGenerator("")


@dataclass(frozen=True)
class ProblemResult:
    id: str
    correct: bool
    compiled: bool
    answer: Fraction | None
    error_kind: str | None
    steps: int
    reward: RewardBreakdown

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "correct": self.correct,
            "compiled": self.compiled,
            "answer": None if self.answer is None else format_number(self.answer),
            "error": self.error_kind,
            "steps": self.steps,
            "reward": self.reward.to_json(),
        }


@dataclass(frozen=True)
class EvalReport:
    """Aggregates over one corpus run; rates are percentages.

    ``error_rate_by_steps`` buckets problems by the reference program's
    statement count and reports (wrong answers, problems) per bucket.
    """

    total: int
    correct: int
    accuracy: float
    syntax_error_rate: float
    error_rate_by_steps: dict
    per_problem: tuple[ProblemResult, ...]

    def to_json(self) -> dict:
        by_steps = {}
        for steps in sorted(self.error_rate_by_steps):
            errors, total = self.error_rate_by_steps[steps]
            by_steps[str(steps)] = {
                "errors": errors,
                "total": total,
                "rate": 100.0 * errors / total,
            }
        return {
            "total": self.total,
            "correct": self.correct,
            "accuracy": self.accuracy,
            "syntax_error_rate": self.syntax_error_rate,
            "error_rate_by_steps": by_steps,
            "per_problem": [p.to_json() for p in self.per_problem],
        }


def _evaluate_record(
    record: ProblemRecord,
    spec: GeneratorSpec,
    reward_cfg: RewardConfig,
    budget: SessionBudget,
    instructions: str,
) -> ProblemResult:
    transcript = run_session(
        spec.build(record), record.question, instructions, budget=budget
    )
    source = transcript.generated_source
    breakdown = total_reward(source, record, reward_cfg)
    outcome = transcript.outcome
    gold = parse_program(record.gold_program)
    assert isinstance(gold, Program)  # total_reward already rejected bad gold
    return ProblemResult(
        id=record.id,
        correct=answers_match(outcome.answer, record.gold_answer),
        compiled=program_compiles(source),
        answer=outcome.answer,
        error_kind=None if outcome.error is None else outcome.error.kind,
        steps=reasoning_step_count(gold),
        reward=breakdown,
    )


def _eval_worker(args: tuple) -> ProblemResult:
    return _evaluate_record(*args)


def evaluate_corpus(
    ds: DatasetFile,
    spec: GeneratorSpec,
    *,
    reward_cfg: RewardConfig = DEFAULT_REWARD_CONFIG,
    budget: SessionBudget = SessionBudget(),
    instructions: str = DEFAULT_INSTRUCTIONS,
    workers: int = 1,
) -> EvalReport:
    """Run every record through a session and aggregate the results.

    A problem counts as a syntax error when its generated source fails the
    compile gate, which includes producing no [return] or nothing at all.
    """
    jobs = [(record, spec, reward_cfg, budget, instructions) for record in ds.records]
    if workers > 1 and len(jobs) > 1:
        with multiprocessing.Pool(workers) as pool:
            results = pool.map(_eval_worker, jobs)
    else:
        results = [_eval_worker(job) for job in jobs]

    total = len(results)
    correct = sum(1 for r in results if r.correct)
    syntax_errors = sum(1 for r in results if not r.compiled)
    by_steps: dict[int, tuple[int, int]] = {}
    for r in results:
        errors, seen = by_steps.get(r.steps, (0, 0))
        by_steps[r.steps] = (errors + (0 if r.correct else 1), seen + 1)
    return EvalReport(
        total=total,
        correct=correct,
        accuracy=100.0 * correct / total if total else 0.0,
        syntax_error_rate=100.0 * syntax_errors / total if total else 0.0,
        error_rate_by_steps=by_steps,
        per_problem=tuple(results),
    )
