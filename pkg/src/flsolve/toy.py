"""Tiny word-problem environment for exercising the training loop end to end.

A linear-softmax policy writes pseudocode one line per action, driven through
the same halting session runtime used for replay: arithmetic lines go out
without comments and come back with solver-injected results. Episodes earn
the full reward stack as a terminal reward, so the optimizer sees exactly the
signal a language model would.
"""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .interpreter import (
    Environment,
    annotation_text,
    answers_match,
    evaluate_statement,
    resolve_operands,
)
from .parser import parse_program
from .ppo import (
    PpoConfig,
    ToyPolicy,
    Trajectory,
    adaptive_kl_update,
    compute_gae,
    kl_divergence,
    ppo_objective,
    softmax,
    value_loss,
)
from .program import (
    CommentAnnotation,
    Operator,
    Program,
    ProblemRecord,
    Statement,
    VarRef,
    render_program,
)
from .rewards import DEFAULT_REWARD_CONFIG, RewardBreakdown, RewardConfig, total_reward
from .runtime import SessionBudget, SessionTranscript, run_session
from .values import format_number

ACTION_NAMES = (
    "find-first",
    "find-second",
    "op-add",
    "op-subtract",
    "op-multiply",
    "op-divide",
    "emit-return",
)

OP_ACTIONS = {
    2: Operator.ADD,
    3: Operator.SUBTRACT,
    4: Operator.MULTIPLY,
    5: Operator.DIVIDE,
}

# Cue order matches the op-action order: cue index c pairs with action 2 + c.
CUE_OPERATORS = (Operator.ADD, Operator.SUBTRACT, Operator.MULTIPLY, Operator.DIVIDE)

CUE_KEYWORDS = {
    "altogether": Operator.ADD,
    "left": Operator.SUBTRACT,
    "in all": Operator.MULTIPLY,
    "shared equally": Operator.DIVIDE,
}

# cue one-hot (4) + step one-hot (6) + find count + op count + bias
N_FEATURES = 13


@dataclass(frozen=True)
class TaskTemplate:
    """Question text with {0}/{1}/... slots, one description per quantity."""

    name: str
    question: str
    descriptions: tuple[str, ...]
    ops: tuple[Operator, ...]


# Each question carries exactly one cue keyword so a linear policy can read
# the operation off the features.
SINGLE_OP_TEMPLATES = (
    TaskTemplate(
        name="sum",
        question=(
            "Maya picked {0} apples and her brother picked {1} apples. "
            "How many apples did they pick altogether?"
        ),
        descriptions=(
            "the number of apples Maya picked",
            "the number of apples her brother picked",
        ),
        ops=(Operator.ADD,),
    ),
    TaskTemplate(
        name="difference",
        question=(
            "A baker made {0} bread rolls and sold {1} of them. "
            "How many rolls are left?"
        ),
        descriptions=(
            "the number of rolls the baker made",
            "the number of rolls sold",
        ),
        ops=(Operator.SUBTRACT,),
    ),
    TaskTemplate(
        name="product",
        question=(
            "A shelf holds {0} boxes and each box contains {1} pencils. "
            "How many pencils are there in all?"
        ),
        descriptions=(
            "the number of boxes on the shelf",
            "the number of pencils in each box",
        ),
        ops=(Operator.MULTIPLY,),
    ),
    TaskTemplate(
        name="quotient",
        question=(
            "{0} stickers are shared equally among {1} students. "
            "How many stickers does each student receive?"
        ),
        descriptions=(
            "the total number of stickers",
            "the number of students",
        ),
        ops=(Operator.DIVIDE,),
    ),
)

CHAIN_TEMPLATES = (
    TaskTemplate(
        name="gain-then-spend",
        question=(
            "Tom had {0} marbles, won {1} more in a game, and then gave {2} "
            "to his sister. How many marbles does Tom have left?"
        ),
        descriptions=(
            "the number of marbles Tom started with",
            "the number of marbles Tom won",
            "the number of marbles Tom gave away",
        ),
        ops=(Operator.ADD, Operator.SUBTRACT),
    ),
)

DEFAULT_TEMPLATES = SINGLE_OP_TEMPLATES + CHAIN_TEMPLATES

# Sessions are four lines when played perfectly; eight leaves room to wander.
DEMO_BUDGET = SessionBudget(max_lines=8, max_chars=2048)

# The published learning rate targets a billion-parameter model and moves the
# 7x13 linear policy by nothing; this one is tuned for the demo.
DEMO_LEARNING_RATE = 0.8

# Plain-SGD stabilizer: the value regression diverges at the step size the
# policy wants, so the value head trains at this fraction of it.
VALUE_LR_SCALE = 0.1


def demo_config(learning_rate: float = DEMO_LEARNING_RATE) -> PpoConfig:
    return PpoConfig(learning_rate=learning_rate)


def question_cue(question: str) -> Operator | None:
    text = question.lower()
    for keyword, op in CUE_KEYWORDS.items():
        if keyword in text:
            return op
    return None


def state_feature_vector(question: str, lines: int, finds: int, ops: int) -> np.ndarray:
    phi = np.zeros(N_FEATURES)
    cue = question_cue(question)
    if cue is not None:
        phi[CUE_OPERATORS.index(cue)] = 1.0
    phi[4 + min(lines, 5)] = 1.0
    phi[10] = finds / 3.0
    phi[11] = ops / 2.0
    phi[12] = 1.0
    return phi


def _sample_values(template: TaskTemplate, rng: random.Random) -> tuple[int, ...]:
    if template.ops == (Operator.SUBTRACT,):
        sold = rng.randint(2, 20)
        return (sold + rng.randint(1, 20), sold)
    if template.ops == (Operator.DIVIDE,):
        share = rng.randint(2, 12)
        groups = rng.randint(2, 9)
        return (share * groups, groups)
    if template.ops == (Operator.ADD, Operator.SUBTRACT):
        start = rng.randint(5, 30)
        won = rng.randint(2, 20)
        return (start, won, rng.randint(1, start + won - 1))
    return tuple(rng.randint(2, 12) for _ in template.descriptions)


def _gold_program(template: TaskTemplate, values: Sequence[int]) -> tuple[Program, Fraction]:
    statements: list[Statement] = []
    env = Environment()
    for i, (desc, val) in enumerate(zip(template.descriptions, values), start=1):
        quantity = Fraction(val)
        stmt = Statement(
            Operator.FIND,
            (desc,),
            target=f"var{i}",
            annotation=CommentAnnotation(format_number(quantity), quantity),
        )
        _, env = evaluate_statement(stmt, env)
        statements.append(stmt)
    left = VarRef("var1")
    result = Fraction(0)
    for j, op in enumerate(template.ops):
        target = f"var{len(template.descriptions) + j + 1}"
        stmt = Statement(op, (left, VarRef(f"var{j + 2}")), target=target)
        operands = resolve_operands(stmt, env)
        result, env = evaluate_statement(stmt, env)
        stmt = replace(
            stmt, annotation=CommentAnnotation(annotation_text(stmt, operands, result), result)
        )
        statements.append(stmt)
        left = VarRef(target)
    statements.append(
        Statement(
            Operator.RETURN,
            (left,),
            annotation=CommentAnnotation(format_number(result), result),
        )
    )
    return Program(tuple(statements)), result


def generate_toy_tasks(
    seed: int, count: int, templates: Sequence[TaskTemplate] = DEFAULT_TEMPLATES
) -> list[ProblemRecord]:
    """Deterministic batch of word problems, templates taken round-robin."""
    if count < 0:
        raise ValueError("count must be non-negative")
    if not templates:
        raise ValueError("at least one template is required")
    rng = random.Random(seed)
    records: list[ProblemRecord] = []
    for i in range(count):
        template = templates[i % len(templates)]
        values = _sample_values(template, rng)
        program, answer = _gold_program(template, values)
        records.append(
            ProblemRecord(
                id=f"toy-{seed}-{i:04d}",
                question=template.question.format(*values),
                gold_program=render_program(program),
                gold_answer=answer,
            )
        )
    return records


class PolicySession:
    """Generator that turns policy actions into pseudocode lines.

    Quantities come from the reference program's [find] comments; structure
    comes from the policy. Arithmetic lines are emitted without a trailing
    newline so the session halts at ')' and injects the computed comment.
    With ``rng=None`` actions are greedy argmax.
    """

    def __init__(
        self,
        policy: ToyPolicy,
        ref: ToyPolicy,
        record: ProblemRecord,
        rng: np.random.Generator | None = None,
    ):
        parsed = parse_program(record.gold_program)
        if not isinstance(parsed, Program):
            raise ValueError(f"reference program for '{record.id}' does not parse")
        self.gold_finds = [
            (s.args[0], s.annotation.declared_value if s.annotation else None)
            for s in parsed.statements
            if s.is_find
        ]
        if not self.gold_finds:
            raise ValueError(f"reference program for '{record.id}' declares no quantities")
        self.policy = policy
        self.ref = ref
        self.record = record
        self.rng = rng
        self.features: list[np.ndarray] = []
        self.actions: list[int] = []
        self.logprobs: list[float] = []
        self.ref_logprobs: list[float] = []
        self.values: list[float] = []
        self.prob_sum_err = 0.0
        self._next_var = 1
        self._finds = 0
        self._ops = 0
        self._done = False
        self._pending: str | None = None

    def next_chunk(self, context: str) -> str:
        if self._pending is not None:
            chunk, self._pending = self._pending, None
            return chunk
        if self._done:
            return ""
        phi = state_feature_vector(
            self.record.question, len(self.actions), self._finds, self._ops
        )
        probs = self.policy.action_probs(phi)
        self.prob_sum_err = max(self.prob_sum_err, abs(float(probs.sum()) - 1.0))
        if self.rng is None:
            action = int(np.argmax(probs))
        else:
            action = int(self.rng.choice(len(probs), p=probs))
        self.features.append(phi)
        self.actions.append(action)
        self.logprobs.append(float(np.log(probs[action])))
        self.ref_logprobs.append(self.ref.logprob(phi, action))
        self.values.append(self.policy.value(phi))
        return self._emit(action)

    def _emit(self, action: int) -> str:
        if action in (0, 1):
            index = min(action, len(self.gold_finds) - 1)
            desc, quantity = self.gold_finds[index]
            line = f"var{self._next_var} = [find]({desc})"
            if quantity is not None:
                line += f" # {format_number(quantity)}"
            self._next_var += 1
            self._finds += 1
            return line + "\n"
        if action in OP_ACTIONS:
            op = OP_ACTIONS[action]
            line = f"var{self._next_var} = [{op.value}](var1, var2)"
            self._next_var += 1
            self._ops += 1
            self._pending = "\n"
            return line
        self._done = True
        return f"[return](var{max(self._next_var - 1, 1)})\n"


@dataclass
class RolloutResult:
    trajectory: Trajectory
    breakdown: RewardBreakdown
    session: PolicySession
    transcript: SessionTranscript


def rollout(
    policy: ToyPolicy,
    ref: ToyPolicy,
    record: ProblemRecord,
    reward_cfg: RewardConfig = DEFAULT_REWARD_CONFIG,
    *,
    rng: np.random.Generator | None = None,
    greedy: bool = False,
    budget: SessionBudget = DEMO_BUDGET,
) -> RolloutResult:
    """Play one episode and package it as a trajectory.

    The whole reward lands on the final step; earlier steps earn zero.
    """
    if not greedy and rng is None:
        raise ValueError("stochastic rollout needs an rng; pass greedy=True for argmax")
    session = PolicySession(policy, ref, record, rng=None if greedy else rng)
    transcript = run_session(session, record.question, budget=budget)
    breakdown = total_reward(transcript.generated_source, record, reward_cfg)
    rewards = np.zeros(len(session.actions))
    rewards[-1] = float(breakdown.total)
    trajectory = Trajectory(
        tokens=np.array(session.actions, dtype=int),
        state_features=np.array(session.features),
        logprobs_policy=np.array(session.logprobs),
        logprobs_ref=np.array(session.ref_logprobs),
        rewards=rewards,
        values=np.append(np.array(session.values), 0.0),
    )
    return RolloutResult(trajectory, breakdown, session, transcript)


def greedy_accuracy(
    policy: ToyPolicy,
    records: Sequence[ProblemRecord],
    reward_cfg: RewardConfig = DEFAULT_REWARD_CONFIG,
) -> float:
    """Fraction of records the argmax policy answers correctly."""
    if not records:
        raise ValueError("no records to evaluate")
    hits = 0
    for record in records:
        result = rollout(policy, policy, record, reward_cfg, greedy=True)
        if answers_match(result.transcript.outcome.answer, record.gold_answer):
            hits += 1
    return hits / len(records)


@dataclass(frozen=True)
class IterationStats:
    iteration: int
    mean_total_reward: float
    mean_kl: float
    clip_fraction: float
    beta: float
    policy_loss: float
    value_loss: float
    prob_sum_err: float

    def to_json(self) -> dict:
        return asdict(self)


def train_ppo_demo(
    policy: ToyPolicy,
    tasks: Sequence[ProblemRecord],
    reward_cfg: RewardConfig = DEFAULT_REWARD_CONFIG,
    ppo_cfg: PpoConfig | None = None,
    iterations: int = 300,
    *,
    seed: int = 0,
    batch_size: int | None = None,
) -> list[IterationStats]:
    """Optimize ``policy`` in place against the frozen copy taken on entry.

    Each iteration samples a batch of episodes (all tasks unless
    ``batch_size`` says otherwise), computes advantages once, then takes the
    configured number of gradient epochs with exact analytic gradients of
    the clipped surrogate, the KL penalty, and the clipped value loss.
    Advantages are normalized per batch for the policy step only. The
    recorded ``beta`` is the adapted coefficient entering the next iteration.
    """
    if ppo_cfg is None:
        ppo_cfg = demo_config()
    if not tasks:
        raise ValueError("no training tasks")
    ref = policy.copy()
    rng = np.random.default_rng(seed)
    gae_cfg = ppo_cfg.gae()
    beta = ppo_cfg.beta
    lr = ppo_cfg.learning_rate
    history: list[IterationStats] = []
    for iteration in range(iterations):
        if batch_size is None:
            batch = list(tasks)
        else:
            order = rng.permutation(len(tasks))[:batch_size]
            batch = [tasks[i] for i in order]
        results = [rollout(policy, ref, rec, reward_cfg, rng=rng) for rec in batch]
        trajectories = [r.trajectory for r in results]

        adv_chunks = [compute_gae(t, gae_cfg) for t in trajectories]
        ret_chunks = [adv + t.values[:-1] for adv, t in zip(adv_chunks, trajectories)]
        phi = np.concatenate([t.state_features for t in trajectories])
        actions = np.concatenate([t.tokens for t in trajectories]).astype(int)
        old_logprobs = np.concatenate([t.logprobs_policy for t in trajectories])
        ref_logprobs = np.concatenate([t.logprobs_ref for t in trajectories])
        old_values = np.concatenate([t.values[:-1] for t in trajectories])
        rewards_flat = np.concatenate([t.rewards for t in trajectories])
        advantages = np.concatenate(adv_chunks)
        returns = np.concatenate(ret_chunks)
        n = len(actions)
        rows = np.arange(n)
        norm_adv = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
        anchor = old_logprobs if ppo_cfg.ratio_anchor == "old" else ref_logprobs
        ref_probs = softmax(phi @ ref.weights.T)
        onehot = np.zeros((n, policy.n_actions))
        onehot[rows, actions] = 1.0

        for _ in range(ppo_cfg.epochs):
            probs = softmax(phi @ policy.weights.T)
            new_logprobs = np.log(probs[rows, actions])
            ratio = np.exp(new_logprobs - anchor)
            unclipped = ratio * norm_adv
            clipped = np.clip(ratio, 1 - ppo_cfg.clip_range, 1 + ppo_cfg.clip_range) * norm_adv
            # min() passes gradient only through the unclipped branch
            coeff = np.where(unclipped <= clipped, norm_adv * ratio, 0.0)
            grad_surrogate = ((onehot - probs) * coeff[:, None]).T @ phi / n
            grad_kl = (probs - ref_probs).T @ phi / n
            policy.weights += lr * (grad_surrogate - beta * grad_kl)

            predicted = phi @ policy.value_weights
            banded = np.clip(
                predicted,
                old_values - ppo_cfg.clip_range_value,
                old_values + ppo_cfg.clip_range_value,
            )
            use_raw = (predicted - returns) ** 2 >= (banded - returns) ** 2
            grad_value = (2.0 * (predicted - returns) * use_raw) @ phi / n
            policy.value_weights -= lr * VALUE_LR_SCALE * grad_value

        flat = Trajectory(
            tokens=actions,
            state_features=phi,
            logprobs_policy=old_logprobs,
            logprobs_ref=ref_logprobs,
            rewards=rewards_flat,
            values=np.append(old_values, 0.0),
        )
        probs = softmax(phi @ policy.weights.T)
        new_logprobs = np.log(probs[rows, actions])
        metric_cfg = replace(ppo_cfg, beta=beta)
        objective = ppo_objective(
            flat, advantages, new_logprobs, metric_cfg, ref_dists=ref_probs, new_dists=probs
        )
        vloss = value_loss(flat, returns, phi @ policy.value_weights, metric_cfg)
        observed_kl = float(np.mean(kl_divergence(ref_probs, probs)))
        beta = adaptive_kl_update(beta, observed_kl, ppo_cfg, len(trajectories))
        history.append(
            IterationStats(
                iteration=iteration,
                mean_total_reward=float(np.mean([float(r.breakdown.total) for r in results])),
                mean_kl=observed_kl,
                clip_fraction=objective.clip_fraction,
                beta=beta,
                policy_loss=objective.policy_loss,
                value_loss=vloss,
                prob_sum_err=max(r.session.prob_sum_err for r in results),
            )
        )
    return history
