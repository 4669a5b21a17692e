"""Episode MDP: reset, masked step, reward shaping, termination.

One step = select expert, invoke it on the current command, score through
the critic, update the residual ledger via the attempt policy, extract the
next command, shape the reward. Episodes end when the ledger drains or the
step budget runs out; done is absorbing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .core import Atom, AtomicCommand, CanvasState, CommandSet, Prompt
from .embedder import HashingEmbedder, serialize_reflection_state
from .errors import DomainError, IneligibleAction, SteppedAfterDone
from .experts import ExpertRegistry
from .reflection import apply_attempt_policy, classify_task, critic_score, extract_command

T_MAX_DEFAULT = 6
STEP_PENALTY_DEFAULT = 0.05


def shape_reward(
    raw: float,
    t: int,
    step_penalty: float = STEP_PENALTY_DEFAULT,
    t_max: int = T_MAX_DEFAULT,
) -> float:
    """Normalize a raw critic score and charge the pipeline-length penalty."""
    if not 0.0 <= raw <= 10.0:
        raise DomainError(f"raw score out of [0, 10]: {raw}")
    if not 1 <= t <= t_max:
        raise DomainError(f"step index out of [1, {t_max}]: {t}")
    return raw / 10.0 - step_penalty * t


@dataclass(frozen=True, eq=False)
class EnvState:
    prompt: Prompt
    canvas: CanvasState
    c_curr: Optional[AtomicCommand]
    c_rem: CommandSet
    t: int
    done: bool
    next_id: int
    abandoned_atoms: frozenset[Atom] = frozenset()
    _embed: Callable[[str], np.ndarray] = field(repr=False, default=None)  # type: ignore[assignment]

    @property
    def serialized(self) -> str:
        cur = self.c_curr.text if self.c_curr is not None else None
        return serialize_reflection_state(cur, [(c.text, c.attempts) for c in self.c_rem])

    @cached_property
    def embedding(self) -> np.ndarray:
        # computed on first access; greedy policies need it, random ones never do
        return self._embed(self.serialized)


@dataclass(frozen=True)
class StepInfo:
    t: int
    expert: int
    category: str
    raw: float
    subscores: tuple[float, float, float, float]
    reward: float
    completed: bool
    mask: tuple[bool, ...]
    next_mask: tuple[bool, ...]
    command_id: int
    attempts: int
    quality: float
    abandoned_command: Optional[int] = None
    terminal_reason: Optional[str] = None  # "drained" | "budget" | None


class Environment:
    """Binds a registry, an embedder and the reflection loop into one MDP."""

    def __init__(
        self,
        registry: ExpertRegistry,
        embed: Optional[Callable[[str], np.ndarray]] = None,
        t_max: int = T_MAX_DEFAULT,
        step_penalty: float = STEP_PENALTY_DEFAULT,
    ):
        if t_max < 1:
            raise DomainError("t_max must be >= 1")
        self.registry = registry
        self.embed = embed if embed is not None else HashingEmbedder()
        self.t_max = t_max
        self.step_penalty = step_penalty
        self.n_actions = registry.size

    def reset(self, prompt: Prompt) -> EnvState:
        """Start an episode: the whole prompt becomes the first command."""
        canvas = prompt.initial_canvas if prompt.initial_canvas is not None else CanvasState.blank()
        probe = AtomicCommand(
            id=0, text=prompt.text, category=sorted(prompt.atoms)[0].category, payload=prompt.atoms
        )
        seed_cmd = AtomicCommand(
            id=0, text=prompt.text, category=classify_task(probe), payload=prompt.atoms
        )
        return EnvState(
            prompt=prompt,
            canvas=canvas,
            c_curr=seed_cmd,
            c_rem=CommandSet(),
            t=0,
            done=False,
            next_id=1,
            abandoned_atoms=frozenset(),
            _embed=self.embed,
        )

    def legal_actions(self, state: EnvState) -> np.ndarray:
        """Boolean mask over expert indices; all-false once the episode ended."""
        mask = np.zeros(self.n_actions, dtype=bool)
        if state.done:
            return mask
        for i in self.registry.eligible(state.canvas):
            mask[i] = True
        return mask

    def step(
        self, state: EnvState, action: int, rng: np.random.Generator
    ) -> tuple[EnvState, float, bool, StepInfo]:
        if state.done:
            raise SteppedAfterDone("episode already finished")
        assert state.c_curr is not None
        mask = self.legal_actions(state)
        if not (0 <= action < self.n_actions) or not mask[action]:
            raise IneligibleAction(f"action {action} illegal on {state.canvas.kind.value} canvas")

        canvas2, quality = self.registry.invoke(action, state.c_curr, state.canvas, rng)
        verdict = critic_score(
            state.canvas,
            canvas2,
            state.c_curr,
            state.c_rem,
            state.prompt,
            quality,
            abandoned=state.abandoned_atoms,
            id_start=state.next_id,
        )
        outcome = apply_attempt_policy(verdict, state.c_curr, verdict.residual)

        abandoned_atoms = state.abandoned_atoms
        if outcome.abandoned is not None:
            abandoned_atoms = abandoned_atoms | outcome.abandoned.payload

        c_next, c_rem2 = extract_command(outcome.residual)
        t2 = state.t + 1
        reward = shape_reward(verdict.raw, t2, self.step_penalty, self.t_max)

        drained = c_next is None and c_rem2.is_empty()
        done = drained or t2 >= self.t_max
        reason = "drained" if drained else ("budget" if done else None)

        next_id = max(state.next_id, outcome.residual.max_id() + 1)
        state2 = EnvState(
            prompt=state.prompt,
            canvas=canvas2,
            c_curr=c_next,
            c_rem=c_rem2,
            t=t2,
            done=done,
            next_id=next_id,
            abandoned_atoms=abandoned_atoms,
            _embed=self.embed,
        )
        info = StepInfo(
            t=t2,
            expert=action,
            category=state.c_curr.category.value,
            raw=verdict.raw,
            subscores=verdict.subscores,
            reward=reward,
            completed=verdict.completed,
            mask=tuple(bool(b) for b in mask),
            next_mask=tuple(bool(b) for b in self.legal_actions(state2)),
            command_id=state.c_curr.id,
            attempts=state.c_curr.attempts,
            quality=quality,
            abandoned_command=outcome.abandoned.id if outcome.abandoned is not None else None,
            terminal_reason=reason,
        )
        return state2, reward, done, info
