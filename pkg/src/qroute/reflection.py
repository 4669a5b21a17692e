"""The reflective loop: critic scoring, residual decomposition, attempt
policy, and next-command extraction.

After every expert call the critic scores the step on a four-dimension
rubric (content accuracy, spatial configuration, visual quality, style
consistency) and rebuilds the residual ledger by grouping the prompt's
still-unsatisfied atoms into one command per category. The attempt policy
then decides the fate of the command that was just executed: completed
commands disappear, failed ones requeue with an incremented attempt
counter, and a command failing its third attempt is abandoned for good.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .core import (
    TAXONOMY,
    Atom,
    AtomicCommand,
    CanvasState,
    CommandSet,
    Prompt,
    TaskCategory,
    atom_satisfied,
    command_text,
)
from .errors import RemoteFailure

#: Rubric dimension two (spatial configuration) covers arrangement and sizing.
SPATIAL_CATEGORIES: frozenset[TaskCategory] = frozenset(
    {TaskCategory.SPATIAL_REARRANGE, TaskCategory.OBJECT_RESIZING}
)

MAX_ATTEMPTS = 3


@dataclass(frozen=True)
class CriticVerdict:
    raw: float
    subscores: tuple[float, float, float, float]
    completed: bool
    residual: CommandSet

    def __post_init__(self) -> None:
        expected = sum(self.subscores) / 4.0
        if abs(self.raw - expected) > 1e-9:
            raise ValueError("raw must be the mean of the four subscores")


def _clamp(x: float) -> float:
    return min(10.0, max(0.0, x))


def critic_score(
    prev: CanvasState,
    curr: CanvasState,
    c_curr: AtomicCommand,
    c_rem: CommandSet,
    prompt: Prompt,
    quality: float,
    abandoned: frozenset[Atom] = frozenset(),
    id_start: Optional[int] = None,
) -> CriticVerdict:
    """Score one step and rebuild the residual ledger.

    Subscores: content accuracy is the satisfied fraction of all prompt
    atoms; spatial configuration the satisfied fraction of spatial-category
    atoms (a prompt without spatial atoms scores 10); visual quality passes
    the expert's own quality through; style consistency is all-or-nothing
    against the prompt's style tag.

    The residual ledger covers every unsatisfied, non-abandoned prompt
    atom, one command per category. Commands already present in ``c_rem``
    keep their id and attempt counter (payload refreshed); new categories
    get fresh ids starting at ``id_start`` in taxonomy order.
    """
    n_total = len(prompt.atoms)
    n_sat = sum(1 for a in prompt.atoms if atom_satisfied(a, curr))
    content = 10.0 * n_sat / n_total if n_total else 10.0

    spatial_atoms = [a for a in prompt.atoms if a.category in SPATIAL_CATEGORIES]
    if spatial_atoms:
        n_spatial = sum(1 for a in spatial_atoms if atom_satisfied(a, curr))
        spatial = 10.0 * n_spatial / len(spatial_atoms)
    else:
        spatial = 10.0

    visual = _clamp(float(quality))

    if prompt.style_tag is None or curr.style == prompt.style_tag:
        style = 10.0
    else:
        style = 0.0

    subscores = (_clamp(content), _clamp(spatial), visual, _clamp(style))
    raw = sum(subscores) / 4.0

    completed = all(atom_satisfied(a, curr) for a in c_curr.payload)

    residual = _decompose(curr, c_rem, prompt, abandoned, id_start)
    return CriticVerdict(raw=raw, subscores=subscores, completed=completed, residual=residual)


def _decompose(
    curr: CanvasState,
    c_rem: CommandSet,
    prompt: Prompt,
    abandoned: frozenset[Atom],
    id_start: Optional[int],
) -> CommandSet:
    """Group unsatisfied prompt atoms per category into residual commands.

    Atom iteration order never reaches the output: payloads are sets and
    new commands are created in taxonomy order.
    """
    open_atoms: dict[TaskCategory, set[Atom]] = {}
    for a in prompt.atoms:
        if a in abandoned or atom_satisfied(a, curr):
            continue
        open_atoms.setdefault(a.category, set()).add(a)

    next_id = id_start if id_start is not None else max(c_rem.max_id(), -1) + 1
    commands: list[AtomicCommand] = []
    claimed: set[TaskCategory] = set()

    # existing ledger entries keep identity and position
    for cmd in c_rem:
        if cmd.category in open_atoms and cmd.category not in claimed:
            payload = frozenset(open_atoms[cmd.category])
            commands.append(
                AtomicCommand(
                    id=cmd.id,
                    text=command_text(cmd.category, payload),
                    category=cmd.category,
                    payload=payload,
                    attempts=cmd.attempts,
                )
            )
            claimed.add(cmd.category)

    # leftover categories become new commands, taxonomy order
    for cat in TAXONOMY:
        if cat in open_atoms and cat not in claimed:
            payload = frozenset(open_atoms[cat])
            commands.append(
                AtomicCommand(
                    id=next_id,
                    text=command_text(cat, payload),
                    category=cat,
                    payload=payload,
                    attempts=0,
                )
            )
            next_id += 1
            claimed.add(cat)

    return CommandSet(tuple(commands))


@dataclass(frozen=True)
class AttemptOutcome:
    """Result of the attempt policy: the updated ledger, plus the executed
    command when it was requeued or permanently abandoned."""

    residual: CommandSet
    requeued: Optional[AtomicCommand] = None
    abandoned: Optional[AtomicCommand] = None


def apply_attempt_policy(
    verdict: CriticVerdict, c_curr: AtomicCommand, residual: CommandSet
) -> AttemptOutcome:
    """Decide the executed command's fate inside the fresh residual ledger.

    A completed command is simply gone (its atoms are satisfied, so the
    decomposition no longer lists them). An incomplete single-category
    command reclaims its slot in the ledger with an incremented attempt
    counter, unless this was its third attempt, in which case it is
    dropped and its atoms are abandoned. An incomplete multi-category
    command (only the initial whole-prompt command qualifies) is
    superseded by its per-category decomposition and never requeued.
    """
    if verdict.completed:
        return AttemptOutcome(residual=residual)

    categories = {a.category for a in c_curr.payload}
    if len(categories) != 1:
        return AttemptOutcome(residual=residual)
    category = next(iter(categories))

    slot = next((c for c in residual if c.category is category), None)
    new_attempts = c_curr.attempts + 1

    if new_attempts < MAX_ATTEMPTS:
        if slot is None:
            # constructed command whose atoms are not prompt atoms; requeue as-is
            requeued = c_curr.with_attempts(new_attempts)
            return AttemptOutcome(residual=residual.added(requeued), requeued=requeued)
        requeued = AtomicCommand(
            id=c_curr.id,
            text=slot.text,
            category=category,
            payload=slot.payload,
            attempts=new_attempts,
        )
        out = tuple(requeued if c.id == slot.id else c for c in residual)
        return AttemptOutcome(residual=CommandSet(out), requeued=requeued)

    dropped = c_curr.with_attempts(MAX_ATTEMPTS)
    if slot is not None:
        residual = residual.removed(slot.id)
        dropped = AtomicCommand(
            id=c_curr.id,
            text=slot.text,
            category=category,
            payload=slot.payload,
            attempts=MAX_ATTEMPTS,
        )
    return AttemptOutcome(residual=residual, abandoned=dropped)


def extract_command(c_rem: CommandSet) -> tuple[Optional[AtomicCommand], CommandSet]:
    """Pick the next command: fewest attempts first, then earliest id."""
    if c_rem.is_empty():
        return None, c_rem
    chosen = min(c_rem, key=lambda c: (c.attempts, c.id))
    return chosen, c_rem.removed(chosen.id)


_KEYWORDS: tuple[tuple[TaskCategory, tuple[str, ...]], ...] = (
    (TaskCategory.REMOVE_OBJECT, ("remove", "delete", "erase", "without")),
    (TaskCategory.OBJECT_RESIZING, ("resize", "bigger", "smaller", "larger", "shrink", "enlarge", "scale")),
    (TaskCategory.BACKGROUND_REPLACEMENT, ("background", "backdrop")),
    (TaskCategory.STYLE_TRANSFER, ("style", "watercolor", "sketch", "painting")),
    (TaskCategory.ADD_TEXT, ("text", "word", "letters", "caption", "reads")),
    (TaskCategory.LIGHTING_CHANGE, ("light", "lighting", "bright", "brighter", "dark", "darker", "dim", "sunset", "glow")),
    (TaskCategory.COLOR_CHANGE, ("color", "colour", "recolor", "tint", "hue")),
    (TaskCategory.SPATIAL_REARRANGE, ("move", "rearrange", "arrange", "swap", "align", "reposition")),
    (TaskCategory.ADD_OBJECT, ("add", "insert", "place", "put", "draw")),
)


def classify_task(command: AtomicCommand) -> TaskCategory:
    """Deterministic category assignment. Payload atoms win; otherwise the
    first keyword family that matches the text; otherwise add_object."""
    if command.payload:
        counts: dict[TaskCategory, int] = {}
        for a in command.payload:
            counts[a.category] = counts.get(a.category, 0) + 1
        best = max(counts.values())
        for cat in TAXONOMY:
            if counts.get(cat, 0) == best:
                return cat
    words = set(command.text.lower().split())
    for cat, keys in _KEYWORDS:
        if any(k in words for k in keys):
            return cat
    return TaskCategory.ADD_OBJECT


class RemoteCritic:
    """Adapter for an external scorer with the same call shape.

    Request: {"prev": ref, "curr": ref, "c_curr": text,
    "c_rem": [texts], "prompt": text}.
    Reply: {"raw": float in [0, 10], "completed": bool,
    "residual": [texts]}. Residual texts matching an existing ledger
    entry keep that entry's id and attempts.
    """

    def __init__(self, transport: Callable[[dict, float], dict], timeout: float = 120.0):
        self.transport = transport
        self.timeout = timeout

    def score(
        self,
        prev: CanvasState,
        curr: CanvasState,
        c_curr: AtomicCommand,
        c_rem: CommandSet,
        prompt: Prompt,
        id_start: Optional[int] = None,
    ) -> CriticVerdict:
        request = {
            "prev": prev.ref,
            "curr": curr.ref,
            "c_curr": c_curr.text,
            "c_rem": [c.text for c in c_rem],
            "prompt": prompt.text,
        }
        try:
            reply = self.transport(request, self.timeout)
        except Exception as exc:
            raise RemoteFailure(f"critic transport failed: {exc}") from exc
        try:
            raw = float(reply["raw"])
            completed = bool(reply["completed"])
            residual_texts = list(reply["residual"])
        except (KeyError, TypeError, ValueError) as exc:
            raise RemoteFailure(f"malformed critic reply: {reply!r}") from exc
        if not 0.0 <= raw <= 10.0:
            raise RemoteFailure(f"critic raw score out of range: {raw}")

        by_text = {c.text: c for c in c_rem}
        next_id = id_start if id_start is not None else max(c_rem.max_id(), -1) + 1
        commands: list[AtomicCommand] = []
        for text in residual_texts:
            prior = by_text.get(text)
            if prior is not None:
                commands.append(prior)
                continue
            probe = AtomicCommand(id=next_id, text=text, category=TaskCategory.ADD_OBJECT)
            commands.append(
                AtomicCommand(id=next_id, text=text, category=classify_task(probe))
            )
            next_id += 1
        return CriticVerdict(
            raw=raw,
            subscores=(raw, raw, raw, raw),
            completed=completed,
            residual=CommandSet(tuple(commands)),
        )
