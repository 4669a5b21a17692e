"""Shared domain types: task taxonomy, atoms, canvases, commands, prompts.

The synthetic world tracks image content symbolically. A canvas carries the
set of prompt constraints ("atoms") currently satisfied plus an optional
style tag; experts mutate that set, the critic reads it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterator, Optional


class TaskCategory(str, Enum):
    ADD_OBJECT = "add_object"
    REMOVE_OBJECT = "remove_object"
    OBJECT_RESIZING = "object_resizing"
    BACKGROUND_REPLACEMENT = "background_replacement"
    STYLE_TRANSFER = "style_transfer"
    ADD_TEXT = "add_text"
    LIGHTING_CHANGE = "lighting_change"
    COLOR_CHANGE = "color_change"
    SPATIAL_REARRANGE = "spatial_rearrange"


#: Canonical ordering of the nine editing-task categories.
TAXONOMY: tuple[TaskCategory, ...] = tuple(TaskCategory)

#: Categories whose successful application deletes content instead of adding it.
REMOVAL_CATEGORIES: frozenset[TaskCategory] = frozenset({TaskCategory.REMOVE_OBJECT})


@dataclass(frozen=True, order=True)
class Atom:
    """One verifiable constraint of a prompt, e.g. (add_object, "boats", "6")."""

    category: TaskCategory
    key: str
    value: str


class CanvasKind(str, Enum):
    BLANK = "blank"
    SYMBOLIC = "symbolic"
    EXTERNAL = "external"


@dataclass(frozen=True)
class CanvasState:
    kind: CanvasKind
    atoms: frozenset[Atom] = frozenset()
    style: Optional[str] = None
    ref: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind is CanvasKind.BLANK and (self.atoms or self.style or self.ref):
            raise ValueError("a blank canvas carries no atoms, style or reference")
        if self.kind is CanvasKind.EXTERNAL and self.ref is None:
            raise ValueError("external canvas requires a reference")

    @property
    def is_blank(self) -> bool:
        return self.kind is CanvasKind.BLANK

    @staticmethod
    def blank() -> "CanvasState":
        return CanvasState(CanvasKind.BLANK)

    @staticmethod
    def symbolic(atoms: frozenset[Atom] = frozenset(), style: Optional[str] = None) -> "CanvasState":
        return CanvasState(CanvasKind.SYMBOLIC, atoms=frozenset(atoms), style=style)

    @staticmethod
    def external(ref: str) -> "CanvasState":
        return CanvasState(CanvasKind.EXTERNAL, ref=ref)


def atom_satisfied(atom: Atom, canvas: CanvasState) -> bool:
    """Whether a single constraint is met on the given canvas.

    Removal constraints are met by absence; everything else by presence.
    Blank canvases satisfy nothing, and opaque external canvases cannot be
    assessed symbolically at all.
    """
    if canvas.is_blank or canvas.kind is CanvasKind.EXTERNAL:
        return False
    if atom.category in REMOVAL_CATEGORIES:
        return atom not in canvas.atoms
    return atom in canvas.atoms


@dataclass(frozen=True)
class AtomicCommand:
    """A self-contained instruction with a per-command attempt counter."""

    id: int
    text: str
    category: TaskCategory
    payload: frozenset[Atom] = frozenset()
    attempts: int = 0

    def __post_init__(self) -> None:
        if self.attempts < 0 or self.attempts > 3:
            raise ValueError(f"attempt counter out of range: {self.attempts}")

    def with_attempts(self, attempts: int) -> "AtomicCommand":
        return replace(self, attempts=attempts)


_COMMAND_PHRASES: dict[TaskCategory, str] = {
    TaskCategory.ADD_OBJECT: "insert objects",
    TaskCategory.REMOVE_OBJECT: "erase unwanted",
    TaskCategory.OBJECT_RESIZING: "rescale subject",
    TaskCategory.BACKGROUND_REPLACEMENT: "swap backdrop",
    TaskCategory.STYLE_TRANSFER: "restyle rendering",
    TaskCategory.ADD_TEXT: "write lettering",
    TaskCategory.LIGHTING_CHANGE: "relight scene",
    TaskCategory.COLOR_CHANGE: "recolor regions",
    TaskCategory.SPATIAL_REARRANGE: "rearrange layout",
}


def command_text(category: TaskCategory, atoms: frozenset[Atom]) -> str:
    """Canonical rendering of a decomposed command.

    Deliberately formulaic: one fixed two-word phrase per category, with
    vocabulary that does not overlap across categories. The ledger tracks
    the atoms themselves; the surface form exists to be embedded, and a
    recurring phrase makes equivalent reflection states recur verbatim
    across prompts.
    """
    return _COMMAND_PHRASES[category]


@dataclass(frozen=True)
class CommandSet:
    """The residual-command ledger. Immutable; mutations return a new set.

    Iteration follows ledger insertion order, which is semantically
    meaningful (it is embedded into the agent's state).
    """

    commands: tuple[AtomicCommand, ...] = ()

    def __iter__(self) -> Iterator[AtomicCommand]:
        return iter(self.commands)

    def __len__(self) -> int:
        return len(self.commands)

    def __bool__(self) -> bool:
        return bool(self.commands)

    def is_empty(self) -> bool:
        return not self.commands

    def get(self, command_id: int) -> Optional[AtomicCommand]:
        for c in self.commands:
            if c.id == command_id:
                return c
        return None

    def added(self, command: AtomicCommand) -> "CommandSet":
        if self.get(command.id) is not None:
            raise ValueError(f"duplicate command id {command.id}")
        return CommandSet(self.commands + (command,))

    def removed(self, command_id: int) -> "CommandSet":
        return CommandSet(tuple(c for c in self.commands if c.id != command_id))

    def max_id(self) -> int:
        return max((c.id for c in self.commands), default=-1)


@dataclass(frozen=True)
class Prompt:
    """A compositional request: a set of atoms plus an optional style tag."""

    id: int
    text: str
    atoms: frozenset[Atom]
    style_tag: Optional[str] = None
    initial_canvas: Optional[CanvasState] = None

    def __post_init__(self) -> None:
        if not self.atoms:
            raise ValueError("prompt atoms must be non-empty")
        seen: set[tuple[TaskCategory, str]] = set()
        for a in self.atoms:
            pair = (a.category, a.key)
            if pair in seen:
                raise ValueError(f"duplicate (category, key) pair in prompt: {pair}")
            seen.add(pair)

    @property
    def difficulty(self) -> int:
        return len(self.atoms)
