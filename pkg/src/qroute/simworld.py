"""Deterministic generator of compositional prompts, plus ground-truth
oracles over the symbolic canvas.

A prompt of difficulty d carries exactly d atoms spanning at least
min(d, 3) distinct categories; half of all prompts ask for a style tag.
Removal-category atoms never appear in generated prompts (a constraint
"satisfied by deletion" cannot simultaneously be "present on the canvas",
which is what the content oracle counts), so remove_object exists in the
taxonomy for classification and adversarial commands only.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .core import Atom, CanvasState, Prompt, TaskCategory, command_text
from .errors import DomainError, LogParseError
from .experts import ExpertRegistry, Modality

_C = TaskCategory

#: Content categories a sampled atom may use. Spatial-configuration
#: categories enter through the forced constraint below; removal never
#: appears (a constraint satisfied by deletion cannot also be "present").
GENERATABLE: tuple[TaskCategory, ...] = (
    _C.ADD_TEXT,
    _C.LIGHTING_CHANGE,
    _C.COLOR_CHANGE,
)

#: Spatial-configuration constraints; hard prompts pin exactly one.
SPATIAL_GATES: tuple[TaskCategory, ...] = (_C.SPATIAL_REARRANGE, _C.OBJECT_RESIZING)

KEY_POOLS: dict[TaskCategory, tuple[str, ...]] = {
    _C.ADD_OBJECT: ("boats", "dogs", "lanterns", "bottles", "players", "clouds", "mugs", "spears", "chairs", "kites"),
    _C.OBJECT_RESIZING: ("tower", "hat", "moon", "table", "statue", "window", "tree", "banner", "bridge", "wheel"),
    _C.BACKGROUND_REPLACEMENT: ("backdrop", "horizon", "wall", "skyline", "field", "curtain", "seascape", "forest", "street", "cavern"),
    _C.ADD_TEXT: ("scoreboard", "sign", "label", "poster", "mug_text", "neon", "chalkboard", "ticket", "badge", "plaque"),
    _C.LIGHTING_CHANGE: ("sky", "lamp", "shadows", "glow", "spotlight", "dusk", "noon", "embers", "overcast", "rimlight"),
    _C.COLOR_CHANGE: ("walls", "car", "jersey", "roof", "door", "boat_hull", "umbrella", "awning", "bicycle", "flowers"),
    _C.SPATIAL_REARRANGE: ("diagonal", "left_of", "centered", "stacked", "row", "circle", "facing", "behind", "between", "corners"),
}

VALUE_POOLS: dict[TaskCategory, tuple[str, ...]] = {
    _C.ADD_OBJECT: ("2", "3", "4", "5", "6", "7"),
    _C.OBJECT_RESIZING: ("larger", "smaller", "double", "half", "towering", "miniature"),
    _C.BACKGROUND_REPLACEMENT: ("beach", "mountains", "city", "desert", "meadow", "harbor"),
    _C.ADD_TEXT: ("home_3_away_1", "sale", "open", "speed_60", "welcome", "est_1999"),
    _C.LIGHTING_CHANGE: ("sunset", "brighter", "dimmer", "golden", "moonlit", "harsh"),
    _C.COLOR_CHANGE: ("teal", "crimson", "amber", "ivory", "violet", "olive"),
    _C.SPATIAL_REARRANGE: ("strict", "loose", "even", "tight", "mirrored", "offset"),
}

STYLE_POOL: tuple[str, ...] = ("watercolor", "ukiyoe", "noir", "popart", "blueprint", "pastel")


def generate_prompt(
    rng: np.random.Generator,
    difficulty: int,
    prompt_id: int = 0,
    editing_prob: float = 0.0,
) -> Prompt:
    """One synthetic prompt with ``difficulty`` atoms. Deterministic per rng.

    A share of prompts (``editing_prob``) are editing tasks: they carry an
    input image, so their episodes start directly in the editing block.
    """
    if not 1 <= difficulty <= 6:
        raise DomainError(f"difficulty out of [1, 6]: {difficulty}")

    editing = bool(rng.random() < editing_prob)
    styled = bool(rng.random() < 0.5)
    style_tag = str(STYLE_POOL[int(rng.integers(0, len(STYLE_POOL)))]) if styled else None

    # long-form compositions pin spatial-configuration constraints: one for
    # mid-size prompts (arrangement or sizing, evenly split), both for the
    # longest ones, so the step budget stays contested to the very end
    forced: list[TaskCategory] = []
    if difficulty >= 5:
        forced = list(SPATIAL_GATES)
    elif difficulty >= 2:
        forced = [SPATIAL_GATES[int(rng.integers(0, len(SPATIAL_GATES)))]]

    # spread atoms over as many distinct categories as the atom budget
    # allows, so the residual ledger is about as deep as the step budget
    n_plain = difficulty - (1 if styled else 0)
    required = min(difficulty, len(forced) + len(GENERATABLE)) - (1 if styled else 0)
    required = max(required, 0)
    required = min(required, n_plain)

    pool = list(GENERATABLE)
    perm = rng.permutation(len(pool))
    categories = forced[: min(len(forced), n_plain)]
    categories += [pool[int(i)] for i in perm[: max(0, required - len(categories))]]
    while len(categories) < n_plain:
        categories.append(pool[int(rng.integers(0, len(pool)))])

    atoms: set[Atom] = set()
    used: set[tuple[TaskCategory, str]] = set()
    for cat in categories:
        keys = KEY_POOLS[cat]
        key = str(keys[int(rng.integers(0, len(keys)))])
        while (cat, key) in used:
            key = str(keys[int(rng.integers(0, len(keys)))])
        used.add((cat, key))
        values = VALUE_POOLS[cat]
        value = str(values[int(rng.integers(0, len(values)))])
        atoms.add(Atom(category=cat, key=key, value=value))
    if styled:
        atoms.add(Atom(category=_C.STYLE_TRANSFER, key="style", value=style_tag))

    # surface text lists the requested operations in the ledger's phrasing;
    # the atoms carry the actual keys and values
    present = {a.category for a in atoms}
    text = " | ".join(command_text(c, frozenset()) for c in TaskCategory if c in present)
    initial = CanvasState.symbolic() if editing else None
    return Prompt(
        id=prompt_id,
        text=text,
        atoms=frozenset(atoms),
        style_tag=style_tag,
        initial_canvas=initial,
    )


def generate_corpus(
    seed: int,
    count: int,
    difficulty_min: int = 1,
    difficulty_max: int = 6,
    id_start: int = 0,
    editing_prob: float = 0.0,
) -> list[Prompt]:
    """Reproducible prompt corpus with difficulties drawn uniformly."""
    if difficulty_min > difficulty_max:
        raise DomainError("difficulty_min must be <= difficulty_max")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(77,)))
    prompts = []
    for i in range(count):
        d = int(rng.integers(difficulty_min, difficulty_max + 1))
        prompts.append(generate_prompt(rng, d, prompt_id=id_start + i, editing_prob=editing_prob))
    return prompts


def oracle_fraction(canvas: CanvasState, prompt: Prompt) -> float:
    """Fraction of the prompt's atoms present on the canvas; blank scores 0."""
    if canvas.is_blank or not prompt.atoms:
        return 0.0
    return len(prompt.atoms & canvas.atoms) / len(prompt.atoms)


def best_expert(registry: ExpertRegistry, category: TaskCategory) -> int:
    """Ground-truth best editing expert for a category.

    Argmax of configured skill means over the I2I block; ties break to the
    lowest index. Editing experts are the ones the routing question is
    about: every step after the first has a canvas.
    """
    best_idx: Optional[int] = None
    best_mean = -np.inf
    for spec in registry.list():
        if spec.modality is not Modality.I2I or spec.profile is None:
            continue
        mean = spec.profile.mean_for(category)
        if mean > best_mean:
            best_mean = mean
            best_idx = spec.index
    if best_idx is None:
        raise DomainError("registry has no synthetic editing experts")
    return best_idx


def best_legal_expert(
    registry: ExpertRegistry, category: TaskCategory, canvas: CanvasState
) -> int:
    """Best synthetic expert for the category among currently legal ones."""
    candidates = sorted(registry.eligible(canvas))
    best_idx: Optional[int] = None
    best_mean = -np.inf
    for i in candidates:
        profile = registry.spec(i).profile
        if profile is None:
            continue
        mean = profile.mean_for(category)
        if mean > best_mean:
            best_mean = mean
            best_idx = i
    if best_idx is None:
        raise DomainError("no legal synthetic expert for this canvas")
    return best_idx


# Prompt corpus files: one JSON object per line {id, text, style, atoms}.

def write_prompts(path: str | Path, prompts: Iterable[Prompt]) -> None:
    lines = []
    for p in prompts:
        record = {
            "id": p.id,
            "text": p.text,
            "style": p.style_tag,
            "editing": p.initial_canvas is not None,
            "atoms": [[a.category.value, a.key, a.value] for a in sorted(p.atoms)],
        }
        lines.append(json.dumps(record, sort_keys=True, separators=(",", ":")))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_prompts(path: str | Path) -> list[Prompt]:
    prompts = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            atoms = frozenset(
                Atom(category=TaskCategory(c), key=k, value=v) for c, k, v in record["atoms"]
            )
            prompts.append(
                Prompt(
                    id=int(record["id"]),
                    text=str(record["text"]),
                    atoms=atoms,
                    style_tag=record.get("style"),
                    initial_canvas=CanvasState.symbolic() if record.get("editing") else None,
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise LogParseError(lineno, f"bad prompt record: {exc}") from exc
    return prompts
