"""Episode logs: newline-delimited JSON, one step per line, followed by an
episode summary line. Writing is canonical (sorted keys, no whitespace) so
identical runs produce identical bytes."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .core import Atom, CanvasState, Prompt, TaskCategory
from .errors import LogParseError


@dataclass(frozen=True)
class StepRecord:
    t: int
    expert: int
    category: str
    raw: float
    subscores: tuple[float, float, float, float]
    reward: float
    completed: bool
    mask: tuple[bool, ...]
    command_id: int
    attempts: int
    abandoned_command: Optional[int] = None
    terminal_reason: Optional[str] = None


@dataclass(frozen=True)
class EpisodeRecord:
    episode_id: int
    seed: int
    prompt: Prompt
    steps: tuple[StepRecord, ...]
    episode_return: float
    length: int
    final_oracle_fraction: float
    truncated_by: Optional[str] = None  # None | "budget" | "policy"


def _prompt_payload(p: Prompt) -> dict:
    return {
        "id": p.id,
        "text": p.text,
        "style": p.style_tag,
        "editing": p.initial_canvas is not None,
        "atoms": [[a.category.value, a.key, a.value] for a in sorted(p.atoms)],
    }


def _prompt_from_payload(data: dict) -> Prompt:
    atoms = frozenset(
        Atom(category=TaskCategory(c), key=k, value=v) for c, k, v in data["atoms"]
    )
    return Prompt(
        id=int(data["id"]),
        text=str(data["text"]),
        atoms=atoms,
        style_tag=data.get("style"),
        initial_canvas=CanvasState.symbolic() if data.get("editing") else None,
    )


def _dump(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def episode_lines(episode: EpisodeRecord) -> list[str]:
    lines = []
    for s in episode.steps:
        lines.append(
            _dump(
                {
                    "kind": "step",
                    "episode": episode.episode_id,
                    "t": s.t,
                    "expert": s.expert,
                    "category": s.category,
                    "raw": s.raw,
                    "subscores": list(s.subscores),
                    "reward": s.reward,
                    "completed": s.completed,
                    "mask": list(s.mask),
                    "command_id": s.command_id,
                    "attempts": s.attempts,
                    "abandoned_command": s.abandoned_command,
                    "terminal_reason": s.terminal_reason,
                }
            )
        )
    lines.append(
        _dump(
            {
                "kind": "episode",
                "episode": episode.episode_id,
                "seed": episode.seed,
                "prompt": _prompt_payload(episode.prompt),
                "return": episode.episode_return,
                "length": episode.length,
                "oracle": episode.final_oracle_fraction,
                "truncated_by": episode.truncated_by,
            }
        )
    )
    return lines


def write_episode_log(path: str | Path, episodes: list[EpisodeRecord]) -> None:
    lines: list[str] = []
    for ep in episodes:
        lines.extend(episode_lines(ep))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_episode_log(path: str | Path) -> list[EpisodeRecord]:
    episodes: list[EpisodeRecord] = []
    pending: list[StepRecord] = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogParseError(lineno, f"invalid JSON: {exc}") from exc
        try:
            kind = data["kind"]
            if kind == "step":
                pending.append(
                    StepRecord(
                        t=int(data["t"]),
                        expert=int(data["expert"]),
                        category=str(data["category"]),
                        raw=float(data["raw"]),
                        subscores=tuple(float(x) for x in data["subscores"]),
                        reward=float(data["reward"]),
                        completed=bool(data["completed"]),
                        mask=tuple(bool(b) for b in data["mask"]),
                        command_id=int(data["command_id"]),
                        attempts=int(data["attempts"]),
                        abandoned_command=data.get("abandoned_command"),
                        terminal_reason=data.get("terminal_reason"),
                    )
                )
            elif kind == "episode":
                episodes.append(
                    EpisodeRecord(
                        episode_id=int(data["episode"]),
                        seed=int(data["seed"]),
                        prompt=_prompt_from_payload(data["prompt"]),
                        steps=tuple(pending),
                        episode_return=float(data["return"]),
                        length=int(data["length"]),
                        final_oracle_fraction=float(data["oracle"]),
                        truncated_by=data.get("truncated_by"),
                    )
                )
                pending = []
            else:
                raise LogParseError(lineno, f"unknown record kind {kind!r}")
        except LogParseError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise LogParseError(lineno, f"bad record: {exc}") from exc
    if pending:
        raise LogParseError(lineno, "dangling step records without an episode summary")
    return episodes
