"""Registry of generation (T2I) and editing (I2I) experts.

Experts are pluggable backends behind a common invoke contract. The
default registry is fully synthetic: each expert carries a per-category
skill profile (mean quality, noise, failure probability) and mutates the
symbolic canvas accordingly. A remote backend with the same contract can
be registered instead; the engine does not care which is which.

Canonical ordering: indices 0..6 are text-to-image, indices 7..11 are
image-to-image. Eligibility is purely modal: T2I experts act on a blank
canvas, I2I experts on anything that already has an image.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .core import (
    REMOVAL_CATEGORIES,
    AtomicCommand,
    CanvasKind,
    CanvasState,
    TaskCategory,
)
from .errors import DuplicateIndex, IneligibleExpert, RemoteFailure, UnsupportedCanvas

N_EXPERTS = 12


class Modality(str, Enum):
    T2I = "t2i"
    I2I = "i2i"


@dataclass(frozen=True)
class SkillProfile:
    """Synthetic competence of one expert across the task taxonomy.

    Failure probability defaults to (10 - mean) / 20 per category, so
    weaker categories fail more often and the retry machinery gets real
    exercise.
    """

    means: dict[TaskCategory, float]
    sigma: float = 0.5
    failure: Optional[dict[TaskCategory, float]] = None

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        for cat, m in self.means.items():
            if not 0.0 <= m <= 10.0:
                raise ValueError(f"mean score for {cat} out of [0, 10]: {m}")
        if self.failure is not None:
            for cat, p in self.failure.items():
                if not 0.0 <= p <= 1.0:
                    raise ValueError(f"failure probability for {cat} out of [0, 1]: {p}")

    def mean_for(self, category: TaskCategory) -> float:
        return self.means[category]

    def failure_for(self, category: TaskCategory) -> float:
        if self.failure is not None and category in self.failure:
            return self.failure[category]
        return (10.0 - self.means[category]) / 20.0

    def covers(self, taxonomy: tuple[TaskCategory, ...]) -> bool:
        return all(cat in self.means for cat in taxonomy)


@dataclass(frozen=True)
class RemoteBackend:
    """Forwarding backend. The transport owns the wire; we own the contract.

    Request: {"expert": name, "command": text, "canvas": ref-or-None}.
    Reply: {"canvas": ref, "quality": float in [0, 10]}.
    """

    transport: Callable[[dict, float], dict]
    timeout: float = 120.0


@dataclass(frozen=True)
class ExpertSpec:
    index: int
    name: str
    modality: Modality
    profile: Optional[SkillProfile] = None
    remote: Optional[RemoteBackend] = None

    def __post_init__(self) -> None:
        if (self.profile is None) == (self.remote is None):
            raise ValueError("expert needs exactly one backend: profile or remote")


class ExpertRegistry:
    """Ordered, read-only-after-construction expert table."""

    def __init__(self, specs: Optional[list[ExpertSpec]] = None):
        self._specs: dict[int, ExpertSpec] = {}
        self._by_modality: dict[Modality, frozenset[int]] = {m: frozenset() for m in Modality}
        for spec in specs or []:
            self.register(spec)

    def register(self, spec: ExpertSpec) -> None:
        if spec.index in self._specs:
            raise DuplicateIndex(f"expert index {spec.index} already registered")
        self._specs[spec.index] = spec
        self._by_modality[spec.modality] = self._by_modality[spec.modality] | {spec.index}

    def list(self) -> list[ExpertSpec]:
        return [self._specs[i] for i in sorted(self._specs)]

    def spec(self, index: int) -> ExpertSpec:
        return self._specs[index]

    def __len__(self) -> int:
        return len(self._specs)

    @property
    def size(self) -> int:
        return len(self._specs)

    def indices(self, modality: Modality) -> frozenset[int]:
        return self._by_modality[modality]

    def counterpart(self, index: int) -> Optional[int]:
        """Same-name expert in the other modality block, if registered."""
        me = self._specs[index]
        for i, s in sorted(self._specs.items()):
            if i != index and s.name == me.name and s.modality is not me.modality:
                return i
        return None

    def eligible(self, canvas: CanvasState) -> frozenset[int]:
        if canvas.is_blank:
            return self._by_modality[Modality.T2I]
        return self._by_modality[Modality.I2I]

    def invoke(
        self,
        index: int,
        command: AtomicCommand,
        canvas: CanvasState,
        rng: np.random.Generator,
    ) -> tuple[CanvasState, float]:
        """Run one expert call; returns the new canvas and a quality in [0, 10].

        Synthetic backends draw success against the profile's failure
        probability for the command's category. Success applies the whole
        payload (removal categories delete their payload atoms instead of
        adding them); failure leaves content unchanged but still consumes
        the step. A T2I call always turns a blank canvas into a symbolic
        one, even when it fails to satisfy anything.
        """
        if index not in self.eligible(canvas):
            raise IneligibleExpert(
                f"expert {index} not eligible on {canvas.kind.value} canvas"
            )
        spec = self._specs[index]
        if spec.remote is not None:
            return self._invoke_remote(spec, command, canvas)
        if canvas.kind is CanvasKind.EXTERNAL:
            raise UnsupportedCanvas("synthetic experts cannot edit an external canvas")
        return self._invoke_synthetic(spec, command, canvas, rng)

    def _invoke_synthetic(
        self,
        spec: ExpertSpec,
        command: AtomicCommand,
        canvas: CanvasState,
        rng: np.random.Generator,
    ) -> tuple[CanvasState, float]:
        profile = spec.profile
        assert profile is not None
        mean = profile.mean_for(command.category)
        # Fixed draw order (uniform, then gaussian) keeps replays bit-exact.
        success = rng.random() >= profile.failure_for(command.category)
        noise = rng.normal()

        removal = command.category in REMOVAL_CATEGORIES
        if removal and not (command.payload & canvas.atoms):
            success = False  # removing something that is not there is a no-op

        if success:
            quality = float(np.clip(mean + profile.sigma * noise, 0.0, 10.0))
            if removal:
                atoms = canvas.atoms - command.payload
            else:
                atoms = canvas.atoms | command.payload
            style = canvas.style
            for a in command.payload:
                if a.category is TaskCategory.STYLE_TRANSFER:
                    style = a.value
            return CanvasState.symbolic(atoms, style), quality
        quality = float(np.clip(mean / 2.0 + profile.sigma * noise, 0.0, 10.0))
        if canvas.is_blank:
            return CanvasState.symbolic(frozenset(), None), quality
        return canvas, quality

    def _invoke_remote(
        self, spec: ExpertSpec, command: AtomicCommand, canvas: CanvasState
    ) -> tuple[CanvasState, float]:
        backend = spec.remote
        assert backend is not None
        request = {
            "expert": spec.name,
            "command": command.text,
            "canvas": canvas.ref if canvas.kind is CanvasKind.EXTERNAL else None,
        }
        try:
            reply = backend.transport(request, backend.timeout)
        except Exception as exc:
            raise RemoteFailure(f"expert transport failed: {exc}") from exc
        if not isinstance(reply, dict) or "canvas" not in reply or "quality" not in reply:
            raise RemoteFailure(f"malformed expert reply: {reply!r}")
        quality = reply["quality"]
        if not isinstance(quality, (int, float)) or not 0.0 <= float(quality) <= 10.0:
            raise RemoteFailure(f"expert quality out of range: {quality!r}")
        if not isinstance(reply["canvas"], str):
            raise RemoteFailure("expert reply canvas must be a reference string")
        return CanvasState.external(reply["canvas"]), float(quality)


# Default synthetic registry. Names mirror a 7 + 5 production lineup; the
# skill layout makes every editing expert the front-runner for at least one
# category, so no single expert dominates the taxonomy.

def _flat(score: float) -> dict[TaskCategory, float]:
    return {c: score for c in TaskCategory}


def _peaked(base: float, **peaks: float) -> dict[TaskCategory, float]:
    means = _flat(base)
    for name, score in peaks.items():
        means[TaskCategory(name)] = score
    return means


DEFAULT_SKILL_TABLE: dict[str, dict[TaskCategory, float]] = {
    # text-to-image block (indices 0..6): single-shot openers. Long
    # compositional prompts overwhelm every one of them about equally,
    # which hands the interesting decisions to the editing block and keeps
    # paired policy comparisons tight (identical opener draws cancel
    # exactly when the means agree).
    "sdxl": _flat(3.3),
    "pixart-alpha": _flat(3.3),
    "sd35-large": _flat(3.3),
    "dalle3": _flat(3.3),
    "gpt-image-1": _flat(3.3),
    "flux1-dev": _flat(3.3),
    "gemini-flash": _flat(3.3),
    # image-to-image block (indices 7..11): pronounced per-category peaks;
    # off-specialty work is poor, which is what makes routing matter
    "instruct-pix2pix": _peaked(2.0, style_transfer=7.8),
    "magicbrush": _peaked(2.2, remove_object=7.9, color_change=7.7),
    "flux-kontext": _peaked(2.2, object_resizing=7.67, lighting_change=7.67),
    "gpt-image-1-edit": _peaked(2.4, add_object=8.0, add_text=8.25),
    "gemini-flash-edit": _peaked(2.4, background_replacement=7.67, spatial_rearrange=7.6),
}

_DEFAULT_ORDER: list[tuple[str, Modality]] = [
    ("sdxl", Modality.T2I),
    ("pixart-alpha", Modality.T2I),
    ("sd35-large", Modality.T2I),
    ("dalle3", Modality.T2I),
    ("gpt-image-1", Modality.T2I),
    ("flux1-dev", Modality.T2I),
    ("gemini-flash", Modality.T2I),
    ("instruct-pix2pix", Modality.I2I),
    ("magicbrush", Modality.I2I),
    ("flux-kontext", Modality.I2I),
    ("gpt-image-1-edit", Modality.I2I),
    ("gemini-flash-edit", Modality.I2I),
]


def default_registry(sigma: float = 0.5) -> ExpertRegistry:
    """The stock 12-expert synthetic registry (7 T2I + 5 I2I)."""
    specs = []
    for index, (name, modality) in enumerate(_DEFAULT_ORDER):
        profile = SkillProfile(means=dict(DEFAULT_SKILL_TABLE[name]), sigma=sigma)
        # the paired frontier experts share a display name across modalities
        display = name.removesuffix("-edit")
        specs.append(ExpertSpec(index=index, name=display, modality=modality, profile=profile))
    return ExpertRegistry(specs)
