"""Poses, polar actions and candidate cards.

Angles are radians, positive yaw turns left (counter-clockwise). All angles that
leave this module are wrapped to the half-open interval (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    """Raised for invalid geometric inputs (non-finite angles, empty candidate sets)."""


def wrap_angle(x: float) -> float:
    """Wrap ``x`` into (-pi, pi]."""
    if not math.isfinite(x):
        raise GeometryError(f"cannot wrap non-finite angle {x!r}")
    y = math.fmod(x, TWO_PI)
    if y <= -math.pi:
        y += TWO_PI
    elif y > math.pi:
        y -= TWO_PI
    return y


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    def distance_to(self, px: float, py: float) -> float:
        return math.hypot(px - self.x, py - self.y)


@dataclass(frozen=True)
class PolarAction:
    r: float
    theta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r >= 0.0):
            raise GeometryError(f"forward distance must be finite and >= 0, got {self.r!r}")
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "theta", wrap_angle(self.theta))


class CardKind(str, Enum):
    MOVE = "move"
    STOP = "stop"


STOP_ID = "stop"


@dataclass(frozen=True)
class CandidateCard:
    id: str
    action: PolarAction
    direction_text: str
    kind: CardKind = CardKind.MOVE

    @property
    def is_stop(self) -> bool:
        return self.kind is CardKind.STOP

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "r": self.action.r,
            "theta": self.action.theta,
            "text": self.direction_text,
            "kind": self.kind.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CandidateCard":
        return cls(d["id"], PolarAction(d["r"], d["theta"]), d["text"], CardKind(d["kind"]))


@dataclass(frozen=True)
class ContextPacket:
    """Per-step debate input: goal text, the packaged cards and optional evidence cues."""

    goal_text: str
    cards: tuple[CandidateCard, ...]
    evidence_cues: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "cards", tuple(self.cards))
        object.__setattr__(self, "evidence_cues", tuple(self.evidence_cues))

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.cards)

    def card(self, card_id: str) -> CandidateCard:
        for c in self.cards:
            if c.id == card_id:
                return c
        raise KeyError(card_id)


def render_direction_text(action: PolarAction) -> str:
    """Fixed, locale-independent description, e.g. ``forward 0.40 m, bear left 30.0°``."""
    deg = math.degrees(action.theta)
    mag = f"{abs(deg):.1f}"
    if action.r == 0.0 and mag != "0.0":
        return f"turn {'left' if deg > 0 else 'right'} {mag}° in place"
    if mag == "0.0":
        bearing = "bear 0.0°"
    else:
        bearing = f"bear {'left' if deg > 0 else 'right'} {mag}°"
    return f"forward {action.r:.2f} m, {bearing}"


def stop_card() -> CandidateCard:
    return CandidateCard(STOP_ID, PolarAction(0.0, 0.0), "stop here", CardKind.STOP)


def package_candidates(actions: Sequence[PolarAction], stop_allowed: bool = False) -> list[CandidateCard]:
    """Turn raw polar actions into cards ``c0, c1, ...`` (plus ``stop`` when allowed).

    No re-scoring and no reordering: card ``ci`` carries exactly ``actions[i]``.
    """
    if not actions and not stop_allowed:
        raise GeometryError("no executable candidate")
    cards = [CandidateCard(f"c{i}", a, render_direction_text(a)) for i, a in enumerate(actions)]
    if stop_allowed:
        cards.append(stop_card())
    return cards


def angular_distance(a: float, b: float) -> float:
    return abs(wrap_angle(a - b))


def ids_of(cards: Iterable[CandidateCard]) -> list[str]:
    return [c.id for c in cards]
