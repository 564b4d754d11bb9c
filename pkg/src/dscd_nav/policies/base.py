from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Protocol, Sequence

from ..debate import DebateHistory, DebateTrace, EvidenceItem, SibResponse, StanceProposal
from ..geometry import CandidateCard, ContextPacket


@dataclass(frozen=True)
class EnvView:
    """What the simulator exposes to the stances at one step.

    ``goal_bearing`` is the (possibly biased, noisy) goal direction estimate
    relative to the current heading. ``clearance`` and ``new_area`` are keyed
    by card id; ``new_area`` counts cells that executing the card would bring
    into view for the first time.
    """

    goal_bearing: float
    goal_distance: Optional[float] = None
    stop_ready: bool = False
    clearance: dict[str, float] = field(default_factory=dict)
    new_area: dict[str, int] = field(default_factory=dict)
    r_max: float = 1.5
    local_sketch: str = ""


@dataclass(frozen=True)
class Arbitration:
    candidate_id: str
    why: str = ""
    evidence: tuple[EvidenceItem, ...] = ()
    fallback: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.candidate_id,
            "why": self.why,
            "evidence": [e.to_dict() for e in self.evidence],
            "fallback": self.fallback,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Arbitration":
        return cls(
            d["id"],
            d.get("why", ""),
            tuple(EvidenceItem.from_dict(e) for e in d.get("evidence", [])),
            bool(d.get("fallback", False)),
        )


class NCAPolicy(Protocol):
    def arbitrate(self, goal: str, cards: Sequence[CandidateCard], trace: DebateTrace) -> Arbitration: ...


class StancePolicy:
    """Common base: per-step hook and the backend-fallback marker read by the runner."""

    role = "?"
    backend_fallback = False

    def begin_step(self, step_index: int) -> None:
        self.backend_fallback = False

    # Concrete roles implement one of these.
    def propose(self, ctx: ContextPacket, view: Any, history: DebateHistory) -> StanceProposal:
        raise NotImplementedError

    def respond(self, ctx: ContextPacket, view: Any, tsu_id: str, history: DebateHistory) -> SibResponse:
        raise NotImplementedError

    def arbitrate(self, goal: str, cards: Sequence[CandidateCard], trace: DebateTrace) -> Arbitration:
        raise NotImplementedError
