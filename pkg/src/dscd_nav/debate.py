"""Multi-round TSU/SIB debate over a shared candidate set.

TSU proposes, SIB agrees or counters; the loop stops at the first agreement or
after ``K`` rounds. The resulting :class:`DebateTrace` keeps every round's
proposal, response and evidence relations.

Round wire format (one JSON object per line, keys in this order)::

    {"k":1,"tsu":{"id":"c2","why":"...","evidence":[...]},
     "sib":{"dec":"counter","id":"c5","why":"...","evidence":[...]}}

Evidence items are ``{"text":..., "relation":"supports"|"attacks", "about":id}``
with an optional ``"metrics"`` object of named scores.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Optional, Protocol, Sequence

from .geometry import CandidateCard, ContextPacket, angular_distance


class ProtocolViolation(RuntimeError):
    """A policy returned something the debate protocol does not allow."""

    def __init__(self, message: str, round_index: Optional[int] = None, stance: Optional[str] = None):
        where = []
        if round_index is not None:
            where.append(f"round {round_index}")
        if stance is not None:
            where.append(stance)
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.round_index = round_index
        self.stance = stance


class ContractError(RuntimeError):
    pass


class Relation(str, Enum):
    SUPPORTS = "supports"
    ATTACKS = "attacks"


class Decision(str, Enum):
    AGREE = "agree"
    COUNTER = "counter"


@dataclass(frozen=True)
class EvidenceItem:
    text: str
    relation: Relation
    about: str
    metrics: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "relation", Relation(self.relation))

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"text": self.text, "relation": self.relation.value, "about": self.about}
        if self.metrics:
            d["metrics"] = dict(self.metrics)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EvidenceItem":
        return cls(d["text"], Relation(d["relation"]), d["about"], dict(d.get("metrics", {})))


def _evidence_tuple(items: Iterable[EvidenceItem]) -> tuple[EvidenceItem, ...]:
    return tuple(items)


@dataclass(frozen=True)
class StanceProposal:
    candidate_id: str
    why: str = ""
    evidence: tuple[EvidenceItem, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "evidence", _evidence_tuple(self.evidence))

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.candidate_id, "why": self.why, "evidence": [e.to_dict() for e in self.evidence]}

    @classmethod
    def from_dict(cls, d: dict) -> "StanceProposal":
        return cls(d["id"], d.get("why", ""), tuple(EvidenceItem.from_dict(e) for e in d.get("evidence", [])))


@dataclass(frozen=True)
class SibResponse:
    decision: Decision
    candidate_id: Optional[str] = None
    why: str = ""
    evidence: tuple[EvidenceItem, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "decision", Decision(self.decision))
        object.__setattr__(self, "evidence", _evidence_tuple(self.evidence))

    @property
    def agrees(self) -> bool:
        return self.decision is Decision.AGREE

    def effective_id(self, tsu_id: str) -> str:
        """The candidate SIB ends up preferring: TSU's on agree, its own on counter."""
        return tsu_id if self.agrees else self.candidate_id

    def to_dict(self) -> dict[str, Any]:
        return {
            "dec": self.decision.value,
            "id": self.candidate_id,
            "why": self.why,
            "evidence": [e.to_dict() for e in self.evidence],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SibResponse":
        return cls(
            Decision(d["dec"]),
            d.get("id"),
            d.get("why", ""),
            tuple(EvidenceItem.from_dict(e) for e in d.get("evidence", [])),
        )


@dataclass(frozen=True)
class DebateRound:
    k: int
    tsu: StanceProposal
    sib: SibResponse

    @property
    def sib_id(self) -> str:
        return self.sib.effective_id(self.tsu.candidate_id)

    @property
    def disagree(self) -> bool:
        return self.tsu.candidate_id != self.sib_id

    def to_dict(self) -> dict[str, Any]:
        return {"k": self.k, "tsu": self.tsu.to_dict(), "sib": self.sib.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "DebateRound":
        return cls(int(d["k"]), StanceProposal.from_dict(d["tsu"]), SibResponse.from_dict(d["sib"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":"))


# Dialogue history H^(k-1): the rounds completed so far within one step.
DebateHistory = tuple[DebateRound, ...]


@dataclass(frozen=True)
class DebateTrace:
    rounds: tuple[DebateRound, ...]
    max_rounds: int

    def __post_init__(self):
        object.__setattr__(self, "rounds", tuple(self.rounds))
        n = len(self.rounds)
        if n == 0:
            raise ContractError("debate trace has no rounds")
        if n > self.max_rounds:
            raise ContractError(f"{n} rounds exceed K={self.max_rounds}")
        if [r.k for r in self.rounds] != list(range(1, n + 1)):
            raise ContractError("round indices must run 1..n")
        if any(r.sib.agrees for r in self.rounds[:-1]):
            raise ContractError("debate continued after an agreement")
        if n < self.max_rounds and not self.consensus:
            raise ContractError("debate stopped early without agreement")

    @property
    def consensus(self) -> bool:
        return self.rounds[-1].sib.agrees

    @property
    def final_tsu_id(self) -> str:
        return self.rounds[-1].tsu.candidate_id

    @property
    def final_sib_id(self) -> str:
        return self.rounds[-1].sib_id

    def to_dict(self) -> dict[str, Any]:
        return {"K": self.max_rounds, "rounds": [r.to_dict() for r in self.rounds]}

    @classmethod
    def from_dict(cls, d: dict) -> "DebateTrace":
        return cls(tuple(DebateRound.from_dict(r) for r in d["rounds"]), int(d["K"]))

    def to_jsonl(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.rounds)

    @classmethod
    def from_jsonl(cls, text: str, max_rounds: Optional[int] = None) -> "DebateTrace":
        # split on "\n" only: str.splitlines also breaks on U+0085/U+2028 inside JSON strings
        rounds = tuple(DebateRound.from_dict(json.loads(ln)) for ln in text.split("\n") if ln.strip())
        return cls(rounds, max_rounds if max_rounds is not None else len(rounds))


class TSUPolicy(Protocol):
    def propose(self, ctx: ContextPacket, view: Any, history: DebateHistory) -> StanceProposal: ...


class SIBPolicy(Protocol):
    def respond(self, ctx: ContextPacket, view: Any, tsu_id: str, history: DebateHistory) -> SibResponse: ...


def _check_evidence(items: Sequence[EvidenceItem], ids: set, k: int, stance: str) -> None:
    for e in items:
        if e.about not in ids:
            raise ProtocolViolation(f"evidence refers to unknown candidate {e.about!r}", k, stance)


def validate_round(rnd: DebateRound, ids: set) -> None:
    k = rnd.k
    if rnd.tsu.candidate_id not in ids:
        raise ProtocolViolation(f"proposed unknown candidate {rnd.tsu.candidate_id!r}", k, "TSU")
    _check_evidence(rnd.tsu.evidence, ids, k, "TSU")
    sib = rnd.sib
    if sib.agrees:
        if sib.candidate_id is not None and sib.candidate_id != rnd.tsu.candidate_id:
            raise ProtocolViolation("agree must not name a different candidate", k, "SIB")
    elif sib.candidate_id not in ids:
        raise ProtocolViolation(f"countered with unknown candidate {sib.candidate_id!r}", k, "SIB")
    _check_evidence(sib.evidence, ids, k, "SIB")


def run_debate(ctx: ContextPacket, tsu: TSUPolicy, sib: SIBPolicy, K: int = 3, view: Any = None) -> DebateTrace:
    """Run up to ``K`` rounds, exiting at the first SIB agreement."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if not ctx.cards:
        raise ValueError("context has no candidate cards")
    ids = set(ctx.ids)
    history: DebateHistory = ()
    for k in range(1, K + 1):
        proposal = tsu.propose(ctx, view, history)
        if proposal.candidate_id not in ids:
            raise ProtocolViolation(f"proposed unknown candidate {proposal.candidate_id!r}", k, "TSU")
        response = sib.respond(ctx, view, proposal.candidate_id, history)
        rnd = DebateRound(k, proposal, response)
        validate_round(rnd, ids)
        history = history + (rnd,)
        if response.agrees:
            break
    return DebateTrace(history, K)


def consensus_indicator(trace: DebateTrace) -> int:
    return 1 if trace.consensus else 0


def final_alternative(trace: DebateTrace, chosen_id: str, cards: Sequence[CandidateCard]) -> str:
    """The other stance's final preference relative to the arbitrated choice.

    If the judge picked neither final preference, the stance preference whose yaw
    is angularly closest to the chosen card is returned (ties go to TSU).
    """
    if trace.consensus:
        raise ContractError("no alternative exists under consensus")
    tsu_id, sib_id = trace.final_tsu_id, trace.final_sib_id
    if chosen_id == tsu_id:
        return sib_id
    if chosen_id == sib_id:
        return tsu_id
    by_id = {c.id: c for c in cards}
    theta = by_id[chosen_id].action.theta
    d_tsu = angular_distance(by_id[tsu_id].action.theta, theta)
    d_sib = angular_distance(by_id[sib_id].action.theta, theta)
    return sib_id if d_sib < d_tsu else tsu_id
