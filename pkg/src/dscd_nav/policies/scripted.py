"""Replay policies driven by JSONL fixtures.

Debate fixtures use the round format of :mod:`dscd_nav.debate`, optionally with
a ``"step"`` key (default 0) so one file can script several steps. Judge
fixtures hold one ``{"step", "id", "why", "evidence"}`` object per line.
"""

from __future__ import annotations

import json
from collections import defaultdict
from pathlib import Path
from typing import Any, Sequence

from ..debate import DebateHistory, DebateRound, DebateTrace, EvidenceItem, ProtocolViolation
from ..geometry import CandidateCard, ContextPacket
from .base import Arbitration, StancePolicy


def load_rounds(path) -> dict[int, list[DebateRound]]:
    by_step: dict[int, list[DebateRound]] = defaultdict(list)
    for ln in Path(path).read_text(encoding="utf-8").split("\n"):
        if ln.strip():
            d = json.loads(ln)
            by_step[int(d.get("step", 0))].append(DebateRound.from_dict(d))
    return dict(by_step)


class _Script(StancePolicy):
    def __init__(self, rounds):
        if not isinstance(rounds, dict):
            rounds = {0: list(rounds)}
        self.rounds = rounds
        self.step_index = 0

    @classmethod
    def from_file(cls, path):
        return cls(load_rounds(path))

    def begin_step(self, step_index: int) -> None:
        super().begin_step(step_index)
        self.step_index = step_index

    def _round(self, history: DebateHistory) -> DebateRound:
        k = len(history) + 1
        script = self.rounds.get(self.step_index, [])
        if k > len(script):
            raise ProtocolViolation(f"script has no round {k} for step {self.step_index}", k, self.role)
        return script[k - 1]


class ScriptedTSU(_Script):
    role = "TSU"

    def propose(self, ctx: ContextPacket, view: Any, history: DebateHistory):
        return self._round(history).tsu


class ScriptedSIB(_Script):
    role = "SIB"

    def respond(self, ctx: ContextPacket, view: Any, tsu_id: str, history: DebateHistory):
        return self._round(history).sib


class ScriptedNCA(StancePolicy):
    role = "NCA"

    def __init__(self, decisions: dict[int, Arbitration]):
        self.decisions = decisions
        self.step_index = 0

    @classmethod
    def from_file(cls, path) -> "ScriptedNCA":
        decisions = {}
        for ln in Path(path).read_text(encoding="utf-8").split("\n"):
            if ln.strip():
                d = json.loads(ln)
                decisions[int(d.get("step", 0))] = Arbitration(
                    d["id"], d.get("why", ""), tuple(EvidenceItem.from_dict(e) for e in d.get("evidence", []))
                )
        return cls(decisions)

    def begin_step(self, step_index: int) -> None:
        super().begin_step(step_index)
        self.step_index = step_index

    def arbitrate(self, goal: str, cards: Sequence[CandidateCard], trace: DebateTrace) -> Arbitration:
        try:
            return self.decisions[self.step_index]
        except KeyError:
            raise ProtocolViolation(f"no scripted decision for step {self.step_index}", stance="NCA") from None
