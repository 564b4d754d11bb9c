"""Deterministic stance heuristics.

TSU scores candidates by goal alignment and stride length, then shifts its
belief by the support/attack relations SIB raised in earlier rounds. SIB scores
by endpoint clearance and the amount of unseen area a move would reveal. NCA
compares the two final preferences on progress, safety and information using
the scores the stances logged in their evidence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Optional, Sequence

from ..debate import (
    DebateHistory,
    DebateTrace,
    Decision,
    EvidenceItem,
    Relation,
    SibResponse,
    StanceProposal,
)
from ..geometry import STOP_ID, CandidateCard, ContextPacket, wrap_angle
from .base import Arbitration, EnvView, StancePolicy


@dataclass(frozen=True)
class HeuristicWeights:
    w_g: float = 1.0  # TSU goal alignment
    w_p: float = 0.2  # TSU stride length
    delta_att: float = 0.5
    delta_sup: float = 0.25
    w_s: float = 0.6  # SIB clearance
    w_i: float = 0.4  # SIB new area
    gamma: float = 0.8  # SIB agreement threshold
    lam_t: float = 0.5
    lam_s: float = 0.3
    lam_i: float = 0.2
    goal_bias: float = 0.0  # radians added to TSU's goal bearing estimate
    goal_noise: float = 0.0  # std-dev (radians) of per-step bearing noise

    def updated(self, **overrides) -> "HeuristicWeights":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"unknown heuristic weights: {sorted(unknown)}")
        return replace(self, **{k: float(v) for k, v in overrides.items()})


# Scores built from integer cell counts can tie exactly; rounding must not break the tie.
TIE_TOL = 1e-9


def _argmax(scores: dict[str, float], order: Sequence[str]) -> str:
    best, best_id = -math.inf, None
    for cid in order:
        if cid in scores and scores[cid] > best + TIE_TOL:
            best, best_id = scores[cid], cid
    return best_id


def _move_ids(ctx: ContextPacket) -> list[str]:
    return [c.id for c in ctx.cards if not c.is_stop]


def _deg(x: float) -> str:
    return f"{math.degrees(x):+.0f}°"


def tsu_base_scores(ctx: ContextPacket, view: EnvView, w: HeuristicWeights) -> dict[str, float]:
    scores = {}
    for c in ctx.cards:
        if c.is_stop:
            continue
        a = c.action
        scores[c.id] = w.w_g * math.cos(wrap_angle(a.theta - view.goal_bearing)) + w.w_p * (a.r / view.r_max)
    return scores


def sib_terms(ctx: ContextPacket, view: EnvView) -> dict[str, tuple[float, float]]:
    """(safety, info) per move card, both in [0, 1]."""
    max_new = max((view.new_area.get(cid, 0) for cid in _move_ids(ctx)), default=0)
    out = {}
    for c in ctx.cards:
        if c.is_stop:
            continue
        r = c.action.r
        cl = view.clearance.get(c.id, 0.0)
        safety = 1.0 if r <= 0 else min(1.0, cl / r)
        info = view.new_area.get(c.id, 0) / max_new if max_new > 0 else 0.0
        out[c.id] = (safety, info)
    return out


def sib_scores(ctx: ContextPacket, view: EnvView, w: HeuristicWeights) -> dict[str, float]:
    return {cid: w.w_s * s + w.w_i * i for cid, (s, i) in sib_terms(ctx, view).items()}


def progress_term(score: float, w: HeuristicWeights) -> float:
    """TSU score rescaled to [0, 1] so the judge compares it on the same scale as safety and info."""
    span = 2 * abs(w.w_g) + abs(w.w_p)
    return (score + abs(w.w_g)) / span if span > 0 else 0.0


class HeuristicTSU(StancePolicy):
    role = "TSU"

    def __init__(self, weights: Optional[HeuristicWeights] = None):
        self.weights = weights or HeuristicWeights()
        self.belief: dict[str, float] = {}

    def propose(self, ctx: ContextPacket, view: EnvView, history: DebateHistory) -> StanceProposal:
        if view.stop_ready and STOP_ID in ctx.ids:
            return StanceProposal(
                STOP_ID,
                "target confirmed within reach",
                (EvidenceItem("target in view within success radius", Relation.SUPPORTS, STOP_ID,
                              {"progress": 1.0}),),
            )
        w = self.weights
        base = tsu_base_scores(ctx, view, w)
        belief = dict(base)
        for rnd in history:
            for e in rnd.sib.evidence:
                if e.about not in belief:
                    continue
                if e.relation is Relation.ATTACKS:
                    belief[e.about] -= w.delta_att
                else:
                    belief[e.about] += w.delta_sup
        self.belief = belief
        pick = _argmax(belief, ctx.ids)
        card = ctx.card(pick)
        evidence = [
            EvidenceItem(
                f"{card.direction_text} heads {_deg(wrap_angle(card.action.theta - view.goal_bearing))} off the goal bearing",
                Relation.SUPPORTS,
                pick,
                {"progress": progress_term(base[pick], w)},
            )
        ]
        if not history:
            # Opening round: rank every alternative so the judge can score any counter on progress.
            for cid, score in base.items():
                if cid != pick:
                    evidence.append(EvidenceItem(
                        f"{cid} trades goal progress ({score:.2f} vs {base[pick]:.2f})",
                        Relation.ATTACKS, cid, {"progress": progress_term(score, w)}))
        elif not history[-1].sib.agrees:
            rival = history[-1].sib.candidate_id
            if rival != pick and rival in base:
                evidence.append(
                    EvidenceItem(
                        f"{rival} trades goal progress ({base[rival]:.2f} vs {base[pick]:.2f})",
                        Relation.ATTACKS,
                        rival,
                        {"progress": progress_term(base[rival], w)},
                    )
                )
        why = f"best goal progress toward bearing {_deg(view.goal_bearing)}"
        return StanceProposal(pick, why, tuple(evidence))


class HeuristicSIB(StancePolicy):
    role = "SIB"

    def __init__(self, weights: Optional[HeuristicWeights] = None):
        self.weights = weights or HeuristicWeights()
        self.belief: dict[str, float] = {}

    def respond(self, ctx: ContextPacket, view: EnvView, tsu_id: str, history: DebateHistory) -> SibResponse:
        if tsu_id == STOP_ID:
            return SibResponse(
                Decision.AGREE, None, "stop is verified by target visibility",
                (EvidenceItem("target visible, stopping is safe", Relation.SUPPORTS, STOP_ID),),
            )
        w = self.weights
        terms = sib_terms(ctx, view)
        scores = {cid: w.w_s * s + w.w_i * i for cid, (s, i) in terms.items()}
        self.belief = scores
        best = _argmax(scores, ctx.ids)
        s_tsu, i_tsu = terms[tsu_id]
        tsu_metrics = {"safety": s_tsu, "info": i_tsu}
        if scores[tsu_id] >= w.gamma * scores[best] - TIE_TOL:
            return SibResponse(
                Decision.AGREE, None, "proposal is safe and informative enough",
                (EvidenceItem(f"{tsu_id} keeps clearance {s_tsu:.2f}, view gain {i_tsu:.2f}",
                              Relation.SUPPORTS, tsu_id, tsu_metrics),),
            )
        s_best, i_best = terms[best]
        if w.w_s * (s_best - s_tsu) >= w.w_i * (i_best - i_tsu):
            complaint = f"{tsu_id} ends close to obstacles (clearance ratio {s_tsu:.2f})"
        else:
            complaint = f"{tsu_id} reveals little unseen area (view gain {i_tsu:.2f})"
        return SibResponse(
            Decision.COUNTER,
            best,
            f"{best} keeps more clearance or reveals more",
            (
                EvidenceItem(complaint, Relation.ATTACKS, tsu_id, tsu_metrics),
                EvidenceItem(f"{best} keeps clearance {s_best:.2f}, view gain {i_best:.2f}",
                             Relation.SUPPORTS, best, {"safety": s_best, "info": i_best}),
            ),
        )


class SibProposer(StancePolicy):
    """SIB scoring placed in the proposing seat (single-stance SIB ablation)."""

    role = "TSU"

    def __init__(self, weights: Optional[HeuristicWeights] = None):
        self.weights = weights or HeuristicWeights()

    def propose(self, ctx: ContextPacket, view: EnvView, history: DebateHistory) -> StanceProposal:
        if view.stop_ready and STOP_ID in ctx.ids:
            return StanceProposal(STOP_ID, "target confirmed within reach")
        terms = sib_terms(ctx, view)
        scores = {cid: self.weights.w_s * s + self.weights.w_i * i for cid, (s, i) in terms.items()}
        pick = _argmax(scores, ctx.ids)
        s, i = terms[pick]
        return StanceProposal(
            pick, "safest, most informative move",
            (EvidenceItem(f"{pick} clearance {s:.2f}, view gain {i:.2f}", Relation.SUPPORTS, pick,
                          {"safety": s, "info": i}),),
        )


def _collect_metrics(trace: DebateTrace) -> dict[str, dict[str, float]]:
    """Latest logged value of each score per candidate, across all rounds."""
    out: dict[str, dict[str, float]] = {}
    for rnd in trace.rounds:
        for e in rnd.tsu.evidence + rnd.sib.evidence:
            if e.metrics:
                out.setdefault(e.about, {}).update(e.metrics)
    return out


class HeuristicNCA(StancePolicy):
    role = "NCA"

    def __init__(self, weights: Optional[HeuristicWeights] = None):
        self.weights = weights or HeuristicWeights()

    def utility(self, m: dict[str, float]) -> float:
        w = self.weights
        return w.lam_t * m["progress"] + w.lam_s * m["safety"] + w.lam_i * m["info"]

    def arbitrate(self, goal: str, cards: Sequence[CandidateCard], trace: DebateTrace) -> Arbitration:
        tsu_id, sib_id = trace.final_tsu_id, trace.final_sib_id
        last = trace.rounds[-1]
        if trace.consensus:
            return Arbitration(tsu_id, f"both stances agree on {tsu_id} for {goal}",
                               last.tsu.evidence + last.sib.evidence)
        metrics = _collect_metrics(trace)
        needed = ("progress", "safety", "info")
        if any(k not in metrics.get(cid, {}) for cid in (tsu_id, sib_id) for k in needed):
            return Arbitration(tsu_id, "fallback: evidence lacks scores for both preferences; keeping TSU's choice",
                               last.tsu.evidence, fallback=True)
        u_tsu = self.utility(metrics[tsu_id])
        u_sib = self.utility(metrics[sib_id])
        winner = sib_id if u_sib > u_tsu + TIE_TOL else tsu_id
        whys = [r.tsu.why for r in trace.rounds if r.tsu.candidate_id == winner]
        whys += [r.sib.why for r in trace.rounds if r.sib_id == winner and not r.sib.agrees]
        evidence = tuple(
            e for r in trace.rounds for e in r.tsu.evidence + r.sib.evidence
            if e.about == winner and e.relation is Relation.SUPPORTS
        )
        why = " | ".join(dict.fromkeys(whys)) or f"{winner} balances progress, safety and information"
        return Arbitration(winner, f"u={max(u_tsu, u_sib):.3f}: {why}", evidence)


class TsuAdopter(StancePolicy):
    """Judge that always keeps TSU's final preference (no-arbitration ablation)."""

    role = "NCA"

    def arbitrate(self, goal: str, cards: Sequence[CandidateCard], trace: DebateTrace) -> Arbitration:
        return Arbitration(trace.final_tsu_id, "TSU final preference adopted", trace.rounds[-1].tsu.evidence)
