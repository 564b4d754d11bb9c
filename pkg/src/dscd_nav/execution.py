"""Two-mode execution: commit to the arbitrated card, or probe a softened version of it.

Mode B fires only when the stances still disagree after the debate and the
alternative direction lies within ``alpha`` of the arbitrated one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional

from .debate import ContractError, DebateTrace, EvidenceItem, ProtocolViolation, final_alternative
from .geometry import ContextPacket, PolarAction, wrap_angle
from .policies.base import Arbitration, NCAPolicy


class Mode(str, Enum):
    A = "A"
    B = "B"


@dataclass(frozen=True)
class ExecutionConfig:
    alpha: float = math.pi / 3
    beta_r: float = 0.5
    beta_theta: float = 1.0 / 3.0
    probing: bool = True  # False disables Mode B entirely (no-probe ablation)

    def __post_init__(self):
        if not 0 < self.alpha <= math.pi:
            raise ValueError("alpha must lie in (0, pi]")
        if not 0 < self.beta_r <= 1:
            raise ValueError("beta_r must lie in (0, 1]")
        if not 0 <= self.beta_theta <= 1:
            raise ValueError("beta_theta must lie in [0, 1]")


@dataclass(frozen=True)
class StepDecision:
    chosen_id: str
    why: str
    evidence: tuple[EvidenceItem, ...]
    mode: Mode
    exec: PolarAction
    delta_theta: float
    soft_compromise: bool
    micro_probe: bool
    consensus: bool
    alt_id: Optional[str] = None
    nca_fallback: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "evidence", tuple(self.evidence))

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.chosen_id,
            "why": self.why,
            "evidence": [e.to_dict() for e in self.evidence],
            "mode": self.mode.value,
            "r_exec": self.exec.r,
            "theta_exec": self.exec.theta,
            "delta_theta": self.delta_theta,
            "soft_compromise": self.soft_compromise,
            "micro_probe": self.micro_probe,
            "consensus": self.consensus,
            "alt_id": self.alt_id,
            "nca_fallback": self.nca_fallback,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StepDecision":
        return cls(
            chosen_id=d["id"],
            why=d.get("why", ""),
            evidence=tuple(EvidenceItem.from_dict(e) for e in d.get("evidence", [])),
            mode=Mode(d["mode"]),
            exec=PolarAction(d["r_exec"], d["theta_exec"]),
            delta_theta=d["delta_theta"],
            soft_compromise=d["soft_compromise"],
            micro_probe=d["micro_probe"],
            consensus=d["consensus"],
            alt_id=d.get("alt_id"),
            nca_fallback=d.get("nca_fallback", False),
        )


def select_mode(cons: int, delta_theta: float, cfg: ExecutionConfig = ExecutionConfig()) -> Mode:
    if cfg.probing and not cons and abs(delta_theta) <= cfg.alpha:
        return Mode.B
    return Mode.A


def soft_compromise(a_star: PolarAction, theta_alt: float, cfg: ExecutionConfig = ExecutionConfig()) -> PolarAction:
    """Shortened stride with a partial yaw shift toward the alternative direction."""
    delta = wrap_angle(theta_alt - a_star.theta)
    if abs(delta) > cfg.alpha:
        raise ContractError(f"|delta_theta|={abs(delta):.6f} exceeds alpha={cfg.alpha:.6f}")
    return PolarAction(cfg.beta_r * a_star.r, wrap_angle(a_star.theta + cfg.beta_theta * delta))


def decide_from_arbitration(ctx: ContextPacket, trace: DebateTrace, arb: Arbitration,
                            cfg: ExecutionConfig = ExecutionConfig()) -> StepDecision:
    """Pure part of :func:`decide_step`, usable to replay a logged arbitration."""
    if arb.candidate_id not in ctx.ids:
        raise ProtocolViolation(f"judge chose unknown candidate {arb.candidate_id!r}", stance="NCA")
    card = ctx.card(arb.candidate_id)
    common = dict(chosen_id=card.id, why=arb.why, evidence=arb.evidence,
                  consensus=trace.consensus, nca_fallback=arb.fallback)
    if trace.consensus or card.is_stop:
        return StepDecision(mode=Mode.A, exec=card.action, delta_theta=0.0,
                            soft_compromise=False, micro_probe=False, **common)

    alt = ctx.card(final_alternative(trace, card.id, ctx.cards))
    delta = wrap_angle(alt.action.theta - card.action.theta)
    mode = Mode.A if alt.is_stop else select_mode(0, delta, cfg)
    if mode is Mode.B:
        return StepDecision(mode=mode, exec=soft_compromise(card.action, alt.action.theta, cfg),
                            delta_theta=delta, soft_compromise=True, micro_probe=True, alt_id=alt.id, **common)
    return StepDecision(mode=mode, exec=card.action, delta_theta=delta,
                        soft_compromise=False, micro_probe=False, alt_id=alt.id, **common)


def decide_step(ctx: ContextPacket, trace: DebateTrace, nca: NCAPolicy,
                cfg: ExecutionConfig = ExecutionConfig()) -> StepDecision:
    """Arbitrate the finished debate and turn the verdict into an executable action."""
    arb = nca.arbitrate(ctx.goal_text, ctx.cards, trace)
    return decide_from_arbitration(ctx, trace, arb, cfg)
