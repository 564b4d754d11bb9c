"""Navigation and debate metrics: SR, SPL, AORI, DR, JOR, MPTR and delta-SPL.

Ratios whose denominator is empty are returned as ``None`` (rendered ``n/a``),
never as 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Optional, Sequence

import numpy as np

UNDEFINED = None


@dataclass(frozen=True)
class EpisodeOutcome:
    success: bool
    geodesic: float
    path_length: float
    steps: int

    def __post_init__(self):
        if self.path_length < 0:
            raise ValueError("path length must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return {"success": bool(self.success), "geodesic": self.geodesic,
                "path_length": self.path_length, "steps": self.steps}

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeOutcome":
        return cls(bool(d["success"]), float(d["geodesic"]), float(d["path_length"]), int(d["steps"]))


@dataclass(frozen=True)
class MetricsConfig:
    tau: Optional[float] = None  # None -> 0.25 x calibrated open-space footprint
    eta: float = 1.0
    w_c: float = 0.8
    w_d: float = 0.2
    revisit_min: int = 3
    revisit_basis: str = "observed"  # or "occupied": count steps the agent stood in the cell

    def __post_init__(self):
        if self.tau is not None and self.tau <= 0:
            raise ValueError("tau must be > 0")
        if self.eta <= 0:
            raise ValueError("eta must be > 0")
        if abs(self.w_c + self.w_d - 1.0) > 1e-12:
            raise ValueError("w_c + w_d must equal 1")
        if self.revisit_basis not in ("observed", "occupied"):
            raise ValueError("revisit_basis must be 'observed' or 'occupied'")

    def resolve_tau(self, open_footprint_size: Optional[float]) -> float:
        if self.tau is not None:
            return self.tau
        if open_footprint_size is None:
            raise ValueError("tau unset and no open-space footprint size given")
        return 0.25 * open_footprint_size


def success_rate(outcomes: Sequence[EpisodeOutcome]) -> Optional[float]:
    if not outcomes:
        return UNDEFINED
    return sum(1 for o in outcomes if o.success) / len(outcomes)


def spl_term(o: EpisodeOutcome) -> tuple[float, bool]:
    """One episode's SPL contribution and whether it needed the zero-geodesic rule."""
    if not o.success:
        return 0.0, False
    if o.geodesic <= 0.0:
        return (1.0 if o.path_length <= 0.0 else 0.0), True
    return o.geodesic / max(o.path_length, o.geodesic), False


def spl(outcomes: Sequence[EpisodeOutcome]) -> Optional[float]:
    if not outcomes:
        return UNDEFINED
    return math.fsum(spl_term(o)[0] for o in outcomes) / len(outcomes)


@dataclass(frozen=True)
class AoriBreakdown:
    r_overlap: float
    d_norm: float
    aori: float
    lambda_zero: bool = False  # some step had lambda_t == 0 and counted as 1


def aori_from_terms(r_overlap: float, d_norm: float, cfg: MetricsConfig = MetricsConfig()) -> float:
    return 1.0 - (cfg.w_c * (1.0 - r_overlap) ** 2 + cfg.w_d * (1.0 - d_norm))


def _as_cells(fp) -> np.ndarray:
    return np.asarray(getattr(fp, "cells", fp), dtype=np.int64)


def aori_breakdown(footprints: Sequence, map_size: int, cfg: MetricsConfig = MetricsConfig(),
                   open_footprint_size: Optional[float] = None,
                   agent_cells: Optional[Sequence[int]] = None) -> AoriBreakdown:
    """Revisit overlap, exploration density and their AORI combination for one episode.

    ``footprints[t]`` is the set of cells visible at step t+1. ``agent_cells`` is
    needed only for ``revisit_basis="occupied"``.
    """
    T = len(footprints)
    if T == 0:
        raise ValueError("AORI needs at least one footprint")
    tau = cfg.resolve_tau(open_footprint_size)
    cells = [_as_cells(fp) for fp in footprints]
    universe, inverse = np.unique(np.concatenate(cells), return_inverse=True)
    member = np.zeros((T, len(universe)), dtype=np.int64)
    offset = 0
    for t, c in enumerate(cells):
        member[t, inverse[offset:offset + len(c)]] = 1
        offset += len(c)

    if T >= 2:
        overlap = member @ member.T
        per_t = [np.count_nonzero(overlap[t, :t] >= tau) / t for t in range(1, T)]
        r_overlap = math.fsum(per_t) / (T - 1)
    else:
        r_overlap = 0.0

    seen = np.cumsum(member, axis=0)
    if cfg.revisit_basis == "occupied":
        if agent_cells is None or len(agent_cells) != T:
            raise ValueError("occupied revisit basis needs one agent cell per step")
        visits: dict[int, int] = {}
        n_obs = []
        for c in agent_cells:
            visits[c] = visits.get(c, 0) + 1
            n_obs.append(sum(1 for v in visits.values() if v >= cfg.revisit_min))
    else:
        n_obs = [int(np.count_nonzero(seen[t] >= cfg.revisit_min)) for t in range(T)]

    lambda_zero = False
    density = []
    for t in range(T):
        area = int(np.count_nonzero(seen[t] >= 1))
        lam = cfg.eta * (area / map_size**2) * (t + 1)
        if lam <= 0:
            lambda_zero = True
            density.append(1.0)
        else:
            density.append(min(1.0, n_obs[t] / lam))
    d_norm = math.fsum(density) / T
    return AoriBreakdown(r_overlap, d_norm, aori_from_terms(r_overlap, d_norm, cfg), lambda_zero)


def aori(footprints: Sequence, map_size: int, cfg: MetricsConfig = MetricsConfig(),
         open_footprint_size: Optional[float] = None) -> float:
    return aori_breakdown(footprints, map_size, cfg, open_footprint_size).aori


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else UNDEFINED


def disagreement_counts(traces: Iterable) -> tuple[int, int]:
    disagree = total = 0
    for tr in traces:
        for rnd in tr.rounds:
            total += 1
            disagree += rnd.disagree
    return disagree, total


def disagreement_rate(traces: Iterable) -> Optional[float]:
    """Share of debate rounds (over all steps) where TSU and SIB preferred different cards."""
    return _ratio(*disagreement_counts(traces))


def in_arbitration_set(debate, decision) -> bool:
    """Full-length debate, still split in the last round, with a judge decision."""
    return (
        decision is not None
        and len(debate.rounds) == debate.max_rounds
        and debate.rounds[-1].disagree
    )


def arbitration_counts(step_records: Iterable) -> tuple[int, int, int]:
    """(|A|, judge overrides of TSU, micro-probe triggers) over records with .debate/.decision."""
    size = overrides = probes = 0
    for rec in step_records:
        if rec.debate is None or not in_arbitration_set(rec.debate, rec.decision):
            continue
        size += 1
        overrides += rec.decision.chosen_id != rec.debate.final_tsu_id
        probes += bool(rec.decision.micro_probe)
    return size, overrides, probes


def judge_override_rate(step_records: Iterable) -> Optional[float]:
    size, overrides, _ = arbitration_counts(step_records)
    return _ratio(overrides, size)


def micro_probe_trigger_rate(step_records: Iterable) -> Optional[float]:
    size, _, probes = arbitration_counts(step_records)
    return _ratio(probes, size)


def fmt_pct(x: Optional[float]) -> str:
    return "n/a" if x is None else f"{100 * x:.1f}"


@dataclass
class MetricsReport:
    label: str
    sr: Optional[float]
    spl: Optional[float]
    aori: Optional[float]
    dr: Optional[float]
    jor: Optional[float]
    mptr: Optional[float]
    counts: dict[str, Any]
    config: dict[str, Any]
    per_episode: list[dict[str, Any]] = field(default_factory=list)
    delta_spl: Optional[float] = None
    baseline: Optional[str] = None

    @property
    def episode_names(self) -> list[str]:
        return [e["name"] for e in self.per_episode]

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(**d)

    def to_table(self) -> str:
        cfg = ", ".join(f"{k}={v}" for k, v in sorted(self.config.items()))
        head = f"# {self.label}  ({self.counts.get('episodes', 0)} episodes; {cfg})"
        cols = ["SR(%)", "SPL(%)", "AORI(%)", "DR(%)", "JOR(%)", "MPTR(%)", "dSPL"]
        dspl = "n/a" if self.delta_spl is None else f"{100 * self.delta_spl:+.1f}"
        vals = [fmt_pct(self.sr), fmt_pct(self.spl), fmt_pct(self.aori), fmt_pct(self.dr),
                fmt_pct(self.jor), fmt_pct(self.mptr), dspl]
        widths = [max(len(c), len(v)) for c, v in zip(cols, vals)]
        line1 = "  ".join(c.rjust(w) for c, w in zip(cols, widths))
        line2 = "  ".join(v.rjust(w) for v, w in zip(vals, widths))
        return f"{head}\n{line1}\n{line2}\n"


class MetricsAccumulator:
    """Single-pass evaluator over episode traces; keeps integer numerators/denominators.

    Episodes are folded in the order they are added, so the same order gives
    bit-identical results.
    """

    def __init__(self, cfg: MetricsConfig = MetricsConfig(), label: str = "run"):
        self.cfg = cfg
        self.label = label
        self.episodes = 0
        self.successes = 0
        self.spl_terms: list[float] = []
        self.aori_values: list[float] = []
        self.rounds_total = 0
        self.rounds_disagree = 0
        self.arb_size = 0
        self.arb_override = 0
        self.arb_probe = 0
        self.flags = {"spl_zero_geodesic": 0, "aori_lambda_zero": 0, "errors": 0}
        self.per_episode: list[dict[str, Any]] = []
        self.tau_used: set[float] = set()

    def add_step(self, debate, decision) -> None:
        if debate is None:
            return
        for rnd in debate.rounds:
            self.rounds_total += 1
            self.rounds_disagree += rnd.disagree
        if in_arbitration_set(debate, decision):
            self.arb_size += 1
            self.arb_override += decision.chosen_id != debate.final_tsu_id
            self.arb_probe += bool(decision.micro_probe)

    def add_outcome(self, name: str, outcome: EpisodeOutcome, footprints: Sequence, map_size: int,
                    open_footprint_size: Optional[float], agent_cells=None, error: Optional[str] = None) -> None:
        self.episodes += 1
        self.successes += bool(outcome.success)
        term, flagged = spl_term(outcome)
        self.spl_terms.append(term)
        self.flags["spl_zero_geodesic"] += flagged
        entry: dict[str, Any] = {"name": name, **outcome.to_dict(), "spl": term, "error": error}
        if footprints:
            br = aori_breakdown(footprints, map_size, self.cfg, open_footprint_size, agent_cells)
            self.aori_values.append(br.aori)
            self.flags["aori_lambda_zero"] += br.lambda_zero
            self.tau_used.add(self.cfg.resolve_tau(open_footprint_size))
            entry.update(aori=br.aori, r_overlap=br.r_overlap, d_norm=br.d_norm)
        if error:
            self.flags["errors"] += 1
        self.per_episode.append(entry)

    def add_trace(self, trace) -> None:
        """Fold in an :class:`~dscd_nav.runner.EpisodeTrace`."""
        for rec in trace.steps:
            self.add_step(rec.debate, rec.decision)
        self.add_outcome(
            trace.scenario, trace.outcome, [rec.footprint for rec in trace.steps], trace.map_size,
            trace.open_footprint_size, [rec.agent_cell for rec in trace.steps], trace.error,
        )

    def report(self) -> MetricsReport:
        n = self.episodes
        cfg = asdict(self.cfg)
        if self.cfg.tau is None and self.tau_used:
            cfg["tau"] = sorted(self.tau_used)[0] if len(self.tau_used) == 1 else sorted(self.tau_used)
        return MetricsReport(
            label=self.label,
            sr=_ratio(self.successes, n),
            spl=math.fsum(self.spl_terms) / n if n else UNDEFINED,
            aori=math.fsum(self.aori_values) / len(self.aori_values) if self.aori_values else UNDEFINED,
            dr=_ratio(self.rounds_disagree, self.rounds_total),
            jor=_ratio(self.arb_override, self.arb_size),
            mptr=_ratio(self.arb_probe, self.arb_size),
            counts={
                "episodes": n,
                "successes": self.successes,
                "rounds": self.rounds_total,
                "rounds_disagree": self.rounds_disagree,
                "arbitration_set": self.arb_size,
                "judge_overrides": self.arb_override,
                "probes_in_set": self.arb_probe,
                **self.flags,
            },
            config=cfg,
            per_episode=list(self.per_episode),
        )


def evaluate(traces: Iterable, cfg: MetricsConfig = MetricsConfig(), label: str = "run") -> MetricsReport:
    acc = MetricsAccumulator(cfg, label)
    for tr in traces:
        acc.add_trace(tr)
    return acc.report()


def delta_spl(report: MetricsReport, baseline: MetricsReport) -> float:
    """SPL difference against a baseline run over the same scenario set."""
    if sorted(report.episode_names) != sorted(baseline.episode_names):
        raise ValueError("reports cover different scenario suites")
    if report.spl is None or baseline.spl is None:
        raise ValueError("SPL undefined for an empty suite")
    return report.spl - baseline.spl


def with_baseline(report: MetricsReport, baseline: MetricsReport) -> MetricsReport:
    report.delta_spl = delta_spl(report, baseline)
    report.baseline = baseline.label
    return report
