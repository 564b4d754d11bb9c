"""Episode orchestration, trace persistence and batch experiments.

Trace files are JSONL: a header line (scenario, map, config and its digest),
one line per step, and a closing outcome line. Nothing time- or
machine-dependent is written, so identical configs give identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from . import env as sim
from .debate import DebateTrace, ProtocolViolation, run_debate
from .env import GridConfig, OccupancyGrid, Scenario, VisibilityFootprint
from .execution import ExecutionConfig, StepDecision, decide_step
from .geometry import CandidateCard, ContextPacket, PolarAction, Pose, package_candidates, wrap_angle
from .metrics import EpisodeOutcome, MetricsAccumulator, MetricsConfig, MetricsReport
from .policies.base import EnvView
from .policies.heuristic import HeuristicNCA, HeuristicSIB, HeuristicTSU, HeuristicWeights, SibProposer, TsuAdopter
from .policies.remote import BackendError, RemoteBackendConfig, RemotePolicy
from .policies.scripted import ScriptedNCA, ScriptedSIB, ScriptedTSU
from .scenario_io import format_scenario, load_scenario, parse_scenario

VARIANTS = ("full", "tsu-only", "sib-only", "no-probe", "no-nca")
TRACE_VERSION = 1


@dataclass(frozen=True)
class RunConfig:
    rounds: int = 3
    execution: ExecutionConfig = field(default_factory=ExecutionConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    weights: HeuristicWeights = field(default_factory=HeuristicWeights)
    policies: dict[str, str] = field(default_factory=lambda: {"tsu": "heuristic", "sib": "heuristic", "nca": "heuristic"})
    variant: str = "full"
    remote: dict[str, RemoteBackendConfig] = field(default_factory=dict)
    seed: int = 0
    label: str = ""
    # Execution-only settings; excluded from the digest and from traces.
    workers: int = 1
    output_dir: Optional[str] = None

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        for role in ("tsu", "sib", "nca"):
            policy = self.policies.get(role, "heuristic")
            kind = policy.split(":", 1)[0]
            if kind not in ("heuristic", "scripted", "remote"):
                raise ValueError(f"{role}: unknown policy {policy!r}")
            if kind == "scripted" and not Path(policy.split(":", 1)[1]).exists():
                raise ValueError(f"{role}: script {policy.split(':', 1)[1]!r} not found")
            if kind == "remote" and policy.split(":", 1)[1] not in self.remote:
                raise ValueError(f"{role}: no remote backend named {policy.split(':', 1)[1]!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def name(self) -> str:
        return self.label or (self.variant if self.rounds == 3 else f"{self.variant}-rounds{self.rounds}")

    def to_dict(self, include_runtime: bool = True) -> dict[str, Any]:
        d = {
            "rounds": self.rounds,
            "execution": asdict(self.execution),
            "grid": asdict(self.grid),
            "metrics": asdict(self.metrics),
            "weights": asdict(self.weights),
            "policies": dict(sorted(self.policies.items())),
            "variant": self.variant,
            "remote": {k: v.to_dict() for k, v in sorted(self.remote.items())},
            "seed": self.seed,
            "label": self.label,
        }
        d["grid"]["forward_range"] = list(self.grid.forward_range)
        if include_runtime:
            d.update(workers=self.workers, output_dir=self.output_dir)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "execution" in d:
            d["execution"] = ExecutionConfig(**d["execution"])
        if "grid" in d:
            g = dict(d["grid"])
            if "forward_range" in g:
                g["forward_range"] = tuple(g["forward_range"])
            d["grid"] = GridConfig(**g)
        if "metrics" in d:
            d["metrics"] = MetricsConfig(**d["metrics"])
        if "weights" in d:
            d["weights"] = HeuristicWeights().updated(**d["weights"])
        if "remote" in d:
            d["remote"] = {k: RemoteBackendConfig(**v) for k, v in d["remote"].items()}
        if "policies" in d:
            d["policies"] = {"tsu": "heuristic", "sib": "heuristic", "nca": "heuristic", **d["policies"]}
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(include_runtime=False), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(path) -> RunConfig:
    return RunConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def apply_variant(cfg: RunConfig, variant: str) -> RunConfig:
    """Parse an ablation row name such as ``tsu-only`` or ``rounds=2``."""
    if variant.startswith("rounds="):
        k = int(variant.split("=", 1)[1])
        return replace(cfg, rounds=k, variant="full", label=variant)
    return replace(cfg, variant=variant, label=variant)


@dataclass
class StepRecord:
    step: int
    pose: Pose
    cards: tuple[CandidateCard, ...]
    debate: Optional[DebateTrace]
    decision: Optional[StepDecision]
    footprint: VisibilityFootprint
    agent_cell: int
    moved: float = 0.0
    collision: bool = False
    recovery: bool = False
    backend_fallback: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "type": "step",
            "t": self.step,
            "pose": [self.pose.x, self.pose.y, self.pose.heading],
            "cards": [c.to_dict() for c in self.cards],
            "debate": None if self.debate is None else self.debate.to_dict(),
            "decision": None if self.decision is None else self.decision.to_dict(),
            "footprint": self.footprint.cells.tolist(),
            "agent_cell": self.agent_cell,
            "moved": self.moved,
            "collision": self.collision,
            "recovery": self.recovery,
            "backend_fallback": self.backend_fallback,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StepRecord":
        return cls(
            step=d["t"],
            pose=Pose(*d["pose"]),
            cards=tuple(CandidateCard.from_dict(c) for c in d["cards"]),
            debate=None if d["debate"] is None else DebateTrace.from_dict(d["debate"]),
            decision=None if d["decision"] is None else StepDecision.from_dict(d["decision"]),
            footprint=VisibilityFootprint(d["t"], np.asarray(d["footprint"], dtype=np.int64)),
            agent_cell=d["agent_cell"],
            moved=d["moved"],
            collision=d["collision"],
            recovery=d.get("recovery", False),
            backend_fallback=d["backend_fallback"],
        )


@dataclass
class EpisodeTrace:
    scenario: str
    header: dict[str, Any]
    steps: list[StepRecord]
    outcome: EpisodeOutcome
    error: Optional[str] = None

    @property
    def map_size(self) -> int:
        return self.header["map_size"]

    @property
    def open_footprint_size(self) -> float:
        return self.header["open_footprint_size"]

    @property
    def config_digest(self) -> str:
        return self.header["config_digest"]

    def scenario_object(self) -> Scenario:
        return parse_scenario(self.header["scenario_text"])

    def path_points(self) -> list[tuple[float, float]]:
        pts = [(rec.pose.x, rec.pose.y) for rec in self.steps]
        if self.steps:
            last = self.steps[-1]
            if last.decision is not None and last.moved > 0:
                h = wrap_angle(last.pose.heading + last.decision.exec.theta)
                pts.append((last.pose.x + last.moved * math.cos(h), last.pose.y + last.moved * math.sin(h)))
        return pts

    def to_jsonl(self) -> str:
        out = [json.dumps({"type": "header", **self.header}, ensure_ascii=False, separators=(",", ":"))]
        out += [json.dumps(rec.to_dict(), ensure_ascii=False, separators=(",", ":")) for rec in self.steps]
        out.append(json.dumps({"type": "outcome", **self.outcome.to_dict(), "error": self.error},
                              ensure_ascii=False, separators=(",", ":")))
        return "\n".join(out) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "EpisodeTrace":
        header, steps, outcome, error = None, [], None, None
        for ln in text.split("\n"):
            if not ln.strip():
                continue
            d = json.loads(ln)
            kind = d.pop("type")
            if kind == "header":
                header = d
            elif kind == "step":
                d["type"] = kind
                steps.append(StepRecord.from_dict(d))
            elif kind == "outcome":
                error = d.pop("error", None)
                outcome = EpisodeOutcome.from_dict(d)
        if header is None or outcome is None:
            raise ValueError("trace lacks a header or outcome line")
        return cls(header["scenario"], header, steps, outcome, error)

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_jsonl(), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "EpisodeTrace":
        return cls.from_jsonl(Path(path).read_text(encoding="utf-8"))


def _remote(cfg: RunConfig, policy: str, role: str, fallback):
    return RemotePolicy(role, cfg.remote[policy.split(":", 1)[1]], fallback=fallback)


def build_policies(cfg: RunConfig):
    """Instantiate fresh (TSU, SIB, NCA) policies for one episode."""
    w = cfg.weights
    if cfg.variant == "tsu-only":
        sib_w = replace(w, gamma=0.0, w_i=0.0)
    elif cfg.variant == "sib-only":
        sib_w = replace(w, gamma=0.0)
    else:
        sib_w = w
    tsu_default = SibProposer(w) if cfg.variant == "sib-only" else HeuristicTSU(w)
    sib_default = HeuristicSIB(sib_w)
    nca_default = TsuAdopter() if cfg.variant == "no-nca" else HeuristicNCA(w)

    made = []
    for role, default, scripted in (("tsu", tsu_default, ScriptedTSU), ("sib", sib_default, ScriptedSIB),
                                    ("nca", nca_default, ScriptedNCA)):
        policy = cfg.policies.get(role, "heuristic")
        kind, _, arg = policy.partition(":")
        if kind == "heuristic":
            made.append(default)
        elif kind == "scripted":
            made.append(scripted.from_file(arg))
        else:
            made.append(_remote(cfg, policy, role.upper(), default if cfg.remote[arg].fallback else None))
    return tuple(made)


def build_view(pose: Pose, cards: Sequence[CandidateCard], scn: Scenario, gcfg: GridConfig,
               seen: np.ndarray, target_in_view: bool, weights: HeuristicWeights, noise: float,
               sketch: bool = False) -> EnvView:
    grid = scn.grid
    tx, ty = scn.target
    true_bearing = math.atan2(ty - pose.y, tx - pose.x) - pose.heading
    bearing = wrap_angle(true_bearing + weights.goal_bias + weights.goal_noise * noise)
    dist = math.hypot(tx - pose.x, ty - pose.y)
    clearance, new_area = {}, {}
    for c in cards:
        if c.is_stop:
            clearance[c.id] = math.inf
            new_area[c.id] = 0
            continue
        h = wrap_angle(pose.heading + c.action.theta)
        end = Pose(pose.x + c.action.r * math.cos(h), pose.y + c.action.r * math.sin(h), h)
        ix, iy = grid.world_to_cell(end.x, end.y)
        clearance[c.id] = float(grid.obstacle_distance[iy, ix]) if grid.in_bounds(ix, iy) else 0.0
        fp = sim.visible_cells(end, grid, gcfg)
        new_area[c.id] = int(np.count_nonzero(~seen[fp.cells]))
    return EnvView(
        goal_bearing=bearing,
        goal_distance=dist if target_in_view else None,
        stop_ready=target_in_view and dist <= gcfg.success_radius,
        clearance=clearance,
        new_area=new_area,
        r_max=gcfg.forward_range[1],
        local_sketch=sim.local_sketch(pose, grid, seen, scn.target if target_in_view else None) if sketch else "",
    )


def _header(cfg: RunConfig, scn: Scenario, gcfg: GridConfig, episode_seed: int) -> dict[str, Any]:
    return {
        "version": TRACE_VERSION,
        "scenario": scn.name,
        "episode_seed": episode_seed,
        "config_digest": cfg.digest(),
        "config": cfg.to_dict(include_runtime=False),
        "map_size": gcfg.map_size,
        "cell_size": gcfg.cell_size,
        "open_footprint_size": gcfg.open_footprint_size,
        "target": list(scn.target),
        "target_category": scn.target_category,
        "scenario_text": format_scenario(scn),
    }


def step_rng(episode_seed: int, t: int) -> np.random.Generator:
    """Independent stream per step, so ablation variants see the same draws at the same step."""
    return np.random.default_rng([episode_seed, t])


def run_episode(cfg: RunConfig, scn: Scenario, episode_index: int = 0) -> EpisodeTrace:
    """Run one episode until Stop, an error, or the step budget.

    The episode seed is ``cfg.seed + episode_index``.
    """
    episode_seed = cfg.seed + episode_index
    grid = scn.grid
    gcfg = cfg.grid.for_grid(grid)
    tsu, sib, nca = build_policies(cfg)
    ecfg = replace(cfg.execution, probing=False) if cfg.variant == "no-probe" else cfg.execution
    seen = np.zeros(grid.height * grid.width, dtype=bool)
    tix, tiy = scn.target_cell
    target_flat = grid.flat_index(tix, tiy)
    goal = scn.target_category
    sketch = any(isinstance(p, RemotePolicy) for p in (tsu, sib, nca))

    pose = scn.start
    steps: list[StepRecord] = []
    path = 0.0
    success = False
    error = None
    for t in range(gcfg.max_steps):
        fp = sim.visible_cells(pose, grid, gcfg, step=t)
        seen[fp.cells] = True
        in_view = target_flat in fp
        rng = step_rng(episode_seed, t)
        actions = sim.generate_candidates(pose, grid, gcfg, rng)
        # No two in-place turns in a row unless boxed in; a greedy stance would spin.
        if not actions or not steps or steps[-1].moved > 0:
            actions += sim.rotate_actions(gcfg)
        recovery = not actions
        if recovery:
            actions = [PolarAction(0.0, 2 * gcfg.rotation_step)]
        cards = tuple(package_candidates(actions, stop_allowed=in_view))
        ctx = ContextPacket(goal, cards, scn.evidence_cues)
        view = build_view(pose, cards, scn, gcfg, seen, in_view, cfg.weights, float(rng.standard_normal()),
                          sketch)
        ax, ay = grid.world_to_cell(pose.x, pose.y)
        rec = StepRecord(t, pose, cards, None, None, fp, grid.flat_index(ax, ay), recovery=recovery)
        steps.append(rec)
        for p in (tsu, sib, nca):
            p.begin_step(t)
        try:
            rec.debate = run_debate(ctx, tsu, sib, cfg.rounds, view)
            rec.decision = decide_step(ctx, rec.debate, nca, ecfg)
        except (ProtocolViolation, BackendError) as exc:
            error = f"{type(exc).__name__}: {exc}"
            break
        finally:
            rec.backend_fallback = any(getattr(p, "backend_fallback", False) for p in (tsu, sib, nca))
        if ctx.card(rec.decision.chosen_id).is_stop:
            success = sim.check_success(pose, scn.target, grid, gcfg)
            break
        res = sim.step(pose, rec.decision.exec, grid, gcfg)
        rec.moved, rec.collision = res.moved, res.collision
        path += res.moved
        pose = res.pose

    try:
        geodesic = sim.geodesic_distance((scn.start.x, scn.start.y), scn.target, grid)
    except ValueError:
        geodesic = math.inf
    outcome = EpisodeOutcome(success and error is None, geodesic, float(path), len(steps))
    return EpisodeTrace(scn.name, _header(cfg, scn, gcfg, episode_seed), steps, outcome, error)


def _run_one(args) -> str:
    cfg, scn, i = args
    return run_episode(cfg, scn, i).to_jsonl()


def run_traces(cfg: RunConfig, scenarios: Sequence[Scenario]) -> list[EpisodeTrace]:
    names = [s.name for s in scenarios]
    if len(set(names)) != len(names):
        raise ValueError("scenario names must be unique within a suite")
    jobs = [(cfg, s, i) for i, s in enumerate(scenarios)]
    if cfg.workers > 1 and len(jobs) > 1:
        uses_remote = any(v.startswith("remote:") for v in cfg.policies.values())
        pool_cls = ThreadPoolExecutor if uses_remote else ProcessPoolExecutor
        with pool_cls(max_workers=cfg.workers) as pool:
            texts = list(pool.map(_run_one, jobs, chunksize=1) if pool_cls is ThreadPoolExecutor
                         else pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * cfg.workers))))
    else:
        texts = [_run_one(j) for j in jobs]
    # Parse back so in-process and pooled runs hand out identical objects.
    return [EpisodeTrace.from_jsonl(t) for t in texts]


def report_for(traces: Iterable[EpisodeTrace], cfg: RunConfig) -> MetricsReport:
    acc = MetricsAccumulator(cfg.metrics, cfg.name)
    for tr in traces:
        acc.add_trace(tr)
    return acc.report()


def run_suite(cfg: RunConfig, scenarios: Sequence[Scenario], out_dir=None) -> MetricsReport:
    """Run every scenario, persist one trace per episode, and aggregate a report."""
    if not scenarios:
        raise ValueError("empty scenario suite")
    traces = run_traces(cfg, scenarios)
    report = report_for(traces, cfg)
    out = out_dir if out_dir is not None else cfg.output_dir
    if out is not None:
        write_run(Path(out), traces, report)
    return report


def write_run(out: Path, traces: Sequence[EpisodeTrace], report: MetricsReport) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for tr in traces:
        tr.save(out / f"{tr.scenario}.jsonl")
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "report.txt").write_text(report.to_table(), encoding="utf-8")


def load_suite(directory) -> list[Scenario]:
    paths = sorted(Path(directory).glob("*.map"))
    if not paths:
        raise FileNotFoundError(f"no *.map scenarios in {directory}")
    return [load_scenario(p) for p in paths]


def run_ablation(cfg: RunConfig, scenarios: Sequence[Scenario], variants: Sequence[str],
                 out_dir=None) -> dict[str, MetricsReport]:
    reports = {}
    for v in variants:
        vcfg = apply_variant(cfg, v)
        sub = None if out_dir is None else Path(out_dir) / v
        reports[v] = run_suite(vcfg, scenarios, sub)
    return reports


BETA_R_GRID = (1 / 3, 1 / 2, 2 / 3)
BETA_THETA_GRID = (1 / 4, 1 / 3, 1 / 2)


def sweep_beta(cfg: RunConfig, scenarios: Sequence[Scenario], beta_rs=BETA_R_GRID,
               beta_thetas=BETA_THETA_GRID, step_cap: int = 20, out_dir=None) -> list[tuple[float, float, MetricsReport]]:
    """Micro-probe sensitivity: one suite run per (beta_r, beta_theta) under a step cap."""
    rows = []
    for br in beta_rs:
        for bt in beta_thetas:
            label = f"beta_r={br:.2f},beta_theta={bt:.2f}"
            vcfg = replace(
                cfg,
                execution=replace(cfg.execution, beta_r=br, beta_theta=bt),
                grid=replace(cfg.grid, max_steps=step_cap),
                label=label,
            )
            sub = None if out_dir is None else Path(out_dir) / label.replace(",", "_")
            rows.append((br, bt, run_suite(vcfg, scenarios, sub)))
    return rows


def format_sweep(rows: Sequence[tuple[float, float, MetricsReport]]) -> str:
    lines = [f"{'beta_r':>7}  {'beta_th':>7}  {'SR(%)':>6}  {'SPL(%)':>6}  {'MPTR(%)':>7}"]
    for br, bt, rep in rows:
        mptr = "n/a" if rep.mptr is None else f"{100 * rep.mptr:.1f}"
        lines.append(f"{br:7.2f}  {bt:7.2f}  {100 * rep.sr:6.1f}  {100 * rep.spl:6.1f}  {mptr:>7}")
    srs = [rep.sr for _, _, rep in rows]
    lines.append(f"SR spread (max-min): {100 * (max(srs) - min(srs)):.1f} points")
    return "\n".join(lines) + "\n"


def format_ablation(reports: dict[str, MetricsReport]) -> str:
    from .metrics import fmt_pct

    lines = [f"{'config':<14} {'SR(%)':>6} {'SPL(%)':>6} {'AORI(%)':>7} {'DR(%)':>6} {'JOR(%)':>6} {'MPTR(%)':>7}"]
    for name, r in reports.items():
        lines.append(f"{name:<14} {fmt_pct(r.sr):>6} {fmt_pct(r.spl):>6} {fmt_pct(r.aori):>7} "
                     f"{fmt_pct(r.dr):>6} {fmt_pct(r.jor):>6} {fmt_pct(r.mptr):>7}")
    return "\n".join(lines) + "\n"
