import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from conftest import boxed, make_scenario
from dscd_nav.execution import decide_from_arbitration
from dscd_nav.geometry import ContextPacket
from dscd_nav.policies import Arbitration, HeuristicWeights
from dscd_nav.runner import (
    EpisodeTrace,
    RunConfig,
    apply_variant,
    load_config,
    load_suite,
    run_episode,
    run_suite,
    run_traces,
)
from dscd_nav.scenario_io import load_scenario

DATA = Path(__file__).parent / "data"


def trivial(name="trivial"):
    return make_scenario(boxed(20, 20), (5, 5), (8, 5), cell_size=0.1, name=name)


def sealed():
    occ = boxed(40, 40)
    occ[25:32, 25] = occ[25:32, 31] = True
    occ[25, 25:32] = occ[31, 25:32] = True
    return make_scenario(occ, (5, 5), (28, 28), name="sealed")


def test_trivial_scenario_stops_immediately():
    tr = run_episode(RunConfig(), trivial())
    assert tr.outcome.success and tr.outcome.steps == 1
    assert tr.outcome.path_length == 0.0
    assert tr.steps[0].decision.chosen_id == "stop"


def test_sealed_target_exhausts_budget():
    tr = run_episode(RunConfig(), sealed())
    assert not tr.outcome.success
    assert tr.outcome.steps == 40 and len(tr.steps) == 40
    assert tr.outcome.geodesic == math.inf


def test_dead_end_trap_needs_both_stances():
    scn = load_scenario(DATA / "dead_end_trap.map")
    full = run_episode(RunConfig(), scn)
    tsu_only = run_episode(apply_variant(RunConfig(), "tsu-only"), scn)
    assert full.outcome.success
    assert not tsu_only.outcome.success


def test_episode_deterministic_and_roundtrips():
    scn = load_scenario(DATA / "dead_end_trap.map")
    a = run_episode(RunConfig(), scn).to_jsonl()
    b = run_episode(RunConfig(), scn).to_jsonl()
    assert a == b
    assert EpisodeTrace.from_jsonl(a).to_jsonl() == a


def test_path_length_is_sum_of_segments():
    tr = run_episode(RunConfig(), load_scenario(DATA / "dead_end_trap.map"))
    assert abs(tr.outcome.path_length - math.fsum(r.moved for r in tr.steps)) <= 1e-9
    pts = tr.path_points()
    seg = math.fsum(math.dist(p, q) for p, q in zip(pts, pts[1:]))
    assert abs(seg - tr.outcome.path_length) <= 1e-9


def test_logged_decisions_replay():
    cfg = RunConfig()
    tr = run_episode(cfg, load_scenario(DATA / "dead_end_trap.map"))
    tr = EpisodeTrace.from_jsonl(tr.to_jsonl())
    for rec in tr.steps:
        d = rec.decision
        ctx = ContextPacket("chair", rec.cards)
        arb = Arbitration(d.chosen_id, d.why, d.evidence, d.nca_fallback)
        assert decide_from_arbitration(ctx, rec.debate, arb, cfg.execution) == d


def test_ablation_identity_with_silent_sib():
    """w_i = 0 and gamma = 0 make SIB always agree, so the run equals TSU-only."""
    scn = load_scenario(DATA / "dead_end_trap.map")
    silent = RunConfig(weights=HeuristicWeights(gamma=0.0, w_i=0.0))
    a = run_episode(silent, scn)
    b = run_episode(apply_variant(RunConfig(), "tsu-only"), scn)
    assert [r.decision.to_dict() for r in a.steps] == [r.decision.to_dict() for r in b.steps]
    assert all(r.debate.consensus and len(r.debate.rounds) == 1 for r in a.steps)


def test_no_probe_variant_never_probes():
    suite = load_suite("scenarios/acceptance")[:6]
    traces = run_traces(apply_variant(RunConfig(), "no-probe"), suite)
    assert not any(r.decision.micro_probe for tr in traces for r in tr.steps if r.decision)


def test_suite_of_trivial_scenarios(tmp_path):
    suite = [trivial(f"t{i}") for i in range(4)]
    rep = run_suite(RunConfig(), suite, tmp_path / "a")
    rep2 = run_suite(RunConfig(), suite, tmp_path / "b")
    assert rep.sr == 1.0
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
    assert len(list((tmp_path / "a").glob("*.jsonl"))) == 4


def test_protocol_violation_marks_episode_failed(tmp_path):
    script = tmp_path / "tsu.jsonl"
    script.write_text('{"k":1,"tsu":{"id":"c99","why":"","evidence":[]},'
                      '"sib":{"dec":"agree","id":null,"why":"","evidence":[]}}\n')
    cfg = RunConfig(policies={"tsu": f"scripted:{script}", "sib": "heuristic", "nca": "heuristic"})
    tr = run_episode(cfg, load_scenario(DATA / "dead_end_trap.map"))
    assert not tr.outcome.success
    assert "ProtocolViolation" in tr.error and "c99" in tr.error
    assert len(tr.steps) == 1


def test_config_roundtrip_and_digest(tmp_path):
    cfg = RunConfig(rounds=2, weights=HeuristicWeights(gamma=0.7), seed=5, label="x")
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    back = load_config(path)
    assert back == cfg and back.digest() == cfg.digest()
    assert replace(cfg, workers=8).digest() == cfg.digest()
    assert replace(cfg, seed=6).digest() != cfg.digest()


@pytest.mark.parametrize("bad", [dict(rounds=0), dict(variant="nope"), dict(workers=0),
                                 dict(policies={"tsu": "scripted:/no/such/file"}),
                                 dict(policies={"sib": "remote:missing"})])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        RunConfig(**bad)


def test_unknown_config_key(tmp_path):
    with pytest.raises(ValueError, match="unknown config keys"):
        RunConfig.from_dict({"roundz": 3})


def test_apply_variant_rounds():
    cfg = apply_variant(RunConfig(), "rounds=4")
    assert cfg.rounds == 4 and cfg.variant == "full" and cfg.name == "rounds=4"


def test_episode_seed_offsets_by_index():
    scn = load_scenario(DATA / "dead_end_trap.map")
    a = run_episode(RunConfig(seed=3), scn, episode_index=0)
    b = run_episode(RunConfig(seed=0), scn, episode_index=3)
    assert a.header["episode_seed"] == b.header["episode_seed"] == 3
    assert [r.cards for r in a.steps] == [r.cards for r in b.steps]
