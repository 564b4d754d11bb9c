import json
import math
from dataclasses import fields

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dscd_nav.debate import (
    DebateRound,
    DebateTrace,
    Decision,
    EvidenceItem,
    Relation,
    SibResponse,
    StanceProposal,
    run_debate,
)
from dscd_nav.geometry import ContextPacket, PolarAction, package_candidates
from dscd_nav.policies import (
    BackendError,
    EnvView,
    HeuristicNCA,
    HeuristicSIB,
    HeuristicTSU,
    HeuristicWeights,
    RemoteBackendConfig,
    RemotePolicy,
)
from dscd_nav.policies.remote import RateLimiter, render_prompt


def cards_at(*deg, r=1.0):
    return package_candidates([PolarAction(r, math.radians(d)) for d in deg])


def ctx_at(*deg, r=1.0):
    return ContextPacket("chair", cards_at(*deg, r=r))


def flat_view(ctx, bearing_deg=0.0, **kw):
    ids = [c.id for c in ctx.cards]
    kw.setdefault("clearance", {i: 5.0 for i in ids})
    kw.setdefault("new_area", {i: 10 for i in ids})
    return EnvView(math.radians(bearing_deg), **kw)


# --- TSU -----------------------------------------------------------------


def test_tsu_goal_dead_ahead():
    ctx = ctx_at(-30, 0, 30)
    assert HeuristicTSU().propose(ctx, flat_view(ctx), ()).candidate_id == "c1"


def test_tsu_goal_left_picks_closest_bearing():
    ctx = ctx_at(-48, -24, 0, 24, 48, 54)
    assert HeuristicTSU().propose(ctx, flat_view(ctx, 60), ()).candidate_id == "c5"


def test_tsu_concedes_after_attack():
    ctx = ctx_at(-30, 0, 30)
    view = flat_view(ctx, 5)
    tsu = HeuristicTSU(HeuristicWeights(delta_att=2.0))
    first = tsu.propose(ctx, view, ())
    assert first.candidate_id == "c1"
    attack = SibResponse(Decision.COUNTER, "c0", "", (EvidenceItem("close to wall", Relation.ATTACKS, "c1"),))
    second = tsu.propose(ctx, view, (DebateRound(1, first, attack),))
    # second-best by goal alignment: +30° is closer to +5° than -30°
    assert second.candidate_id == "c2"
    assert tsu.belief["c1"] == pytest.approx(math.cos(math.radians(5)) + 0.2 / 1.5 - 2.0)


def test_tsu_evidence_progress_on_unit_scale():
    ctx = ctx_at(-60, 0, 60, r=1.5)
    prop = HeuristicTSU().propose(ctx, flat_view(ctx), ())
    assert prop.evidence[0].metrics["progress"] == pytest.approx(1.0)


def test_tsu_stops_when_ready():
    ctx = ContextPacket("chair", package_candidates([PolarAction(1.0, 0.0)], stop_allowed=True))
    prop = HeuristicTSU().propose(ctx, flat_view(ctx, stop_ready=True), ())
    assert prop.candidate_id == "stop"


# --- SIB -----------------------------------------------------------------


def test_sib_agrees_with_best_candidate():
    ctx = ctx_at(-30, 0, 30)
    view = flat_view(ctx, clearance={"c0": 1, "c1": 5, "c2": 1}, new_area={"c0": 3, "c1": 9, "c2": 3})
    assert HeuristicSIB().respond(ctx, view, "c1", ()).agrees


def test_sib_counters_wall_hugging_pick():
    ctx = ctx_at(0, 30, r=1.4)
    view = flat_view(ctx, clearance={"c0": 0.45, "c1": 3.0}, new_area={"c0": 10, "c1": 10})
    resp = HeuristicSIB().respond(ctx, view, "c0", ())
    # s(c0) = 0.6 * 0.45/1.4 + 0.4 = 0.593 < 0.8 * 1.0
    assert resp.decision is Decision.COUNTER and resp.candidate_id == "c1"
    attack = [e for e in resp.evidence if e.relation is Relation.ATTACKS]
    assert attack[0].about == "c0" and "clearance ratio 0.32" in attack[0].text


@given(st.lists(st.floats(0, 10), min_size=3, max_size=3), st.lists(st.integers(0, 50), min_size=3, max_size=3),
       st.integers(0, 2))
def test_sib_gamma_zero_always_agrees(cl, na, pick):
    ctx = ctx_at(-30, 0, 30)
    ids = ["c0", "c1", "c2"]
    view = flat_view(ctx, clearance=dict(zip(ids, cl)), new_area=dict(zip(ids, na)))
    assert HeuristicSIB(HeuristicWeights(gamma=0.0)).respond(ctx, view, ids[pick], ()).agrees


# --- NCA -----------------------------------------------------------------


def disputed(tsu_metrics, sib_metrics, tsu="c0", sib="c1"):
    return DebateTrace((DebateRound(
        1,
        StanceProposal(tsu, "t", (EvidenceItem("t", Relation.SUPPORTS, tsu, tsu_metrics),)),
        SibResponse(Decision.COUNTER, sib, "s", (EvidenceItem("s", Relation.SUPPORTS, sib, sib_metrics),)),
    ),), 1)


def test_nca_consensus_passthrough():
    trace = DebateTrace((DebateRound(1, StanceProposal("c1"), SibResponse(Decision.AGREE)),), 3)
    assert HeuristicNCA().arbitrate("chair", cards_at(0, 10), trace).candidate_id == "c1"


def test_nca_progress_dominant_tsu_wins():
    trace = disputed({"progress": 0.9, "safety": 0.8, "info": 0.5}, {"progress": 0.4, "safety": 0.8, "info": 0.5})
    arb = HeuristicNCA().arbitrate("chair", cards_at(0, 10), trace)
    assert arb.candidate_id == "c0" and not arb.fallback


def test_nca_exact_tie_goes_to_tsu():
    m = {"progress": 0.5, "safety": 0.5, "info": 0.5}
    assert HeuristicNCA().arbitrate("chair", cards_at(0, 10), disputed(m, dict(m))).candidate_id == "c0"


def test_nca_sib_wins_when_better():
    trace = disputed({"progress": 0.5, "safety": 0.1, "info": 0.0}, {"progress": 0.5, "safety": 1.0, "info": 1.0})
    assert HeuristicNCA().arbitrate("chair", cards_at(0, 10), trace).candidate_id == "c1"


def test_nca_missing_metadata_falls_back():
    trace = disputed({"progress": 0.2}, {"progress": 0.9, "safety": 1.0, "info": 1.0})
    arb = HeuristicNCA().arbitrate("chair", cards_at(0, 10), trace)
    assert arb.candidate_id == "c0" and arb.fallback and arb.why.startswith("fallback")


# --- properties ----------------------------------------------------------


@given(st.floats(0.1, 10), st.floats(-180, 180), st.lists(st.floats(0, 4), min_size=5, max_size=5),
       st.lists(st.integers(0, 40), min_size=5, max_size=5), st.integers(0, 4))
def test_argmax_invariant_under_weight_scaling(lam, bearing, cl, na, pick):
    ctx = ctx_at(-48, -24, 0, 24, 48)
    ids = list(ctx.ids)
    view = flat_view(ctx, bearing, clearance=dict(zip(ids, cl)), new_area=dict(zip(ids, na)))
    base = HeuristicWeights()
    scaled = base.updated(**{f.name: getattr(base, f.name) * lam for f in fields(base)
                             if f.name not in ("gamma", "goal_bias", "goal_noise")})
    a = run_debate(ctx, HeuristicTSU(base), HeuristicSIB(base), K=3, view=view)
    b = run_debate(ctx, HeuristicTSU(scaled), HeuristicSIB(scaled), K=3, view=view)
    assert [(r.tsu.candidate_id, r.sib.decision, r.sib.candidate_id) for r in a.rounds] == \
           [(r.tsu.candidate_id, r.sib.decision, r.sib.candidate_id) for r in b.rounds]
    arb_a = HeuristicNCA(base).arbitrate("chair", ctx.cards, a)
    arb_b = HeuristicNCA(scaled).arbitrate("chair", ctx.cards, b)
    assert arb_a.candidate_id == arb_b.candidate_id


def test_heuristics_deterministic():
    ctx = ctx_at(-30, 0, 30)
    view = flat_view(ctx, 20, clearance={"c0": 2, "c1": 0.3, "c2": 1}, new_area={"c0": 3, "c1": 9, "c2": 3})
    runs = [run_debate(ctx, HeuristicTSU(), HeuristicSIB(), 3, view).to_jsonl() for _ in range(3)]
    assert len(set(runs)) == 1


def test_unknown_weight_rejected():
    with pytest.raises(ValueError, match="unknown heuristic weights"):
        HeuristicWeights().updated(w_q=1)


# --- remote --------------------------------------------------------------


def completion(obj):
    return httpx.Response(200, json={"choices": [{"message": {"content": json.dumps(obj)}}]})


def remote(role, handler, fallback=None, **cfg):
    sleeps = []
    pol = RemotePolicy(
        role,
        RemoteBackendConfig(endpoint="http://llm.test/v1/chat/completions", model="m", **cfg),
        fallback=fallback,
        client=httpx.Client(transport=httpx.MockTransport(handler)),
        sleep=sleeps.append,
        limiter=RateLimiter(0.0),
    )
    return pol, sleeps


def test_remote_happy_path():
    bodies = []

    def handler(req):
        bodies.append(json.loads(req.content))
        return completion({"id": "c2", "why": "straight on",
                           "evidence": [{"text": "aligned", "relation": "supports", "about": "c2"}]})

    pol, _ = remote("TSU", handler)
    ctx = ctx_at(-30, 0, 30, 60)
    prop = pol.propose(ctx, flat_view(ctx, local_sketch="@"), ())
    assert prop == StanceProposal("c2", "straight on", (EvidenceItem("aligned", Relation.SUPPORTS, "c2"),))
    assert bodies[0]["model"] == "m" and bodies[0]["temperature"] == 0.0
    user = bodies[0]["messages"][1]["content"]
    assert "c3 | 1.00 | +60.0" in user and "Local map" in user
    assert not pol.backend_fallback


def test_remote_unknown_id_reprompts_then_falls_back():
    calls = []

    def handler(req):
        calls.append(json.loads(req.content))
        return completion({"id": "c9", "why": "?", "evidence": []})

    pol, _ = remote("TSU", handler, fallback=HeuristicTSU())
    ctx = ctx_at(-30, 0, 30)
    prop = pol.propose(ctx, flat_view(ctx), ())
    assert len(calls) == 2
    assert "c9" in calls[1]["messages"][-1]["content"]
    assert prop.candidate_id == "c1" and pol.backend_fallback


def test_remote_invalid_without_fallback_raises():
    pol, _ = remote("SIB", lambda req: httpx.Response(200, json={"choices": [{"message": {"content": "nope"}}]}))
    ctx = ctx_at(0, 30)
    with pytest.raises(BackendError):
        pol.respond(ctx, flat_view(ctx), "c0", ())


def test_remote_429_backs_off_exponentially():
    pol, sleeps = remote("NCA", lambda req: httpx.Response(429), max_retries=3, backoff_base=0.5)
    trace = DebateTrace((DebateRound(1, StanceProposal("c0"), SibResponse(Decision.AGREE)),), 1)
    with pytest.raises(BackendError, match="4 attempts"):
        pol.arbitrate("chair", cards_at(0, 30), trace)
    assert sleeps == [0.5, 1.0, 2.0]
    assert pol.requests == 4


def test_remote_recovers_after_transient_errors():
    replies = iter([httpx.Response(503), httpx.Response(429),
                    completion({"dec": "counter", "id": "c1", "why": "safer", "evidence": []})])
    pol, sleeps = remote("SIB", lambda req: next(replies))
    ctx = ctx_at(0, 30)
    resp = pol.respond(ctx, flat_view(ctx), "c0", ())
    assert resp == SibResponse(Decision.COUNTER, "c1", "safer")
    assert sleeps == [0.5, 1.0]


def test_remote_client_error_is_not_retried():
    pol, sleeps = remote("TSU", lambda req: httpx.Response(401, text="bad key"))
    ctx = ctx_at(0)
    with pytest.raises(BackendError, match="401"):
        pol.propose(ctx, flat_view(ctx), ())
    assert sleeps == []


def test_rate_limiter_spaces_requests():
    now = [0.0]
    slept = []

    def sleep(dt):
        slept.append(dt)
        now[0] += dt

    lim = RateLimiter(1.0, clock=lambda: now[0], sleep=sleep)
    for _ in range(3):
        lim.acquire()
    assert slept == [1.0, 1.0]


def test_prompt_mentions_proposal_and_schema():
    msgs = render_prompt("SIB", ctx_at(0, 30), None, (), tsu_id="c1")
    assert msgs[0]["role"] == "system"
    assert "TSU now proposes c1." in msgs[1]["content"]
    assert '"dec"' in msgs[1]["content"]
