import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dscd_nav.debate import ContractError, DebateRound, DebateTrace, Decision, ProtocolViolation, SibResponse, StanceProposal
from dscd_nav.execution import (
    ExecutionConfig,
    Mode,
    decide_from_arbitration,
    decide_step,
    select_mode,
    soft_compromise,
)
from dscd_nav.geometry import ContextPacket, PolarAction, angular_distance, package_candidates, wrap_angle
from dscd_nav.policies import Arbitration
from dscd_nav.policies.scripted import ScriptedNCA

ALPHA = math.pi / 3
EPS = 1e-6


def truth_table_rows():
    for cons in (0, 1):
        for mag in (0.0, ALPHA - EPS, ALPHA, ALPHA + EPS, math.pi):
            expected = Mode.B if cons == 0 and mag <= ALPHA else Mode.A
            yield cons, mag, expected


@pytest.mark.parametrize("cons,mag,expected", list(truth_table_rows()))
def test_mode_truth_table(cons, mag, expected):
    assert select_mode(cons, mag) is expected
    assert select_mode(cons, -mag) is expected


def test_mode_examples():
    assert select_mode(0, math.radians(50)) is Mode.B
    assert select_mode(0, math.radians(60.1)) is Mode.A
    assert select_mode(1, 0.0) is Mode.A
    assert select_mode(0, 0.1, ExecutionConfig(probing=False)) is Mode.A


def test_soft_compromise_examples():
    out = soft_compromise(PolarAction(1.2, 0.0), 0.6)
    assert (out.r, out.theta) == (0.6, pytest.approx(0.2))
    assert soft_compromise(PolarAction(1.0, 0.4), 0.4) == PolarAction(0.5, 0.4)
    cfg = ExecutionConfig(beta_theta=0.0)
    assert soft_compromise(PolarAction(1.0, 0.4), 1.0, cfg).theta == 0.4


def test_soft_compromise_rejects_wide_gap():
    with pytest.raises(ContractError):
        soft_compromise(PolarAction(1.0, 0.0), ALPHA + 0.01)


def test_config_validation():
    for bad in (dict(alpha=0.0), dict(alpha=4.0), dict(beta_r=0.0), dict(beta_r=1.5), dict(beta_theta=-0.1)):
        with pytest.raises(ValueError):
            ExecutionConfig(**bad)


angle = st.floats(-math.pi, math.pi, allow_nan=False)


@given(st.floats(0.4, 1.5), angle, st.floats(-ALPHA, ALPHA), st.floats(0, 1), st.floats(0.05, 1))
def test_interpolation_property(r, theta, gap, bt, br):
    alt = wrap_angle(theta + gap)
    cfg = ExecutionConfig(beta_r=br, beta_theta=bt)
    out = soft_compromise(PolarAction(r, theta), alt, cfg)
    # on the shorter arc between theta* and theta_alt
    assert angular_distance(theta, out.theta) + angular_distance(out.theta, alt) == pytest.approx(
        angular_distance(theta, alt), abs=1e-9)
    assert angular_distance(theta, out.theta) <= bt * ALPHA + 1e-12
    assert out.r == pytest.approx(br * r)
    if br < 1:
        assert out.r < r


def test_interpolation_across_pi():
    out = soft_compromise(PolarAction(1.0, math.pi - 0.1), -math.pi + 0.2)
    assert out.theta == pytest.approx(wrap_angle(math.pi - 0.1 + 0.1))


# --- decide_step -----------------------------------------------------------


def ctx():
    return ContextPacket("chair", package_candidates([PolarAction(1.0, t) for t in (0.0, 0.5, 2.0)],
                                                     stop_allowed=True))


def disputed(tsu, sib):
    return DebateTrace((DebateRound(1, StanceProposal(tsu), SibResponse(Decision.COUNTER, sib)),), 1)


class Judge:
    def __init__(self, cid):
        self.cid = cid

    def arbitrate(self, goal, cards, trace):
        return Arbitration(self.cid, "judged")


def test_consensus_executes_card_exactly():
    trace = DebateTrace((DebateRound(1, StanceProposal("c1"), SibResponse(Decision.AGREE)),), 3)
    d = decide_step(ctx(), trace, Judge("c1"))
    assert d.mode is Mode.A and d.exec == PolarAction(1.0, 0.5)
    assert d.consensus and not d.micro_probe and d.alt_id is None


def test_disagreement_within_alpha_probes():
    d = decide_step(ctx(), disputed("c0", "c1"), Judge("c0"))
    assert d.mode is Mode.B and d.soft_compromise and d.micro_probe
    assert (d.exec.r, d.exec.theta) == (0.5, pytest.approx(0.5 / 3))
    assert d.alt_id == "c1" and d.delta_theta == 0.5


def test_disagreement_beyond_alpha_commits():
    d = decide_step(ctx(), disputed("c0", "c2"), Judge("c2"))
    assert d.mode is Mode.A and d.exec == PolarAction(1.0, 2.0) and d.alt_id == "c0"


def test_stop_never_probed():
    d = decide_step(ctx(), disputed("stop", "c0"), Judge("stop"))
    assert d.mode is Mode.A and d.exec == PolarAction(0.0, 0.0)
    d = decide_step(ctx(), disputed("c0", "stop"), Judge("c0"))
    assert d.mode is Mode.A and not d.micro_probe


def test_no_probe_config_commits():
    d = decide_step(ctx(), disputed("c0", "c1"), Judge("c0"), ExecutionConfig(probing=False))
    assert d.mode is Mode.A and d.exec == PolarAction(1.0, 0.0)


def test_unknown_judge_id():
    with pytest.raises(ProtocolViolation, match="NCA"):
        decide_step(ctx(), disputed("c0", "c1"), Judge("c7"))


def test_replay_reproduces_decision(tmp_path):
    trace = disputed("c0", "c1")
    live = decide_step(ctx(), trace, Judge("c1"))
    path = tmp_path / "nca.jsonl"
    path.write_text('{"step":0,"id":"c1","why":"judged","evidence":[]}\n')
    replayed = decide_step(ctx(), trace, ScriptedNCA.from_file(path))
    assert replayed == live
    assert decide_from_arbitration(ctx(), trace, Arbitration("c1", "judged")) == live
    assert type(live).from_dict(live.to_dict()) == live
