"""Chat-completion backend for the TSU, SIB and NCA roles.

Requests are OpenAI-style ``POST {model, messages, temperature}``; the reply's
``choices[0].message.content`` must be one JSON object matching the role's
schema in ``dscd_nav/schemas``. A reply that fails validation gets one
corrective reprompt; a second failure falls back to the heuristic policy (or
raises :class:`BackendError` when no fallback is configured).
"""

from __future__ import annotations

import json
import math
import os
import threading
import time
from dataclasses import asdict, dataclass
from importlib import resources
from typing import Any, Callable, Optional, Sequence

import httpx
import jsonschema
from referencing import Registry
from referencing.jsonschema import DRAFT202012

from ..debate import (
    DebateHistory,
    DebateTrace,
    Decision,
    EvidenceItem,
    SibResponse,
    StanceProposal,
)
from ..geometry import CandidateCard, ContextPacket
from .base import Arbitration, EnvView, StancePolicy


class BackendError(RuntimeError):
    """The remote backend could not produce a usable answer."""


@dataclass(frozen=True)
class RemoteBackendConfig:
    endpoint: str
    model: str
    api_key_env: str = "DSCD_API_KEY"
    timeout: float = 30.0
    max_retries: int = 3
    temperature: float = 0.0
    backoff_base: float = 0.5
    min_interval: float = 0.0  # seconds between requests, shared by all users of this endpoint
    fallback: bool = True

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def load_schema(role: str) -> dict:
    text = resources.files("dscd_nav").joinpath("schemas", f"{role.lower()}.json").read_text(encoding="utf-8")
    return json.loads(text)


def _validator(role: str) -> jsonschema.Draft202012Validator:
    registry = Registry().with_resource("evidence.json", DRAFT202012.create_resource(load_schema("evidence")))
    return jsonschema.Draft202012Validator(load_schema(role), registry=registry)


_VALIDATORS: dict[str, jsonschema.Draft202012Validator] = {}


def validate_reply(role: str, obj: Any) -> None:
    if role not in _VALIDATORS:
        _VALIDATORS[role] = _validator(role)
    errors = sorted(_VALIDATORS[role].iter_errors(obj), key=lambda e: list(e.path))
    if errors:
        raise ValueError("; ".join(f"{'/'.join(map(str, e.path)) or '<root>'}: {e.message}" for e in errors))


class RateLimiter:
    """Spaces out request starts by at least ``min_interval`` seconds across threads."""

    def __init__(self, min_interval: float, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        self.min_interval = min_interval
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next = -math.inf

    def acquire(self) -> None:
        with self._lock:
            now = self._clock()
            wait = self._next - now
            self._next = max(now, self._next) + self.min_interval
        if wait > 0:
            self._sleep(wait)


_LIMITERS: dict[tuple[str, float], RateLimiter] = {}
_LIMITERS_LOCK = threading.Lock()


def shared_limiter(cfg: RemoteBackendConfig) -> RateLimiter:
    key = (cfg.endpoint, cfg.min_interval)
    with _LIMITERS_LOCK:
        if key not in _LIMITERS:
            _LIMITERS[key] = RateLimiter(cfg.min_interval)
        return _LIMITERS[key]


_ROLE_BRIEF = {
    "TSU": ("You are the Task-Scene Understanding stance of a navigation agent. Prefer the candidate "
            "that makes the most progress toward the goal object given the layout."),
    "SIB": ("You are the Safety-Information Balancing stance of a navigation agent. Ignore the goal. "
            "Check the proposed candidate for collision risk and view gain. Agree if it is acceptable; "
            "otherwise counter by naming the candidate with more clearance or more unseen area."),
    "NCA": ("You are the arbitration judge of a navigation agent. Weigh task progress, safety and "
            "information across both stances and output one final candidate."),
}


def _deg(x: float) -> str:
    return f"{math.degrees(x):+.1f}"


def card_table(cards: Sequence[CandidateCard]) -> str:
    rows = ["id | r (m) | yaw (deg, +left) | direction"]
    rows += [f"{c.id} | {c.action.r:.2f} | {_deg(c.action.theta)} | {c.direction_text}" for c in cards]
    return "\n".join(rows)


def history_text(history: Sequence) -> str:
    if not history:
        return "(no earlier rounds)"
    lines = []
    for rnd in history:
        lines.append(f"round {rnd.k}: TSU -> {rnd.tsu.candidate_id} ({rnd.tsu.why})")
        for e in rnd.tsu.evidence:
            lines.append(f"  TSU {e.relation.value} {e.about}: {e.text}")
        sib = rnd.sib
        lines.append(f"round {rnd.k}: SIB {sib.decision.value} {sib.candidate_id or ''} ({sib.why})".rstrip())
        for e in sib.evidence:
            lines.append(f"  SIB {e.relation.value} {e.about}: {e.text}")
    return "\n".join(lines)


def render_prompt(role: str, ctx: ContextPacket, view: Optional[EnvView] = None,
                  history: Sequence = (), tsu_id: Optional[str] = None) -> list[dict[str, str]]:
    schema = json.dumps(load_schema(role), separators=(",", ":"))
    parts = [f"Goal: find a {ctx.goal_text}."]
    if ctx.evidence_cues:
        parts.append("Cues:\n" + "\n".join(f"- {e}" for e in ctx.evidence_cues))
    parts.append("Candidates:\n" + card_table(ctx.cards))
    if view is not None and view.local_sketch:
        parts.append("Local map, heading up (# wall, . seen free, ? unseen, @ agent, T target):\n"
                     + view.local_sketch)
    parts.append("Debate so far:\n" + history_text(history))
    if tsu_id is not None:
        parts.append(f"TSU now proposes {tsu_id}.")
    parts.append("Reply with exactly one JSON object matching this schema "
                 f"(evidence item schema: {json.dumps(load_schema('evidence'), separators=(',', ':'))}):\n{schema}")
    return [{"role": "system", "content": _ROLE_BRIEF[role]}, {"role": "user", "content": "\n\n".join(parts)}]


def _evidence(obj: dict, ids: set) -> tuple[EvidenceItem, ...]:
    items = tuple(EvidenceItem.from_dict(e) for e in obj.get("evidence", []))
    for e in items:
        if e.about not in ids:
            raise ValueError(f"evidence about unknown candidate {e.about!r}")
    return items


def parse_proposal(obj: Any, ids: set) -> StanceProposal:
    validate_reply("TSU", obj)
    if obj["id"] not in ids:
        raise ValueError(f"unknown candidate id {obj['id']!r}")
    return StanceProposal(obj["id"], obj["why"], _evidence(obj, ids))


def parse_response(obj: Any, ids: set, tsu_id: str) -> SibResponse:
    validate_reply("SIB", obj)
    dec = Decision(obj["dec"])
    cid = obj.get("id")
    if dec is Decision.COUNTER and cid not in ids:
        raise ValueError(f"counter must name a known candidate, got {cid!r}")
    if dec is Decision.AGREE and cid not in (None, tsu_id):
        raise ValueError("agree must not name a different candidate")
    return SibResponse(dec, cid, obj["why"], _evidence(obj, ids))


def parse_arbitration(obj: Any, ids: set) -> Arbitration:
    validate_reply("NCA", obj)
    if obj["id"] not in ids:
        raise ValueError(f"unknown candidate id {obj['id']!r}")
    return Arbitration(obj["id"], obj["why"], _evidence(obj, ids))


class _InvalidReply(Exception):
    pass


class RemotePolicy(StancePolicy):
    """One stance served by a chat-completion endpoint, with an optional local fallback."""

    def __init__(self, role: str, cfg: RemoteBackendConfig, fallback: Optional[StancePolicy] = None,
                 client: Optional[httpx.Client] = None, sleep: Callable[[float], None] = time.sleep,
                 limiter: Optional[RateLimiter] = None):
        self.role = role.upper()
        self.cfg = cfg
        self.fallback = fallback
        self._client = client
        self._sleep = sleep
        self.limiter = limiter or shared_limiter(cfg)
        self.requests = 0

    @property
    def client(self) -> httpx.Client:
        if self._client is None:
            self._client = httpx.Client(timeout=self.cfg.timeout)
        return self._client

    def begin_step(self, step_index: int) -> None:
        super().begin_step(step_index)
        if self.fallback is not None:
            self.fallback.begin_step(step_index)

    def _post(self, messages: list[dict[str, str]]) -> str:
        body = {"model": self.cfg.model, "messages": messages, "temperature": self.cfg.temperature}
        headers = {}
        key = os.environ.get(self.cfg.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        last = "no attempt made"
        for attempt in range(self.cfg.max_retries + 1):
            if attempt:
                self._sleep(self.cfg.backoff_base * 2 ** (attempt - 1))
            self.limiter.acquire()
            self.requests += 1
            try:
                resp = self.client.post(self.cfg.endpoint, json=body, headers=headers, timeout=self.cfg.timeout)
            except httpx.TransportError as exc:
                last = f"{type(exc).__name__}: {exc}"
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendError(f"malformed completion payload: {exc}") from None
        raise BackendError(f"{self.role} backend failed after {self.cfg.max_retries + 1} attempts ({last})")

    def _ask(self, messages: list[dict[str, str]], parse: Callable[[Any], Any]):
        content = self._post(messages)
        try:
            return parse(json.loads(content))
        except (ValueError, KeyError, TypeError) as exc:
            problem = str(exc)
        retry = messages + [
            {"role": "assistant", "content": content},
            {"role": "user", "content": f"That reply was invalid ({problem}). "
                                        "Answer again with one JSON object that matches the schema."},
        ]
        content = self._post(retry)
        try:
            return parse(json.loads(content))
        except (ValueError, KeyError, TypeError) as exc:
            raise _InvalidReply(str(exc)) from None

    def _call(self, messages, parse, fallback_call):
        try:
            return self._ask(messages, parse)
        except (_InvalidReply, BackendError) as exc:
            if self.fallback is None or not self.cfg.fallback:
                raise BackendError(str(exc)) from None
            self.backend_fallback = True
            return fallback_call()

    def propose(self, ctx: ContextPacket, view: Any, history: DebateHistory) -> StanceProposal:
        ids = set(ctx.ids)
        return self._call(render_prompt("TSU", ctx, view, history), lambda o: parse_proposal(o, ids),
                          lambda: self.fallback.propose(ctx, view, history))

    def respond(self, ctx: ContextPacket, view: Any, tsu_id: str, history: DebateHistory) -> SibResponse:
        ids = set(ctx.ids)
        return self._call(render_prompt("SIB", ctx, view, history, tsu_id), lambda o: parse_response(o, ids, tsu_id),
                          lambda: self.fallback.respond(ctx, view, tsu_id, history))

    def arbitrate(self, goal: str, cards: Sequence[CandidateCard], trace: DebateTrace) -> Arbitration:
        ctx = ContextPacket(goal, tuple(cards))
        ids = set(ctx.ids)
        return self._call(render_prompt("NCA", ctx, None, trace.rounds), lambda o: parse_arbitration(o, ids),
                          lambda: self.fallback.arbitrate(goal, cards, trace))
