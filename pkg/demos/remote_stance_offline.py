"""What a chat-completion backend sees when it plays a stance.

A stand-in HTTP handler plays the SIB role: it prints the prompt it receives
and always agrees. No network is used. Point ``RemoteBackendConfig`` at a
real OpenAI-compatible endpoint to use a language model instead.

    python3 demos/remote_stance_offline.py
"""

import json
from pathlib import Path

import httpx
import numpy as np

from dscd_nav.env import GridConfig
from dscd_nav.geometry import ContextPacket
from dscd_nav.policies import HeuristicWeights
from dscd_nav.policies.remote import RateLimiter, RemoteBackendConfig, RemotePolicy
from dscd_nav.runner import RunConfig, build_view, run_episode
from dscd_nav.scenario_io import load_scenario

SCENARIO = Path(__file__).resolve().parent.parent / "scenarios" / "acceptance" / "junction_001.map"


def handler(request: httpx.Request) -> httpx.Response:
    body = json.loads(request.content)
    print("---- system ----\n" + body["messages"][0]["content"])
    print("---- user ----\n" + body["messages"][1]["content"])
    reply = {"dec": "agree", "id": None, "why": "stand-in backend agrees with everything", "evidence": []}
    return httpx.Response(200, json={"choices": [{"message": {"content": json.dumps(reply)}}]})


def main():
    scn = load_scenario(SCENARIO)
    first = run_episode(RunConfig(), scn).steps[0]
    gcfg = GridConfig().for_grid(scn.grid)
    seen = np.zeros(scn.grid.width * scn.grid.height, bool)
    seen[first.footprint.cells] = True
    view = build_view(first.pose, first.cards, scn, gcfg, seen, False, HeuristicWeights(), 0.0, sketch=True)
    ctx = ContextPacket(scn.target_category, first.cards)
    tsu_id = first.debate.rounds[0].tsu.candidate_id

    sib = RemotePolicy("SIB", RemoteBackendConfig(endpoint="http://stand-in/v1/chat/completions", model="demo"),
                       client=httpx.Client(transport=httpx.MockTransport(handler)), limiter=RateLimiter(0.0))
    resp = sib.respond(ctx, view, tsu_id, ())
    print(f"---- parsed reply ----\n{resp.decision.value}: {resp.why}")


if __name__ == "__main__":
    main()
