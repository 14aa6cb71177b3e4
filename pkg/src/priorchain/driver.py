"""Scripted session driver: a simulated participant speaking plain HTTP.

Plays a whole session against the service endpoints, making choices with the
same participant model and derived choice streams as an in-process run, so a
driven session and a direct ``run_chain`` agree sample for sample.
"""

from __future__ import annotations

from .config import choice_seed
from .core import CategorySet, RngStream, Stimulus
from .errors import PriorChainError
from .participant import ParticipantModel


def drive_session(
    client,
    participant: ParticipantModel,
    config: dict,
    base: str = "",
    participant_label: str = "driver",
    max_trials: int = 1_000_000,
) -> dict:
    """Create and complete a session; returns ids, priors, and trial counts.

    ``client`` is anything with requests-style ``get``/``post`` accepting
    ``json=`` (an ``httpx`` test client or a ``requests.Session``); ``base``
    prefixes paths with a host for real sockets.
    """
    categories = CategorySet(config.get("categories") or ())
    seed = int(config["seed"])

    resp = client.post(
        f"{base}/sessions",
        json={"participant_label": participant_label, "config": config},
    )
    _check(resp)
    session_id = resp.json()["session_id"]

    choice_rngs: dict[str, RngStream] = {}
    for _ in range(max_trials):
        resp = client.get(f"{base}/sessions/{session_id}/trial")
        _check(resp)
        payload = resp.json()
        if payload["status"] == "done":
            break
        chain_idx = int(payload["chain_id"][1:])
        rng = choice_rngs.setdefault(
            payload["chain_id"], RngStream(choice_seed(seed, chain_idx))
        )
        pp = payload["proposal_position"]
        options = payload["options"]
        if payload["kind"] == "face":
            e = categories.index_of(payload["prompt_category"])
            f_current = Stimulus.from_dict(options[1 - pp]["stimulus"])
            f_proposal = Stimulus.from_dict(options[pp]["stimulus"])
            choice = participant.choose_face(e, f_current, f_proposal, rng)
            body = {
                "trial_token": payload["trial_token"],
                "choice": pp if choice.picked else 1 - pp,
            }
        else:
            f = Stimulus.from_dict(payload["stimulus"])
            e_current = categories.index_of(options[1 - pp]["label"])
            e_proposal = categories.index_of(options[pp]["label"])
            choice = participant.choose_category(f, e_current, e_proposal, rng)
            body = {
                "trial_token": payload["trial_token"],
                "choice": pp if choice.picked else 1 - pp,
                "confidence": choice.confidence,
            }
        _check(client.post(f"{base}/sessions/{session_id}/response", json=body))
    else:
        raise PriorChainError("session did not finish within max_trials")

    prior = client.get(f"{base}/sessions/{session_id}/prior")
    _check(prior)
    return {"session_id": session_id, "prior": prior.json()}


def _check(resp) -> None:
    if resp.status_code != 200:
        raise PriorChainError(f"service error {resp.status_code}: {resp.text}")
