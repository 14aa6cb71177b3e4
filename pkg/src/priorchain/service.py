"""HTTP session service: issues trials, applies responses, serves priors.

Sessions persist as a manifest plus the chain module's append-only JSONL
trial log; restarting the service replays the log and reconstructs every
session exactly (same pending trial, same RNG state, same next token). Each
session holds at most one in-flight trial, identified by a single-use token,
so duplicate submissions are applied exactly once.
"""

from __future__ import annotations

import json
import os
import secrets
import threading
import time
from pathlib import Path

from fastapi import FastAPI, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .chain import (
    AUTO,
    CATEGORY,
    FACE,
    ChainState,
    apply_choice,
    init_chain,
    log_entry,
    log_header,
    next_trial,
    replay_log,
)
from .config import SessionConfig, chain_seed, token_seed
from .core import RngStream
from .errors import (
    EmptyError,
    InvalidConfigError,
    InvalidValueError,
    MalformedLogError,
    MissingConfidenceError,
    PriorChainError,
    StaleTokenError,
    UnknownSessionError,
)
from .participant import Choice
from .recovery import pool
from .stimulus import render_svg

PAYLOAD_SCHEMA = 1

_AUTO_RESOLVE_CAP = 1_000_000


class Session:
    """One participant's live elicitation session (single-writer)."""

    def __init__(self, session_id: str, label: str, config: SessionConfig, root: Path):
        self.session_id = session_id
        self.label = label
        self.config = config
        self.root = root
        self.chains: list[ChainState] = []
        self.token_rng = RngStream(token_seed(config.seed))
        self.in_flight: dict | None = None
        self.lock = threading.RLock()

    # ------------------------------------------------------------- storage

    @property
    def dir(self) -> Path:
        return self.root / self.session_id

    @property
    def log_path(self) -> Path:
        return self.dir / "trials.jsonl"

    @property
    def manifest_path(self) -> Path:
        return self.dir / "manifest.json"

    def _append_log(self, line: dict) -> None:
        with open(self.log_path, "a") as fh:
            fh.write(json.dumps(line, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    @classmethod
    def create(cls, label: str, config: SessionConfig, root: Path) -> "Session":
        session = cls(secrets.token_hex(16), label, config, root)
        session.dir.mkdir(parents=True, exist_ok=True)
        manifest = {
            "schema": PAYLOAD_SCHEMA,
            "session_id": session.session_id,
            "participant_label": label,
            "config": config.raw,
        }
        session.manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=1))
        # wall-clock info lives only in the sidecar, never in replayed state
        (session.dir / "meta.json").write_text(json.dumps({"created_at": time.time()}))
        for k, start in enumerate(config.start_categories):
            session.chains.append(
                init_chain(
                    start,
                    config.gatekeeper,
                    config.budget,
                    RngStream(chain_seed(config.seed, k)),
                    chain_id=f"c{k}",
                )
            )
        session.log_path.touch()
        return session

    @classmethod
    def load(cls, session_dir: Path, root: Path) -> "Session":
        manifest = json.loads((session_dir / "manifest.json").read_text())
        config = SessionConfig.from_dict(manifest["config"])
        session = cls(manifest["session_id"], manifest["participant_label"], config, root)
        lines_by_chain: dict[str, list[dict]] = {}
        n_human = 0
        log_path = session_dir / "trials.jsonl"
        if log_path.exists():
            with open(log_path) as fh:
                for raw in fh:
                    if not raw.strip():
                        continue
                    line = json.loads(raw)
                    lines_by_chain.setdefault(line["chain_id"], []).append(line)
                    n_human += line["kind"] != AUTO
        for k, start in enumerate(config.start_categories):
            cid = f"c{k}"
            header = log_header(cid, start, chain_seed(config.seed, k))
            session.chains.append(
                replay_log(
                    header,
                    lines_by_chain.get(cid, []),
                    config.gatekeeper,
                    config.budget,
                )
            )
        # one token per issued human trial; in-flight trials regenerate lazily
        session.token_rng = RngStream(token_seed(config.seed), counter=4 * n_human)
        return session

    # ------------------------------------------------------------ protocol

    @property
    def trials_done(self) -> int:
        return sum(c.trials_done for c in self.chains)

    @property
    def complete(self) -> bool:
        return self.trials_done >= self.config.total_trials

    def _schedule(self) -> int:
        n = len(self.chains)
        done = self.trials_done
        if self.config.interleave == "blocked":
            # first (total % n) chains take one extra trial
            q, r = divmod(self.config.total_trials, n)
            for k in range(n):
                quota = q + (1 if k < r else 0)
                if done < quota:
                    return k
                done -= quota
            return n - 1
        return done % n

    def _progress(self) -> dict:
        return {"done": self.trials_done, "total": self.config.total_trials}

    def _done_payload(self) -> dict:
        return {
            "schema": PAYLOAD_SCHEMA,
            "status": "done",
            "progress": self._progress(),
            "summary": {
                "participant_label": self.label,
                "n_samples": sum(len(c.samples) for c in self.chains),
                "per_chain_trials": [c.trials_done for c in self.chains],
            },
        }

    def _trial_payload(self, chain_idx: int, trial, token: str) -> dict:
        space = self.config.space
        labels = self.config.categories.labels
        chain = self.chains[chain_idx]
        base = {
            "schema": PAYLOAD_SCHEMA,
            "status": "trial",
            "trial_token": token,
            "chain_id": chain.chain_id,
            "progress": self._progress(),
            # analysis/driver metadata; the browser client ignores it
            "proposal_position": 0 if trial.proposal_first else 1,
        }
        if trial.kind == FACE:
            current = {
                "kind": "stimulus",
                "svg": render_svg(space, trial.option_current),
                "stimulus": trial.option_current.to_dict(),
            }
            proposal = {
                "kind": "stimulus",
                "svg": render_svg(space, trial.option_proposal),
                "stimulus": trial.option_proposal.to_dict(),
            }
            options = [proposal, current] if trial.proposal_first else [current, proposal]
            base.update(
                {
                    "kind": "face",
                    "prompt_category": labels[trial.e],
                    "confidence_required": False,
                    "options": options,
                }
            )
        else:
            current = {"kind": "category", "label": labels[trial.cat_current]}
            proposal = {"kind": "category", "label": labels[trial.cat_proposal]}
            options = [proposal, current] if trial.proposal_first else [current, proposal]
            base.update(
                {
                    "kind": "category",
                    "stimulus_svg": render_svg(space, trial.f),
                    "stimulus": trial.f.to_dict(),
                    "confidence_required": True,
                    "options": options,
                }
            )
        return base

    def get_next_trial(self) -> dict:
        with self.lock:
            if self.complete:
                return self._done_payload()
            if self.in_flight is not None:
                return self.in_flight["payload"]
            chain_idx = self._schedule()
            chain = self.chains[chain_idx]
            for _ in range(_AUTO_RESOLVE_CAP):
                trial = next_trial(chain, self.config.gatekeeper, self.config.budget)
                if trial.kind != AUTO:
                    break
                apply_choice(chain, trial, None, self.config.gatekeeper)
                self._append_log(log_entry(chain, trial, None))
            else:
                raise PriorChainError("auto-accept resolution did not terminate")
            token = self.token_rng.token_hex()
            payload = self._trial_payload(chain_idx, trial, token)
            self.in_flight = {
                "chain_idx": chain_idx,
                "trial": trial,
                "token": token,
                "payload": payload,
            }
            return payload

    def submit_response(self, token: str, choice_pos: int, confidence: int | None) -> dict:
        with self.lock:
            if self.in_flight is None or token != self.in_flight["token"]:
                raise StaleTokenError(f"token {token!r} does not match the in-flight trial")
            trial = self.in_flight["trial"]
            if choice_pos not in (0, 1):
                raise InvalidValueError(f"choice must be 0 or 1, got {choice_pos!r}")
            if trial.kind == CATEGORY:
                if confidence is None:
                    raise MissingConfidenceError("categorization responses carry confidence 1-7")
                if not 1 <= int(confidence) <= 7:
                    raise InvalidValueError(f"confidence must be in 1..7, got {confidence}")
            elif confidence is not None:
                raise InvalidValueError("face responses carry no confidence")

            picked = int((choice_pos == 0) == trial.proposal_first)
            choice = Choice(
                picked=picked,
                confidence=int(confidence) if trial.kind == CATEGORY else None,
            )
            chain = self.chains[self.in_flight["chain_idx"]]
            apply_choice(chain, trial, choice, self.config.gatekeeper)
            self._append_log(log_entry(chain, trial, choice))
            self.in_flight = None
            return {
                "schema": PAYLOAD_SCHEMA,
                "status": "ok",
                "progress": self._progress(),
                "complete": self.complete,
            }

    def get_prior(self, burn_in_fraction: float | None = None) -> dict:
        with self.lock:
            frac = (
                self.config.burn_in_fraction
                if burn_in_fraction is None
                else burn_in_fraction
            )
            estimate = pool(
                self.chains, frac, len(self.config.categories), self.config.categories.labels
            )
            out = estimate.to_dict()
            out["schema"] = PAYLOAD_SCHEMA
            return out

    def export(self) -> dict:
        with self.lock:
            lines = []
            if self.log_path.exists():
                with open(self.log_path) as fh:
                    lines = [json.loads(ln) for ln in fh if ln.strip()]
            return {
                "schema": PAYLOAD_SCHEMA,
                "manifest": json.loads(self.manifest_path.read_text()),
                "lines": lines,
            }


class SessionService:
    """Registry of sessions under one data directory."""

    def __init__(self, data_dir: str | Path, default_config: dict | None = None):
        self.root = Path(data_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self.default_config = default_config or {}
        self.sessions: dict[str, Session] = {}
        self.lock = threading.Lock()
        for session_dir in sorted(self.root.iterdir()) if self.root.exists() else []:
            if (session_dir / "manifest.json").exists():
                try:
                    session = Session.load(session_dir, self.root)
                except (MalformedLogError, InvalidConfigError, json.JSONDecodeError) as exc:
                    raise MalformedLogError(
                        f"cannot restore session from {session_dir}: {exc}"
                    ) from exc
                self.sessions[session.session_id] = session

    def create_session(self, participant_label: str, config_overrides: dict) -> Session:
        merged = dict(self.default_config)
        merged.update(config_overrides or {})
        config = SessionConfig.from_dict(merged)
        with self.lock:
            session = Session.create(participant_label, config, self.root)
            self.sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise UnknownSessionError(f"no session {session_id!r}")
        return session


# --------------------------------------------------------------------- app

class CreateSessionBody(BaseModel):
    participant_label: str = "anon"
    config: dict = {}


class ResponseBody(BaseModel):
    trial_token: str
    choice: int
    confidence: int | None = None


_HTTP_STATUS = {
    UnknownSessionError: 404,
    StaleTokenError: 409,
    EmptyError: 409,
    MissingConfidenceError: 422,
    InvalidConfigError: 422,
    InvalidValueError: 422,
}


def _error_response(exc: PriorChainError) -> JSONResponse:
    status = _HTTP_STATUS.get(type(exc), 500)
    return JSONResponse(
        status_code=status,
        content={"schema": PAYLOAD_SCHEMA, "error": type(exc).__name__, "detail": str(exc)},
    )


def create_app(
    data_dir: str | Path,
    default_config: dict | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    """Build the HTTP app over a data directory (restores persisted sessions)."""
    service = SessionService(data_dir, default_config)
    app = FastAPI(title="priorchain session service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.service = service

    @app.exception_handler(PriorChainError)
    def handle_domain_error(request, exc: PriorChainError):
        return _error_response(exc)

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        session = service.create_session(body.participant_label, body.config)
        return {
            "schema": PAYLOAD_SCHEMA,
            "session_id": session.session_id,
            "progress": session._progress(),
        }

    @app.get("/sessions/{session_id}/trial")
    def get_trial(session_id: str):
        return service.get(session_id).get_next_trial()

    @app.post("/sessions/{session_id}/response")
    def post_response(session_id: str, body: ResponseBody):
        return service.get(session_id).submit_response(
            body.trial_token, body.choice, body.confidence
        )

    @app.get("/sessions/{session_id}/prior")
    def get_prior(session_id: str, burn_in_fraction: float | None = Query(default=None)):
        return service.get(session_id).get_prior(burn_in_fraction)

    @app.get("/sessions/{session_id}/export")
    def export(session_id: str):
        return service.get(session_id).export()

    if ui_dir is not None:
        # registered after the API routes, so /sessions/... keeps precedence
        app.mount("/", StaticFiles(directory=Path(ui_dir), html=True), name="ui")

    return app
