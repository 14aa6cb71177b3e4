"""Block chain engine: alternating stimulus trials and category trials.

One block iteration moves the stimulus (conditioned on the current category)
and then the category (conditioned on the updated stimulus). Stimulus
proposals come from the gatekeeper's per-category distribution; category
proposals are drawn from the gatekeeper's classification of the current
stimulus, with a proposal equal to the current category accepted silently
(no human trial). Every completed category event appends one sample record
carrying the classifier probability later used for reweighting.

All randomness flows through the chain's own RngStream, so a chain is fully
reproducible from (seed, applied choices); the trial log format here is
sufficient for exact replay.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

from .core import RngStream, Stimulus
from .errors import InvalidValueError, MalformedLogError, StaleTrialError
from .gatekeeper import Gatekeeper, ProposerBudget
from .participant import Choice, ParticipantModel

PHASE_FACE = "face_next"
PHASE_CATEGORY = "category_next"

FACE = "face"
CATEGORY = "category"
AUTO = "auto"

_NUISANCE_RANGE = 2**31

LOG_SCHEMA = 1


@dataclass(frozen=True)
class SampleRecord:
    """One accepted (stimulus, category) state with its reweighting probability."""

    f: Stimulus
    e: int
    gatekeeper_prob: float
    iteration: int
    auto_accepted: bool = False
    chain_id: str = "c0"

    def to_dict(self) -> dict:
        return {
            "f": self.f.to_dict(),
            "e": self.e,
            "gatekeeper_prob": self.gatekeeper_prob,
            "iteration": self.iteration,
            "auto_accepted": self.auto_accepted,
            "chain_id": self.chain_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SampleRecord":
        return cls(
            f=Stimulus.from_dict(d["f"]),
            e=int(d["e"]),
            gatekeeper_prob=float(d["gatekeeper_prob"]),
            iteration=int(d["iteration"]),
            auto_accepted=bool(d.get("auto_accepted", False)),
            chain_id=d.get("chain_id", "c0"),
        )


@dataclass(frozen=True)
class TrialDescriptor:
    """An issued trial. ``serial`` ties a response to the in-flight trial.

    Face trials carry two stimulus options stamped with one shared nuisance
    seed; category trials carry the current stimulus and two distinct
    category options. ``proposal_first`` is the presentation-order coin: it
    is logged for analysis and never influences simulated choices.
    """

    kind: str
    serial: int
    e: int | None = None
    option_current: Stimulus | None = None
    option_proposal: Stimulus | None = None
    f: Stimulus | None = None
    cat_current: int | None = None
    cat_proposal: int | None = None
    proposal_first: bool = False

    def options_dict(self) -> dict:
        if self.kind == FACE:
            return {
                "e": self.e,
                "current": self.option_current.to_dict(),
                "proposal": self.option_proposal.to_dict(),
                "proposal_first": self.proposal_first,
            }
        if self.kind == CATEGORY:
            return {
                "f": self.f.to_dict(),
                "current": self.cat_current,
                "proposal": self.cat_proposal,
                "proposal_first": self.proposal_first,
            }
        return {"f": self.f.to_dict(), "category": self.cat_current}


class ChainState:
    """Mutable single-owner state of one elicitation chain."""

    def __init__(self, chain_id: str, current_f: Stimulus, current_e: int, rng: RngStream):
        self.chain_id = chain_id
        self.current_f = current_f
        self.current_e = current_e
        self.phase = PHASE_CATEGORY
        self.trials_done = 0
        self.samples: list[SampleRecord] = []
        self.rng = rng
        self.pending: TrialDescriptor | None = None
        self.first_cat_issued = False
        self.serial = 0
        self.n_face_trials = 0
        self.n_face_accepts = 0
        self.n_cat_trials = 0
        self.n_cat_accepts = 0
        self.n_auto = 0

    def to_dict(self) -> dict:
        """Canonical serialization; two equal chain states serialize identically."""
        return {
            "chain_id": self.chain_id,
            "current_f": self.current_f.to_dict(),
            "current_e": self.current_e,
            "phase": self.phase,
            "trials_done": self.trials_done,
            "serial": self.serial,
            "first_cat_issued": self.first_cat_issued,
            "rng": self.rng.state(),
            "counters": {
                "face_trials": self.n_face_trials,
                "face_accepts": self.n_face_accepts,
                "cat_trials": self.n_cat_trials,
                "cat_accepts": self.n_cat_accepts,
                "auto_accepts": self.n_auto,
            },
            "samples": [s.to_dict() for s in self.samples],
        }

    def fingerprint(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def init_chain(
    start_category: int,
    gatekeeper: Gatekeeper,
    budget: ProposerBudget,
    rng: RngStream,
    chain_id: str = "c0",
) -> ChainState:
    """Start a chain at a category, with the stimulus drawn from its gatekeeper column.

    The chain opens with a categorization trial whose proposal is drawn
    uniformly from the other categories (first trial only); the initial
    (stimulus, category) pair is recorded as sample 0 so all chains of equal
    length yield equal sample counts.
    """
    if not 0 <= start_category < gatekeeper.n_categories:
        raise InvalidValueError(f"start category {start_category} out of range")
    f0 = gatekeeper.propose_stimulus(start_category, budget, rng)
    f0 = f0.with_nuisance(rng.integer(_NUISANCE_RANGE))
    state = ChainState(chain_id, f0, start_category, rng)
    state.samples.append(
        SampleRecord(
            f=f0,
            e=start_category,
            gatekeeper_prob=gatekeeper.classify(f0)[start_category],
            iteration=0,
            auto_accepted=False,
            chain_id=chain_id,
        )
    )
    return state


def next_trial(
    state: ChainState, gatekeeper: Gatekeeper, budget: ProposerBudget
) -> TrialDescriptor:
    """Issue (or re-issue) the chain's in-flight trial.

    Idempotent: until a choice is applied, repeated calls return the same
    descriptor. Category proposals equal to the current category come back as
    an ``auto`` descriptor, which the caller applies without a participant.
    """
    if state.pending is not None:
        return state.pending

    rng = state.rng
    state.serial += 1
    if state.phase == PHASE_FACE:
        proposal = gatekeeper.propose_stimulus(state.current_e, budget, rng)
        nuisance = rng.integer(_NUISANCE_RANGE)
        proposal_first = bool(rng.coin())
        trial = TrialDescriptor(
            kind=FACE,
            serial=state.serial,
            e=state.current_e,
            option_current=state.current_f.with_nuisance(nuisance),
            option_proposal=proposal.with_nuisance(nuisance),
            proposal_first=proposal_first,
        )
    else:
        if not state.first_cat_issued:
            # Opening trial: uniform proposal among the other categories.
            others = [
                e for e in range(gatekeeper.n_categories) if e != state.current_e
            ]
            e_prop = others[rng.integer(len(others))]
            state.first_cat_issued = True
        else:
            cdf = gatekeeper.classify_cdf(state.current_f)
            e_prop = rng.index_from_cdf(cdf)
        if e_prop == state.current_e:
            trial = TrialDescriptor(
                kind=AUTO, serial=state.serial, f=state.current_f,
                cat_current=state.current_e, cat_proposal=e_prop,
            )
        else:
            proposal_first = bool(rng.coin())
            trial = TrialDescriptor(
                kind=CATEGORY,
                serial=state.serial,
                f=state.current_f,
                cat_current=state.current_e,
                cat_proposal=e_prop,
                proposal_first=proposal_first,
            )
    state.pending = trial
    return trial


def apply_choice(
    state: ChainState,
    trial: TrialDescriptor,
    choice: Choice | None,
    gatekeeper: Gatekeeper,
) -> ChainState:
    """Apply a decision to the in-flight trial and advance the chain.

    Face decisions update the stimulus block and flip the phase. Category
    decisions (including autos) update the category block, append a sample
    record, and flip the phase. Only human-facing trials increment
    ``trials_done``.
    """
    if state.pending is None or trial != state.pending:
        raise StaleTrialError(
            f"trial serial {trial.serial} is not in flight for {state.chain_id}"
        )
    if trial.kind == AUTO:
        if choice is not None:
            raise InvalidValueError("auto-accepted steps take no participant choice")
    elif choice is None:
        raise InvalidValueError(f"{trial.kind} trial requires a choice")
    elif trial.kind == CATEGORY and choice.confidence is None:
        raise InvalidValueError("categorization choices carry a 1-7 confidence")
    elif trial.kind == FACE and choice.confidence is not None:
        raise InvalidValueError("face choices carry no confidence")

    if trial.kind == FACE:
        picked = trial.option_proposal if choice.picked else trial.option_current
        state.current_f = picked
        state.n_face_trials += 1
        state.n_face_accepts += choice.picked
        state.trials_done += 1
        state.phase = PHASE_CATEGORY
    else:
        if trial.kind == AUTO:
            new_e = trial.cat_current
            state.n_auto += 1
        else:
            new_e = trial.cat_proposal if choice.picked else trial.cat_current
            state.n_cat_trials += 1
            state.n_cat_accepts += choice.picked
            state.trials_done += 1
        state.current_e = new_e
        state.samples.append(
            SampleRecord(
                f=state.current_f,
                e=new_e,
                gatekeeper_prob=gatekeeper.classify_prob(state.current_f, new_e),
                iteration=len(state.samples),
                auto_accepted=trial.kind == AUTO,
                chain_id=state.chain_id,
            )
        )
        state.phase = PHASE_FACE
    state.pending = None
    return state


def run_chain(
    state: ChainState,
    participant: ParticipantModel,
    n_trials: int,
    gatekeeper: Gatekeeper,
    budget: ProposerBudget,
    choice_rng: RngStream,
) -> ChainState:
    """Drive a chain with a simulated participant for ``n_trials`` decisions.

    Auto-accepted category steps do not count against the trial budget; they
    involve no participant.
    """
    if n_trials < 1:
        raise InvalidValueError(f"n_trials must be >= 1, got {n_trials}")
    while state.trials_done < n_trials:
        trial = next_trial(state, gatekeeper, budget)
        if trial.kind == AUTO:
            choice = None
        elif trial.kind == FACE:
            choice = participant.choose_face(
                trial.e, trial.option_current, trial.option_proposal, choice_rng
            )
        else:
            choice = participant.choose_category(
                trial.f, trial.cat_current, trial.cat_proposal, choice_rng
            )
        apply_choice(state, trial, choice, gatekeeper)
    return state


def run_blocks(
    state: ChainState,
    participant: ParticipantModel,
    n_samples: int,
    gatekeeper: Gatekeeper,
    budget: ProposerBudget,
    choice_rng: RngStream,
) -> ChainState:
    """Drive a chain until it holds at least ``n_samples`` sample records.

    Convenience for frequency analyses that care about block iterations
    rather than human trial counts.
    """
    while len(state.samples) < n_samples:
        trial = next_trial(state, gatekeeper, budget)
        if trial.kind == AUTO:
            choice = None
        elif trial.kind == FACE:
            choice = participant.choose_face(
                trial.e, trial.option_current, trial.option_proposal, choice_rng
            )
        else:
            choice = participant.choose_category(
                trial.f, trial.cat_current, trial.cat_proposal, choice_rng
            )
        apply_choice(state, trial, choice, gatekeeper)
    return state


# ------------------------------------------------------------------ logging

def log_header(
    chain_id: str, start_category: int, seed: int, extra: dict | None = None
) -> dict:
    header = {
        "kind": "header",
        "schema": LOG_SCHEMA,
        "chain_id": chain_id,
        "start_category": start_category,
        "seed": seed,
    }
    if extra:
        header.update(extra)
    return header


def log_entry(state: ChainState, trial: TrialDescriptor, choice: Choice | None) -> dict:
    """Log line for a trial just applied to ``state``."""
    sample = state.samples[-1].to_dict() if trial.kind != FACE else None
    return {
        "chain_id": state.chain_id,
        "iteration": trial.serial,
        "kind": trial.kind,
        "options": trial.options_dict(),
        "choice": None if choice is None else choice.picked,
        "confidence": None if choice is None else choice.confidence,
        "sample": sample,
        "seed_state": state.rng.state(),
    }


def run_chain_logged(
    state: ChainState,
    participant: ParticipantModel,
    n_trials: int,
    gatekeeper: Gatekeeper,
    budget: ProposerBudget,
    choice_rng: RngStream,
) -> tuple[ChainState, list[dict]]:
    """run_chain variant that also returns the trial log lines."""
    lines = []
    while state.trials_done < n_trials:
        trial = next_trial(state, gatekeeper, budget)
        if trial.kind == AUTO:
            choice = None
        elif trial.kind == FACE:
            choice = participant.choose_face(
                trial.e, trial.option_current, trial.option_proposal, choice_rng
            )
        else:
            choice = participant.choose_category(
                trial.f, trial.cat_current, trial.cat_proposal, choice_rng
            )
        apply_choice(state, trial, choice, gatekeeper)
        lines.append(log_entry(state, trial, choice))
    return state, lines


def replay_log(
    header: dict,
    lines: Iterable[dict],
    gatekeeper: Gatekeeper,
    budget: ProposerBudget,
) -> ChainState:
    """Reconstruct a chain state exactly by replaying logged choices.

    The engine regenerates every proposal from the logged seed; the log
    contributes only the participant decisions. Each line's ``seed_state``
    and kind are validated against the regenerated trial, so corrupt or
    out-of-order logs fail loudly.
    """
    if header.get("kind") != "header":
        raise MalformedLogError("log must start with a header line")
    state = init_chain(
        int(header["start_category"]),
        gatekeeper,
        budget,
        RngStream(int(header["seed"])),
        chain_id=header.get("chain_id", "c0"),
    )
    for i, line in enumerate(lines):
        trial = next_trial(state, gatekeeper, budget)
        if line.get("kind") != trial.kind:
            raise MalformedLogError(
                f"line {i}: logged kind {line.get('kind')!r} != replayed {trial.kind!r}"
            )
        if trial.kind == AUTO:
            choice = None
        else:
            picked = line.get("choice")
            if picked not in (0, 1):
                raise MalformedLogError(f"line {i}: bad choice {picked!r}")
            confidence = line.get("confidence")
            if trial.kind == CATEGORY and confidence is None:
                raise MalformedLogError(f"line {i}: categorization line lacks confidence")
            choice = Choice(picked=picked, confidence=confidence)
        apply_choice(state, trial, choice, gatekeeper)
        logged_rng = line.get("seed_state")
        if logged_rng is not None and dict(logged_rng) != state.rng.state():
            raise MalformedLogError(f"line {i}: seed state diverged")
    return state


def write_log(path, header: dict, lines: Iterable[dict]) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for line in lines:
            fh.write(json.dumps(line, sort_keys=True) + "\n")


def read_log(path) -> tuple[dict, list[dict]]:
    try:
        with open(path) as fh:
            raw = [json.loads(ln) for ln in fh if ln.strip()]
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedLogError(f"cannot read log {path}: {exc}") from exc
    if not raw or raw[0].get("kind") != "header":
        raise MalformedLogError(f"log {path} missing header line")
    return raw[0], raw[1:]
