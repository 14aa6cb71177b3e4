"""Run and session configuration: one JSON schema shared by CLI and service.

All randomness flows from explicit seeds in the config; chain and choice
streams are derived per (seed, role, index) so any component can be re-run in
isolation and still agree with a full run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .core import CategorySet, derive_seed
from .errors import InvalidConfigError, InvalidValueError, PriorChainError
from .gatekeeper import (
    DEFAULT_TIMEOUT,
    ExternalGatekeeper,
    Gatekeeper,
    ProposerBudget,
    SoftmaxGatekeeper,
    TableGatekeeper,
)
from .participant import ParticipantModel
from .stimulus import StimulusSpace, default_continuous_space

CONFIG_SCHEMA = 1

ROUND_ROBIN = "round_robin"
BLOCKED = "blocked"

EMOTIONS = ("happy", "surprise", "sad", "angry", "disgust", "fear", "neutral")


def gatekeeper_from_dict(d: dict, space: StimulusSpace, n_categories: int) -> Gatekeeper:
    kind = d.get("kind")
    try:
        if kind == "table":
            gk = TableGatekeeper(space, d["rows"])
        elif kind == "softmax":
            gk = SoftmaxGatekeeper(space, d["weights"], d["biases"])
        elif kind == "external":
            return ExternalGatekeeper(
                space, d["endpoint"], n_categories, float(d.get("timeout", DEFAULT_TIMEOUT))
            )
        else:
            raise InvalidConfigError(f"unknown gatekeeper kind {kind!r}")
    except KeyError as exc:
        raise InvalidConfigError(f"gatekeeper config missing field {exc}") from exc
    except (InvalidValueError, PriorChainError) as exc:
        raise InvalidConfigError(f"bad gatekeeper config: {exc}") from exc
    if gk.n_categories != n_categories:
        raise InvalidConfigError(
            f"gatekeeper covers {gk.n_categories} categories, config names {n_categories}"
        )
    return gk


def budget_from_dict(d: dict | None) -> ProposerBudget:
    d = d or {}
    try:
        return ProposerBudget(
            inner_steps=int(d.get("inner_steps", 200)),
            step_scale=float(d.get("step_scale", 0.5)),
        )
    except (InvalidValueError, ValueError) as exc:
        raise InvalidConfigError(f"bad proposer budget: {exc}") from exc


def chain_seed(master: int, chain_idx: int) -> int:
    return derive_seed(master, "chain", chain_idx)


def choice_seed(master: int, chain_idx: int) -> int:
    return derive_seed(master, "choices", chain_idx)


def token_seed(master: int) -> int:
    return derive_seed(master, "tokens")


def participant_chain_seed(master: int, participant_idx: int, chain_idx: int) -> int:
    return derive_seed(master, "chain", participant_idx, chain_idx)


def participant_choice_seed(master: int, participant_idx: int, chain_idx: int) -> int:
    return derive_seed(master, "choice", participant_idx, chain_idx)


@dataclass(frozen=True)
class SessionConfig:
    """One elicitation session: spaces, gatekeeper, chain starts, budget."""

    categories: CategorySet
    space: StimulusSpace
    gatekeeper: Gatekeeper
    budget: ProposerBudget
    start_categories: tuple[int, ...]
    total_trials: int
    seed: int
    burn_in_fraction: float = 0.1
    interleave: str = ROUND_ROBIN
    raw: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_dict(cls, d: dict) -> "SessionConfig":
        try:
            labels = d.get("categories", list(EMOTIONS))
            categories = CategorySet(labels)
            space = (
                StimulusSpace.from_dict(d["space"])
                if "space" in d
                else default_continuous_space()
            )
            gatekeeper = (
                gatekeeper_from_dict(d["gatekeeper"], space, len(categories))
                if "gatekeeper" in d
                else default_softmax_gatekeeper(space, len(categories))
            )
            budget = budget_from_dict(d.get("budget"))
            if "chains" in d:
                starts = tuple(categories.index_of(name) for name in d["chains"])
            else:
                starts = tuple(range(len(categories)))
            total_trials = int(d.get("total_trials", 1000))
            seed = d.get("seed")
            if seed is None:
                raise InvalidConfigError("config requires an explicit seed")
            burn = float(d.get("burn_in_fraction", 0.1))
        except InvalidConfigError:
            raise
        except (KeyError, TypeError, ValueError, InvalidValueError) as exc:
            raise InvalidConfigError(f"bad session config: {exc}") from exc
        if total_trials < 1:
            raise InvalidConfigError(f"total_trials must be >= 1, got {total_trials}")
        if not starts:
            raise InvalidConfigError("at least one chain required")
        if not 0.0 <= burn <= 1.0:
            raise InvalidConfigError(f"burn_in_fraction must be in [0, 1], got {burn}")
        interleave = d.get("interleave", ROUND_ROBIN)
        if interleave not in (ROUND_ROBIN, BLOCKED):
            raise InvalidConfigError(f"unknown interleave mode {interleave!r}")
        return cls(
            categories=categories,
            space=space,
            gatekeeper=gatekeeper,
            budget=budget,
            start_categories=starts,
            total_trials=total_trials,
            seed=int(seed),
            burn_in_fraction=burn,
            interleave=interleave,
            raw=dict(d),
        )


def default_softmax_gatekeeper(space: StimulusSpace, n_categories: int) -> Gatekeeper:
    """Out-of-the-box classifier: category directions fanned around the plane."""
    if space.is_discrete:
        raise InvalidConfigError("a discrete space requires an explicit gatekeeper table")
    weights = []
    for k in range(n_categories):
        angle = 2.0 * math.pi * k / n_categories
        direction = [1.2 * math.cos(angle), 1.2 * math.sin(angle)]
        weights.append((direction + [0.0] * space.dim)[: space.dim])
    return SoftmaxGatekeeper(space, weights, [0.0] * n_categories)


@dataclass(frozen=True)
class RunConfig:
    """Batch simulation config: a cohort of participants, chains per participant."""

    session: SessionConfig
    participants: tuple[ParticipantModel, ...]
    trials_per_chain: int
    interleave: str = ROUND_ROBIN

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        session = SessionConfig.from_dict(d)
        raw_participants = d.get("participants")
        if not raw_participants:
            raise InvalidConfigError("run config requires at least one participant")
        try:
            participants = tuple(ParticipantModel.from_dict(p) for p in raw_participants)
        except (KeyError, InvalidValueError) as exc:
            raise InvalidConfigError(f"bad participant config: {exc}") from exc
        for p in participants:
            if p.likelihood.n_categories != len(session.categories):
                raise InvalidConfigError(
                    f"participant {p.label!r} covers {p.likelihood.n_categories} categories"
                )
        trials = int(d.get("trials_per_chain", 1000))
        if trials < 1:
            raise InvalidConfigError(f"trials_per_chain must be >= 1, got {trials}")
        interleave = d.get("interleave", ROUND_ROBIN)
        if interleave not in (ROUND_ROBIN, BLOCKED):
            raise InvalidConfigError(f"unknown interleave mode {interleave!r}")
        return cls(
            session=session,
            participants=participants,
            trials_per_chain=trials,
            interleave=interleave,
        )
