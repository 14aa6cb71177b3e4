"""Synthetic cohort: simulated responders, elicitation runs, and evaluation.

Builds a desk-scale experiment with a shared table classifier over a stimulus
set split into ambiguous stimuli (weak classifier evidence, so individual
priors dominate choices) and clear stimuli (confident classifier, used for
the ground-truth sensitivity check). Each cohort member gets a
Dirichlet-drawn prior and a mildly jittered likelihood; their priors are
recovered by running the full chain pipeline and then fed to the evaluation
harness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import init_chain, run_chain
from .config import participant_chain_seed, participant_choice_seed
from .core import Categorical, RngStream, Stimulus, derive_seed, normalize
from .evaluation import (
    PredictorSpec,
    accuracy,
    average_prior,
    choice_trials_from_model,
    confidence_correlation,
    ecological_prior,
    labeled_set_from_model,
    select_ambiguous,
    sensitivity_check,
)
from .gatekeeper import ProposerBudget, TableGatekeeper
from .participant import DiscreteLikelihood, ParticipantModel
from .recovery import PriorEstimate, pool
from .stimulus import StimulusSpace, enumerate_stimuli

CATEGORIES = ("happy", "surprise", "sad", "angry", "disgust", "fear", "neutral")


@dataclass(frozen=True)
class CohortSettings:
    """Knobs for the synthetic cohort experiment."""

    n_participants: int = 20
    dirichlet_alpha: float = 0.5
    # Uniform mass mixed into each drawn prior. Categories with true mass
    # ~1e-4 are unreachable in a desk-scale chain run (their recovered mass
    # comes out exactly zero), so the acceptance cohort keeps priors bounded
    # away from zero while preserving their Dirichlet shape. Set to 0.0 for
    # raw Dirichlet draws.
    uniform_mix: float = 0.1
    seed: int = 20260810
    trials_per_chain: int = 2000
    burn_in_fraction: float = 0.1
    ambiguous_per_category: int = 4
    clear_per_category: int = 8
    clear_confidence: float = 0.999
    ambiguous_threshold: float = 0.25
    clear_network_min: float = 0.6
    labeled_set_draws: int = 450

    @property
    def n_categories(self) -> int:
        return len(CATEGORIES)

    @property
    def per_category(self) -> int:
        return self.ambiguous_per_category + self.clear_per_category

    @property
    def n_stimuli(self) -> int:
        return self.n_categories * self.per_category

    def nominal_category(self, s: int) -> int:
        return s // self.per_category

    def is_ambiguous(self, s: int) -> bool:
        return s % self.per_category < self.ambiguous_per_category


def build_space(settings: CohortSettings) -> StimulusSpace:
    return StimulusSpace.discrete(settings.n_stimuli)


def build_gatekeeper(settings: CohortSettings) -> TableGatekeeper:
    """Ambiguous stimuli: near-flat rows with max below the ambiguity cut.

    Clear stimuli: ``clear_confidence`` on the nominal category.
    """
    rng = np.random.default_rng(derive_seed(settings.seed, "gatekeeper"))
    n_e = settings.n_categories
    rows = []
    for s in range(settings.n_stimuli):
        c = settings.nominal_category(s)
        if settings.is_ambiguous(s):
            base = np.ones(n_e) + rng.uniform(0.0, 0.15, n_e)
            base[c] += 0.5
            rows.append(base / base.sum())
        else:
            row = np.full(n_e, (1.0 - settings.clear_confidence) / (n_e - 1))
            row[c] = settings.clear_confidence
            rows.append(row)
    return TableGatekeeper(build_space(settings), rows)


def _likelihood_rows(settings: CohortSettings, jitter_rng: np.random.Generator | None):
    """Base stimulus weights per category, optionally participant-jittered.

    Clear stimuli of the row's own category carry the bulk of the mass;
    ambiguous stimuli carry weak, jitterable mass for every category; clear
    stimuli of other categories are near-impossible.
    """
    n_e, n_f = settings.n_categories, settings.n_stimuli
    rows = np.zeros((n_e, n_f))
    for e in range(n_e):
        for s in range(n_f):
            c = settings.nominal_category(s)
            if settings.is_ambiguous(s):
                w = 0.35
                if jitter_rng is not None:
                    w *= float(np.exp(0.3 * jitter_rng.standard_normal()))
            elif c == e:
                w = 1.0
                if jitter_rng is not None:
                    w *= float(np.exp(0.1 * jitter_rng.standard_normal()))
            else:
                w = 0.002
            rows[e, s] = w
    return rows / rows.sum(axis=1, keepdims=True)


def build_reference(settings: CohortSettings) -> ParticipantModel:
    """Unjittered generative model with a uniform prior; labels the clear set."""
    n_e = settings.n_categories
    return ParticipantModel(
        Categorical(np.full(n_e, 1.0 / n_e)),
        DiscreteLikelihood(_likelihood_rows(settings, None)),
        label="reference",
    )


def build_participants(settings: CohortSettings) -> list[ParticipantModel]:
    participants = []
    n_e = settings.n_categories
    for i in range(settings.n_participants):
        rng = np.random.default_rng(derive_seed(settings.seed, "participant", i))
        prior = rng.dirichlet(np.full(n_e, settings.dirichlet_alpha))
        prior = (1.0 - settings.uniform_mix) * prior + settings.uniform_mix / n_e
        participants.append(
            ParticipantModel(
                normalize(prior),
                DiscreteLikelihood(_likelihood_rows(settings, rng)),
                label=f"p{i:02d}",
            )
        )
    return participants


def build_labeled_set(
    settings: CohortSettings,
    gatekeeper: TableGatekeeper,
    reference: ParticipantModel,
) -> list[tuple[Stimulus, int]]:
    """Ground-truth pairs sampled from the reference model, low-ambiguity only."""
    rng = RngStream(derive_seed(settings.seed, "labeled_set"))
    return labeled_set_from_model(
        reference, gatekeeper, settings.labeled_set_draws, settings.clear_network_min, rng
    )


def build_choice_trials(
    settings: CohortSettings,
    participants: list[ParticipantModel],
    ambiguous: list[Stimulus],
) -> dict[str, list[tuple[Stimulus, int, int]]]:
    """One categorization choice (with confidence) per ambiguous stimulus."""
    return {
        p.label: choice_trials_from_model(
            p, ambiguous, RngStream(derive_seed(settings.seed, "choices", i))
        )
        for i, p in enumerate(participants)
    }


def elicit_prior(
    settings: CohortSettings,
    participant_idx: int,
    participant: ParticipantModel,
    gatekeeper: TableGatekeeper,
    budget: ProposerBudget | None = None,
) -> PriorEstimate:
    """Recover one participant's prior with one chain per category."""
    budget = budget or ProposerBudget()
    chains = []
    for k in range(settings.n_categories):
        chain_rng = RngStream(participant_chain_seed(settings.seed, participant_idx, k))
        choice_rng = RngStream(participant_choice_seed(settings.seed, participant_idx, k))
        state = init_chain(k, gatekeeper, budget, chain_rng, chain_id=f"c{k}")
        run_chain(state, participant, settings.trials_per_chain, gatekeeper, budget, choice_rng)
        chains.append(state)
    return pool(chains, settings.burn_in_fraction, settings.n_categories, CATEGORIES)


def build_ecological_counts(settings: CohortSettings) -> list[dict]:
    """Two synthetic corpora with mildly skewed label counts."""
    rng = np.random.default_rng(derive_seed(settings.seed, "ecological"))
    n_e = settings.n_categories
    out = []
    for size in (30_000, 21_216):
        skew = rng.dirichlet(np.full(n_e, 30.0))
        out.append(
            {"labels": list(CATEGORIES), "counts": rng.multinomial(size, skew).tolist()}
        )
    return out


def build_run_config(settings: CohortSettings) -> dict:
    """Emit the cohort as a CLI run-config document.

    ``simulate`` on this config reproduces :func:`elicit_prior` exactly, and
    its ``eval`` section drives the same comparisons as :func:`run_cohort`.
    """
    gatekeeper = build_gatekeeper(settings)
    return {
        "schema": 1,
        "categories": list(CATEGORIES),
        "space": {"kind": "discrete", "count": settings.n_stimuli},
        "gatekeeper": {"kind": "table", "rows": gatekeeper._rows.tolist()},
        "participants": [p.to_dict() for p in build_participants(settings)],
        "trials_per_chain": settings.trials_per_chain,
        "burn_in_fraction": settings.burn_in_fraction,
        "seed": settings.seed,
        "eval": {
            "ambiguous_threshold": settings.ambiguous_threshold,
            "clear_network_min": settings.clear_network_min,
            "labeled_set_draws": settings.labeled_set_draws,
            "reference": build_reference(settings).to_dict(),
            "ecological_counts": build_ecological_counts(settings),
        },
    }


def run_cohort(
    settings: CohortSettings,
    recovered: dict[str, PriorEstimate] | None = None,
) -> dict:
    """Full pipeline: elicit priors (unless given), then evaluate all predictors.

    Returns per-participant metric rows plus cohort means, shaped for JSON
    export.
    """
    gatekeeper = build_gatekeeper(settings)
    reference = build_reference(settings)
    participants = build_participants(settings)

    all_stimuli = enumerate_stimuli(gatekeeper.space)
    ambiguous = select_ambiguous(gatekeeper, all_stimuli, settings.ambiguous_threshold)
    labeled = build_labeled_set(settings, gatekeeper, reference)
    choice_trials = build_choice_trials(settings, participants, ambiguous)

    if recovered is None:
        recovered = {
            p.label: elicit_prior(settings, i, p, gatekeeper)
            for i, p in enumerate(participants)
        }

    avg = average_prior([recovered[p.label] for p in participants])
    eco = ecological_prior(build_ecological_counts(settings), CATEGORIES)
    network = PredictorSpec.network()

    label_freq = np.zeros(settings.n_categories)
    for _, e in labeled:
        label_freq[e] += 1
    label_freq /= max(label_freq.sum(), 1)

    rows = []
    for participant in participants:
        label = participant.label
        prior_i = recovered[label].probs
        fused_i = PredictorSpec.fused(prior_i, f"individual:{label}")
        prior_only_i = PredictorSpec.prior_only(prior_i, f"individual:{label}")
        fused_avg = PredictorSpec.fused(avg, "average")
        fused_eco = PredictorSpec.fused(eco, "ecological")

        trials = choice_trials[label]
        choice_targets = [(f, chosen) for f, chosen, _ in trials]
        sens = sensitivity_check(fused_i, gatekeeper, labeled)
        argmax_prior = int(np.argmax(prior_i.probs))
        rows.append(
            {
                "participant": label,
                "true_prior": participant.prior.to_list(),
                "recovered_prior": prior_i.to_list(),
                "acc_network": accuracy(network, gatekeeper, choice_targets),
                "acc_prior_only": accuracy(prior_only_i, gatekeeper, choice_targets),
                "acc_individual_fused": accuracy(fused_i, gatekeeper, choice_targets),
                "acc_average_fused": accuracy(fused_avg, gatekeeper, choice_targets),
                "acc_ecological_fused": accuracy(fused_eco, gatekeeper, choice_targets),
                "r_network": confidence_correlation(network, gatekeeper, trials),
                "r_individual_fused": confidence_correlation(fused_i, gatekeeper, trials),
                "sens_accuracy": sens["accuracy"],
                "sens_network_accuracy": sens["network_accuracy"],
                "sens_delta": sens["delta"],
                "sens_prior_only_accuracy": accuracy(prior_only_i, gatekeeper, labeled),
                "argmax_prior_label_freq": float(label_freq[argmax_prior]),
            }
        )

    def mean(key):
        return float(np.mean([r[key] for r in rows]))

    return {
        "settings": {
            "n_participants": settings.n_participants,
            "seed": settings.seed,
            "trials_per_chain": settings.trials_per_chain,
            "ambiguous_threshold": settings.ambiguous_threshold,
        },
        "n_ambiguous": len(ambiguous),
        "n_labeled": len(labeled),
        "participants": rows,
        "means": {
            key: mean(key)
            for key in (
                "acc_network",
                "acc_prior_only",
                "acc_individual_fused",
                "acc_average_fused",
                "acc_ecological_fused",
                "r_network",
                "r_individual_fused",
                "sens_delta",
                "sens_accuracy",
                "sens_network_accuracy",
                "sens_prior_only_accuracy",
            )
        },
        "max_abs_sens_delta": float(max(abs(r["sens_delta"]) for r in rows)),
    }
