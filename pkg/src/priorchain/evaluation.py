"""Predictor fusion and comparison: classifier, priors, and their products.

Implements the model family compared in the evaluation harness: the
classifier alone, a prior alone, and the renormalized product of the two,
with priors sourced per individual, averaged across individuals, or derived
from ecological label counts. Metrics: choice-prediction accuracy on
ambiguous stimuli, correlation between model probability and reported
confidence, and a ground-truth sensitivity check on unambiguous stimuli.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Categorical, Stimulus, normalize
from .errors import (
    AllZeroError,
    DegenerateVarianceError,
    EmptyError,
    InvalidValueError,
    MismatchedCategoriesError,
    MissingCategoryError,
)
from .gatekeeper import Gatekeeper
from .recovery import PriorEstimate

logger = logging.getLogger(__name__)

NETWORK_ONLY = "network"
PRIOR_ONLY = "prior"
PRIOR_TIMES_NETWORK = "prior_times_network"


@dataclass(frozen=True)
class PredictorSpec:
    """One predictor: the classifier, a prior, or their fused product."""

    variant: str
    prior: Categorical | None = None
    source: str = ""

    def __post_init__(self):
        if self.variant not in (NETWORK_ONLY, PRIOR_ONLY, PRIOR_TIMES_NETWORK):
            raise InvalidValueError(f"unknown predictor variant {self.variant!r}")
        if self.variant != NETWORK_ONLY and self.prior is None:
            raise InvalidValueError(f"{self.variant} predictor requires a prior")

    @classmethod
    def network(cls) -> "PredictorSpec":
        return cls(NETWORK_ONLY)

    @classmethod
    def prior_only(cls, prior: Categorical, source: str = "") -> "PredictorSpec":
        return cls(PRIOR_ONLY, prior, source)

    @classmethod
    def fused(cls, prior: Categorical, source: str = "") -> "PredictorSpec":
        return cls(PRIOR_TIMES_NETWORK, prior, source)


def predict(spec: PredictorSpec, gatekeeper: Gatekeeper, f: Stimulus) -> Categorical:
    """Predicted category distribution for a stimulus."""
    if spec.variant == NETWORK_ONLY:
        return gatekeeper.classify(f)
    if spec.variant == PRIOR_ONLY:
        return spec.prior
    fused = spec.prior.probs * gatekeeper.classify(f).probs
    return normalize(fused)


def predict_argmax(spec: PredictorSpec, gatekeeper: Gatekeeper, f: Stimulus) -> int:
    """Argmax prediction; ties break to the lowest category index."""
    probs = predict(spec, gatekeeper, f).probs
    best = int(np.argmax(probs))
    n_max = int(np.sum(probs == probs[best]))
    if n_max > 1:
        logger.debug("argmax tie (%d categories) at %s", n_max, f)
    return best


def select_ambiguous(
    gatekeeper: Gatekeeper, stimuli: Sequence[Stimulus], threshold: float
) -> list[Stimulus]:
    """Stimuli whose maximum classifier probability is below ``threshold``."""
    n = gatekeeper.n_categories
    if not 1.0 / n < threshold <= 1.0:
        raise InvalidValueError(
            f"threshold must be in (1/{n}, 1], got {threshold}"
        )
    return [
        f for f in stimuli if float(gatekeeper.classify(f).probs.max()) < threshold
    ]


def accuracy(
    spec: PredictorSpec,
    gatekeeper: Gatekeeper,
    trials: Sequence[tuple[Stimulus, int]],
) -> float:
    """Fraction of trials where the argmax prediction matches the target.

    Targets may be recorded participant choices or ground-truth labels.
    """
    if not trials:
        raise EmptyError("no trials to score")
    hits = sum(predict_argmax(spec, gatekeeper, f) == target for f, target in trials)
    return hits / len(trials)


def confidence_correlation(
    spec: PredictorSpec,
    gatekeeper: Gatekeeper,
    trials: Sequence[tuple[Stimulus, int, int]],
) -> float:
    """Pearson r between predicted probability of the target and confidence.

    ``trials`` rows are (stimulus, target category, reported confidence 1-7).
    """
    if len(trials) < 3:
        raise EmptyError(f"need >= 3 trials for a correlation, got {len(trials)}")
    probs = np.array([predict(spec, gatekeeper, f)[target] for f, target, _ in trials])
    confs = np.array([float(c) for _, _, c in trials])
    if probs.std() == 0.0 or confs.std() == 0.0:
        raise DegenerateVarianceError("zero variance on one side of the correlation")
    return float(np.corrcoef(probs, confs)[0, 1])


def sensitivity_check(
    spec: PredictorSpec,
    gatekeeper: Gatekeeper,
    labeled: Sequence[tuple[Stimulus, int]],
) -> dict:
    """Ground-truth accuracy on unambiguous stimuli, vs the classifier alone."""
    acc = accuracy(spec, gatekeeper, labeled)
    network_acc = accuracy(PredictorSpec.network(), gatekeeper, labeled)
    return {
        "accuracy": acc,
        "network_accuracy": network_acc,
        "delta": acc - network_acc,
    }


def ecological_prior(count_sets: Sequence[dict], labels: Sequence[str]) -> Categorical:
    """Pool per-category label counts from several corpora into one prior.

    Each count set is ``{"labels": [...], "counts": [...]}``. Summing raw
    counts weights every corpus by its own size.
    """
    if not count_sets:
        raise EmptyError("no count sets given")
    totals = np.zeros(len(labels))
    for cs in count_sets:
        cs_index = {name: i for i, name in enumerate(cs.get("labels", []))}
        counts = cs.get("counts", [])
        for j, name in enumerate(labels):
            if name not in cs_index:
                raise MissingCategoryError(f"count set missing category {name!r}")
            value = float(counts[cs_index[name]])
            if value < 0:
                raise InvalidValueError(f"negative count for {name!r}")
            totals[j] += value
    if totals.sum() == 0:
        raise AllZeroError("all counts are zero")
    return normalize(totals)


def labeled_set_from_model(
    reference,
    gatekeeper: Gatekeeper,
    n_draws: int,
    min_network_max: float,
    rng,
) -> list[tuple[Stimulus, int]]:
    """Ground-truth (stimulus, label) pairs sampled from a generative model.

    Draws a label uniformly, a stimulus from the model's likelihood row, and
    keeps the pair when the classifier is confident on the stimulus (the
    low-ambiguity pool).
    """
    n_e = len(reference.prior)
    labeled = []
    for _ in range(n_draws):
        e = rng.integer(n_e)
        row = reference.likelihood.rows[e]
        f = Stimulus(id=rng.index_from_cdf(np.cumsum(row)))
        if float(gatekeeper.classify(f).probs.max()) >= min_network_max:
            labeled.append((f, e))
    return labeled


def choice_trials_from_model(
    participant,
    stimuli: Sequence[Stimulus],
    rng,
) -> list[tuple[Stimulus, int, int]]:
    """One posterior-matched categorization choice per stimulus, with confidence."""
    from .participant import confidence_rating

    rows = []
    for f in stimuli:
        post = participant.posterior(f)
        chosen = rng.index_from_cdf(np.cumsum(post.probs))
        rows.append((f, chosen, confidence_rating(post[chosen])))
    return rows


def average_prior(priors: Sequence[PriorEstimate | Categorical]) -> Categorical:
    """Element-wise mean of individual priors, renormalized."""
    if not priors:
        raise EmptyError("no priors to average")
    vectors = []
    labels_seen = None
    for p in priors:
        if isinstance(p, PriorEstimate):
            if p.labels is not None:
                if labels_seen is not None and p.labels != labels_seen:
                    raise MismatchedCategoriesError(
                        f"label sets differ: {labels_seen} vs {p.labels}"
                    )
                labels_seen = p.labels
            vectors.append(p.probs.probs)
        else:
            vectors.append(p.probs)
    lengths = {len(v) for v in vectors}
    if len(lengths) != 1:
        raise MismatchedCategoriesError(f"priors have differing lengths {lengths}")
    return normalize(np.mean(vectors, axis=0))
