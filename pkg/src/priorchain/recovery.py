"""Prior recovery by inverse-classifier reweighting, plus chain diagnostics.

The chain's category samples follow the product of the responder's posterior
and the classifier's proposal mass; dividing each sample by the classifier
probability that produced it removes the classifier's influence and leaves
the responder's prior. Diagnostics cover per-category effective sample size,
per-chain agreement, and acceptance rates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import EPS, Categorical, total_variation
from .errors import EmptyError
from .chain import ChainState, SampleRecord


@dataclass(frozen=True)
class PriorEstimate:
    """Reweighted, normalized category distribution with diagnostics."""

    probs: Categorical
    ess: tuple[float, ...]
    per_chain: dict[str, tuple[float, ...]]
    burn_in: int
    n_samples: int
    diagnostics: dict
    labels: tuple[str, ...] | None = None

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels) if self.labels else None,
            "probs": self.probs.to_list(),
            "ess": list(self.ess),
            "per_chain": {k: list(v) for k, v in self.per_chain.items()},
            "burn_in": self.burn_in,
            "n_samples": self.n_samples,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PriorEstimate":
        return cls(
            probs=Categorical(d["probs"]),
            ess=tuple(d["ess"]),
            per_chain={k: tuple(v) for k, v in d["per_chain"].items()},
            burn_in=int(d["burn_in"]),
            n_samples=int(d["n_samples"]),
            diagnostics=dict(d["diagnostics"]),
            labels=tuple(d["labels"]) if d.get("labels") else None,
        )


def _weighted_marginal(samples: Sequence[SampleRecord], n_categories: int) -> np.ndarray:
    weights = np.zeros(n_categories)
    for s in samples:
        weights[s.e] += 1.0 / max(s.gatekeeper_prob, EPS)
    return weights


def _category_ess(samples: Sequence[SampleRecord], n_categories: int) -> list[float]:
    w_sum = np.zeros(n_categories)
    w_sq = np.zeros(n_categories)
    for s in samples:
        w = 1.0 / max(s.gatekeeper_prob, EPS)
        w_sum[s.e] += w
        w_sq[s.e] += w * w
    with np.errstate(invalid="ignore", divide="ignore"):
        ess = np.where(w_sq > 0, w_sum**2 / w_sq, 0.0)
    return [float(x) for x in ess]


def reweight(
    samples: Sequence[SampleRecord],
    burn_in: int,
    n_categories: int,
    labels: Sequence[str] | None = None,
) -> PriorEstimate:
    """Estimate the prior from samples, dropping the first ``burn_in``.

    Each retained sample of category e contributes 1/gatekeeper_prob to that
    category's mass; the result is normalized. Per-chain estimates are
    computed from the chain ids carried by the records, and their maximum
    pairwise total-variation distance is reported as a mixing diagnostic.
    """
    retained = list(samples[burn_in:])
    if not retained:
        raise EmptyError(f"burn-in {burn_in} removes all {len(samples)} samples")

    weights = _weighted_marginal(retained, n_categories)
    probs = Categorical(weights / weights.sum())

    per_chain: dict[str, tuple[float, ...]] = {}
    by_chain: dict[str, list[SampleRecord]] = {}
    for s in retained:
        by_chain.setdefault(s.chain_id, []).append(s)
    for cid in sorted(by_chain):
        w = _weighted_marginal(by_chain[cid], n_categories)
        per_chain[cid] = tuple(float(x) for x in w / w.sum())

    estimates = list(per_chain.values())
    max_tv = 0.0
    for i in range(len(estimates)):
        for j in range(i + 1, len(estimates)):
            max_tv = max(
                max_tv, total_variation(np.array(estimates[i]), np.array(estimates[j]))
            )

    return PriorEstimate(
        probs=probs,
        ess=tuple(_category_ess(retained, n_categories)),
        per_chain=per_chain,
        burn_in=burn_in,
        n_samples=len(retained),
        diagnostics={"max_pairwise_tv": max_tv, "n_chains": len(per_chain)},
        labels=tuple(labels) if labels is not None else None,
    )


def pool(
    chains: Sequence[ChainState],
    burn_in_fraction: float,
    n_categories: int,
    labels: Sequence[str] | None = None,
) -> PriorEstimate:
    """Pool several chains: per-chain burn-in drop, then one reweighted estimate."""
    if not chains:
        raise EmptyError("no chains to pool")
    if not 0.0 <= burn_in_fraction <= 1.0:
        raise EmptyError(f"burn_in_fraction must be in [0, 1], got {burn_in_fraction}")
    retained: list[SampleRecord] = []
    dropped = 0
    for chain in chains:
        cut = int(len(chain.samples) * burn_in_fraction)
        retained.extend(chain.samples[cut:])
        dropped += cut
    if not retained:
        raise EmptyError("burn-in removed every sample")
    estimate = reweight(retained, 0, n_categories, labels)
    return PriorEstimate(
        probs=estimate.probs,
        ess=estimate.ess,
        per_chain=estimate.per_chain,
        burn_in=dropped,
        n_samples=estimate.n_samples,
        diagnostics=estimate.diagnostics,
        labels=estimate.labels,
    )


def acceptance_stats(chain: ChainState) -> dict:
    """Per-block acceptance rates and the auto-accept rate of one chain."""
    cat_events = chain.n_cat_trials + chain.n_auto
    return {
        "face_trials": chain.n_face_trials,
        "face_acceptance": (
            chain.n_face_accepts / chain.n_face_trials if chain.n_face_trials else 0.0
        ),
        "cat_trials": chain.n_cat_trials,
        "cat_acceptance": (
            chain.n_cat_accepts / chain.n_cat_trials if chain.n_cat_trials else 0.0
        ),
        "auto_accept_rate": chain.n_auto / cat_events if cat_events else 0.0,
    }
