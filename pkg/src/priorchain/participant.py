"""Simulated responders: a prior over categories plus a stimulus likelihood.

A participant model answers the two trial types by probability matching: the
Barker rule applied to its likelihood (stimulus choices) or to its posterior
(category choices). Human responders produce the same :class:`Choice` values
through the session service, so the chain engine never knows the source.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import Categorical, RngStream, Stimulus, barker_accept_prob, normalize
from .errors import InvalidValueError, OutOfBoundsError, SameCategoryError

logger = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class Choice:
    """One two-alternative decision. ``picked``: 0 = current, 1 = proposal.

    ``confidence`` (1-7) is present exactly on categorization trials.
    """

    picked: int
    confidence: int | None = None
    latency_ms: float | None = None

    def __post_init__(self):
        if self.picked not in (0, 1):
            raise InvalidValueError(f"picked must be 0 or 1, got {self.picked}")
        if self.confidence is not None and not 1 <= self.confidence <= 7:
            raise InvalidValueError(f"confidence must be in 1..7, got {self.confidence}")


class DiscreteLikelihood:
    """Per-category distribution over a finite stimulus table."""

    kind = "discrete"

    def __init__(self, rows):
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2:
            raise InvalidValueError("likelihood rows must be a 2-d table")
        if np.any(rows < 0) or not np.all(np.isfinite(rows)):
            raise InvalidValueError("likelihood entries must be finite and >= 0")
        sums = rows.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
            raise InvalidValueError(f"likelihood rows must each sum to 1, got {sums}")
        self.rows = rows
        self.n_categories, self.n_stimuli = rows.shape

    def at(self, f: Stimulus, e: int) -> float:
        if not f.is_discrete or not 0 <= f.id < self.n_stimuli:
            raise OutOfBoundsError(f"stimulus {f} outside likelihood table")
        return float(self.rows[e, f.id])

    def column(self, f: Stimulus) -> np.ndarray:
        if not f.is_discrete or not 0 <= f.id < self.n_stimuli:
            raise OutOfBoundsError(f"stimulus {f} outside likelihood table")
        return self.rows[:, f.id]

    def to_dict(self) -> dict:
        return {"kind": "discrete", "rows": self.rows.tolist()}


class GaussianLikelihood:
    """Per-category diagonal multivariate normal over continuous coordinates."""

    kind = "gaussian"

    def __init__(self, means, variances):
        self.means = np.asarray(means, dtype=float)
        self.variances = np.asarray(variances, dtype=float)
        if self.means.shape != self.variances.shape or self.means.ndim != 2:
            raise InvalidValueError("means and variances must share shape (n_categories, dim)")
        if np.any(self.variances <= 0):
            raise InvalidValueError("variances must be > 0")
        self.n_categories, self.dim = self.means.shape
        # log of (2 pi)^(d/2) * prod(sigma) per category
        self._log_norm = 0.5 * (
            self.dim * math.log(2 * math.pi) + np.log(self.variances).sum(axis=1)
        )

    def at(self, f: Stimulus, e: int) -> float:
        x = f.coords
        if x.shape != (self.dim,):
            raise OutOfBoundsError(f"stimulus dim {x.shape} vs likelihood dim {self.dim}")
        z = (x - self.means[e]) ** 2 / self.variances[e]
        return float(np.exp(-0.5 * z.sum() - self._log_norm[e]))

    def column(self, f: Stimulus) -> np.ndarray:
        x = f.coords
        if x.shape != (self.dim,):
            raise OutOfBoundsError(f"stimulus dim {x.shape} vs likelihood dim {self.dim}")
        z = ((x[None, :] - self.means) ** 2 / self.variances).sum(axis=1)
        return np.exp(-0.5 * z - self._log_norm)

    def to_dict(self) -> dict:
        return {
            "kind": "gaussian",
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
        }


def likelihood_from_dict(d: dict):
    if d["kind"] == "discrete":
        return DiscreteLikelihood(d["rows"])
    if d["kind"] == "gaussian":
        return GaussianLikelihood(d["means"], d["variances"])
    raise InvalidValueError(f"unknown likelihood kind {d['kind']!r}")


class ParticipantModel:
    """True prior plus likelihood family for one simulated responder."""

    def __init__(self, prior: Categorical, likelihood, label: str = "sim"):
        if likelihood.n_categories != len(prior):
            raise InvalidValueError(
                f"likelihood covers {likelihood.n_categories} categories, prior {len(prior)}"
            )
        self.prior = prior
        self.likelihood = likelihood
        self.label = label
        self._posterior_cache: dict[int, Categorical] = {}

    def likelihood_at(self, f: Stimulus, e: int) -> float:
        """Mass (discrete) or density (continuous) of f under category e."""
        if not 0 <= e < len(self.prior):
            raise InvalidValueError(f"category index {e} out of range")
        return self.likelihood.at(f, e)

    def posterior(self, f: Stimulus) -> Categorical:
        """Normalized prior-times-likelihood over categories at f."""
        key = f.id if f.is_discrete else None
        if key is not None and key in self._posterior_cache:
            return self._posterior_cache[key]
        weights = self.prior.probs * self.likelihood.column(f)
        if float(weights.sum()) == 0.0:
            # Extreme tails can underflow every product; treat as uninformative.
            logger.warning("posterior underflow at %s; returning uniform", f)
            post = Categorical(np.full(len(self.prior), 1.0 / len(self.prior)))
        else:
            post = normalize(weights)
        if key is not None:
            self._posterior_cache[key] = post
        return post

    def choose_face(
        self, e: int, f_current: Stimulus, f_proposal: Stimulus, rng: RngStream
    ) -> Choice:
        """Pick the stimulus that better matches category e (Barker matching)."""
        p_accept = barker_accept_prob(
            self.likelihood_at(f_current, e), self.likelihood_at(f_proposal, e)
        )
        return Choice(picked=int(rng.uniform() < p_accept))

    def choose_category(
        self, f: Stimulus, e_current: int, e_proposal: int, rng: RngStream
    ) -> Choice:
        """Pick the category that better describes f; report 1-7 confidence."""
        if e_current == e_proposal:
            raise SameCategoryError(f"both options are category {e_current}")
        post = self.posterior(f)
        p_accept = barker_accept_prob(post[e_current], post[e_proposal])
        picked = int(rng.uniform() < p_accept)
        chosen = e_proposal if picked else e_current
        return Choice(picked=picked, confidence=confidence_rating(post[chosen]))

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "prior": self.prior.to_list(),
            "likelihood": self.likelihood.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParticipantModel":
        return cls(
            prior=Categorical(d["prior"]),
            likelihood=likelihood_from_dict(d["likelihood"]),
            label=d.get("label", "sim"),
        )


def confidence_rating(posterior_mass: float) -> int:
    """Deterministic 1-7 rating from the picked option's posterior mass."""
    return 1 + round(6 * posterior_mass)
