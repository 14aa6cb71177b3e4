"""Gatekeeper classifiers and the stimulus proposer derived from them.

A gatekeeper supplies two proposal roles for the chain engine: the category
distribution it assigns to a stimulus, and a stimulus proposer that draws
from the (normalized) classifier column of a category. Three variants:

* ``TableGatekeeper`` -- explicit per-stimulus rows over a discrete space
* ``SoftmaxGatekeeper`` -- linear scores over continuous coordinates
* ``ExternalGatekeeper`` -- a remote classifier behind the JSON wire protocol

Classifier outputs are clamped to ``CLASSIFY_FLOOR`` and renormalized, so the
reweighting weights 1/prob used downstream are always finite and bounded by
``1 / CLASSIFY_FLOOR``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import requests

from .core import Categorical, RngStream, Stimulus, floor_normalize
from .errors import (
    ExternalUnavailableError,
    InvalidValueError,
    MalformedReplyError,
    NotNormalizedError,
    OutOfBoundsError,
)
from .stimulus import StimulusSpace, enumerate_stimuli

# Floor on classifier output probabilities; keeps 1/prob weights <= 1e6.
CLASSIFY_FLOOR = 1e-6

DEFAULT_TIMEOUT = 10.0


@dataclass(frozen=True)
class ProposerBudget:
    """Inner-sampler effort for continuous stimulus proposals."""

    inner_steps: int = 200
    step_scale: float = 0.5

    def __post_init__(self):
        if self.inner_steps < 1:
            raise InvalidValueError(f"inner_steps must be >= 1, got {self.inner_steps}")
        if not self.step_scale > 0:
            raise InvalidValueError(f"step_scale must be > 0, got {self.step_scale}")


class Gatekeeper:
    """Base classifier/proposer pair over a stimulus space."""

    space: StimulusSpace
    n_categories: int

    def classify(self, f: Stimulus) -> Categorical:
        """Floored, normalized category distribution for an in-bounds stimulus."""
        raise NotImplementedError

    def classify_prob(self, f: Stimulus, e: int) -> float:
        """Single entry of classify(f); overridable as a hot-loop shortcut."""
        return self.classify(f)[e]

    def classify_cdf(self, f: Stimulus) -> np.ndarray:
        """Cumulative form of classify(f) for category-proposal sampling."""
        return np.cumsum(self.classify(f).probs)

    def _check_in_space(self, f: Stimulus) -> None:
        if not self.space.contains(f):
            raise OutOfBoundsError(f"stimulus {f} outside gatekeeper space")

    # -- stimulus proposal ----------------------------------------------

    def propose_stimulus(self, e: int, budget: ProposerBudget, rng: RngStream) -> Stimulus:
        """Draw a stimulus from the classifier column of category ``e``.

        Discrete spaces sample the exactly normalized column. Continuous
        spaces run a fresh inner random-walk chain from a uniform start, so
        the draw is independent of any outer chain state.
        """
        if not 0 <= e < self.n_categories:
            raise InvalidValueError(f"category index {e} out of range")
        if self.space.is_discrete:
            cdf = self._column_cdf(e)
            return Stimulus(id=rng.index_from_cdf(cdf))
        return self._propose_continuous(e, budget, rng)

    def _column_cdf(self, e: int) -> np.ndarray:
        cache = getattr(self, "_cdf_cache", None)
        if cache is None:
            cache = {}
            self._cdf_cache = cache
        if e not in cache:
            col = np.array(
                [self.classify(s)[e] for s in enumerate_stimuli(self.space)]
            )
            cache[e] = np.cumsum(col / col.sum())
        return cache[e]

    def _probs_at_coords(self, coords: np.ndarray) -> np.ndarray:
        return self.classify(Stimulus(vector=tuple(coords))).probs

    def _propose_continuous(self, e: int, budget: ProposerBudget, rng: RngStream) -> Stimulus:
        space = self.space
        dim = space.dim
        lo = np.array([b[0] for b in space.bounds])
        hi = np.array([b[1] for b in space.bounds])
        # Fixed RNG consumption regardless of the acceptance pattern.
        start = lo + rng.uniforms(dim) * (hi - lo)
        steps = rng.normals(budget.inner_steps * dim).reshape(budget.inner_steps, dim)
        steps *= budget.step_scale
        accept_us = rng.uniforms(budget.inner_steps)

        x = start
        px = self._probs_at_coords(x)[e]
        for i in range(budget.inner_steps):
            y = x + steps[i]
            if np.any(y < lo) or np.any(y > hi):
                continue
            py = self._probs_at_coords(y)[e]
            if accept_us[i] * px < py:  # min(1, py/px); px > 0 by the floor
                x, px = y, py
        return Stimulus(vector=tuple(x))


class TableGatekeeper(Gatekeeper):
    """Explicit classifier table: one category row per discrete stimulus."""

    def __init__(self, space: StimulusSpace, rows):
        if not space.is_discrete:
            raise InvalidValueError("table gatekeeper requires a discrete space")
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] != space.count:
            raise InvalidValueError(
                f"need one row per stimulus: {rows.shape} vs count {space.count}"
            )
        self.space = space
        self.n_categories = rows.shape[1]
        self._rows = np.stack(
            [floor_normalize(r, CLASSIFY_FLOOR).probs for r in rows]
        )
        self._row_cdfs = np.cumsum(self._rows, axis=1)

    def classify(self, f: Stimulus) -> Categorical:
        self._check_in_space(f)
        return Categorical(self._rows[f.id])

    def classify_prob(self, f: Stimulus, e: int) -> float:
        self._check_in_space(f)
        return float(self._rows[f.id, e])

    def classify_cdf(self, f: Stimulus) -> np.ndarray:
        self._check_in_space(f)
        return self._row_cdfs[f.id]


class SoftmaxGatekeeper(Gatekeeper):
    """Linear-score classifier over continuous coordinates."""

    def __init__(self, space: StimulusSpace, weights, biases):
        if space.is_discrete:
            raise InvalidValueError("softmax gatekeeper requires a continuous space")
        self.space = space
        self.weights = np.asarray(weights, dtype=float)  # (n_categories, dim)
        self.biases = np.asarray(biases, dtype=float)
        if self.weights.ndim != 2 or self.weights.shape[1] != space.dim:
            raise InvalidValueError(f"weights shape {self.weights.shape} vs dim {space.dim}")
        if self.biases.shape != (self.weights.shape[0],):
            raise InvalidValueError("one bias per category required")
        self.n_categories = self.weights.shape[0]

    def classify(self, f: Stimulus) -> Categorical:
        self._check_in_space(f)
        return Categorical(self._probs_at_coords(f.coords))

    def _probs_at_coords(self, coords: np.ndarray) -> np.ndarray:
        scores = self.weights @ coords + self.biases
        scores -= scores.max()
        return floor_normalize(np.exp(scores), CLASSIFY_FLOOR).probs


def external_classify(
    endpoint: str,
    f: Stimulus,
    n_categories: int,
    timeout: float = DEFAULT_TIMEOUT,
) -> Categorical:
    """One classification request against the external wire protocol.

    Request: ``{"stimulus": [floats], "nuisance_seed": int}``; reply:
    ``{"probs": [floats]}`` aligned with the configured category set. Replies
    more than 1e-6 off unit sum are rejected rather than silently fixed.
    """
    payload = {
        "stimulus": [float(f.id)] if f.is_discrete else list(f.vector),
        "nuisance_seed": f.nuisance_seed,
    }
    try:
        resp = requests.post(endpoint, json=payload, timeout=timeout)
        resp.raise_for_status()
        body = resp.json()
    except (requests.ConnectionError, requests.Timeout) as exc:
        raise ExternalUnavailableError(f"classifier endpoint unreachable: {exc}") from exc
    except requests.HTTPError as exc:
        raise ExternalUnavailableError(f"classifier endpoint error: {exc}") from exc
    except ValueError as exc:
        raise MalformedReplyError(f"reply is not JSON: {exc}") from exc

    if not isinstance(body, dict) or "probs" not in body:
        raise MalformedReplyError(f"reply missing 'probs': {body!r}")
    probs = body["probs"]
    if (
        not isinstance(probs, list)
        or len(probs) != n_categories
        or not all(isinstance(p, (int, float)) for p in probs)
    ):
        raise MalformedReplyError(f"bad probs field: {probs!r}")
    arr = np.asarray(probs, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise MalformedReplyError(f"probs must be finite and non-negative: {probs!r}")
    if abs(float(arr.sum()) - 1.0) > 1e-6:
        raise NotNormalizedError(f"probs sum to {arr.sum()!r}")
    return floor_normalize(arr, CLASSIFY_FLOOR)


class ExternalGatekeeper(Gatekeeper):
    """Remote classifier spoken to over HTTP POST, one JSON message per call."""

    def __init__(
        self,
        space: StimulusSpace,
        endpoint: str,
        n_categories: int,
        timeout: float = DEFAULT_TIMEOUT,
    ):
        self.space = space
        self.endpoint = endpoint
        self.n_categories = n_categories
        self.timeout = timeout

    def classify(self, f: Stimulus) -> Categorical:
        self._check_in_space(f)
        return external_classify(self.endpoint, f, self.n_categories, self.timeout)
