"""Foundational value types, probability helpers, and the Barker choice rule.

Everything here is an immutable value: category sets, stimuli, categorical
distributions, and a replayable random stream. All stochastic operations in
the package take an explicit :class:`RngStream` so any run can be reproduced
from its seed and counter alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtri

from .errors import AllZeroError, InvalidValueError

# Floor applied to probabilities before they are used as divisors anywhere in
# the package.
EPS = 1e-9

# Tolerance on the sum of a categorical distribution.
SUM_TOL = 1e-9


@dataclass(frozen=True)
class CategorySet:
    """Ordered, unique category labels with contiguous indices from 0."""

    labels: tuple[str, ...]

    def __init__(self, labels: Iterable[str]):
        labels = tuple(labels)
        if not labels:
            raise InvalidValueError("category set must be non-empty")
        if len(set(labels)) != len(labels):
            raise InvalidValueError(f"duplicate category labels: {labels}")
        object.__setattr__(self, "labels", labels)

    @property
    def index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.labels)}

    def index_of(self, name: str) -> int:
        try:
            return self.labels.index(name)
        except ValueError:
            raise InvalidValueError(f"unknown category {name!r}") from None

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)


@dataclass(frozen=True)
class Stimulus:
    """A stimulus: either an index into a discrete table or a coordinate vector.

    ``nuisance_seed`` only affects rendering (the identity-like surface
    features); no probability computation in the package reads it.
    """

    id: int | None = None
    vector: tuple[float, ...] | None = None
    nuisance_seed: int = 0

    def __post_init__(self):
        if (self.id is None) == (self.vector is None):
            raise InvalidValueError("exactly one of id/vector must be set")
        if self.vector is not None:
            vec = tuple(float(x) for x in self.vector)
            if any(not np.isfinite(x) for x in vec):
                raise InvalidValueError(f"non-finite stimulus coordinates: {vec}")
            object.__setattr__(self, "vector", vec)

    @property
    def is_discrete(self) -> bool:
        return self.id is not None

    @property
    def coords(self) -> np.ndarray:
        if self.vector is None:
            raise InvalidValueError("discrete stimulus has no coordinates")
        return np.asarray(self.vector, dtype=float)

    def with_nuisance(self, nuisance_seed: int) -> "Stimulus":
        return Stimulus(id=self.id, vector=self.vector, nuisance_seed=nuisance_seed)

    def to_dict(self) -> dict:
        if self.id is not None:
            return {"id": self.id, "nuisance_seed": self.nuisance_seed}
        return {"vector": list(self.vector), "nuisance_seed": self.nuisance_seed}

    @classmethod
    def from_dict(cls, d: dict) -> "Stimulus":
        return cls(
            id=d.get("id"),
            vector=tuple(d["vector"]) if d.get("vector") is not None else None,
            nuisance_seed=int(d.get("nuisance_seed", 0)),
        )


def _as_prob_array(weights: Sequence[float] | np.ndarray) -> np.ndarray:
    arr = np.asarray(weights, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidValueError(f"expected a non-empty 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidValueError("weights contain NaN or infinite entries")
    if np.any(arr < 0):
        raise InvalidValueError("weights contain negative entries")
    return arr


@dataclass(frozen=True, eq=False)
class Categorical:
    """A probability vector aligned with a :class:`CategorySet`.

    Entries are non-negative and sum to 1 within ``SUM_TOL``.
    """

    probs: np.ndarray

    def __init__(self, probs: Sequence[float] | np.ndarray):
        arr = _as_prob_array(probs)
        if abs(float(arr.sum()) - 1.0) > SUM_TOL:
            raise InvalidValueError(f"probabilities sum to {arr.sum()!r}, not 1")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "probs", arr)

    def __len__(self) -> int:
        return len(self.probs)

    def __getitem__(self, i: int) -> float:
        return float(self.probs[i])

    def __eq__(self, other) -> bool:
        return isinstance(other, Categorical) and np.array_equal(self.probs, other.probs)

    def to_list(self) -> list[float]:
        return [float(x) for x in self.probs]


def normalize(weights: Sequence[float] | np.ndarray) -> Categorical:
    """Scale non-negative weights into a Categorical.

    Inputs that already sum to 1 within ``SUM_TOL`` are returned unchanged,
    which makes normalize exactly idempotent: one division always lands within
    a few ulps of 1, far inside the tolerance.
    """
    arr = _as_prob_array(weights)
    s = float(arr.sum())
    if s == 0.0:
        raise AllZeroError("cannot normalize an all-zero weight vector")
    if abs(s - 1.0) > SUM_TOL:
        arr = arr / s
    return Categorical(arr)


def floor_normalize(weights: Sequence[float] | np.ndarray, floor: float) -> Categorical:
    """Normalize with every output entry guaranteed >= ``floor``.

    The post-normalization deficit (at most ``n * floor**2``) is absorbed by
    the largest entry so the sum stays exactly 1 to float precision.
    """
    arr = _as_prob_array(weights)
    if float(arr.sum()) == 0.0:
        raise AllZeroError("cannot normalize an all-zero weight vector")
    if floor * len(arr) >= 1.0:
        raise InvalidValueError(f"floor {floor} too large for {len(arr)} entries")
    # already a floored categorical: return unchanged so round-trips are exact
    if abs(float(arr.sum()) - 1.0) <= SUM_TOL and float(arr.min()) >= floor:
        return Categorical(arr)
    p = np.maximum(arr / arr.sum(), floor)
    p = p / p.sum()
    if np.any(p < floor):
        p = np.maximum(p, floor)
        p[int(np.argmax(p))] -= p.sum() - 1.0
    return Categorical(p)


def barker_accept_prob(p_current: float, p_proposal: float) -> float:
    """Probability of choosing the proposal under the Barker matching rule.

    Returns ``p_proposal / (p_current + p_proposal)``; the (0, 0) case is
    defined as 0.5 (indifference) so a chain can never stall. Computed so the
    complement identity ``barker(a, b) + barker(b, a) == 1`` holds exactly.
    """
    for name, v in (("p_current", p_current), ("p_proposal", p_proposal)):
        if not np.isfinite(v) or v < 0:
            raise InvalidValueError(f"{name} must be finite and >= 0, got {v!r}")
    if p_current == 0.0 and p_proposal == 0.0:
        return 0.5
    s = p_current + p_proposal
    lo = min(p_current, p_proposal)
    q_lo = lo / s
    return q_lo if p_proposal == lo else 1.0 - q_lo


def total_variation(p: Categorical | np.ndarray, q: Categorical | np.ndarray) -> float:
    """TV distance: half the L1 distance between two distributions."""
    pa = p.probs if isinstance(p, Categorical) else np.asarray(p, dtype=float)
    qa = q.probs if isinstance(q, Categorical) else np.asarray(q, dtype=float)
    if pa.shape != qa.shape:
        raise InvalidValueError(f"shape mismatch {pa.shape} vs {qa.shape}")
    return float(np.abs(pa - qa).sum() / 2.0)


_DISCARD_CHUNK = 1 << 20


class RngStream:
    """Counter-based replayable random stream.

    Wraps a Philox generator keyed by ``seed``; ``counter`` is the number of
    uniform doubles consumed so far. Every operation consumes a fixed, known
    number of doubles, so ``(seed, counter)`` fully determines the stream
    state and ``RngStream(seed, counter)`` reconstructs it exactly.
    """

    __slots__ = ("seed", "counter", "_gen")

    def __init__(self, seed: int, counter: int = 0):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise InvalidValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        if counter < 0:
            raise InvalidValueError(f"counter must be >= 0, got {counter}")
        self.seed = seed
        self.counter = int(counter)
        self._gen = np.random.Generator(np.random.Philox(key=seed))
        remaining = self.counter
        while remaining > 0:
            k = min(remaining, _DISCARD_CHUNK)
            self._gen.random(k)
            remaining -= k

    def uniform(self) -> float:
        """One double in [0, 1)."""
        self.counter += 1
        return float(self._gen.random())

    def uniforms(self, n: int) -> np.ndarray:
        self.counter += n
        return self._gen.random(n)

    def coin(self) -> int:
        """Fair coin: 0 or 1."""
        return int(self.uniform() < 0.5)

    def integer(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n < 1:
            raise InvalidValueError(f"need n >= 1, got {n}")
        return min(int(self.uniform() * n), n - 1)

    def normals(self, n: int) -> np.ndarray:
        """Standard normals via inverse CDF, one double each."""
        u = self.uniforms(n)
        return ndtri(np.clip(u, 1e-300, 1.0 - 1e-16))

    def index_from_cdf(self, cdf: np.ndarray) -> int:
        """Sample an index given a cumulative distribution (last entry ~1)."""
        u = self.uniform()
        idx = int(np.searchsorted(cdf, u, side="right"))
        return min(idx, len(cdf) - 1)

    def token_hex(self) -> str:
        """128-bit token as 32 hex chars; consumes 4 doubles."""
        parts = (int(u * 2**32) for u in self.uniforms(4))
        value = 0
        for p in parts:
            value = (value << 32) | p
        return f"{value:032x}"

    def state(self) -> dict:
        return {"seed": self.seed, "counter": self.counter}

    @classmethod
    def from_state(cls, state: dict) -> "RngStream":
        return cls(int(state["seed"]), int(state["counter"]))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, RngStream)
            and self.seed == other.seed
            and self.counter == other.counter
        )

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, counter={self.counter})"


def sample_categorical(dist: Categorical, rng: RngStream) -> int:
    """Draw an index i with probability ``dist.probs[i]``; advances ``rng``."""
    return rng.index_from_cdf(np.cumsum(dist.probs))


def derive_seed(root_seed: int, *path: int | str) -> int:
    """Derive a child 64-bit seed from a root seed and a path of tags.

    Deterministic across runs and platforms; distinct paths give independent
    streams.
    """
    entropy: list[int] = [int(root_seed)]
    for tag in path:
        if isinstance(tag, str):
            entropy.append(int.from_bytes(tag.encode("utf-8"), "little"))
        else:
            entropy.append(int(tag))
    ss = np.random.SeedSequence(entropy)
    return int(ss.generate_state(1, dtype=np.uint64)[0])
