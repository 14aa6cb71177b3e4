"""Exact analysis of discrete configurations via the full transition matrix.

For a finite stimulus table and category set, the block step (stimulus move,
then category move) is a Markov kernel over joint (stimulus, category)
states. This module builds that kernel explicitly, finds its stationary
distribution by power iteration, and checks the package's central claim: with
stimulus proposals taken from the normalized classifier columns, the
stationary joint is proportional to prior x likelihood x classifier, and the
inverse-classifier reweighted category marginal equals the responder's true
prior. Configurations that break the proposal-consistency assumption are
reported with their gap rather than rejected.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .core import Categorical, Stimulus, barker_accept_prob, total_variation
from .errors import InvalidValueError, NotConvergedError, NotDiscreteError
from .gatekeeper import Gatekeeper, TableGatekeeper
from .participant import DiscreteLikelihood, ParticipantModel
from .stimulus import StimulusSpace


def canonical_config() -> tuple[StimulusSpace, ParticipantModel, TableGatekeeper]:
    """2-stimulus x 2-category configuration small enough for hand arithmetic.

    Prior [0.7, 0.3]; likelihood rows [0.8, 0.2] / [0.4, 0.6]; classifier rows
    [0.9, 0.1] / [0.3, 0.7]. Deliberately asymmetric so transposition bugs
    cannot cancel out.
    """
    space = StimulusSpace.discrete(2)
    gatekeeper = TableGatekeeper(space, [[0.9, 0.1], [0.3, 0.7]])
    participant = ParticipantModel(
        Categorical([0.7, 0.3]),
        DiscreteLikelihood([[0.8, 0.2], [0.4, 0.6]]),
    )
    return space, participant, gatekeeper


@dataclass(frozen=True)
class JointStateIndex:
    """Bijection between (stimulus, category) pairs and flat indices."""

    n_stimuli: int
    n_categories: int

    def flat(self, f: int, e: int) -> int:
        return f * self.n_categories + e

    def unflat(self, i: int) -> tuple[int, int]:
        return divmod(i, self.n_categories)

    def __len__(self) -> int:
        return self.n_stimuli * self.n_categories


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic kernel over joint states."""

    matrix: np.ndarray
    index: JointStateIndex

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != len(self.index):
            raise InvalidValueError(f"bad transition matrix shape {m.shape}")
        if np.any(m < 0):
            raise InvalidValueError("transition matrix has negative entries")
        if np.any(np.abs(m.sum(axis=1) - 1.0) > 1e-12):
            raise InvalidValueError("transition matrix rows must sum to 1 within 1e-12")


def _classifier_table(gatekeeper: Gatekeeper) -> np.ndarray:
    """classify() of every table stimulus as an (n_stimuli, n_categories) array."""
    space = gatekeeper.space
    return np.stack(
        [gatekeeper.classify(Stimulus(id=f)).probs for f in range(space.count)]
    )


def _likelihood_table(participant: ParticipantModel, n_stimuli: int) -> np.ndarray:
    return np.stack(
        [
            [participant.likelihood_at(Stimulus(id=f), e) for e in range(len(participant.prior))]
            for f in range(n_stimuli)
        ]
    )


def build_transition_matrix(
    space: StimulusSpace,
    participant: ParticipantModel,
    gatekeeper: Gatekeeper,
    face_proposals: np.ndarray | None = None,
) -> TransitionMatrix:
    """Kernel of one full block step: stimulus move then category move.

    The stimulus move proposes from the normalized classifier column of the
    current category (or from ``face_proposals[e]`` if given, to model
    inconsistent proposers) and accepts by the Barker rule on the responder's
    likelihood. The category move proposes from the classifier's distribution
    at the new stimulus and accepts by the Barker rule on the responder's
    posterior; a proposal equal to the current category is an automatic
    self-transition.
    """
    if not space.is_discrete:
        raise NotDiscreteError("transition matrix requires a discrete space")
    n_f = space.count
    n_e = gatekeeper.n_categories
    idx = JointStateIndex(n_f, n_e)

    g = _classifier_table(gatekeeper)  # (n_f, n_e)
    lik = _likelihood_table(participant, n_f)  # (n_f, n_e)

    if face_proposals is None:
        cols = g / g.sum(axis=0, keepdims=True)  # proposal per category, (n_f, n_e)
    else:
        face_proposals = np.asarray(face_proposals, dtype=float)
        if face_proposals.shape != (n_e, n_f):
            raise InvalidValueError(
                f"face_proposals must be (n_categories, n_stimuli), got {face_proposals.shape}"
            )
        cols = face_proposals.T / face_proposals.sum(axis=1)

    # Stimulus kernels, one per conditioning category: F[e][f, f']
    face_kernels = np.zeros((n_e, n_f, n_f))
    for e in range(n_e):
        for f_from in range(n_f):
            stay = 0.0
            for f_to in range(n_f):
                if f_to == f_from:
                    continue
                alpha = barker_accept_prob(lik[f_from, e], lik[f_to, e])
                p = cols[f_to, e] * alpha
                face_kernels[e, f_from, f_to] = p
            face_kernels[e, f_from, f_from] = 1.0 - face_kernels[e, f_from].sum()

    # Category kernels, one per conditioning stimulus: C[f][e, e']
    posteriors = np.stack(
        [participant.posterior(Stimulus(id=f)).probs for f in range(n_f)]
    )
    cat_kernels = np.zeros((n_f, n_e, n_e))
    for f in range(n_f):
        for e_from in range(n_e):
            for e_to in range(n_e):
                if e_to == e_from:
                    continue
                alpha = barker_accept_prob(posteriors[f, e_from], posteriors[f, e_to])
                cat_kernels[f, e_from, e_to] = g[f, e_to] * alpha
            cat_kernels[f, e_from, e_from] = 1.0 - cat_kernels[f, e_from].sum()

    T = np.zeros((len(idx), len(idx)))
    for f in range(n_f):
        for e in range(n_e):
            row = idx.flat(f, e)
            for f2 in range(n_f):
                p_face = face_kernels[e, f, f2]
                if p_face == 0.0:
                    continue
                for e2 in range(n_e):
                    T[row, idx.flat(f2, e2)] = p_face * cat_kernels[f2, e, e2]
    return TransitionMatrix(T, idx)


def stationary_distribution(
    T: TransitionMatrix, residual: float = 1e-12, max_iters: int = 1_000_000
) -> np.ndarray:
    """Left fixed point of a row-stochastic matrix by power iteration.

    Emits a multiplicity warning when the kernel's positive-transition graph
    is not strongly connected (the fixed point is then not unique).
    """
    m = T.matrix
    n_comp, _ = connected_components(m > 0, directed=True, connection="strong")
    if n_comp > 1:
        warnings.warn(
            f"kernel is reducible ({n_comp} strongly connected components); "
            "stationary distribution is not unique",
            stacklevel=2,
        )
    x = np.full(m.shape[0], 1.0 / m.shape[0])
    for _ in range(max_iters):
        x_next = x @ m
        x_next /= x_next.sum()
        if np.max(np.abs(x_next - x)) <= residual:
            return x_next
        x = x_next
    raise NotConvergedError(
        f"power iteration did not reach residual {residual} in {max_iters} iterations"
    )


def closed_form_joint(participant: ParticipantModel, gatekeeper: Gatekeeper) -> np.ndarray:
    """Derived stationary form: prior x likelihood x classifier, normalized.

    Valid when stimulus proposals are the normalized classifier columns; the
    matrix oracle confirms rather than assumes it.
    """
    n_f = gatekeeper.space.count
    g = _classifier_table(gatekeeper)
    lik = _likelihood_table(participant, n_f)
    joint = participant.prior.probs[None, :] * lik * g
    return joint / joint.sum()


@dataclass(frozen=True)
class RecoveryReport:
    """Oracle verdict for one discrete configuration."""

    stationary_joint: np.ndarray  # (n_stimuli, n_categories)
    expected_joint: np.ndarray
    joint_tv_gap: float
    reweighted_marginal: Categorical
    true_prior: Categorical
    prior_tv_gap: float

    def to_dict(self) -> dict:
        return {
            "stationary_joint": self.stationary_joint.tolist(),
            "expected_joint": self.expected_joint.tolist(),
            "joint_tv_gap": self.joint_tv_gap,
            "reweighted_marginal": self.reweighted_marginal.to_list(),
            "true_prior": self.true_prior.to_list(),
            "prior_tv_gap": self.prior_tv_gap,
        }


def analytic_recovery_check(
    space: StimulusSpace,
    participant: ParticipantModel,
    gatekeeper: Gatekeeper,
    face_proposals: np.ndarray | None = None,
) -> RecoveryReport:
    """Compare stationary joint, closed form, and reweighted marginal exactly.

    The reweighted marginal divides each joint cell by its classifier
    probability and sums over stimuli; for consistent configurations it
    reproduces the participant's prior to power-iteration accuracy.
    """
    T = build_transition_matrix(space, participant, gatekeeper, face_proposals)
    pi = stationary_distribution(T)
    n_f, n_e = space.count, gatekeeper.n_categories
    joint = pi.reshape(n_f, n_e)

    g = _classifier_table(gatekeeper)
    marginal = (joint / g).sum(axis=0)
    marginal = Categorical(marginal / marginal.sum())

    expected = closed_form_joint(participant, gatekeeper)
    return RecoveryReport(
        stationary_joint=joint,
        expected_joint=expected,
        joint_tv_gap=total_variation(joint.ravel(), expected.ravel()),
        reweighted_marginal=marginal,
        true_prior=participant.prior,
        prior_tv_gap=total_variation(marginal, participant.prior),
    )
