import math

import numpy as np
import pytest

from priorchain.core import Categorical, RngStream, Stimulus
from priorchain.errors import InvalidValueError, OutOfBoundsError, SameCategoryError
from priorchain.participant import (
    Choice,
    DiscreteLikelihood,
    GaussianLikelihood,
    ParticipantModel,
    confidence_rating,
)


@pytest.fixture
def discrete_participant():
    # prior [0.7, 0.3]; P(f|A) = [0.8, 0.2], P(f|B) = [0.4, 0.6]
    return ParticipantModel(
        prior=Categorical([0.7, 0.3]),
        likelihood=DiscreteLikelihood([[0.8, 0.2], [0.4, 0.6]]),
    )


def unit_gaussian_participant(dim=2):
    return ParticipantModel(
        prior=Categorical([0.5, 0.5]),
        likelihood=GaussianLikelihood(
            means=np.zeros((2, dim)), variances=np.ones((2, dim))
        ),
    )


# -------------------------------------------------------------- likelihood

def test_likelihood_lookup(discrete_participant):
    assert discrete_participant.likelihood_at(Stimulus(id=0), 0) == 0.8
    assert discrete_participant.likelihood_at(Stimulus(id=1), 1) == 0.6


def test_likelihood_out_of_bounds(discrete_participant):
    with pytest.raises(OutOfBoundsError):
        discrete_participant.likelihood_at(Stimulus(id=5), 0)


def test_gaussian_density_at_mean():
    m = unit_gaussian_participant()
    f = Stimulus(vector=(0.0, 0.0))
    assert m.likelihood_at(f, 0) == pytest.approx(1.0 / (2 * math.pi), rel=1e-12)


def test_gaussian_density_one_sd_away():
    m = unit_gaussian_participant()
    f = Stimulus(vector=(1.0, 0.0))
    expected = (1.0 / (2 * math.pi)) * math.exp(-0.5)
    assert m.likelihood_at(f, 0) == pytest.approx(expected, rel=1e-12)


def test_likelihood_rows_must_normalize():
    with pytest.raises(InvalidValueError):
        DiscreteLikelihood([[0.5, 0.6]])


# --------------------------------------------------------------- posterior

def test_posterior_hand_value(discrete_participant):
    # products [0.7*0.8, 0.3*0.4] = [0.56, 0.12] -> [14/17, 3/17]
    post = discrete_participant.posterior(Stimulus(id=0))
    assert post.to_list() == pytest.approx([14 / 17, 3 / 17], abs=1e-12)


def test_posterior_uniform_prior_is_normalized_likelihood():
    m = ParticipantModel(
        prior=Categorical([0.5, 0.5]),
        likelihood=DiscreteLikelihood([[0.8, 0.2], [0.4, 0.6]]),
    )
    post = m.posterior(Stimulus(id=0))
    col = np.array([0.8, 0.4])
    assert post.to_list() == pytest.approx((col / col.sum()).tolist(), abs=1e-15)


def test_posterior_flat_likelihood_returns_prior():
    m = ParticipantModel(
        prior=Categorical([0.7, 0.3]),
        likelihood=DiscreteLikelihood([[0.5, 0.5], [0.5, 0.5]]),
    )
    post = m.posterior(Stimulus(id=1))
    assert post.to_list() == pytest.approx([0.7, 0.3], abs=1e-15)


def test_posterior_underflow_returns_uniform(caplog):
    m = ParticipantModel(
        prior=Categorical([0.5, 0.5]),
        likelihood=DiscreteLikelihood([[0.0, 1.0], [0.0, 1.0]]),
    )
    post = m.posterior(Stimulus(id=0))
    assert post.to_list() == [0.5, 0.5]


# ----------------------------------------------------------------- choices

def test_choose_face_rate():
    # P(f|e)=0.1 vs P(f'|e)=0.3 -> proposal picked with prob 0.75
    m = ParticipantModel(
        prior=Categorical([1.0]),
        likelihood=DiscreteLikelihood([[0.1, 0.3, 0.6]]),
    )
    rng = RngStream(404)
    n = 100_000
    picks = sum(
        m.choose_face(0, Stimulus(id=0), Stimulus(id=1), rng).picked for _ in range(n)
    )
    assert picks / n == pytest.approx(0.75, abs=0.005)


def test_choose_face_identical_options_is_half():
    m = ParticipantModel(
        prior=Categorical([1.0]), likelihood=DiscreteLikelihood([[0.5, 0.5]])
    )
    rng = RngStream(7)
    n = 20_000
    picks = sum(
        m.choose_face(0, Stimulus(id=0), Stimulus(id=0), rng).picked for _ in range(n)
    )
    assert picks / n == pytest.approx(0.5, abs=0.02)


def test_choose_face_zero_proposal_never_picked():
    m = ParticipantModel(
        prior=Categorical([1.0]), likelihood=DiscreteLikelihood([[1.0, 0.0]])
    )
    rng = RngStream(3)
    assert all(
        m.choose_face(0, Stimulus(id=0), Stimulus(id=1), rng).picked == 0
        for _ in range(500)
    )


def test_choose_category_rate(discrete_participant):
    # posterior at f0 is [14/17, 3/17]; proposal B picked with prob 3/17
    rng = RngStream(21)
    n = 100_000
    picks = sum(
        discrete_participant.choose_category(Stimulus(id=0), 0, 1, rng).picked
        for _ in range(n)
    )
    assert picks / n == pytest.approx(3 / 17, abs=0.005)


def test_choose_category_same_category_rejected(discrete_participant):
    with pytest.raises(SameCategoryError):
        discrete_participant.choose_category(Stimulus(id=0), 1, 1, RngStream(0))


def test_confidence_scale_endpoints():
    assert confidence_rating(1.0) == 7
    assert confidence_rating(0.0) == 1


def test_confidence_deterministic_in_posterior(discrete_participant):
    rng = RngStream(77)
    post = discrete_participant.posterior(Stimulus(id=0))
    for _ in range(50):
        c = discrete_participant.choose_category(Stimulus(id=0), 0, 1, rng)
        chosen_mass = post[1] if c.picked else post[0]
        assert c.confidence == confidence_rating(chosen_mass)


def test_choice_invariants():
    with pytest.raises(InvalidValueError):
        Choice(picked=2)
    with pytest.raises(InvalidValueError):
        Choice(picked=0, confidence=9)


def test_nuisance_seed_never_touches_probabilities(discrete_participant):
    # rendering randomness is orthogonal to all distribution evaluations
    from priorchain.gatekeeper import TableGatekeeper
    from priorchain.stimulus import StimulusSpace

    gk = TableGatekeeper(StimulusSpace.discrete(2), [[0.9, 0.1], [0.3, 0.7]])
    for seed_a, seed_b in [(0, 1), (7, 123456)]:
        fa = Stimulus(id=1, nuisance_seed=seed_a)
        fb = Stimulus(id=1, nuisance_seed=seed_b)
        assert discrete_participant.likelihood_at(fa, 0) == discrete_participant.likelihood_at(fb, 0)
        assert discrete_participant.posterior(fa).to_list() == discrete_participant.posterior(fb).to_list()
        assert gk.classify(fa).to_list() == gk.classify(fb).to_list()

    g = unit_gaussian_participant()
    va = Stimulus(vector=(0.3, -0.4), nuisance_seed=1)
    vb = Stimulus(vector=(0.3, -0.4), nuisance_seed=2)
    assert g.likelihood_at(va, 0) == g.likelihood_at(vb, 0)


def test_participant_roundtrip(discrete_participant):
    d = discrete_participant.to_dict()
    back = ParticipantModel.from_dict(d)
    assert back.prior == discrete_participant.prior
    assert np.array_equal(back.likelihood.rows, discrete_participant.likelihood.rows)

    g = unit_gaussian_participant()
    back = ParticipantModel.from_dict(g.to_dict())
    assert np.array_equal(back.likelihood.means, g.likelihood.means)
