"""priorchain: choice-chain elicitation of individual category priors.

Alternates classifier-guided stimulus choices and category choices to drive a
block Metropolis-Hastings chain through a responder's beliefs, then reweights
the accepted category samples to recover that responder's prior. Includes an
exact matrix oracle for discrete configurations, a fusion evaluation harness,
and an HTTP session service for live participants.
"""

from .chain import ChainState, SampleRecord, TrialDescriptor, init_chain, next_trial, apply_choice, run_chain
from .core import (
    EPS,
    Categorical,
    CategorySet,
    RngStream,
    Stimulus,
    barker_accept_prob,
    derive_seed,
    normalize,
    sample_categorical,
    total_variation,
)
from .gatekeeper import (
    CLASSIFY_FLOOR,
    ExternalGatekeeper,
    Gatekeeper,
    ProposerBudget,
    SoftmaxGatekeeper,
    TableGatekeeper,
    external_classify,
)
from .oracle import (
    analytic_recovery_check,
    build_transition_matrix,
    canonical_config,
    stationary_distribution,
)
from .participant import Choice, DiscreteLikelihood, GaussianLikelihood, ParticipantModel
from .recovery import PriorEstimate, acceptance_stats, pool, reweight
from .stimulus import StimulusSpace, default_continuous_space, enumerate_stimuli, render_svg

__all__ = [
    "EPS",
    "CLASSIFY_FLOOR",
    "Categorical",
    "CategorySet",
    "ChainState",
    "Choice",
    "DiscreteLikelihood",
    "ExternalGatekeeper",
    "Gatekeeper",
    "GaussianLikelihood",
    "ParticipantModel",
    "PriorEstimate",
    "ProposerBudget",
    "RngStream",
    "SampleRecord",
    "SoftmaxGatekeeper",
    "Stimulus",
    "StimulusSpace",
    "TableGatekeeper",
    "TrialDescriptor",
    "acceptance_stats",
    "analytic_recovery_check",
    "apply_choice",
    "barker_accept_prob",
    "build_transition_matrix",
    "canonical_config",
    "default_continuous_space",
    "derive_seed",
    "enumerate_stimuli",
    "external_classify",
    "init_chain",
    "next_trial",
    "normalize",
    "pool",
    "render_svg",
    "reweight",
    "run_chain",
    "sample_categorical",
    "stationary_distribution",
    "total_variation",
]

__version__ = "0.1.0"
