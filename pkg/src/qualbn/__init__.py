"""Learning CPTs of discrete Bayesian networks with hidden variables,
optionally guided by qualitative influence constraints."""

__version__ = "0.1.0"

from .constraints import (
    InequalitySystem,
    audit,
    enumerate_inequalities,
    expert_agreement_likelihood,
    total_violation,
    violation_gradient,
)
from .datagen import SamplingSpec, fixture_networks, forward_sample
from .dataset import Dataset, load_dataset, save_dataset
from .evaluation import avg_neg_log_likelihood, avg_quadratic_loss, evaluate
from .inference import case_likelihood, family_posteriors, log_likelihood
from .learning import LearnConfig, RunTrace, learn, random_init
from .network import (
    ConstraintSet,
    Influence,
    Network,
    NetworkError,
    Variable,
    joint_probability,
    load_constraints,
    load_network,
    save_constraints,
    save_network,
    validate_network,
)
