"""Certified L2-robust classification with empirical-Bayes denoising.

The library smooths a base classifier with Gaussian noise, but evaluates it at
the Bayes estimate of the clean input rather than at the raw noisy point.  It
ships exact Gaussian and Gaussian-mixture reference models, a small learnable
energy network with the second-order machinery the training loop and attacks
need, a randomized-smoothing certifier, projected-gradient adversarial
training of the smoothed classifier, and a walk-jump sampler.
"""

from .stats import (
    ConfidenceSpec,
    binom_lower_bound,
    rng_stream,
    std_normal_cdf,
    std_normal_inv_cdf,
)
from .densities import IsoGaussian, IsoMixture, beta_of
from .energy import EnergyNet, EnergyTrainConfig, TrainingDivergedError, train_energy
from .classifiers import (
    EbClassifier,
    LinearClassifier,
    SoftClassifier,
    classify_hard,
    grad_log_pi,
    soft_pi,
)
from .certify import (
    ABSTAIN,
    CertResult,
    OracleResult,
    certify,
    linear_gaussian_oracle,
    linear_margin,
    predict,
    rmax,
)
from .adversarial import (
    AttackSpec,
    ClassifierTrainConfig,
    PgdResult,
    pgd_attack,
    train_xhat,
)
from .sampler import (
    GradientFlowResult,
    WalkJumpConfig,
    gradient_flow,
    jump,
    langevin_walk,
    walk_jump,
)
from .datasets import LabeledDataset, GaussianClassSpec, gen_dataset, load_idx
from .checkpoint import load_checkpoint, save_checkpoint

__version__ = "0.1.0"

__all__ = [
    "ABSTAIN",
    "AttackSpec",
    "CertResult",
    "ClassifierTrainConfig",
    "ConfidenceSpec",
    "EbClassifier",
    "EnergyNet",
    "EnergyTrainConfig",
    "GaussianClassSpec",
    "GradientFlowResult",
    "IsoGaussian",
    "IsoMixture",
    "LabeledDataset",
    "LinearClassifier",
    "OracleResult",
    "PgdResult",
    "SoftClassifier",
    "TrainingDivergedError",
    "WalkJumpConfig",
    "beta_of",
    "binom_lower_bound",
    "certify",
    "classify_hard",
    "gen_dataset",
    "grad_log_pi",
    "gradient_flow",
    "jump",
    "langevin_walk",
    "linear_gaussian_oracle",
    "linear_margin",
    "load_checkpoint",
    "load_idx",
    "pgd_attack",
    "predict",
    "rmax",
    "rng_stream",
    "save_checkpoint",
    "soft_pi",
    "std_normal_cdf",
    "std_normal_inv_cdf",
    "train_energy",
    "train_xhat",
    "walk_jump",
]
