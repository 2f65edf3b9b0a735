"""Bayesian unmixing of hyperspectral pixels under the polynomial
post-nonlinear mixing model with a sparse Dirichlet abundance prior."""

from .model import (
    EndmemberLibrary,
    ModelParams,
    PriorHyperparams,
    forward_ppnmm,
    log_dirichlet_prior,
    log_joint,
    log_likelihood,
    nonlinear_term,
)
from .sampler import Chain, SamplerConfig, posterior_histogram, posterior_mean, run_chain

__all__ = [
    "Chain",
    "EndmemberLibrary",
    "ModelParams",
    "PriorHyperparams",
    "SamplerConfig",
    "forward_ppnmm",
    "log_dirichlet_prior",
    "log_joint",
    "log_likelihood",
    "nonlinear_term",
    "posterior_histogram",
    "posterior_mean",
    "run_chain",
]
