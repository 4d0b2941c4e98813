"""
Bayesian Gaussian process regression with Energetic Variational Inference
"""

from .basis import BasisSpec, HierarchyR, build_basis, design_matrix, eval_basis, hierarchy_R
from .benchmarks import (
    BENCHMARKS,
    BenchmarkSpec,
    borehole_fn,
    get_benchmark,
    make_dataset,
    otl_fn,
    standardized_rmspe,
    summarize,
    toy_fn,
)
from .dataset import Dataset, ResponseScale
from .designs import Design, is_latin, maximin_lhs, random_lhs, scale_to_ranges
from .evi import (
    EviConfig,
    EviResult,
    LbfgsResult,
    MapResult,
    ParticleEnsemble,
    evi_im,
    evi_map,
    free_energy,
    free_energy_grad,
    init_particles,
    kde_kernel,
    lbfgs_minimize,
    proximal_objective,
)
from .exceptions import EVIGPError, InvalidArgumentError, InvalidStateError, NumericalError
from .inference import (
    CvResult,
    FitResult,
    PosteriorDraws,
    Prediction,
    TermInterval,
    attach_conditionals,
    beta_intervals,
    cv_select_nu,
    fit_gp,
    posterior_surface,
    predict_aggregate,
    predict_at,
    sample_posterior,
    select_terms,
)
from .kernels import (
    KernelParams,
    cross_kernel,
    cross_kernel_matrix,
    gaussian_kernel,
    kernel_matrix,
    kernel_matrix_grad,
)
from .posterior import (
    BetaConditional,
    CovFactor,
    HyperPoint,
    Informative,
    NonInformative,
    PosteriorTarget,
    PriorConfig,
    Tau2Conditional,
    beta_conditional,
    cov_factor,
    grad_log_posterior,
    log_posterior,
    log_prior,
    sample_beta,
    sample_tau2,
    tau2_conditional,
)

__all__ = [
    # designs
    'Design',
    'is_latin',
    'random_lhs',
    'maximin_lhs',
    'scale_to_ranges',
    # kernels
    'KernelParams',
    'gaussian_kernel',
    'kernel_matrix',
    'cross_kernel',
    'cross_kernel_matrix',
    'kernel_matrix_grad',
    # basis
    'BasisSpec',
    'HierarchyR',
    'build_basis',
    'eval_basis',
    'design_matrix',
    'hierarchy_R',
    # data
    'Dataset',
    'ResponseScale',
    # posterior
    'PriorConfig',
    'Informative',
    'NonInformative',
    'HyperPoint',
    'CovFactor',
    'BetaConditional',
    'Tau2Conditional',
    'PosteriorTarget',
    'cov_factor',
    'beta_conditional',
    'tau2_conditional',
    'log_prior',
    'log_posterior',
    'grad_log_posterior',
    'sample_beta',
    'sample_tau2',
    # evi
    'EviConfig',
    'ParticleEnsemble',
    'LbfgsResult',
    'EviResult',
    'MapResult',
    'kde_kernel',
    'free_energy',
    'free_energy_grad',
    'proximal_objective',
    'lbfgs_minimize',
    'evi_im',
    'evi_map',
    'init_particles',
    # inference
    'FitResult',
    'Prediction',
    'TermInterval',
    'PosteriorDraws',
    'CvResult',
    'fit_gp',
    'attach_conditionals',
    'predict_at',
    'predict_aggregate',
    'beta_intervals',
    'select_terms',
    'cv_select_nu',
    'posterior_surface',
    'sample_posterior',
    # benchmarks
    'BenchmarkSpec',
    'BENCHMARKS',
    'get_benchmark',
    'toy_fn',
    'otl_fn',
    'borehole_fn',
    'make_dataset',
    'standardized_rmspe',
    'summarize',
    # errors
    'EVIGPError',
    'InvalidArgumentError',
    'InvalidStateError',
    'NumericalError',
]
