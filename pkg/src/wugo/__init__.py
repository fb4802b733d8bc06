"""Gradient-free global optimisation of stochastic black boxes with a deep
generative surrogate and a Wasserstein (energy-distance) uncertainty, plus
EGO/LCB baselines over GP and deep-ensemble surrogates, and a benchmark
harness around them."""

from .acquisition import (
    AcquisitionConfig,
    ei_gaussian,
    ei_gaussian_values,
    ei_mc,
    lcb,
    wu_regret,
)
from .blackbox import (
    BUILTIN_IDS,
    BlackBoxError,
    BlackBoxSpec,
    ResponseSample,
    distance_to_optimum,
    eval_mean,
    get_spec,
    simulate,
)
from .bench import (
    BUILTIN_SUITE,
    MethodMetrics,
    MetricsReport,
    ablation_kappa,
    distance_after_k,
    eps_probability,
    run_suite,
)
from .design import CandidateSet, SearchSpace, build_candidates, lhs_init
from .neural import AdamState, Mlp, StepLrSchedule, gradient_penalty
from .optimizer import METHODS, RunConfig, RunRecord, check_eps_solution, run
from .statdist import GroundTruthSet, energy_distance, wasserstein_uncertainty
from .surrogates import (
    EnergyGenSurrogate,
    EnsembleSurrogate,
    GaussianPosterior,
    GpSurrogate,
    WganGpSurrogate,
    build_surrogate,
)

__version__ = "0.1.0"
