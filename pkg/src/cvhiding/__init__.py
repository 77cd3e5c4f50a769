"""Numerical laboratory for continuous-variable Gaussian quantum data hiding."""

from .gauss import (
    CovMatrix,
    EigSpectrum,
    FeasibilityReport,
    ModePartition,
    NotBonaFideError,
    PptReport,
    TWO_MODE_SPLIT,
    ansatz_measurement,
    epr_basis,
    heterodyne_measurement,
    is_bona_fide,
    is_ppt,
    local_homodyne_measurement,
    multi_copy_cov,
    nonlocal_epr_measurement,
    partial_transpose,
    ppt_violation_formula,
    random_bona_fide_cov,
    symplectic_eigenvalues,
    symplectic_form,
    thermal_pair_cov,
    tmsv_cov,
    tmsv_spectrum,
)
from .metrics import (
    PriorSpec,
    QuadratureError,
    TVEstimate,
    error_probability,
    gaussian_kl,
    mutual_information,
    mutual_information_projected,
    outcome_covariance,
    pinsker_bound,
    tv_monte_carlo_oracle,
    tv_multi_copy,
    tv_sign_scheme,
)
from .optimize import (
    InfeasibleError,
    NoGoReport,
    OptimizerConfig,
    OptimResult,
    ansatz_ppt_sweep,
    decode,
    encode,
    no_go_diagnostic,
    objective_penalized,
    optimize,
)
from .thermal import (
    CountsOutcome,
    FockBlock,
    ThermalParams,
    counts_prob,
    fock_expansion,
    kl_exact_vs_quadratic,
    kl_quadratic,
    kl_upper_bound,
    povm_probs,
    simulate_gaussian_tv,
    simulate_povm,
    tv_nongaussian,
    tv_upper_bound,
)

__version__ = "0.1.0"
