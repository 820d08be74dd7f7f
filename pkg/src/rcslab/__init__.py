"""Noise learning for random-circuit-sampling bitstring data.

The pipeline: simulate a random circuit under a catalog of error
sources to get per-trajectory output distributions, sample bitstrings,
fit one weight per error source (with exact, reference-sampled, or no
side information), then convert the weights into physical error rates
and a many-body fidelity.
"""

from .analysis import (
    GofResult,
    GradientTestResult,
    RiskCell,
    RiskCurve,
    SweepScenario,
    chi2_gof,
    chi2_statistic,
    correlated_error_matrix,
    gradient_test,
    gradient_test_pipeline,
    layer_mean_rates,
    line_slope,
    null_rates_from_fit,
    risk_sweep,
)
from .circuits import (
    Chain1D,
    CircuitSpec,
    ErrorModelSpec,
    ErrorSource,
    FsimLike,
    Grid2D,
    HaarSU4,
    KrausTerm,
    Statevector,
    build_pi_matrix,
    bulk_layers,
    device_error_model,
    fsim_core,
    haar_unitary,
    pauli_layer_error_model,
    readout_perturbation_row,
    resolve_threads,
    simulate_ideal,
    simulate_trajectory,
)
from .errors import (
    DegenerateRateError,
    EmptyDataError,
    IncompleteModelError,
    InfeasibleMixtureError,
    InvalidInputError,
    MissingCoefficientError,
    NeedsSideInfoError,
    NumericalError,
    RcsLabError,
    ResourceError,
    UnsupportedRowKindError,
)
from .estimators import (
    CrossValidated,
    Estimate,
    EstimatorConfig,
    collision_estimate,
    eiv_least_squares,
    mle_multinomial,
    mle_poisson_ridge,
    ols_estimate,
    project_to_simplex,
    select_threshold,
    threshold,
    variational_em,
    xeb_estimate,
    xeb_thresholded,
)
from .io import (
    dump_json,
    load_json,
    read_histogram_csv,
    read_pimx,
    read_side_json,
    write_histogram_csv,
    write_pimx,
    write_side_json,
)
from .model import (
    BitstringHistogram,
    DistributionMatrix,
    ErrorKind,
    ErrorLabel,
    ErrorWeights,
    RowKind,
    SideHistograms,
    WeightConstraint,
    mixture_distribution,
    sample_bitstrings_multinomial,
    sample_bitstrings_poissonized,
    sample_dirichlet_matrix,
    sample_side_info,
)
from .moments import (
    MomentEstimate,
    bell_polynomial,
    cumulant_estimate,
    factorial_moment_stats,
    fidelity_estimate,
    moment_pipeline,
    moment_vector,
    newton_coefficients,
    power_sums_from_coefficients,
    roots_and_estimate,
    sorted_loss,
)
from .report import (
    PhysicalReport,
    config_hash,
    correct_double_readout,
    fidelity_from_estimate,
    full_report,
    physical_rates,
    proportions,
    white_noise_expectation,
)
from .rng import derive_seed, make_rng

try:
    from importlib.metadata import version as _pkg_version

    __version__ = _pkg_version("rcslab")
except Exception:  # pragma: no cover - not installed
    __version__ = "0.0.0"
