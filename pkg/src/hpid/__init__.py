"""Sampling by optimally controlled diffusion in a harmonic reference.

The package draws i.i.d. samples from a target given either as an energy
function or as empirical ground-truth rows. Closed-form transition
kernels of the harmonically confined reference process make the optimal
drift computable pointwise, by importance sampling against an
energy-independent probe Gaussian, by a convex solve, by an exact
softmax over dataset rows, or by deterministic quadrature in low
dimension. A forward Euler integrator then turns controls into samples,
partition-function estimates, and phase-transition diagnostics.
"""

from .control import (
    ControlOutput,
    EmpiricalControlEvaluator,
    EmpiricalTarget,
    FunctionControlEvaluator,
    LegendreControlEvaluator,
    QuadratureControlEvaluator,
    QuadratureGrid,
    UhisConfig,
    UhisControlEvaluator,
    empirical_control,
    quadrature_control,
    uhis_control,
    uhis_control_general,
)
from .diagnostics import (
    AutocorrSeries,
    ModeHistogram,
    autocorrelation,
    bootstrap_transition_gap,
    mode_assignment,
    transition_time,
    transition_times_per,
)
from .errors import (
    AccuracyError,
    ConfigError,
    DegenerateProbeError,
    DegenerateProbeGaussianError,
    DomainError,
    FormatError,
    HpidError,
    InputError,
    IntegrationError,
)
from .kernels import (
    ScalarBeta,
    drift_prefactors,
    kernel_coeffs,
    log_g_minus,
    log_g_plus,
    log_kernel_ratio,
)
from .matrix_kernels import (
    MatrixBeta,
    decompose,
    general_control_reduction,
    log_g_minus_general,
    log_g_plus_general,
    log_kernel_ratio_general,
)
from .sampler import (
    RunConfig,
    RunSummary,
    estimate_z_convergence,
    run,
)
from .sde import (
    BatchTrajectories,
    SdeConfig,
    Trajectory,
    integrate,
    integrate_batch,
)
from .stationary import (
    GeneralProbeGaussian,
    NonuniversalResult,
    ProbeGaussian,
    legendre_control,
    nonuniversal_point,
    universal_probe,
    universal_probe_general,
)
from .targets import (
    DoubleWellEnergy,
    Energy,
    GaussianEnergy,
    GaussianMixtureEnergy,
    OffsetEnergy,
    grid_mixture,
    load_dataset,
    make_energy,
    mixture_partition_oracle,
    save_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "AutocorrSeries",
    "BatchTrajectories",
    "ConfigError",
    "ControlOutput",
    "DegenerateProbeError",
    "DegenerateProbeGaussianError",
    "DomainError",
    "DoubleWellEnergy",
    "EmpiricalControlEvaluator",
    "EmpiricalTarget",
    "Energy",
    "FormatError",
    "FunctionControlEvaluator",
    "GaussianEnergy",
    "GaussianMixtureEnergy",
    "GeneralProbeGaussian",
    "HpidError",
    "InputError",
    "IntegrationError",
    "LegendreControlEvaluator",
    "MatrixBeta",
    "ModeHistogram",
    "NonuniversalResult",
    "OffsetEnergy",
    "ProbeGaussian",
    "QuadratureControlEvaluator",
    "QuadratureGrid",
    "RunConfig",
    "RunSummary",
    "ScalarBeta",
    "SdeConfig",
    "Trajectory",
    "UhisConfig",
    "UhisControlEvaluator",
    "autocorrelation",
    "bootstrap_transition_gap",
    "decompose",
    "drift_prefactors",
    "empirical_control",
    "estimate_z_convergence",
    "general_control_reduction",
    "grid_mixture",
    "integrate",
    "integrate_batch",
    "kernel_coeffs",
    "legendre_control",
    "load_dataset",
    "log_g_minus",
    "log_g_minus_general",
    "log_g_plus",
    "log_g_plus_general",
    "log_kernel_ratio",
    "log_kernel_ratio_general",
    "make_energy",
    "mixture_partition_oracle",
    "mode_assignment",
    "nonuniversal_point",
    "quadrature_control",
    "run",
    "save_dataset",
    "transition_time",
    "transition_times_per",
    "uhis_control",
    "uhis_control_general",
    "universal_probe",
    "universal_probe_general",
]
