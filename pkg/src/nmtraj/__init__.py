"""nmtraj: exact apparatus-chain simulator for non-Markovian measurement
trajectories.

The joint system-meter state is propagated exactly as a path sum over
coupling eigenvalue branches times displaced Gaussian meter wavefunctions.
Measurement strategies (position readout after each kick, all-at-once
conditioning on retarded observables, interleaved monitoring) are applied
by exact hyperplane conditioning, and ensemble engines compare their
averages and purities against the unmeasured reduced dynamics.
"""

from .chain import (
    AsymmetricKernelTable,
    ChainConfig,
    CorrelationKernel,
    SystemSpec,
    build_bath_matrix,
    coupling_at_step,
    initial_total_state,
    retarded_coefficients,
)
from .ensemble import (
    EnsembleReport,
    compare_strategies,
    covariance_check,
    mc_average,
    purity_stats,
    quadrature_average,
)
from .gauss import GaussianForm, NotPositiveDefinite
from .measure import (
    DegenerateMeasurement,
    MeasurementRecord,
    Strategy,
    StrategyResult,
    measure_linear,
    measure_position,
    outcome_density,
    run_strategy,
    sample_outcome,
)
from .state import (
    Branch,
    DensityMatrix,
    TotalState,
    apply_interaction,
    norm_squared,
    purity,
    reduced_density,
    trace_distance,
)

__version__ = "0.1.0"

__all__ = [
    "AsymmetricKernelTable",
    "Branch",
    "ChainConfig",
    "CorrelationKernel",
    "DegenerateMeasurement",
    "DensityMatrix",
    "EnsembleReport",
    "GaussianForm",
    "MeasurementRecord",
    "NotPositiveDefinite",
    "Strategy",
    "StrategyResult",
    "SystemSpec",
    "TotalState",
    "apply_interaction",
    "build_bath_matrix",
    "compare_strategies",
    "coupling_at_step",
    "covariance_check",
    "initial_total_state",
    "mc_average",
    "measure_linear",
    "measure_position",
    "norm_squared",
    "outcome_density",
    "purity",
    "purity_stats",
    "quadrature_average",
    "reduced_density",
    "retarded_coefficients",
    "run_strategy",
    "sample_outcome",
    "trace_distance",
]
