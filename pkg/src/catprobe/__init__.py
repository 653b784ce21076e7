"""catprobe: localization correlators for stochastic and finite-bath two-level dynamics."""

__version__ = "0.1.0"

from .errors import (
    CatprobeError,
    ConfigurationError,
    ContractViolation,
    DataError,
    EstimationError,
    NumericalError,
    PreconditionError,
)
from .qstate import (
    CompositeState,
    DensityMatrix2,
    StepUnitary,
    TwoLevelState,
    bloch_vector,
    reduced_density,
    step_propagator,
    tensor_embed,
)
from .ensemble import (
    MomentAccumulator,
    MomentReport,
    WeightedEnsemble,
    averaged_density_matrix,
    estimate_moments,
    localization_correlator,
    synthetic_scenario,
    uniformity_test,
)
from .field import (
    FieldEnsemble,
    NoiseProcess,
    Trajectory,
    dephasing_envelope,
    evolve_trajectory,
    run_to_stationarity,
    sample_noise_path,
)
from .bath import (
    GibbsEnsembleStates,
    OhmicBathSpec,
    SpinBosonSystem,
    build_hamiltonian,
    evolve_exact,
    gibbs_ensemble_states,
    occupational_asymmetry,
    prepare_superposed,
    thermal_correlator,
)
