"""shadowbench: LS, RLS, and classical-shadow estimators over random POVMs."""

__version__ = "0.1.0"

from .core import (
    DensityMatrix,
    LogLikelihoodResult,
    Observable,
    RankOnePovm,
    ShadowEstimate,
    born_probabilities,
    eigenvalue_split,
    expectation,
    frobenius_error,
    log_likelihood,
    project_physical,
)
from .ensembles import (
    EnsembleSpec,
    FixedUnitaries,
    GlobalHaar,
    HaarMixture,
    LocalHaarTensor,
    RngStream,
    load_fixed_ensemble,
    povm_from_unitary,
    sample_global_haar,
    sample_local_haar_tensor,
    sample_unitary,
)
from .estimators import (
    CS,
    LS,
    RLS,
    FrameOperator,
    ShadowSet,
    build_frame_operator,
    cs_channel_apply,
    cs_channel_inverse,
    cs_shadow,
    estimate,
    ls_shadow,
    rls_shadow,
)
from .experiments import (
    ResultRow,
    Scenario,
    canonical_state_and_observables,
    default_scenario,
    emit_csv,
    run_scenario,
)
from .measurement import (
    MeasurementPlan,
    MeasurementRecord,
    adjoint_map,
    dump_records,
    empirical_frequencies,
    load_records,
    run_plan,
    sample_counts,
)
from .theory import (
    MseEstimate,
    empirical_mse,
    mse_theorem1,
    multinomial_moments,
    random_observable_pdf,
)

__all__ = [
    "CS",
    "DensityMatrix",
    "EnsembleSpec",
    "FixedUnitaries",
    "FrameOperator",
    "GlobalHaar",
    "HaarMixture",
    "LS",
    "LocalHaarTensor",
    "LogLikelihoodResult",
    "MeasurementPlan",
    "MeasurementRecord",
    "MseEstimate",
    "Observable",
    "RLS",
    "RankOnePovm",
    "ResultRow",
    "RngStream",
    "Scenario",
    "ShadowEstimate",
    "ShadowSet",
    "adjoint_map",
    "born_probabilities",
    "build_frame_operator",
    "canonical_state_and_observables",
    "cs_channel_apply",
    "cs_channel_inverse",
    "cs_shadow",
    "default_scenario",
    "dump_records",
    "eigenvalue_split",
    "emit_csv",
    "empirical_frequencies",
    "empirical_mse",
    "estimate",
    "expectation",
    "frobenius_error",
    "load_fixed_ensemble",
    "load_records",
    "log_likelihood",
    "ls_shadow",
    "mse_theorem1",
    "multinomial_moments",
    "povm_from_unitary",
    "project_physical",
    "random_observable_pdf",
    "rls_shadow",
    "run_plan",
    "run_scenario",
    "sample_counts",
    "sample_global_haar",
    "sample_local_haar_tensor",
    "sample_unitary",
]
