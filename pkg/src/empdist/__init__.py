"""Statistics of empirical distributions from sequential quantum measurements."""

from .empirical import (
    CovarianceDecomposition,
    EmpiricalDistribution,
    PsiMatrix,
    all_sequences,
    analytic_covariance,
    cond_prob,
    covariance,
    ed_from_string,
    marginal_probs,
    psi_asymptotic,
    psi_finite,
    sequence_index,
)
from .errors import (
    DarkStateError,
    DegenerateSteadyStateError,
    GuardRailError,
    NumericsError,
    SupportMismatchError,
    TrajectoryCollapseError,
    ValidationError,
    ZeroProbabilityError,
)
from .instruments import (
    Instrument,
    LindbladSystem,
    dissipator,
    from_kraus,
    gapped_sequence_prob,
    hamiltonian_superop,
    jump_instrument,
    sequence_prob,
    sequence_superop,
)
from .information import (
    CompressedED,
    ConstraintReport,
    CorrelationReport,
    MarkovModel,
    correlation_information,
    correlation_report,
    ed_compress,
    ed_constraints_check,
    ed_reconstruct,
    fisher_empirical,
    gaussian_kl,
    markov_covariance,
    markov_information,
    markov_tensor,
)
from .sampler import (
    EDEnsemble,
    TrajectoryRun,
    count_modes,
    dump_strings,
    load_strings,
    sample_ed_ensemble,
    sample_string,
)
from .supop import (
    devectorize,
    drazin_inverse,
    drazin_via_projector,
    fixed_point_projector,
    frobenius_inner,
    hermitian_exp,
    pseudo_det,
    sandwich_superop,
    spectral_decomposition,
    stationary_state,
    sym_drazin,
    vectorize,
)

__version__ = "0.1.0"
