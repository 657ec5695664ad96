"""Output-error envelopes for frozen-equivalent discrete-time LPV models.

Two LPV models that agree for every constant schedule can still disagree
for varying ones.  This package computes a per-time analytic envelope on
that disagreement from the models' contraction level, the basis mismatch
of their frozen realizations, and the schedule's dwell structure, and
validates the envelope against exact simulation.
"""

from .bound import (
    BoundConstants,
    BoundReport,
    InfeasibleEpsilonError,
    ScheduleClassError,
    alpha_max_for_epsilon,
    check_bound,
    compute_constants,
    delta_min_for_epsilon,
    delta_step_for_epsilon,
    envelope,
    g_function,
    g_sup_beyond,
    step_bound_function,
)
from .core import (
    AffineFamily,
    GridFamily,
    InputSignal,
    LpvModel,
    LtiModel,
    MatrixFamily,
    OutOfDomainError,
    SchedulingBox,
    SchedulingSignal,
    Trajectory,
    classify_signal,
    constant_family,
    eval_family,
    freeze,
    in_dwell_class,
    io_map,
    signal_piecewise_constant,
    signal_sinusoid,
    simulate_lpv,
    simulate_lti,
)
from .frozen import (
    EquivalenceError,
    FrozenIsomorphism,
    MinimalityError,
    MismatchMatrix,
    are_frozen_equivalent,
    check_lpv_isomorphism,
    frozen_isomorphism,
    is_frozen_minimal,
    isomorphism_between,
    make_frozen_equivalent,
    markov_parameters,
    mismatch,
    observability_matrix,
    reachability_matrix,
)
from .ident import (
    FrozenDataset,
    PipelineResult,
    RealizationError,
    generate_frozen_data,
    ho_kalman_realize,
    interpolate_models,
    run_local_pipeline,
    to_canonical_form,
)
from .stability import (
    ContractionData,
    QuadStabCertificate,
    StabilityError,
    contraction_for_pair,
    find_common_lyapunov,
    normalize_contractive,
    state_gain_mu1,
    verify_quadratic_stability,
)

__version__ = "0.1.0"
