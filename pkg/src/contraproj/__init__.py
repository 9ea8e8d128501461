"""Linear projection heads for two-component Gaussian mixtures.

Closed-form contrastive losses, the expansion/shrinkage phase transition of
the trained projector, downstream linear-classifier error in both the
proportional high-dimensional regime and the fixed-dimension regime, the
one-spike inhomogeneous-augmentation extension, and a seeded experiment
harness with a CLI.
"""

from ._version import __version__
from .asymptotics import (
    NON_SEPARABLE,
    SEPARABLE,
    AsymptoticProblem,
    AsymptoticSolution,
    BoundaryWarning,
    RegimeError,
    delta_star,
    margin_potential,
    predicted_test_error,
    solve_asymptotics,
    solve_kappa_star,
    solve_u_star,
)
from .downstream import (
    ConvergenceWarning,
    EtaProjector,
    MarginFit,
    RidgeLogisticFit,
    apply_eta,
    gmm_test_error,
    lowdim_asymptotic_error,
    max_margin,
    max_margin_omega,
    ridge_coef_scale_root,
    ridge_logistic_fit,
    ridge_scale_stationarity,
)
from .gmm import (
    AugmentedPair,
    GmmConfig,
    LabeledSample,
    ShapeError,
    Spike,
    augment_views,
    derive_seed,
    effective_negative_diff_moments,
    sample_augmented_pair,
    sample_dataset,
    sample_feature_matrix,
)
from .harness import (
    ExperimentSpec,
    FeatureParseError,
    ResultTable,
    SpecError,
    emit_features,
    ingest_features,
    run_cgmt_table,
    run_eta_sweep,
    run_experiment,
    run_inhomo_curve,
    run_lowdim_logistic,
    run_phase_heatmap,
    run_projector_diagnostics,
)
from .inhomo import (
    InhomoConfig,
    InhomoSolution,
    NotRankOneError,
    approx_loss_inhomo,
    classify_phase_inhomo,
    objective_T,
    population_loss_inhomo,
    rank_one_projector,
    shrink_branch_T_star,
    solve_T_star,
    tau1_star,
)
from .loss import (
    DegenerateEmbeddingError,
    LossBreakdown,
    LossContext,
    Projector,
    WrongModelError,
    approx_loss,
    embedding_second_moment,
    empirical_simclr_grad,
    empirical_simclr_loss,
    feasible_t_interval,
    finite_sample_loss,
    population_loss,
    sandwich_upper_delta,
)
from .numerics import BracketError, DomainError
from .phase import (
    BOUNDARY,
    EXPANSION,
    SHRINKAGE,
    DegenerateAugmentationError,
    GapDiagnostic,
    PhaseConfig,
    PhaseReport,
    classify_regime,
    expansion_measure,
    phase_derivative_F,
    shrinkage_t_star,
    surrogate_gap_diagnostic,
    tau_star,
)
from .trainer import (
    EMPIRICAL_SIMCLR,
    FINITE_SAMPLE_CLOSED_FORM,
    IDENTITY_INIT,
    ORTHOGONAL_INIT,
    POPULATION_CLOSED_FORM,
    SpectralReport,
    TrainConfig,
    TrainTrace,
    TrainingDivergedError,
    cumulative_alignment_scores,
    init_orthogonal,
    spectral_report,
    train_projector,
)

__all__ = [name for name in dir() if not name.startswith("_")]
