"""ddkit: per-sample training dynamics, compute-aware selection, and
distillation evaluation, built on exported prediction trajectories."""

from .ca2d import (
    CropParams,
    DistilledImage,
    DistilledImageSet,
    PatchCandidate,
    PatchScorer,
    assemble,
    ca2d_pipeline,
    generate_candidates,
    score_patches,
    sharpness_score,
)
from .dcs import (
    DCSRecord,
    DCSRecordSet,
    DCSReport,
    dcs,
    error_table_upsert,
    read_error_table,
    spearman,
)
from .errors import (
    ChecksumMismatchError,
    ConflictError,
    DataError,
    DdkitError,
    DegenerateTrajectoryError,
    DomainError,
    FitFailureError,
    ManifestError,
    MissingFileError,
    NormalizationError,
    NumericalError,
    ScorerError,
    ShapeMismatchError,
    UndefinedCorrelationError,
    ValidationError,
)
from .objectives import (
    FeatureBatch,
    GradVector,
    LayerStat,
    ParamVector,
    bn_matching_loss,
    dc_loss,
    dm_loss,
    tm_loss,
    tm_loss_averaged,
)
from .scaling import ScalingFit, TrainingCurve, fit_scaling, predict
from .scores import (
    ScoreParams,
    ScoreTable,
    cad_from_series,
    cad_prune,
    dyn_unc,
    el2n,
    el2n_sl,
    forgetting,
    kl_gradient_check,
    uncertainty_series,
)
from .selection import (
    ParetoPoint,
    SubsetSpec,
    pareto_frontier,
    select_random,
    select_window,
    sliding_window_enumerate,
)
from .trajstore import (
    SyntheticSpec,
    TrajectoryManifest,
    TrajectoryTensor,
    late_learner_ids,
    load_trajectory,
    write_synthetic,
    write_trajectory,
)

__version__ = "0.1.0"
