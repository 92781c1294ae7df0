"""Selective question answering under domain shift.

Given per-example prediction records exported from any extractive QA model,
this package computes confidence scores (MaxProb, test-time dropout
statistics, a trained random-forest calibrator), decides when to abstain,
and evaluates selective-prediction quality through risk-coverage analysis.
"""

from .confidence import (
    ConfidenceMethod,
    ScoredRecord,
    calibrator_confidence,
    dropout_mean,
    dropout_neg_var,
    max_prob,
    outlier_confidence,
    score_all,
)
from .errors import (
    CatalogMismatchError,
    DegenerateLabelsError,
    FeatureMaskError,
    ForestFormatError,
    MissingFieldError,
    RecordValidationError,
    ToolkitError,
)
from .evaluation import (
    ReliabilityBin,
    RiskCoverageCurve,
    RiskCoveragePoint,
    SelectiveMetrics,
    auc,
    best_possible_curve,
    coverage_at_accuracy,
    per_domain_breakdown,
    reliability_diagram,
    risk_coverage_curve,
    selective_metrics,
    tune_unanswerable_threshold,
)
from .features import (
    BASE_CATALOG,
    DROPOUT_CATALOG,
    EMPTY_MASK,
    FeatureMask,
    FeatureVector,
    extract_base_features,
    extract_dropout_features,
)
from .forest import (
    DEFAULT_GRID,
    DecisionTree,
    ForestConfig,
    RandomForest,
    best_split,
    gini,
    grid_search,
    load_forest,
    predict_proba,
    save_forest,
    train_forest,
)
from .harness import (
    AlphaSweepRow,
    ExperimentConfig,
    ExperimentReport,
    LearningCurveRow,
    MatrixResult,
    RecordPools,
    SyntheticDomainSpec,
    ablation_run,
    alpha_sweep,
    build_test_mixture,
    extrapolation_cell,
    generate_synthetic,
    learning_curve,
    run_experiment,
    run_matrix,
    run_outlier_baseline,
    run_source_only_calibrator,
)
from .records import (
    PredictionRecord,
    RecordSet,
    load_records,
    sample_mixture,
    save_records,
    split,
)
from .seeding import derive_seed

__version__ = "0.1.0"
