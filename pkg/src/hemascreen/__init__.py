"""Blood-count screening pipeline: cohorts, rank screening, classifiers, reports."""

from .dataset import (
    FEATURE_NAMES,
    PATHOGEN_NAMES,
    BloodCountRecord,
    Cohort,
    ColumnMapping,
    Label,
    Location,
    ParseResult,
    PathogenResult,
    canonical_mapping,
    cohort_summary,
    cohort_to_csv,
    default_source_mapping,
    parse_dataset,
    select_cohort,
    standardize,
)
from .metrics import (
    EvalReport,
    ModelSpec,
    RocCurve,
    ThresholdMetrics,
    auc,
    cross_validate,
    metrics_at,
    optimal_cutoff,
    roc_curve,
)
from .resample import (
    FoldPlan,
    SyntheticBatch,
    balance_training_fold,
    smote,
    stratified_kfold,
)
from .stats import (
    BoxSummary,
    FeatureSignificance,
    RankSumResult,
    boxplot_summary,
    significance_table,
    wilcoxon_rank_sum,
)

__version__ = "0.1.0"
