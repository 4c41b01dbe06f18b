"""Random forests with surrogate-split relation analysis.

Provides mutual forest impact (MFI), a bias-corrected relation parameter
between features, and mutual impurity reduction (MIR), an importance
measure that folds feature relations into the actual impurity reduction
(AIR), together with permutation-based testing procedures and a
simulation harness.
"""

__version__ = "0.1.0"

from .data_model import (
    Classification,
    Dataset,
    DatasetValidationError,
    FeatureKind,
    ForestParams,
    Regression,
    Survival,
    categorical,
    continuous,
    genotype,
    validate,
)
from .forest import (
    Forest,
    best_split,
    gini_decrease,
    logrank_statistic,
    oob_error,
    predict,
    sse_decrease,
    train_forest,
)
from .importance import air, impurity_importance, mir, surrogate_minimal_depth
from .pipeline import AnalysisConfig, AnalysisResult, analyze_dataset
from .relations import MfiMatrix, compute_mfi, generate_pseudo_data
from .selection import (
    InsufficientNonPositive,
    NullDistribution,
    janitza_null,
    permutation_null_mfi,
    permutation_null_mir,
    pvalue,
    pvalues,
    select,
)
from .simulation import (
    ExperimentConfig,
    ScenarioSpec,
    empirical_power,
    fpr,
    jaccard,
    run_experiment,
    simulate_correlation_study,
    simulate_null_a,
    simulate_null_b,
    simulate_null_binary,
)
from .splits import SplitRule
from .surrogates import (
    RelationMatrix,
    SurrogateSplit,
    adjusted_agreement,
    find_surrogates,
    mean_adjusted_agreement,
    relation_threshold_select,
)
