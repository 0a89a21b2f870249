"""fairtraffic: privacy-preserving vehicular traffic analytics.

Query-based data access, fairly iterative shuffling, Laplace noise with a
decaying privacy-budget ledger, fairness/utility verification, and a budgeted
HTTP service over the whole pipeline.
"""

__version__ = "0.1.0"

from .model import (
    DayOfWeek,
    EmptyDataset,
    EmptyPiiField,
    GroupPartition,
    RawPii,
    TrafficRecord,
    Weather,
    anonymize_pii,
    load_csv,
    partition_groups,
    write_csv,
)
from .generator import (
    GeneratorConfig,
    InvalidConfig,
    UnknownCity,
    WeatherEffect,
    base_density,
    default_config,
    generate_dataset,
    weather_adjust,
)
from .query import (
    BoundingBox,
    DensityCellGrid,
    Feature,
    NoFilter,
    QuerySpec,
    Stage,
    UnsupportedFeature,
    WrongStage,
    aggregate_density,
    aggregate_mean_speed,
    execute_query,
    sensitivity,
)
from .shuffler import (
    BlockTooLarge,
    ShuffleConfig,
    ShuffleTrace,
    block_proportion_variance,
    global_shuffle,
    iterative_shuffle,
    local_shuffle,
)
from .dp import (
    BudgetExhausted,
    EmptyGrid,
    LaplaceParams,
    NonPositiveScale,
    PrivacyBudgetLedger,
    RiskInputs,
    SweepResult,
    inject_noise,
    laplace_inverse_cdf,
    laplace_sample,
    optimize_epsilon,
)
from .metrics import (
    FairnessReport,
    InsufficientHistory,
    InsufficientTrials,
    KeyMismatch,
    UtilityReport,
    fairness_report,
    mae,
    mse,
    normalize_heatmap,
    predict_24h,
)
from .pipeline import (
    HeatmapExport,
    InvalidHour,
    PipelineRunConfig,
    export_heatmap,
    prediction_pair,
    run_pipeline,
)

__all__ = [name for name in dir() if not name.startswith("_")]
