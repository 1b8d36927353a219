"""Rating-disposition partitioned collaborative filtering.

Classify users by how they use the rating scale, train neighborhood and
matrix-factorization recommenders per disposition group, and test whether the
partitioned models beat a pooled one.
"""

__version__ = "0.1.0"

from .disposition import (DispositionProfile, Partition, PartitionScheme, SchemeVariant,
                          partition_users, profile_users)
from .evaluation import EvalParams, MetricsReport, evaluate_model
from .experiment import ComparisonReport, ExperimentConfig, run_cross_validation, run_partition_experiment
from .models import Algorithm, KnnParams, SvdParams, fit_knn, fit_model, fit_svd
from .ratings import Dataset, dataset_stats, filter_by_users, parse_ratings_csv, split_folds
from .synthetic import generate_synthetic, two_population_config

__all__ = [
    "Algorithm", "ComparisonReport", "Dataset", "DispositionProfile", "EvalParams", "ExperimentConfig",
    "KnnParams", "MetricsReport", "Partition", "PartitionScheme", "SchemeVariant", "SvdParams",
    "dataset_stats", "evaluate_model", "filter_by_users", "fit_knn", "fit_model", "fit_svd",
    "generate_synthetic", "parse_ratings_csv", "partition_users", "profile_users",
    "run_cross_validation", "run_partition_experiment", "split_folds", "two_population_config",
]
