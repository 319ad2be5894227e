"""
Multi-label Classification Meta-Analysis Toolkit

Meta features of multi-label datasets, evaluation measures, iterative
stratification, predictive clustering trees and the meta-learning analyses
built on top of them.
"""

__version__ = "0.2.0"

from . import (
    data_loader,
    evaluation,
    exceptions,
    meta_analyzer,
    meta_features,
    pct,
    preprocessor,
    registry,
    settings,
    stratification,
    tree_export,
    tuning_analyzer,
)

__all__ = [
    "data_loader",
    "evaluation",
    "exceptions",
    "meta_analyzer",
    "meta_features",
    "pct",
    "preprocessor",
    "registry",
    "settings",
    "stratification",
    "tree_export",
    "tuning_analyzer",
]
