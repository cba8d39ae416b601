"""Disagreement-aware discourse relation classifiers."""

from ._core import (
    ValidationError,
    adjusted_rand_index,
    corpus_stats,
    default_config,
    kmeans,
    map_label,
    npmi_from_counts,
    paired_ttest,
    replicate,
    run_cli,
    soft_metrics,
    synthesize,
    taxonomy_labels,
)

__all__ = [
    "ValidationError",
    "adjusted_rand_index",
    "corpus_stats",
    "default_config",
    "kmeans",
    "map_label",
    "npmi_from_counts",
    "paired_ttest",
    "replicate",
    "run_cli",
    "soft_metrics",
    "synthesize",
    "taxonomy_labels",
]
