"""Weight-derived feature vectors and feature tables."""
from .extract import FeatureKind, FeatureVector, WeightFeatures, extract, layer_norms, parse_kind
from .stats import StatBlock, stat_block
from .table import FeatureTable, featurize_zoo, read_table

__all__ = [
    "FeatureKind",
    "FeatureTable",
    "FeatureVector",
    "StatBlock",
    "WeightFeatures",
    "extract",
    "featurize_zoo",
    "layer_norms",
    "parse_kind",
    "read_table",
    "stat_block",
]
