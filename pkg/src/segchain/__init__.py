"""segchain: sequence segmentation with linear-chain, semi-Markov, and
filtered semi-Markov CRFs over pluggable span scores."""

__version__ = "0.1.0"

from .core import (
    NEG_INF,
    EntitySet,
    GradientSet,
    LabelSet,
    ScoreSet,
    Segment,
    Segmentation,
    entities_of,
    log_sum_exp,
    validate_segmentation,
)

__all__ = [
    "NEG_INF",
    "EntitySet",
    "GradientSet",
    "LabelSet",
    "ScoreSet",
    "Segment",
    "Segmentation",
    "entities_of",
    "log_sum_exp",
    "validate_segmentation",
    "__version__",
]
