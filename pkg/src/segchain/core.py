"""Domain types and log-space arithmetic shared by every decoder.

Conventions used throughout the package:

* Token positions are 1-based and inclusive on the public surface:
  ``Segment(2, 4, ...)`` covers tokens 2, 3 and 4 of the sequence.  Dense
  span-score tables are indexed ``[start - 1, width - 1, label]`` internally,
  and the conversion happens exactly once, inside the functions that touch
  the arrays.
* Log-space quantities are plain ``float64``.  ``NEG_INF`` is a documented
  large-negative sentinel standing in for log(0); using a finite sentinel
  instead of ``-inf`` keeps reductions free of NaN (``(-inf) - (-inf)``).
* Score and gradient arrays are always float64 and C-contiguous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Finite stand-in for log(0).  Small enough that exp(NEG_INF - m) underflows
# to 0.0 for any realistic shift m, large enough that sums of a few of them
# never overflow the float64 exponent range.
NEG_INF = -1e30


@dataclass(frozen=True)
class LabelSet:
    """Ordered label inventory with an optional designated null label.

    ``null_id`` is the index of the non-entity label for segment models;
    it may be None for plain tagging label sets (e.g. raw BIO tags).
    """

    labels: tuple[str, ...]
    null_id: int | None = None

    def __post_init__(self) -> None:
        if len(self.labels) < 1:
            raise ValueError("label set must contain at least one label")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"duplicate labels in {self.labels!r}")
        if self.null_id is not None and not 0 <= self.null_id < len(self.labels):
            raise ValueError(f"null_id {self.null_id} out of range")

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, name: str) -> int:
        return self.labels.index(name)

    def name(self, label_id: int) -> str:
        return self.labels[label_id]

    def require_null(self) -> int:
        if self.null_id is None:
            raise ValueError("operation requires a null label, but none is defined")
        return self.null_id


@dataclass(frozen=True, order=True)
class Segment:
    """A labeled span: 1-based inclusive token positions and a label index."""

    start: int
    end: int
    label: int

    def __post_init__(self) -> None:
        if not 1 <= self.start <= self.end:
            raise ValueError(f"invalid span ({self.start}, {self.end})")
        if self.label < 0:
            raise ValueError(f"negative label index {self.label}")

    @property
    def width(self) -> int:
        return self.end - self.start + 1

    def overlaps(self, other: "Segment") -> bool:
        return self.start <= other.end and other.start <= self.end


# A segmentation is an ordered, contiguous, full-cover run of segments; an
# entity set is an unordered collection of non-null segments.
Segmentation = tuple[Segment, ...]
EntitySet = frozenset[Segment]


def _frozen_f64(arr, shape, name: str) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if out.shape != shape:
        raise ValueError(f"{name} has shape {out.shape}, expected {shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class ScoreSet:
    """All learned scores for one sequence.

    * ``emissions``: (L, Y) per-token label scores for the linear-chain CRF.
    * ``span_local`` / ``span_global``: (L, K, Y) span-score tables, indexed
      by (start - 1, width - 1, label).  ``span_local`` feeds the filtering
      classifier and the local loss; ``span_global`` feeds path scoring.
      Rows whose span would run past the end of the sequence are padding and
      are never read.
    * ``transitions``: (Y, Y) label-to-label compatibility scores.
    * ``max_width``: widest span carrying scores (K).
    """

    length: int
    max_width: int
    emissions: np.ndarray
    span_local: np.ndarray
    span_global: np.ndarray
    transitions: np.ndarray

    def __post_init__(self) -> None:
        L, K = self.length, self.max_width
        if L < 1 or K < 1:
            raise ValueError("length and max_width must be positive")
        Y = np.asarray(self.emissions).shape[-1] if np.asarray(self.emissions).ndim else 0
        object.__setattr__(self, "emissions", _frozen_f64(self.emissions, (L, Y), "emissions"))
        object.__setattr__(self, "span_local", _frozen_f64(self.span_local, (L, K, Y), "span_local"))
        object.__setattr__(self, "span_global", _frozen_f64(self.span_global, (L, K, Y), "span_global"))
        object.__setattr__(self, "transitions", _frozen_f64(self.transitions, (Y, Y), "transitions"))

    @property
    def num_labels(self) -> int:
        return self.emissions.shape[1]

    def valid_span_mask(self) -> np.ndarray:
        """(L, K) boolean mask of spans that fit inside the sequence."""
        return span_validity_mask(self.length, self.max_width)

    def replace_span_global(self, table: np.ndarray) -> "ScoreSet":
        return ScoreSet(self.length, self.max_width, self.emissions,
                        self.span_local, table, self.transitions)


def span_validity_mask(length: int, max_width: int) -> np.ndarray:
    starts = np.arange(1, length + 1)
    widths = np.arange(1, max_width + 1)
    return (starts[:, None] + widths[None, :] - 1) <= length


@dataclass
class GradientSet:
    """Gradients of a loss w.r.t. every ScoreSet table (same shapes)."""

    emissions: np.ndarray
    span_local: np.ndarray
    span_global: np.ndarray
    transitions: np.ndarray

    @classmethod
    def zeros(cls, length: int, max_width: int, num_labels: int) -> "GradientSet":
        return cls(
            emissions=np.zeros((length, num_labels)),
            span_local=np.zeros((length, max_width, num_labels)),
            span_global=np.zeros((length, max_width, num_labels)),
            transitions=np.zeros((num_labels, num_labels)),
        )

    @classmethod
    def zeros_like(cls, scores: ScoreSet) -> "GradientSet":
        return cls.zeros(scores.length, scores.max_width, scores.num_labels)

    def add_(self, other: "GradientSet") -> "GradientSet":
        self.emissions += other.emissions
        self.span_local += other.span_local
        self.span_global += other.span_global
        self.transitions += other.transitions
        return self


def log_sum_exp(values) -> float:
    """log(sum(exp(v))) with max-shifting; exact for singletons.

    Raises ValueError on an empty collection: an empty log-space sum is
    log(0) and callers must supply that explicitly.
    """
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("log_sum_exp of an empty collection")
    m = float(arr.max())
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.exp(arr - m).sum()))


def validate_segmentation(segments, length: int) -> bool:
    """True iff ``segments`` is a contiguous full cover of positions 1..length."""
    segs = tuple(segments)
    if not segs or length < 1:
        return False
    if segs[0].start != 1 or segs[-1].end != length:
        return False
    for prev, cur in zip(segs, segs[1:]):
        if cur.start != prev.end + 1:
            return False
    return all(1 <= s.start <= s.end <= length for s in segs)


def entities_of(segments, labels: LabelSet) -> EntitySet:
    """All segments whose label is not the null label.

    Segmentations that differ only in how null stretches are chopped up
    collapse to the same entity set.
    """
    null_id = labels.null_id
    return frozenset(s for s in segments if s.label != null_id)
