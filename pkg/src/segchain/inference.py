"""Backend dispatch: run any decoder over a ScoreSet and return entities."""

from __future__ import annotations

from . import crf, filtered, semicrf
from .core import LabelSet, ScoreSet, Segment, entities_of

BACKENDS = ("crf", "semicrf", "semicrf-unitnull", "fsemicrf", "local")


def decode_scores(scores: ScoreSet, labels: LabelSet, backend: str,
                  ) -> tuple[list[Segment], float]:
    """Decode one sequence; returns entities sorted by start and the score.

    The ``crf`` backend tags tokens with the model's labels directly and
    merges maximal runs of equal non-null labels into entities.  ``local`` is
    the filtering classifier alone: its surviving spans are the prediction
    (no path competition, overlaps possible), which is the w/o-global-loss
    ablation.
    """
    if backend == "crf":
        tags, score = crf.viterbi(scores)
        entities = []
        pos = 1
        for p in range(1, len(tags) + 1):
            if p == len(tags) or tags[p] != tags[pos - 1]:
                if tags[pos - 1] != labels.null_id:
                    entities.append(Segment(pos, p, tags[pos - 1]))
                pos = p + 1
        return entities, score
    if backend == "semicrf":
        seg, score = semicrf.viterbi(scores)
        return sorted(entities_of(seg, labels)), score
    if backend == "semicrf-unitnull":
        seg, score = semicrf.viterbi(semicrf.mask_wide_null(scores, labels))
        return sorted(entities_of(seg, labels)), score
    if backend == "fsemicrf":
        graph = filtered.build_graph(filtered.filter_segments(scores, labels), scores)
        path, score = filtered.decode(graph)
        return list(path), score
    if backend == "local":
        nodes = filtered.filter_segments(scores, labels)
        total = sum(scores.span_local[s.start - 1, s.width - 1, s.label] for s in nodes)
        return sorted(nodes), float(total)
    raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
