"""Semi-Markov CRF: segment-level scoring, partition, Viterbi, NLL, ablation.

A segmentation scores as the sum of its span scores plus a transition score
between each adjacent pair of segment labels; the first segment carries no
incoming transition.  Span scores come from the ``span_global`` table of the
ScoreSet, widths are capped at ``max_width`` (K), and the forward recursion

    alpha(m, y) = logsumexp over d = 1..min(m, K) of
        span(m-d+1, m, y)                                  if d == m
        span(m-d+1, m, y) + logsumexp_y'(alpha(m-d, y') + T[y', y])  otherwise

sums over every valid segmentation.  With K = 1 this is exactly the
linear-chain forward recursion, which the tests pin down.

Segmental Viterbi ties resolve to the shortest width first, then the lowest
previous-label index; the final boundary picks the lowest label among maxima.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .core import (
    NEG_INF,
    GradientSet,
    LabelSet,
    ScoreSet,
    Segment,
    Segmentation,
    validate_segmentation,
)


def _check_segmentation(segments, scores: ScoreSet) -> Segmentation:
    segs = tuple(segments)
    if not validate_segmentation(segs, scores.length):
        raise ValueError(f"not a contiguous full cover of 1..{scores.length}: {segs}")
    for s in segs:
        if s.width > scores.max_width:
            raise ValueError(f"segment {s} wider than max_width={scores.max_width}")
        if not 0 <= s.label < scores.num_labels:
            raise ValueError(f"label out of range in {s}")
    return segs


def score(segments, scores: ScoreSet) -> float:
    """Unnormalized score of one segmentation."""
    segs = _check_segmentation(segments, scores)
    G = scores.span_global
    total = 0.0
    for s in segs:
        total += G[s.start - 1, s.width - 1, s.label]
    for prev, cur in zip(segs, segs[1:]):
        total += scores.transitions[prev.label, cur.label]
    return float(total)


def _forward(scores: ScoreSet) -> np.ndarray:
    """alpha[m, y]: log-mass of segmentations of 1..m whose last label is y."""
    L, K, Y = scores.length, scores.max_width, scores.num_labels
    G, T = scores.span_global, scores.transitions
    alpha = np.full((L + 1, Y), NEG_INF)
    for m in range(1, L + 1):
        cands = []
        for d in range(1, min(m, K) + 1):
            phi = G[m - d, d - 1, :]
            if d == m:
                cands.append(phi)
            else:
                cands.append(phi + logsumexp(alpha[m - d][:, None] + T, axis=0))
        alpha[m] = logsumexp(np.stack(cands), axis=0)
    return alpha


def _backward(scores: ScoreSet) -> tuple[np.ndarray, np.ndarray]:
    """beta[m, y]: log-mass of completions of m+1..L given the segment ending
    at m has label y.  Also returns suffix[m, y] = logsumexp over widths d of
    span(m+1, m+d, y) + beta(m+d, y), the pre-transition message reused by
    the marginal computations.
    """
    L, K, Y = scores.length, scores.max_width, scores.num_labels
    G, T = scores.span_global, scores.transitions
    beta = np.full((L + 1, Y), NEG_INF)
    suffix = np.full((L + 1, Y), NEG_INF)
    beta[L] = 0.0
    for m in range(L - 1, -1, -1):
        terms = [G[m, d - 1, :] + beta[m + d] for d in range(1, min(L - m, K) + 1)]
        suffix[m] = logsumexp(np.stack(terms), axis=0)
        beta[m] = logsumexp(T + suffix[m][None, :], axis=1)
    return beta, suffix


def log_partition(scores: ScoreSet) -> float:
    """log sum over all valid segmentations (widths <= K) of exp(score)."""
    return float(logsumexp(_forward(scores)[-1]))


def marginals(scores: ScoreSet) -> tuple[np.ndarray, np.ndarray]:
    """Span marginals (L, K, Y) and transition marginals (Y, Y).

    ``span[i-1, d-1, y]`` is the probability that segment (i, i+d-1, y)
    appears in a segmentation; ``trans[y', y]`` sums the probability of a
    label-y' segment being immediately followed by a label-y segment.
    """
    L, K, Y = scores.length, scores.max_width, scores.num_labels
    G, T = scores.span_global, scores.transitions
    alpha = _forward(scores)
    beta, suffix = _backward(scores)
    log_z = logsumexp(alpha[L])

    span = np.zeros((L, K, Y))
    # incoming[m, y]: log-mass arriving at a segment starting at m+1 with
    # label y, including its transition; the first segment has no transition.
    incoming = np.full((L, Y), NEG_INF)
    incoming[0] = 0.0
    for m in range(1, L):
        incoming[m] = logsumexp(alpha[m][:, None] + T, axis=0)
    for i in range(1, L + 1):
        for d in range(1, min(L - i + 1, K) + 1):
            j = i + d - 1
            span[i - 1, d - 1] = np.exp(incoming[i - 1] + G[i - 1, d - 1, :] + beta[j] - log_z)

    trans = np.zeros((Y, Y))
    for m in range(1, L):
        trans += np.exp(alpha[m][:, None] + T + suffix[m][None, :] - log_z)
    return span, trans


def viterbi(scores: ScoreSet) -> tuple[Segmentation, float]:
    """Highest-scoring segmentation and its score (recomputed via ``score``)."""
    L, K, Y = scores.length, scores.max_width, scores.num_labels
    G, T = scores.span_global, scores.transitions
    delta = np.full((L + 1, Y), NEG_INF)
    back_width = np.zeros((L + 1, Y), dtype=np.intp)
    back_label = np.full((L + 1, Y), -1, dtype=np.intp)
    delta[0] = 0.0
    for m in range(1, L + 1):
        best = np.full(Y, -np.inf)
        bw = np.zeros(Y, dtype=np.intp)
        bl = np.full(Y, -1, dtype=np.intp)
        for d in range(1, min(m, K) + 1):  # ascending: shorter width wins ties
            phi = G[m - d, d - 1, :]
            if d == m:
                cand = phi
                prev = np.full(Y, -1, dtype=np.intp)
            else:
                reach = delta[m - d][:, None] + T
                cand = phi + reach.max(axis=0)
                prev = reach.argmax(axis=0)  # first max: lowest label wins
            better = cand > best
            best = np.where(better, cand, best)
            bw[better] = d
            bl[better] = prev[better]
        delta[m] = best
        back_width[m] = bw
        back_label[m] = bl

    label = int(delta[L].argmax())
    segs: list[Segment] = []
    m = L
    while m > 0:
        d = int(back_width[m, label])
        segs.append(Segment(m - d + 1, m, label))
        label_prev = int(back_label[m, label])
        m -= d
        label = label_prev
    segs.reverse()
    segmentation = tuple(segs)
    return segmentation, score(segmentation, scores)


def nll_and_grad(gold, scores: ScoreSet) -> tuple[float, GradientSet]:
    """NLL of the gold segmentation; gradients are marginals minus indicators."""
    gold = _check_segmentation(gold, scores)
    loss = log_partition(scores) - score(gold, scores)
    span, trans = marginals(scores)
    grad = GradientSet.zeros_like(scores)
    grad.span_global[:] = span
    grad.transitions[:] = trans
    for s in gold:
        grad.span_global[s.start - 1, s.width - 1, s.label] -= 1.0
    for prev, cur in zip(gold, gold[1:]):
        grad.transitions[prev.label, cur.label] -= 1.0
    return float(loss), grad


def mask_wide_null(scores: ScoreSet, labels: LabelSet) -> ScoreSet:
    """Unit-size-null ablation: kill every null span wider than one token.

    Returns a ScoreSet whose span_global entries for the null label at widths
    greater than 1 are the NEG_INF sentinel, so partition and Viterbi on the
    result range only over segmentations with unit-length null segments.
    """
    null_id = labels.require_null()
    table = scores.span_global.copy()
    if scores.max_width > 1:
        table[:, 1:, null_id] = NEG_INF
    return scores.replace_span_global(table)
