"""Linear-chain CRF: scoring, partition function, Viterbi, NLL with gradients.

The score of a tag sequence is the sum of per-token emission scores plus a
transition score between each adjacent pair of tags; the first tag carries no
incoming transition.  The partition function and marginals come from the
forward-backward recursions in log space with

    alpha(1, y) = emissions(1, y)
    alpha(i, y) = emissions(i, y) + logsumexp_y'( alpha(i-1, y') + T[y', y] )

and decoding is the max-sum analogue with backtracking.  Viterbi ties resolve
to the lowest label index at every argmax, so decoding is deterministic.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .core import GradientSet, ScoreSet

TagSequence = tuple[int, ...]


def _check_tags(tags, scores: ScoreSet) -> TagSequence:
    tags = tuple(int(t) for t in tags)
    if len(tags) != scores.length:
        raise ValueError(f"got {len(tags)} tags for a length-{scores.length} sequence")
    if any(not 0 <= t < scores.num_labels for t in tags):
        raise ValueError("tag index out of range")
    return tags


def score(tags, scores: ScoreSet) -> float:
    """Unnormalized score of one tag sequence."""
    tags = _check_tags(tags, scores)
    total = 0.0
    for i, y in enumerate(tags):
        total += scores.emissions[i, y]
    for prev, cur in zip(tags, tags[1:]):
        total += scores.transitions[prev, cur]
    return float(total)


def _forward(scores: ScoreSet) -> np.ndarray:
    L, Y = scores.length, scores.num_labels
    psi, T = scores.emissions, scores.transitions
    alpha = np.empty((L, Y))
    alpha[0] = psi[0]
    for i in range(1, L):
        alpha[i] = psi[i] + logsumexp(alpha[i - 1][:, None] + T, axis=0)
    return alpha


def _backward(scores: ScoreSet) -> np.ndarray:
    L, Y = scores.length, scores.num_labels
    psi, T = scores.emissions, scores.transitions
    beta = np.zeros((L, Y))
    for i in range(L - 2, -1, -1):
        beta[i] = logsumexp(T + (psi[i + 1] + beta[i + 1])[None, :], axis=1)
    return beta


def log_partition(scores: ScoreSet) -> float:
    """log sum over all |Y|^L tag sequences of exp(score)."""
    return float(logsumexp(_forward(scores)[-1]))


def marginals(scores: ScoreSet) -> tuple[np.ndarray, np.ndarray]:
    """Unary (L, Y) and pairwise (L-1, Y, Y) tag marginals."""
    L, Y = scores.length, scores.num_labels
    psi, T = scores.emissions, scores.transitions
    alpha, beta = _forward(scores), _backward(scores)
    log_z = logsumexp(alpha[-1])
    unary = np.exp(alpha + beta - log_z)
    pairwise = np.empty((L - 1, Y, Y)) if L > 1 else np.zeros((0, Y, Y))
    for i in range(L - 1):
        pairwise[i] = np.exp(
            alpha[i][:, None] + T + (psi[i + 1] + beta[i + 1])[None, :] - log_z
        )
    return unary, pairwise


def viterbi(scores: ScoreSet) -> tuple[TagSequence, float]:
    """Highest-scoring tag sequence and its score (recomputed via ``score``)."""
    L, Y = scores.length, scores.num_labels
    psi, T = scores.emissions, scores.transitions
    delta = psi[0].copy()
    back = np.zeros((L, Y), dtype=np.intp)
    for i in range(1, L):
        cand = delta[:, None] + T
        back[i] = cand.argmax(axis=0)  # first max: lowest previous label wins
        delta = psi[i] + cand.max(axis=0)
    best = int(delta.argmax())
    tags = [best]
    for i in range(L - 1, 0, -1):
        tags.append(int(back[i, tags[-1]]))
    tags.reverse()
    tags = tuple(tags)
    return tags, score(tags, scores)


def nll_and_grad(gold, scores: ScoreSet) -> tuple[float, GradientSet]:
    """Negative log-likelihood of the gold tags plus exact gradients.

    Gradients are expectation minus observation: unary marginals against the
    gold one-hot for emissions, pairwise marginals against gold transition
    counts for the transition matrix.
    """
    gold = _check_tags(gold, scores)
    loss = log_partition(scores) - score(gold, scores)
    unary, pairwise = marginals(scores)
    grad = GradientSet.zeros_like(scores)
    grad.emissions[:] = unary
    for i, y in enumerate(gold):
        grad.emissions[i, y] -= 1.0
    grad.transitions[:] = pairwise.sum(axis=0)
    for prev, cur in zip(gold, gold[1:]):
        grad.transitions[prev, cur] -= 1.0
    return float(loss), grad
