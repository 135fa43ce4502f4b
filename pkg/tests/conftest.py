import numpy as np
import pytest

from segchain.core import GradientSet, ScoreSet

SCORE_FIELDS = ("emissions", "span_local", "span_global", "transitions")


def rand_scores(rng, length, max_width, num_labels, scale=1.0) -> ScoreSet:
    return ScoreSet(
        length=length,
        max_width=max_width,
        emissions=rng.normal(0, scale, (length, num_labels)),
        span_local=rng.normal(0, scale, (length, max_width, num_labels)),
        span_global=rng.normal(0, scale, (length, max_width, num_labels)),
        transitions=rng.normal(0, scale, (num_labels, num_labels)),
    )


def with_field(scores: ScoreSet, field: str, table) -> ScoreSet:
    arrays = {f: getattr(scores, f) for f in SCORE_FIELDS}
    arrays[field] = table
    return ScoreSet(scores.length, scores.max_width, **arrays)


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def fd_max_rel_err(loss_fn, scores: ScoreSet, grad: GradientSet, fields,
                   h: float = 1e-5) -> float:
    """Central finite differences of loss_fn against analytic gradients.

    Returns the worst relative error over every entry of the named tables;
    relative error uses max(1, |a|, |fd|) in the denominator so near-zero
    components are compared absolutely.
    """
    worst = 0.0
    for field in fields:
        analytic = getattr(grad, field)
        base = getattr(scores, field)
        for idx in np.ndindex(base.shape):
            up = base.copy()
            up[idx] += h
            down = base.copy()
            down[idx] -= h
            fd = (loss_fn(with_field(scores, field, up))
                  - loss_fn(with_field(scores, field, down))) / (2 * h)
            worst = max(worst, rel_err(fd, analytic[idx]))
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
