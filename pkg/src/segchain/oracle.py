"""Brute-force enumeration oracles backing the dynamic-programming tests.

Everything here is deliberately exponential: the point is independence from
the DP implementations, not speed.  A hard item budget guards against
accidental blow-ups; oracles never silently truncate.
"""

from __future__ import annotations

import itertools

from .core import Segment, Segmentation
from .filtered import FilteredGraph, path_score

ENUMERATION_BUDGET = 10**6


class BudgetExceeded(RuntimeError):
    """Raised when an enumeration would produce more items than the budget."""


def enumerate_tag_sequences(length: int, num_labels: int) -> list[tuple[int, ...]]:
    """All num_labels**length tag sequences."""
    total = num_labels**length
    if total > ENUMERATION_BUDGET:
        raise BudgetExceeded(f"{total} tag sequences exceeds budget {ENUMERATION_BUDGET}")
    return list(itertools.product(range(num_labels), repeat=length))


def count_segmentations(length: int, max_width: int, num_labels: int) -> int:
    """Number of labeled full-cover segmentations with widths <= max_width."""
    counts = [0] * (length + 1)
    counts[0] = 1
    for m in range(1, length + 1):
        counts[m] = num_labels * sum(counts[m - d] for d in range(1, min(m, max_width) + 1))
    return counts[length]


def enumerate_segmentations(length: int, max_width: int, num_labels: int) -> list[Segmentation]:
    """All valid labeled segmentations of 1..length with widths <= max_width."""
    total = count_segmentations(length, max_width, num_labels)
    if total > ENUMERATION_BUDGET:
        raise BudgetExceeded(f"{total} segmentations exceeds budget {ENUMERATION_BUDGET}")
    out: list[Segmentation] = []

    def extend(prefix: list[Segment], covered: int) -> None:
        if covered == length:
            out.append(tuple(prefix))
            return
        for d in range(1, min(length - covered, max_width) + 1):
            for label in range(num_labels):
                prefix.append(Segment(covered + 1, covered + d, label))
                extend(prefix, covered + d)
                prefix.pop()

    extend([], 0)
    return out


def count_paths(graph: FilteredGraph) -> int:
    """Number of start->end paths (1 for the empty graph)."""
    if not graph.nodes:
        return 1
    n = graph.num_nodes
    into = [0] * n
    for k in range(n):
        into[k] = sum(into[p] for p in graph.preds[k]) if graph.preds[k] else 1
    return sum(into[k] for k in range(n) if not graph.succs[k])


def enumerate_paths(graph: FilteredGraph) -> list[tuple[tuple[Segment, ...], float]]:
    """Every start->end path with its score (via ``path_score``)."""
    total = count_paths(graph)
    if total > ENUMERATION_BUDGET:
        raise BudgetExceeded(f"{total} paths exceeds budget {ENUMERATION_BUDGET}")
    if not graph.nodes:
        return [((), 0.0)]
    out = []

    def walk(k: int, prefix: list[Segment]) -> None:
        prefix.append(graph.nodes[k])
        if not graph.succs[k]:
            path = tuple(prefix)
            out.append((path, path_score(path, graph)))
        else:
            for s in graph.succs[k]:
                walk(s, prefix)
        prefix.pop()

    for k in range(graph.num_nodes):
        if not graph.preds[k]:
            walk(k, [])
    return out


def count_full_nodes(length: int) -> int:
    """Spans of a length-L sequence, counted one by one (not by formula)."""
    count = 0
    for i in range(1, length + 1):
        for _j in range(i, length + 1):
            count += 1
    return count


def count_full_edges(length: int) -> int:
    """Adjacent span pairs (j + 1 == i'), counted one by one."""
    count = 0
    for i in range(1, length + 1):
        for j in range(i, length + 1):
            for _j2 in range(j + 1, length + 1):  # spans starting at j + 1
                count += 1
    return count
