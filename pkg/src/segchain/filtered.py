"""Filtered semi-Markov CRF: span filtering, DAG construction, path scoring,
partition by message passing, max-sum decoding, and the global loss.

The filter keeps a span only when the local classifier's argmax label is not
null, so each surviving node carries exactly one label.  Edges connect a node
to every strictly-later node with no surviving span lying completely between
them, which makes every start-to-end path maximal: no surviving span can be
inserted between two consecutive path nodes.  Two virtual terminals close the
DAG: ``start`` feeds every node without a predecessor, and every node without
a successor feeds ``end``.

Edge weights fold the successor's span score together with the label
transition:

    w(start -> s)  = span_global(s)
    w(s' -> s)     = span_global(s) + T[label(s'), label(s)]
    w(s  -> end)   = 0

A graph with no surviving nodes gets a direct start->end edge of weight 0,
so decoding is total: the empty entity set is a valid, score-0 prediction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import NEG_INF, GradientSet, LabelSet, ScoreSet, Segment

EntityPath = tuple[Segment, ...]


@dataclass(frozen=True)
class FilteredGraph:
    """Immutable DAG over surviving spans, in topological order.

    ``nodes`` are sorted by (end, start, label), which is topological because
    every edge strictly increases the end position.  ``preds[k]``/``succs[k]``
    hold node indices; an empty ``preds[k]`` means the start terminal is the
    node's only predecessor, and an empty ``succs[k]`` means the node feeds
    the end terminal.
    """

    nodes: tuple[Segment, ...]
    node_scores: np.ndarray
    transitions: np.ndarray
    preds: tuple[tuple[int, ...], ...]
    succs: tuple[tuple[int, ...], ...]
    length: int
    max_width: int
    num_labels: int

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        """Edge count including terminal edges (start->s and s->end)."""
        if not self.nodes:
            return 1  # the direct start->end edge
        internal = sum(len(p) for p in self.preds)
        n_start = sum(1 for p in self.preds if not p)
        n_end = sum(1 for s in self.succs if not s)
        return internal + n_start + n_end

    def size(self) -> int:
        return self.num_nodes + self.num_edges


def filter_segments(scores: ScoreSet, labels: LabelSet) -> list[Segment]:
    """Spans whose local-classifier argmax label is not null.

    Ties at the argmax resolve to the lowest label index.  At most one node
    survives per (start, end) span, so the result size never depends on the
    number of labels.
    """
    null_id = labels.require_null()
    best = scores.span_local.argmax(axis=2)  # first max: lowest label index
    valid = scores.valid_span_mask()
    kept = []
    for i, d in np.argwhere(valid & (best != null_id)):
        kept.append(Segment(int(i) + 1, int(i + d) + 1, int(best[i, d])))
    return kept


def build_graph(nodes, scores: ScoreSet) -> FilteredGraph:
    """Assemble the filtered DAG over ``nodes`` with scores from ``scores``.

    Nodes must have pairwise distinct (start, end) spans.  An edge s' -> s
    exists iff end(s') < start(s) and no node lies completely inside the gap,
    i.e. no node c with end(s') < start(c) and end(c) < start(s).
    """
    node_list = sorted(nodes, key=lambda s: (s.end, s.start, s.label))
    spans = {}
    for s in node_list:
        if (s.start, s.end) in spans:
            raise ValueError(f"duplicate span ({s.start}, {s.end}) in node set")
        spans[(s.start, s.end)] = s
        if s.end > scores.length:
            raise ValueError(f"node {s} outside sequence of length {scores.length}")
        if s.width > scores.max_width:
            raise ValueError(f"node {s} wider than max_width={scores.max_width}")

    n = len(node_list)
    L = scores.length
    node_scores = np.array(
        [scores.span_global[s.start - 1, s.width - 1, s.label] for s in node_list]
    )

    if n:
        starts = np.array([s.start for s in node_list])
        ends = np.array([s.end for s in node_list])
        # min_end[p]: smallest end among nodes starting at or after position p.
        min_end = np.full(L + 3, np.iinfo(np.int64).max, dtype=np.int64)
        for s in node_list:
            min_end[s.start] = min(min_end[s.start], s.end)
        for p in range(L, 0, -1):
            min_end[p] = min(min_end[p], min_end[p + 1])
        gap_clear = min_end[np.minimum(ends + 1, L + 2)][:, None] >= starts[None, :]
        adj = (ends[:, None] < starts[None, :]) & gap_clear
        preds = tuple(tuple(int(a) for a in np.nonzero(adj[:, b])[0]) for b in range(n))
        succs = tuple(tuple(int(b) for b in np.nonzero(adj[a, :])[0]) for a in range(n))
    else:
        preds = ()
        succs = ()

    node_scores.flags.writeable = False
    return FilteredGraph(
        nodes=tuple(node_list),
        node_scores=node_scores,
        transitions=scores.transitions,
        preds=preds,
        succs=succs,
        length=L,
        max_width=scores.max_width,
        num_labels=scores.num_labels,
    )


def _node_index(graph: FilteredGraph) -> dict[Segment, int]:
    return {s: k for k, s in enumerate(graph.nodes)}


def path_score(path, graph: FilteredGraph) -> float:
    """Score of a start->end path given by its non-terminal nodes, in order.

    Raises ValueError when the node sequence is not a path of the graph
    (missing node, missing edge, or missing terminal edge).
    """
    path = tuple(path)
    if not path:
        if graph.nodes:
            raise ValueError("empty path, but the graph has nodes (no start->end edge)")
        return 0.0
    index = _node_index(graph)
    try:
        ids = [index[s] for s in path]
    except KeyError as exc:
        raise ValueError(f"node {exc.args[0]} is not in the graph") from None
    if graph.preds[ids[0]]:
        raise ValueError(f"no start edge into {path[0]} (it has predecessors)")
    if graph.succs[ids[-1]]:
        raise ValueError(f"no end edge out of {path[-1]} (it has successors)")
    for p, k in zip(ids, ids[1:]):
        if p not in graph.preds[k]:
            raise ValueError(f"missing edge {graph.nodes[p]} -> {graph.nodes[k]}")
    total = 0.0
    for pos, k in enumerate(ids):
        if pos > 0:
            total += graph.transitions[path[pos - 1].label, path[pos].label]
        total += graph.node_scores[k]
    return float(total)


def _forward_messages(graph: FilteredGraph) -> np.ndarray:
    T = graph.transitions
    fwd = np.empty(graph.num_nodes)
    for k, node in enumerate(graph.nodes):
        if graph.preds[k]:
            inc = logsumexp([fwd[p] + T[graph.nodes[p].label, node.label]
                             for p in graph.preds[k]])
        else:
            inc = 0.0
        fwd[k] = graph.node_scores[k] + inc
    return fwd


def _backward_messages(graph: FilteredGraph) -> np.ndarray:
    T = graph.transitions
    bwd = np.empty(graph.num_nodes)
    for k in range(graph.num_nodes - 1, -1, -1):
        node = graph.nodes[k]
        if graph.succs[k]:
            bwd[k] = logsumexp([graph.node_scores[s] + T[node.label, graph.nodes[s].label]
                                + bwd[s] for s in graph.succs[k]])
        else:
            bwd[k] = 0.0
    return bwd


def log_partition(graph: FilteredGraph) -> float:
    """log sum over all start->end paths of exp(path score)."""
    if not graph.nodes:
        return 0.0
    fwd = _forward_messages(graph)
    sinks = [fwd[k] for k in range(graph.num_nodes) if not graph.succs[k]]
    return float(logsumexp(sinks))


def decode(graph: FilteredGraph) -> tuple[EntityPath, float]:
    """Best start->end path: max-sum over the topological order, backtracked.

    Ties prefer the predecessor that comes earliest in topological order; the
    returned score is recomputed via ``path_score``.
    """
    if not graph.nodes:
        return (), 0.0
    T = graph.transitions
    dp = np.empty(graph.num_nodes)
    back = np.full(graph.num_nodes, -1, dtype=np.intp)
    for k, node in enumerate(graph.nodes):
        if graph.preds[k]:
            best = -np.inf
            arg = -1
            for p in graph.preds[k]:  # ascending index = topological order
                cand = dp[p] + T[graph.nodes[p].label, node.label]
                if cand > best:
                    best, arg = cand, p
            dp[k] = graph.node_scores[k] + best
            back[k] = arg
        else:
            dp[k] = graph.node_scores[k]
    best_sink = -1
    best_val = -np.inf
    for k in range(graph.num_nodes):
        if not graph.succs[k] and dp[k] > best_val:
            best_val, best_sink = dp[k], k
    rev = []
    k = best_sink
    while k >= 0:
        rev.append(graph.nodes[k])
        k = int(back[k])
    path = tuple(reversed(rev))
    return path, path_score(path, graph)


def apply_training_constraints(nodes, gold) -> list[Segment]:
    """Adjust a filtered node set so the gold entities form a valid path.

    Drops nodes that overlap no gold segment, then unions in every gold
    segment.  When a kept node shares a span with a gold segment under a
    different label, the gold-labeled node wins.  The result guarantees the
    gold path exists in the built graph, hence log Z >= gold score and a
    non-negative global loss.
    """
    gold = sorted(gold)
    for a, b in zip(gold, gold[1:]):
        if a.overlaps(b):
            raise ValueError(f"overlapping gold segments {a} and {b}")
    gold_spans = {(g.start, g.end): g for g in gold}
    kept = []
    for node in nodes:
        if not any(node.overlaps(g) for g in gold):
            continue
        if (node.start, node.end) in gold_spans:
            continue  # span is owned by gold; gold's label wins
        kept.append(node)
    kept.extend(gold)
    return sorted(kept, key=lambda s: (s.end, s.start, s.label))


def nll_and_grad(gold, graph: FilteredGraph) -> tuple[float, GradientSet]:
    """Global loss: NLL of the gold path in the filtered graph, with gradients.

    Raises if the gold entities do not form a path (a sign that
    ``apply_training_constraints`` was skipped).  Gradients flow into
    ``span_global`` via node marginals and into ``transitions`` via edge
    marginals, minus the gold indicators.
    """
    gold = tuple(sorted(gold))
    gold_score = path_score(gold, graph)  # raises when gold is unreachable
    grad = GradientSet.zeros(graph.length, graph.max_width, graph.num_labels)
    if not graph.nodes:
        return 0.0, grad

    T = graph.transitions
    fwd = _forward_messages(graph)
    bwd = _backward_messages(graph)
    log_z = float(logsumexp([fwd[k] for k in range(graph.num_nodes) if not graph.succs[k]]))

    for k, node in enumerate(graph.nodes):
        marg = np.exp(fwd[k] + bwd[k] - log_z)
        grad.span_global[node.start - 1, node.width - 1, node.label] += marg
        for p in graph.preds[k]:
            pnode = graph.nodes[p]
            edge = fwd[p] + T[pnode.label, node.label] + graph.node_scores[k] + bwd[k]
            grad.transitions[pnode.label, node.label] += np.exp(edge - log_z)

    for g in gold:
        grad.span_global[g.start - 1, g.width - 1, g.label] -= 1.0
    for a, b in zip(gold, gold[1:]):
        grad.transitions[a.label, b.label] -= 1.0
    return float(log_z - gold_score), grad


def format_graph(graph: FilteredGraph) -> str:
    """Debug dump: ``node <i> <j> <label> <score>`` and ``edge <from> <to>
    <weight>`` lines, with terminal endpoints spelled ``start``/``end``.
    Non-terminal endpoints are node indices in topological order.
    """
    lines = []
    for k, s in enumerate(graph.nodes):
        lines.append(f"node {s.start} {s.end} {s.label} {float(graph.node_scores[k])!r}")
    if not graph.nodes:
        lines.append("edge start end 0.0")
        return "\n".join(lines) + "\n"
    T = graph.transitions
    for k, node in enumerate(graph.nodes):
        if not graph.preds[k]:
            lines.append(f"edge start {k} {float(graph.node_scores[k])!r}")
        for p in graph.preds[k]:
            w = float(graph.node_scores[k] + T[graph.nodes[p].label, node.label])
            lines.append(f"edge {p} {k} {w!r}")
    for k in range(graph.num_nodes):
        if not graph.succs[k]:
            lines.append(f"edge {k} end 0.0")
    return "\n".join(lines) + "\n"
