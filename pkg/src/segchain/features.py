"""Trainable span scorer and the combined training objective.

The featurizer is a deliberately small stand-in for a pretrained encoder:
learned token embeddings, a shared sum-pooled span feature, and two linear
heads (one for the filtering classifier, one for path scoring) plus a learned
transition matrix.  It exercises every learnable path of the model at desk
scale.

The combined loss is the filtering cross-entropy over all spans (null spans
down-weighted by beta) plus the global path NLL on the training-constrained
filtered graph.  Gradients are exact and flow through both heads, the shared
span feature, and the embeddings.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import filtered
from .core import EntitySet, GradientSet, LabelSet, ScoreSet, Segment

CHECKPOINT_VERSION = "segchain-checkpoint-1"
UNKNOWN_TOKEN = "<unk>"


@dataclass
class Featurizer:
    """Token embeddings + two span-scoring heads + transitions.

    The last row of ``token_table`` is the reserved unknown-token embedding.
    Arrays are mutable (training updates them in place); everything else in
    the engine treats parameters as read-only inputs.
    """

    token_table: np.ndarray          # (V, D); row V-1 reserved for unknowns
    label_weights_local: np.ndarray  # (Y, D)
    label_weights_global: np.ndarray  # (Y, D)
    transitions: np.ndarray          # (Y, Y)
    vocab: dict[str, int]
    labels: LabelSet
    max_width: int

    @property
    def dim(self) -> int:
        return self.token_table.shape[1]

    @classmethod
    def create(cls, vocab_tokens, labels: LabelSet, max_width: int, dim: int,
               rng: np.random.Generator, scale: float = 0.1) -> "Featurizer":
        vocab = {tok: i for i, tok in enumerate(vocab_tokens)}
        if UNKNOWN_TOKEN in vocab:
            raise ValueError(f"{UNKNOWN_TOKEN!r} is reserved")
        n_labels = len(labels)
        return cls(
            token_table=rng.normal(0.0, scale, (len(vocab) + 1, dim)),
            label_weights_local=rng.normal(0.0, scale, (n_labels, dim)),
            label_weights_global=rng.normal(0.0, scale, (n_labels, dim)),
            transitions=rng.normal(0.0, scale, (n_labels, n_labels)),
            vocab=vocab,
            labels=labels,
            max_width=max_width,
        )

    def token_ids(self, tokens) -> np.ndarray:
        unk = self.token_table.shape[0] - 1
        return np.array([self.vocab.get(t, unk) for t in tokens], dtype=np.intp)

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {
            "token_table": self.token_table,
            "label_weights_local": self.label_weights_local,
            "label_weights_global": self.label_weights_global,
            "transitions": self.transitions,
        }


@dataclass
class TrainConfig:
    beta: float = 0.25
    learning_rate_encoder: float = 5e-3
    learning_rate_head: float = 2e-2
    batch_size: int = 8
    epochs: int = 15
    max_width: int = 8
    seed: int = 0
    embed_dim: int = 32
    init_scale: float = 0.5
    global_loss: bool = True  # False: filtering-classifier-only ablation

    def __post_init__(self) -> None:
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must be in (0, 1], got {self.beta}")
        for name in ("learning_rate_encoder", "learning_rate_head",
                     "batch_size", "epochs", "max_width", "embed_dim", "init_scale"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def segment_feature(token_ids, start: int, end: int, fz: Featurizer) -> np.ndarray:
    """Sum of the token embeddings over a 1-based inclusive span."""
    ids = np.asarray(token_ids)
    if not 1 <= start <= end <= len(ids):
        raise ValueError(f"span ({start}, {end}) out of range for length {len(ids)}")
    return fz.token_table[ids[start - 1:end]].sum(axis=0)


def _span_features(token_ids, fz: Featurizer) -> np.ndarray:
    """(L, K, D) sum-pooled features; padding rows (span past the end) are 0."""
    ids = np.asarray(token_ids)
    L, K, D = len(ids), fz.max_width, fz.dim
    H = fz.token_table[ids]  # (L, D)
    prefix = np.vstack([np.zeros((1, D)), np.cumsum(H, axis=0)])
    F = np.zeros((L, K, D))
    for d in range(1, K + 1):
        rows = L - d + 1
        if rows <= 0:
            break
        F[:rows, d - 1] = prefix[d:d + rows] - prefix[:rows]
    return F


def score_sequence(token_ids, fz: Featurizer) -> ScoreSet:
    """Fill every score table for one sequence from the featurizer.

    Emissions are the width-1 slice of the local head, so the linear-chain
    baseline shares the filtering classifier's per-token scores.
    """
    F = _span_features(token_ids, fz)
    local = F @ fz.label_weights_local.T
    glob = F @ fz.label_weights_global.T
    return ScoreSet(
        length=len(token_ids),
        max_width=fz.max_width,
        emissions=local[:, 0, :].copy(),
        span_local=local,
        span_global=glob,
        transitions=fz.transitions.copy(),
    )


def local_loss(scores: ScoreSet, gold, labels: LabelSet, beta: float) -> tuple[float, GradientSet]:
    """Per-span softmax cross-entropy over labels, summed over all spans.

    Every span of width <= K gets a gold label: the entity label when the
    span exactly matches a gold entity, null otherwise.  Terms whose gold
    label is null are multiplied by beta.
    """
    null_id = labels.require_null()
    L, K, Y = scores.length, scores.max_width, scores.num_labels
    valid = scores.valid_span_mask()

    gold_table = np.full((L, K), null_id, dtype=np.intp)
    for g in gold:
        if g.width <= K:
            gold_table[g.start - 1, g.width - 1] = g.label

    logits = scores.span_local
    shifted = logits - logits.max(axis=2, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=2, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=2, keepdims=True))

    weights = np.where(gold_table == null_id, beta, 1.0) * valid
    ii, dd = np.meshgrid(np.arange(L), np.arange(K), indexing="ij")
    gold_logp = log_probs[ii, dd, gold_table]
    loss = float((-gold_logp * weights).sum())

    grad = GradientSet.zeros_like(scores)
    one_hot = np.zeros((L, K, Y))
    one_hot[ii, dd, gold_table] = 1.0
    grad.span_local[:] = weights[:, :, None] * (probs - one_hot)
    return loss, grad


def score_space_loss(scores: ScoreSet, gold, labels: LabelSet, beta: float,
                     ) -> tuple[float, float, GradientSet, filtered.FilteredGraph]:
    """Filtering loss + global path NLL at the score boundary.

    Returns (local, global, gradients, constrained graph).  This is the
    engine half of the combined objective; it has no featurizer dependence,
    so external encoders can drive it through the array interface.
    """
    gold = sorted(gold)
    for g in gold:
        if g.width > scores.max_width:
            raise ValueError(f"gold segment {g} wider than max_width={scores.max_width}")
    loc, grad = local_loss(scores, gold, labels, beta)
    nodes = filtered.filter_segments(scores, labels)
    nodes = filtered.apply_training_constraints(nodes, gold)
    graph = filtered.build_graph(nodes, scores)
    glob, ggrad = filtered.nll_and_grad(gold, graph)
    grad.add_(ggrad)
    return loc, glob, grad, graph


def total_loss(token_ids, gold, fz: Featurizer, beta: float) -> tuple[float, GradientSet]:
    """Combined loss for one sequence with gradients w.r.t. the score tables."""
    scores = score_sequence(token_ids, fz)
    loc, glob, grad, _ = score_space_loss(scores, gold, fz.labels, beta)
    return loc + glob, grad


@dataclass
class ParamGrads:
    token_table: np.ndarray
    label_weights_local: np.ndarray
    label_weights_global: np.ndarray
    transitions: np.ndarray

    @classmethod
    def zeros_like(cls, fz: Featurizer) -> "ParamGrads":
        return cls(*(np.zeros_like(a) for a in fz.param_arrays().values()))

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "token_table": self.token_table,
            "label_weights_local": self.label_weights_local,
            "label_weights_global": self.label_weights_global,
            "transitions": self.transitions,
        }

    def add_(self, other: "ParamGrads") -> None:
        for name, arr in self.arrays().items():
            arr += other.arrays()[name]

    def scale_(self, factor: float) -> None:
        for arr in self.arrays().values():
            arr *= factor


def backprop(token_ids, fz: Featurizer, grad: GradientSet) -> ParamGrads:
    """Push score-table gradients back onto the featurizer parameters.

    Emissions are an alias of the width-1 local scores, so their gradient
    folds into the local table before the heads and embeddings see it.
    """
    ids = np.asarray(token_ids)
    L, K = len(ids), fz.max_width
    F = _span_features(token_ids, fz)

    g_local = grad.span_local.copy()
    g_local[:, 0, :] += grad.emissions
    g_global = grad.span_global

    out = ParamGrads.zeros_like(fz)
    out.label_weights_local[:] = np.einsum("sky,skd->yd", g_local, F)
    out.label_weights_global[:] = np.einsum("sky,skd->yd", g_global, F)
    out.transitions[:] = grad.transitions

    dF = g_local @ fz.label_weights_local + g_global @ fz.label_weights_global
    dH = np.zeros((L, fz.dim))
    for d in range(1, K + 1):
        rows = L - d + 1
        if rows <= 0:
            break
        for offset in range(d):  # span (i, i+d-1) touches tokens i..i+d-1
            dH[offset:offset + rows] += dF[:rows, d - 1]
    np.add.at(out.token_table, ids, dH)
    return out


@dataclass
class AdamState:
    """Per-parameter first/second moment accumulators."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_featurizer(cls, fz: Featurizer) -> "AdamState":
        zeros = {k: np.zeros_like(a) for k, a in fz.param_arrays().items()}
        return cls(m=zeros, v={k: np.zeros_like(a) for k, a in fz.param_arrays().items()})


def adam_step(fz: Featurizer, grads: ParamGrads, state: AdamState,
              lr_encoder: float, lr_head: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    state.t += 1
    garrs = grads.arrays()
    for name, param in fz.param_arrays().items():
        g = garrs[name]
        state.m[name] = beta1 * state.m[name] + (1 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1 - beta2) * g * g
        m_hat = state.m[name] / (1 - beta1 ** state.t)
        v_hat = state.v[name] / (1 - beta2 ** state.t)
        lr = lr_encoder if name == "token_table" else lr_head
        param -= lr * m_hat / (np.sqrt(v_hat) + eps)


@dataclass
class StepRecord:
    step: int
    loss: float
    graph_nodes: float
    graph_edges: float


@dataclass
class TrainResult:
    featurizer: Featurizer
    steps: list[StepRecord] = field(default_factory=list)


def build_label_set(corpus) -> LabelSet:
    names = sorted({label for _, entities in corpus for _, _, label in entities})
    return LabelSet(("O", *names), null_id=0)


def build_vocab(corpus) -> list[str]:
    return sorted({tok for tokens, _ in corpus for tok in tokens})


def _prepare(corpus, fz: Featurizer):
    prepared = []
    for tokens, entities in corpus:
        ids = fz.token_ids(tokens)
        gold = tuple(sorted(
            Segment(i, j, fz.labels.index(name))
            for i, j, name in entities
            if j - i + 1 <= fz.max_width  # wider gold spans carry no scores
        ))
        prepared.append((ids, gold))
    return prepared


def train(corpus, config: TrainConfig, parallel: int = 1) -> TrainResult:
    """Adam training of the combined objective over a corpus.

    ``corpus`` is a sequence of (tokens, entities) pairs where entities are
    (start, end, label-name) triples, 1-based inclusive.  Each step logs the
    batch-mean loss and the batch-mean size of the unconstrained filtered
    graph (the inference graph), which is what shrinks and regrows as the
    filtering classifier trains.

    ``parallel`` > 1 computes per-sentence gradients of a batch in a thread
    pool; results are reduced in sentence order, so the trajectory is
    identical to the serial one.
    """
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty corpus")
    rng = np.random.default_rng(config.seed)
    labels = build_label_set(corpus)
    fz = Featurizer.create(build_vocab(corpus), labels, config.max_width,
                           config.embed_dim, rng, scale=config.init_scale)
    prepared = _prepare(corpus, fz)
    state = AdamState.for_featurizer(fz)
    result = TrainResult(featurizer=fz)

    def sentence_grads(idx: int):
        ids, gold = prepared[idx]
        scores = score_sequence(ids, fz)
        if config.global_loss:
            loc, glob, sgrad, _ = score_space_loss(scores, gold, labels, config.beta)
        else:
            loc, sgrad = local_loss(scores, gold, labels, config.beta)
            glob = 0.0
        inference_graph = filtered.build_graph(
            filtered.filter_segments(scores, labels), scores)
        return (loc + glob, backprop(ids, fz, sgrad),
                inference_graph.num_nodes, inference_graph.num_edges)

    pool = None
    if parallel > 1:
        from concurrent.futures import ThreadPoolExecutor
        pool = ThreadPoolExecutor(max_workers=parallel)
    try:
        step = 0
        for _epoch in range(config.epochs):
            order = rng.permutation(len(prepared))
            for lo in range(0, len(order), config.batch_size):
                batch = order[lo:lo + config.batch_size]
                if pool is not None:
                    items = list(pool.map(sentence_grads, batch))
                else:
                    items = [sentence_grads(idx) for idx in batch]
                acc = ParamGrads.zeros_like(fz)
                loss_sum = 0.0
                nodes_sum = 0
                edges_sum = 0
                for loss, pgrad, n_nodes, n_edges in items:
                    acc.add_(pgrad)
                    loss_sum += loss
                    nodes_sum += n_nodes
                    edges_sum += n_edges
                acc.scale_(1.0 / len(batch))
                adam_step(fz, acc, state, config.learning_rate_encoder,
                          config.learning_rate_head)
                result.steps.append(StepRecord(
                    step=step,
                    loss=loss_sum / len(batch),
                    graph_nodes=nodes_sum / len(batch),
                    graph_edges=edges_sum / len(batch),
                ))
                step += 1
    finally:
        if pool is not None:
            pool.shutdown()
    return result


def save_checkpoint(fz: Featurizer, path) -> None:
    """Versioned checkpoint; arrays round-trip bit-exactly through npz."""
    meta = json.dumps({
        "version": CHECKPOINT_VERSION,
        "vocab": sorted(fz.vocab, key=fz.vocab.get),
        "labels": list(fz.labels.labels),
        "null_id": fz.labels.null_id,
        "max_width": fz.max_width,
    })
    buf = io.BytesIO()
    np.savez(buf, meta=np.frombuffer(meta.encode("utf-8"), dtype=np.uint8),
             **fz.param_arrays())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path) -> Featurizer:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']!r}")
        labels = LabelSet(tuple(meta["labels"]), null_id=meta["null_id"])
        return Featurizer(
            token_table=data["token_table"].copy(),
            label_weights_local=data["label_weights_local"].copy(),
            label_weights_global=data["label_weights_global"].copy(),
            transitions=data["transitions"].copy(),
            vocab={tok: i for i, tok in enumerate(meta["vocab"])},
            labels=labels,
            max_width=int(meta["max_width"]),
        )
