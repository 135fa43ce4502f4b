"""Corpus ingestion, BIO codec, exact-match span F1, synthetic data.

Sentences are (tokens, entities) pairs; entities are (start, end, label-name)
triples, 1-based inclusive, pairwise non-overlapping.  The BIO decoder is
total: a stray I- tag (no matching open span) is repaired into a B- tag, the
standard permissive convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Entity = tuple[int, int, str]


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[str, ...]
    entities: frozenset[Entity]

    @property
    def length(self) -> int:
        return len(self.tokens)


def read_conll(path) -> list[Sentence]:
    """Read ``token<TAB>tag`` lines; blank lines separate sentences and
    ``#``-prefixed lines are comments.  Tags are BIO-decoded into entities."""
    sentences: list[Sentence] = []
    tokens: list[str] = []
    tags: list[str] = []

    def flush() -> None:
        if tokens:
            sentences.append(Sentence(tuple(tokens), bio_decode(tags)))
            tokens.clear()
            tags.clear()

    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if line.startswith("#"):
                continue
            if not line.strip():
                flush()
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'token<TAB>tag', got {line!r}")
            tokens.append(parts[0])
            tags.append(parts[1])
    flush()
    return sentences


def write_conll(sentences, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sent in sentences:
            for tok, tag in zip(sent.tokens, bio_encode(sent.entities, sent.length)):
                fh.write(f"{tok}\t{tag}\n")
            fh.write("\n")


def bio_encode(entities, length: int) -> list[str]:
    """Entities to BIO tags. Entities must be non-overlapping."""
    tags = ["O"] * length
    for start, end, label in sorted(entities):
        if not 1 <= start <= end <= length:
            raise ValueError(f"entity ({start}, {end}, {label}) outside 1..{length}")
        if any(t != "O" for t in tags[start - 1:end]):
            raise ValueError(f"overlapping entity ({start}, {end}, {label})")
        tags[start - 1] = f"B-{label}"
        for p in range(start, end):
            tags[p] = f"I-{label}"
    return tags


def bio_decode(tags) -> frozenset[Entity]:
    """BIO tags to entities; stray I- tags are repaired into B- tags."""
    tags = list(tags)
    entities: set[Entity] = set()
    start = None
    label = None

    def close(pos: int) -> None:
        nonlocal start, label
        if start is not None:
            entities.add((start, pos, label))
        start = label = None

    for pos, tag in enumerate(tags, 1):
        if tag == "O":
            close(pos - 1)
            continue
        if "-" not in tag or tag.split("-", 1)[0] not in ("B", "I"):
            raise ValueError(f"invalid BIO tag {tag!r} at position {pos}")
        prefix, name = tag.split("-", 1)
        if prefix == "B" or start is None or name != label:
            close(pos - 1)
            start, label = pos, name
    close(len(tags))
    return frozenset(entities)


def span_f1(gold, pred) -> tuple[float, float, float]:
    """Micro-averaged exact-match precision/recall/F1 over aligned corpora.

    A prediction counts only when (start, end, label) all match.  When both
    sides are entirely empty the corpus is degenerate and all three scores
    are 1; when only one side is empty they are 0.
    """
    gold = [set(g) for g in gold]
    pred = [set(p) for p in pred]
    if len(gold) != len(pred):
        raise ValueError(f"gold has {len(gold)} sentences, pred has {len(pred)}")
    tp = sum(len(g & p) for g, p in zip(gold, pred))
    n_gold = sum(len(g) for g in gold)
    n_pred = sum(len(p) for p in pred)
    if n_gold == 0 and n_pred == 0:
        return 1.0, 1.0, 1.0
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_gold if n_gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


@dataclass(frozen=True)
class SynthConfig:
    """Synthetic NER corpus: planted non-overlapping entities whose surface
    tokens are drawn from label-specific vocabulary blocks, so the signal is
    learnable by a bag-of-embeddings scorer."""

    num_sentences: int = 100
    min_length: int = 5
    max_length: int = 30
    num_entity_labels: int = 4
    entity_density: float = 0.15
    max_entity_width: int = 3
    background_vocab: int = 200
    tokens_per_label: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.entity_density <= 1.0:
            raise ValueError("entity_density must be in [0, 1]")
        if self.min_length < 1 or self.max_length < self.min_length:
            raise ValueError("bad length range")


def synth_corpus(cfg: SynthConfig) -> list[Sentence]:
    rng = np.random.default_rng(cfg.seed)
    labels = [f"E{k}" for k in range(cfg.num_entity_labels)]
    mean_width = (1 + cfg.max_entity_width) / 2.0
    start_prob = min(1.0, cfg.entity_density / mean_width) if labels else 0.0

    sentences = []
    for _ in range(cfg.num_sentences):
        length = int(rng.integers(cfg.min_length, cfg.max_length + 1))
        tokens: list[str] = []
        entities: set[Entity] = set()
        pos = 1
        while pos <= length:
            if labels and rng.random() < start_prob:
                width = int(rng.integers(1, cfg.max_entity_width + 1))
                width = min(width, length - pos + 1)
                label = labels[int(rng.integers(len(labels)))]
                for _k in range(width):
                    tokens.append(f"{label.lower()}_{int(rng.integers(cfg.tokens_per_label))}")
                entities.add((pos, pos + width - 1, label))
                pos += width
            else:
                tokens.append(f"w{int(rng.integers(cfg.background_vocab))}")
                pos += 1
        sentences.append(Sentence(tuple(tokens), frozenset(entities)))
    return sentences
