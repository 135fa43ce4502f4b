"""Command-line surface: train, decode, eval, bench, and the ffi bridge.

Every subcommand is deterministic given its seed and inputs (timing columns
excepted).  Exit code 0 on success, 2 on usage or I/O errors.  The
``SEGCHAIN_SEED`` environment variable overrides the configured seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import statistics
import sys
import time

import numpy as np

from . import data_eval, features, ffi, filtered, inference
from .core import ScoreSet

CONFIG_KEYS = {f.name for f in features.TrainConfig.__dataclass_fields__.values()}
BENCH_HEADER = ("L", "backend", "nodes", "edges", "score_ms", "decode_ms")


class CliError(Exception):
    pass


def parse_config(path) -> dict:
    """Flat ``key = value`` file; values are sniffed as int/float/bool/str."""
    out = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}") from exc
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in CONFIG_KEYS:
                raise CliError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = _sniff(value)
    return out


def _sniff(value: str):
    lowered = value.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            continue
    return value


def _read_corpus(path) -> list[data_eval.Sentence]:
    try:
        return data_eval.read_conll(path)
    except OSError as exc:
        raise CliError(f"cannot read corpus: {exc}") from exc


def _read_token_lines(path) -> list[tuple[str, ...]]:
    """Token-per-line input for decoding; a tag column, if present, is ignored."""
    sentences = []
    tokens: list[str] = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read input: {exc}") from exc
    with fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if line.startswith("#"):
                continue
            if not line.strip():
                if tokens:
                    sentences.append(tuple(tokens))
                    tokens = []
                continue
            tokens.append(line.split("\t")[0])
    if tokens:
        sentences.append(tuple(tokens))
    return sentences


def _load_model(path) -> features.Featurizer:
    try:
        return features.load_checkpoint(path)
    except OSError as exc:
        raise CliError(f"cannot read model: {exc}") from exc


def cmd_train(args) -> int:
    overrides = parse_config(args.config)
    seed_env = os.environ.get("SEGCHAIN_SEED")
    if seed_env is not None:
        overrides["seed"] = int(seed_env)
    config = features.TrainConfig(**overrides)
    corpus = _read_corpus(args.corpus)
    raw = [(s.tokens, sorted(s.entities)) for s in corpus]
    result = features.train(raw, config, parallel=args.parallel)
    features.save_checkpoint(result.featurizer, args.out)
    metrics_path = args.metrics or (args.out + ".metrics.csv")
    with open(metrics_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("step", "loss", "graph_nodes", "graph_edges"))
        for rec in result.steps:
            writer.writerow((rec.step, repr(rec.loss), repr(rec.graph_nodes),
                             repr(rec.graph_edges)))
    print(f"wrote {args.out} and {metrics_path} ({len(result.steps)} steps)")
    return 0


def cmd_decode(args) -> int:
    fz = _load_model(args.model)
    sentences = _read_token_lines(args.infile)
    with open(args.out, "w", encoding="utf-8") as fh:
        for tokens in sentences:
            scores = features.score_sequence(fz.token_ids(tokens), fz)
            entities, _ = inference.decode_scores(scores, fz.labels, args.backend)
            fh.write(json.dumps({
                "tokens": list(tokens),
                "entities": [[s.start, s.end, fz.labels.name(s.label)]
                             for s in sorted(entities)],
            }) + "\n")
    return 0


def _read_predictions(path) -> list[set]:
    try:
        with open(path, encoding="utf-8") as fh:
            head = fh.read(1)
    except OSError as exc:
        raise CliError(f"cannot read predictions: {exc}") from exc
    if head == "{":
        out = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    record = json.loads(line)
                    out.append({(int(i), int(j), lab) for i, j, lab in record["entities"]})
        return out
    return [set(s.entities) for s in _read_corpus(path)]


def cmd_eval(args) -> int:
    gold = [set(s.entities) for s in _read_corpus(args.gold)]
    pred = _read_predictions(args.pred)
    if len(gold) != len(pred):
        raise CliError(f"gold has {len(gold)} sentences, predictions have {len(pred)}")
    precision, recall, f1 = data_eval.span_f1(gold, pred)
    print(f"precision={precision:.4f} recall={recall:.4f} f1={f1:.4f}")
    print(json.dumps({"precision": precision, "recall": recall, "f1": f1}))
    return 0


def _parse_synth_spec(spec: str) -> data_eval.SynthConfig:
    kwargs = {}
    for part in spec.split(","):
        if not part.strip():
            continue
        key, value = (p.strip() for p in part.split("=", 1))
        kwargs[key] = _sniff(value)
    seed_env = os.environ.get("SEGCHAIN_SEED")
    if seed_env is not None:
        kwargs["seed"] = int(seed_env)
    return data_eval.SynthConfig(**kwargs)


def _lattice_counts(length: int, max_width: int) -> tuple[int, int]:
    nodes = sum(min(max_width, length - i + 1) for i in range(1, length + 1))
    edges = sum(min(j, max_width) * min(length - j, max_width) for j in range(1, length))
    return nodes, edges


def _bench_decode(scores: ScoreSet, labels, backend: str) -> tuple[int, int]:
    """Run one decode; returns the (nodes, edges) structural counts."""
    if backend == "crf":
        inference.decode_scores(scores, labels, backend)
        return scores.length, scores.length - 1
    if backend in ("semicrf", "semicrf-unitnull"):
        inference.decode_scores(scores, labels, backend)
        return _lattice_counts(scores.length, scores.max_width)
    if backend == "fsemicrf":
        graph = filtered.build_graph(filtered.filter_segments(scores, labels), scores)
        filtered.decode(graph)
        return graph.num_nodes, graph.num_edges
    if backend == "local":
        nodes = filtered.filter_segments(scores, labels)
        return len(nodes), 0
    raise CliError(f"unknown backend {backend!r}")


def _median_ms(fn, reps: int) -> float:
    fn()  # warm-up pass, excluded
    samples = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - t0) * 1e3)
    return statistics.median(samples)


def cmd_bench(args) -> int:
    fz = _load_model(args.model)
    backends = [b.strip() for b in args.backends.split(",") if b.strip()]
    if not backends:
        raise CliError("need at least one backend")
    if args.corpus:
        sentences = [s.tokens for s in _read_corpus(args.corpus)]
    elif args.synth:
        sentences = [s.tokens for s in data_eval.synth_corpus(_parse_synth_spec(args.synth))]
    else:
        raise CliError("bench needs --corpus or --synth")

    rows = []
    per_backend_decode: dict[str, list[float]] = {b: [] for b in backends}
    per_backend_score: dict[str, list[float]] = {b: [] for b in backends}
    if args.reps > 0:
        def bench_sentence(tokens):
            ids = fz.token_ids(tokens)
            score_ms = _median_ms(lambda: features.score_sequence(ids, fz), args.reps)
            scores = features.score_sequence(ids, fz)
            out = []
            for backend in backends:
                nodes, edges = _bench_decode(scores, fz.labels, backend)
                decode_ms = _median_ms(
                    lambda b=backend: _bench_decode(scores, fz.labels, b), args.reps)
                out.append((len(tokens), backend, nodes, edges, score_ms, decode_ms))
            return out

        if args.parallel > 1:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(max_workers=args.parallel) as pool:
                batches = list(pool.map(bench_sentence, sentences))
        else:
            batches = [bench_sentence(tokens) for tokens in sentences]
        for batch in batches:
            for row in batch:
                rows.append(row)
                per_backend_score[row[1]].append(row[4])
                per_backend_decode[row[1]].append(row[5])

    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCH_HEADER)
        for row in rows:
            writer.writerow(row)
        if rows and "semicrf" in backends:
            base_score = per_backend_score["semicrf"]
            base_decode = per_backend_decode["semicrf"]
            for backend in backends:
                score_speedup = statistics.fmean(
                    b / x for b, x in zip(base_score, per_backend_score[backend]))
                decode_speedup = statistics.fmean(
                    b / x for b, x in zip(base_decode, per_backend_decode[backend]))
                writer.writerow(("speedup_vs_semicrf", backend, "", "",
                                 f"{score_speedup:.3f}", f"{decode_speedup:.3f}"))
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="segchain")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model on a CoNLL corpus")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--corpus", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--metrics", default=None)
    p_train.add_argument("--parallel", type=int, default=1)
    p_train.set_defaults(func=cmd_train)

    p_decode = sub.add_parser("decode", help="decode token sequences to entities")
    p_decode.add_argument("--model", required=True)
    p_decode.add_argument("--backend", default="fsemicrf", choices=inference.BACKENDS)
    p_decode.add_argument("--in", dest="infile", required=True)
    p_decode.add_argument("--out", required=True)
    p_decode.set_defaults(func=cmd_decode)

    p_eval = sub.add_parser("eval", help="span P/R/F1 of predictions vs gold")
    p_eval.add_argument("--gold", required=True)
    p_eval.add_argument("--pred", required=True)
    p_eval.set_defaults(func=cmd_eval)

    p_bench = sub.add_parser("bench", help="graph-size and decode-timing benchmark")
    p_bench.add_argument("--model", required=True)
    p_bench.add_argument("--backends", default="crf,semicrf,fsemicrf")
    p_bench.add_argument("--reps", type=int, default=5)
    p_bench.add_argument("--out", required=True)
    p_bench.add_argument("--corpus", default=None)
    p_bench.add_argument("--synth", default=None)
    p_bench.add_argument("--parallel", type=int, default=1)
    p_bench.set_defaults(func=cmd_bench)

    p_ffi = sub.add_parser("ffi", help="serve score-in/grad-out JSON requests on stdin")
    p_ffi.set_defaults(func=lambda args: ffi.serve())
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
