"""Score-boundary interface for external featurizers.

One JSON request per line on stdin, one JSON response per line on stdout.
Every request is self-contained; no engine state lives across calls.  All
arrays are float64 with the documented shapes:

    emissions          L x Y
    span_scores_local  L x K x Y
    span_scores_global L x K x Y
    transitions        Y x Y

Operations:

* ``{"op": "version"}`` -> engine/protocol version string.
* ``{"op": "decode", "backend": ..., "labels": [...], "null_label": ...,
  <arrays>}`` -> 1-based inclusive entities and the path/sequence score.
  With ``"dump_graph": true`` the fsemicrf response also carries the graph
  dump text.
* ``{"op": "loss_grad", "gold": [[i, j, label], ...], "beta": b,
  <arrays>}`` -> combined loss, its local/global split, and gradients with
  the same shapes as the inputs.

The boundary adds no arithmetic: results are bit-identical to calling the
engine functions directly on the same arrays.
"""

from __future__ import annotations

import json
import sys

import numpy as np

from . import __version__, filtered, inference
from .core import LabelSet, ScoreSet, Segment
from .features import score_space_loss

ARRAY_FIELDS = ("emissions", "span_scores_local", "span_scores_global", "transitions")


class ShapeError(ValueError):
    """Array with an unexpected shape; names the offending array."""

    def __init__(self, array: str, expected, actual):
        super().__init__(f"{array}: expected shape {tuple(expected)}, got {tuple(actual)}")
        self.array = array
        self.expected = tuple(expected)
        self.actual = tuple(actual)


def _labels_from(request) -> LabelSet:
    names = tuple(request["labels"])
    null_label = request.get("null_label")
    null_id = names.index(null_label) if null_label is not None else None
    return LabelSet(names, null_id=null_id)


def scores_from_request(request) -> ScoreSet:
    arrays = {}
    for name in ARRAY_FIELDS:
        if name not in request:
            raise ValueError(f"missing array {name!r}")
        arrays[name] = np.asarray(request[name], dtype=np.float64)

    num_labels = len(request["labels"])
    emissions = arrays["emissions"]
    if emissions.ndim != 2 or emissions.shape[1] != num_labels:
        raise ShapeError("emissions", ("L", num_labels), emissions.shape)
    length = emissions.shape[0]
    local = arrays["span_scores_local"]
    if local.ndim != 3 or local.shape[0] != length or local.shape[2] != num_labels:
        raise ShapeError("span_scores_local", (length, "K", num_labels), local.shape)
    max_width = int(local.shape[1])
    glob = arrays["span_scores_global"]
    if glob.shape != (length, max_width, num_labels):
        raise ShapeError("span_scores_global", (length, max_width, num_labels), glob.shape)
    trans = arrays["transitions"]
    if trans.shape != (num_labels, num_labels):
        raise ShapeError("transitions", (num_labels, num_labels), trans.shape)
    return ScoreSet(length, max_width, emissions, local, glob, trans)


def handle_request(request: dict) -> dict:
    op = request.get("op")
    if op == "version":
        return {"ok": True, "version": __version__}
    if op == "decode":
        labels = _labels_from(request)
        scores = scores_from_request(request)
        backend = request.get("backend", "fsemicrf")
        entities, score = inference.decode_scores(scores, labels, backend)
        response = {
            "ok": True,
            "entities": [[s.start, s.end, labels.name(s.label)] for s in entities],
            "score": score,
        }
        if request.get("dump_graph") and backend == "fsemicrf":
            graph = filtered.build_graph(
                filtered.filter_segments(scores, labels), scores)
            response["graph"] = filtered.format_graph(graph)
        return response
    if op == "loss_grad":
        labels = _labels_from(request)
        scores = scores_from_request(request)
        gold = [Segment(int(i), int(j), labels.index(name))
                for i, j, name in request["gold"]]
        beta = float(request.get("beta", 1.0))
        loc, glob, grad, _ = score_space_loss(scores, gold, labels, beta)
        return {
            "ok": True,
            "loss": loc + glob,
            "loss_local": loc,
            "loss_global": glob,
            "grad_emissions": grad.emissions.tolist(),
            "grad_span_scores_local": grad.span_local.tolist(),
            "grad_span_scores_global": grad.span_global.tolist(),
            "grad_transitions": grad.transitions.tolist(),
        }
    raise ValueError(f"unknown op {op!r}")


def serve(stdin=None, stdout=None) -> int:
    """Process line-delimited JSON requests until EOF."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            response = handle_request(json.loads(line))
        except ShapeError as exc:
            response = {"ok": False, "error": str(exc), "array": exc.array,
                        "expected": list(exc.expected),
                        "actual": [int(x) for x in exc.actual]}
        except Exception as exc:  # noqa: BLE001 - protocol boundary
            response = {"ok": False, "error": str(exc)}
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()
    return 0
