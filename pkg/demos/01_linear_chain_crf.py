"""Linear-chain CRF basics: scoring, the partition function, and Viterbi.

A tag sequence scores as the sum of per-token emission scores plus a learned
transition score between adjacent tags.  This demo builds a tiny random
scoring problem, decodes it, and verifies the partition function against a
brute-force sum over all tag sequences.
"""

import numpy as np

from segchain import crf, oracle
from segchain.core import ScoreSet, log_sum_exp

rng = np.random.default_rng(0)
L, Y = 6, 3

emissions = rng.normal(size=(L, Y))
transitions = rng.normal(size=(Y, Y))
scores = ScoreSet(L, 1, emissions=emissions, span_local=emissions[:, None, :],
                  span_global=emissions[:, None, :], transitions=transitions)

print(f"sequence length {L}, {Y} labels -> {Y}**{L} = {Y**L} tag sequences")

# Exact inference via dynamic programming ...
log_z = crf.log_partition(scores)
tags, best = crf.viterbi(scores)
print(f"forward log-partition: {log_z:.6f}")
print(f"viterbi tags {tags} with score {best:.6f}")

# ... agrees with brute force.
all_scores = [crf.score(t, scores) for t in oracle.enumerate_tag_sequences(L, Y)]
print(f"enumeration log-partition: {log_sum_exp(all_scores):.6f}")
print(f"enumeration best score:    {max(all_scores):.6f}")

# The NLL of the best sequence is small but positive: other sequences carry
# probability mass too.
loss, grad = crf.nll_and_grad(tags, scores)
print(f"NLL of the viterbi sequence: {loss:.6f}")
print(f"emission-gradient row sums (expectation minus one-hot): "
      f"{np.round(grad.emissions.sum(axis=1), 6)}")
