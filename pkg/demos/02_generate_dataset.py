"""Generating a labeled dataset and looking at what is in it."""
import logging
import os
import tempfile

import numpy as np

from kktnet.dataset import GenConfig, generate, read_jsonl, split, stack, write_jsonl

logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")

# %% 2000 accepted instances; the audit log shows the acceptance rate and quantiles
examples = generate(GenConfig(count=2000, seed=0))
feats, G, h, c, y = stack(examples)
print("features", feats.shape, "targets", y.shape)

# %% Labels are heavy tailed: a few nearly parallel constraint pairs give huge vertices
for name, col in zip(("x1", "x2", "lambda1", "lambda2"), y.T):
    q = np.quantile(np.abs(col), [0.5, 0.9, 0.99, 1.0])
    print(f"|{name}| median {q[0]:.3g}  p90 {q[1]:.3g}  p99 {q[2]:.3g}  max {q[3]:.3g}")
print("theta range", min(ex.theta for ex in examples), max(ex.theta for ex in examples))

# %% JSONL round trip and a label-free copy
with tempfile.TemporaryDirectory() as d:
    path = os.path.join(d, "lp.jsonl")
    write_jsonl(examples[:5], path)
    print(open(path).readline().strip())
    back = read_jsonl(path)
    print("round trip equal:", all(a.truth == b.truth for a, b in zip(examples, back)))
    write_jsonl([ex.without_truth() for ex in examples[:5]], path)
    print("label-free:", all(ex.truth is None for ex in read_jsonl(path)))

# %% Train/test split
train, test = split(examples, 0.2, seed=1)
print(len(train), "train /", len(test), "test")
