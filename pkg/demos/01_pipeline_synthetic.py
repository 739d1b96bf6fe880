"""End-to-end walkthrough on a synthetic labeled mixture.

Generates a 4-class Gaussian mixture, learns 16-bit codes, encodes a database
and a held-out query set, runs both ranked and radius-bounded searches for one
query, and scores the whole query set with the retrieval metrics.

Run:  python demos/01_pipeline_synthetic.py
"""

import numpy as np

from jpsh import (
    HammingIndex,
    Hyperparams,
    encode_batch,
    evaluate,
    search_radius,
    search_ranked,
    train,
)
from jpsh.datasets import gaussian_mixture

print("=== data ===")
train_fs = gaussian_mixture(400, 10, sep=3.0, seed=0)
query_fs = gaussian_mixture(100, 10, sep=3.0, seed=1000)
print(f"train: n={train_fs.n}, d={train_fs.d}; queries: n={query_fs.n}")

print("\n=== training ===")
hyper = Hyperparams(l=16, m=8, k=7, psi=7, T=10, seed=0)
model, trace = train(train_fs, hyper)
for it, (obj, sec) in enumerate(zip(trace.objectives, trace.seconds), start=1):
    print(f"iter {it:2d}: objective {obj:12.4f}   ({sec * 1e3:.0f} ms)")
if trace.converged_at:
    print(f"stopped early at iteration {trace.converged_at}")

print("\n=== encoding ===")
db_codes = encode_batch(model, train_fs)
query_codes = encode_batch(model, query_fs)
print(f"database: {len(db_codes)} codes x {db_codes.l} bits "
      f"({db_codes.codes.shape[1]} words each)")

print("\n=== searching one query ===")
index = HammingIndex(db_codes)
top = search_ranked(index, query_codes.codes[0], top_n=5)
true_class = int(np.argmax(query_fs.labels[0]))
print(f"query 0 (class {true_class}), five nearest:")
for id_, dist in zip(top.ids, top.distances):
    cls = int(np.argmax(train_fs.labels[int(id_)]))
    print(f"  id {id_:4d}  distance {dist:2d}  class {cls}")
nearby = search_radius(index, query_codes.codes[0], r=2)
print(f"radius-2 ball holds {len(nearby.ids)} database items")

print("\n=== evaluating all queries ===")
report = evaluate(query_codes, query_fs.labels, db_codes, train_fs.labels,
                  top_ns=(1, 10, 100))
print(f"mAP               {report.map:.4f}")
print(f"precision@10      {report.pre_at[10]:.4f}")
print(f"recall@100        {report.rec_at[100]:.4f}")
print(f"radius-2 precision {report.radius2_precision:.4f}")
