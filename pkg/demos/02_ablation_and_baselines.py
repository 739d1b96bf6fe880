"""Compare the full model against its two reduced modes and the baselines.

Four systems share one evaluation harness on the same mixture:

  jpsh        both branches (per-anchor personalized + shared pairwise)
  jsh_only    pairwise branch alone
  psh_only    personalized branch alone
  jpsh0       full model but anchors drawn uniformly instead of K-means
  lsh         random-hyperplane floor

Run:  python demos/02_ablation_and_baselines.py
"""

from jpsh import (
    Hyperparams,
    apply_center,
    center,
    encode_batch,
    evaluate,
    lsh_encode_batch,
    lsh_train,
    train,
    train_ablation,
    train_random_anchor,
)
from jpsh.datasets import gaussian_mixture

train_fs = gaussian_mixture(400, 10, sep=3.0, seed=0)
query_fs = gaussian_mixture(100, 10, sep=3.0, seed=1000)


def score(model):
    db = encode_batch(model, train_fs)
    queries = encode_batch(model, query_fs)
    report = evaluate(queries, query_fs.labels, db, train_fs.labels, top_ns=(100,))
    return report.map, report.pre_at[100]


rows = []
for mode, runner in (
    ("jpsh", train),
    ("jsh_only", train_ablation),
    ("psh_only", train_ablation),
):
    hyper = Hyperparams(l=16, m=8, k=7, psi=7, T=10, seed=0, mode=mode)
    model, _ = runner(train_fs, hyper)
    rows.append((mode, *score(model)))

hyper = Hyperparams(l=16, m=8, k=7, psi=7, T=10, seed=0)
model, _ = train_random_anchor(train_fs, hyper)
rows.append(("jpsh0 (random anchors)", *score(model)))

# the baseline shares the preprocessing: encode centered features
ctrain, mean = center(train_fs)
cquery = apply_center(query_fs, mean)
lsh = lsh_train(train_fs.d, 16, seed=0)
report = evaluate(
    lsh_encode_batch(lsh, cquery), cquery.labels,
    lsh_encode_batch(lsh, ctrain), ctrain.labels, top_ns=(100,),
)
rows.append(("lsh", report.map, report.pre_at[100]))

print(f"{'system':<24} {'mAP':>8} {'pre@100':>8}")
for name, m, p in rows:
    print(f"{name:<24} {m:8.4f} {p:8.4f}")
