"""Retrieval evaluation: mAP, precision/recall at N, PR curves, radius-2 precision.

Ground-truth relevance between two samples is a nonempty label intersection
(class equality in the single-label case). The mean average precision is
computed over the full Hamming ranking of the database, ties broken by
ascending id; the radius-2 retrieval precision is reported separately.

"Pre@100" is ambiguous between plain precision at rank 100 and average
precision truncated at rank 100, so both are reported: ``pre_at`` holds
precision@N and ``ap_at`` holds truncated AP@N (sum limited to the top N,
divided by min(R, N)).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoder import CodeSet
from .errors import LabelError, ShapeError
from .index import distances_to

DEFAULT_TOP_NS = (1, 5, 10, 50, 100)


def _pad_labels(labels: np.ndarray, width: int) -> np.ndarray:
    if labels.shape[1] == width:
        return labels
    out = np.zeros((labels.shape[0], width), dtype=bool)
    out[:, : labels.shape[1]] = labels
    return out


def relevance(query_labels, db_labels) -> bool:
    """True iff the two label sets intersect.

    Accepts boolean membership rows or any iterables of label indices.
    """
    if query_labels is None or db_labels is None:
        raise LabelError("relevance requires labels on both sides")
    if isinstance(query_labels, np.ndarray) or isinstance(db_labels, np.ndarray):
        q = np.asarray(query_labels)
        d = np.asarray(db_labels)
        if q.dtype == bool and d.dtype == bool:
            if q.shape != d.shape:
                raise LabelError(f"label widths differ: {q.shape} vs {d.shape}")
            return bool((q & d).any())
        return bool(set(q.tolist()) & set(d.tolist()))
    return bool(set(query_labels) & set(db_labels))


def average_precision(flags, total_relevant: int | None = None) -> float:
    """AP of a ranked relevance-flag sequence.

    AP = (1/R) * sum over relevant positions p of (hits up to p) / p, with R
    the total number of relevant items. R defaults to the number of set flags
    (appropriate when the ranking covers the whole database); R = 0 gives 0.
    """
    flags = np.asarray(flags, dtype=bool)
    R = int(flags.sum()) if total_relevant is None else int(total_relevant)
    if R == 0:
        return 0.0
    hits = np.cumsum(flags)
    positions = np.flatnonzero(flags) + 1
    return float((hits[positions - 1] / positions).sum() / R)


def truncated_average_precision(flags, n: int, total_relevant: int | None = None) -> float:
    """AP restricted to the top n ranks, normalized by min(R, n)."""
    flags = np.asarray(flags, dtype=bool)
    R = int(flags.sum()) if total_relevant is None else int(total_relevant)
    if R == 0:
        return 0.0
    head = flags[:n]
    hits = np.cumsum(head)
    positions = np.flatnonzero(head) + 1
    return float((hits[positions - 1] / positions).sum() / min(R, n))


@dataclass
class EvalReport:
    """Aggregated retrieval metrics for one (codebook, query set) pair."""

    map: float
    pre_at: dict[int, float]
    rec_at: dict[int, float]
    ap_at: dict[int, float]
    pr_curve: list[tuple[float, float]]
    radius2_precision: float
    num_queries: int
    num_queries_without_relevant: int
    seeds: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "map": self.map,
            "pre_at": {str(k): v for k, v in sorted(self.pre_at.items())},
            "rec_at": {str(k): v for k, v in sorted(self.rec_at.items())},
            "ap_at": {str(k): v for k, v in sorted(self.ap_at.items())},
            "pr_curve": [[r, p] for r, p in self.pr_curve],
            "radius2_precision": self.radius2_precision,
            "num_queries": self.num_queries,
            "num_queries_without_relevant": self.num_queries_without_relevant,
            "seeds": self.seeds,
        }

    def save_json(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )

    def save_curves_csv(self, path) -> None:
        """Pooled curve points as ``N,precision,recall`` rows."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("N,precision,recall\n")
            for n, (rec, prec) in enumerate(self.pr_curve, start=1):
                fh.write(f"{n},{prec!r},{rec!r}\n")


def evaluate(
    queries: CodeSet,
    query_labels: np.ndarray,
    db: CodeSet,
    db_labels: np.ndarray,
    top_ns=DEFAULT_TOP_NS,
    curve: bool = True,
    seeds: dict | None = None,
) -> EvalReport:
    """Full evaluation of a query code set against a database code set.

    Rankings use ascending Hamming distance with ties broken by ascending id.
    Queries without any relevant database item contribute AP 0 to the mAP and
    are counted in ``num_queries_without_relevant``; the per-N, curve and
    radius-2 averages run over the remaining queries only (their recall would
    otherwise be undefined).

    Raises:
        ShapeError: code lengths differ.
        LabelError: labels missing or misaligned.
    """
    if queries.l != db.l:
        raise ShapeError(f"code lengths differ: {queries.l} vs {db.l}")
    if query_labels is None or db_labels is None:
        raise LabelError("evaluate requires labels for queries and database")
    query_labels = np.asarray(query_labels, dtype=bool)
    db_labels = np.asarray(db_labels, dtype=bool)
    if query_labels.shape[0] != len(queries) or db_labels.shape[0] != len(db):
        raise LabelError("label rows do not align with code rows")
    # the text label format infers its width from the data, so one side may
    # simply lack the highest label indices; pad to the shared vocabulary
    width = max(query_labels.shape[1], db_labels.shape[1])
    query_labels = _pad_labels(query_labels, width)
    db_labels = _pad_labels(db_labels, width)

    n_q, n_db = len(queries), len(db)
    rel = (query_labels.astype(np.float64) @ db_labels.astype(np.float64).T) > 0
    top_ns = sorted({min(int(n), n_db) for n in top_ns})

    ap_sum = 0.0
    ap_at_sums = {n: 0.0 for n in top_ns}
    pre_sums = {n: 0.0 for n in top_ns}
    rec_sums = {n: 0.0 for n in top_ns}
    radius2_sum = 0.0
    no_relevant = 0
    prec_curve_sum = np.zeros(n_db)
    rec_curve_sum = np.zeros(n_db)
    positions = np.arange(1, n_db + 1, dtype=np.float64)

    for qi in range(n_q):
        dist = distances_to(db.codes, queries.codes[qi])
        order = np.lexsort((db.ids, dist))
        flags = rel[qi, order]
        R = int(flags.sum())
        if R == 0:
            no_relevant += 1
            continue
        hits = np.cumsum(flags)
        fpos = np.flatnonzero(flags) + 1
        ap_sum += (hits[fpos - 1] / fpos).sum() / R
        for n in top_ns:
            pre_sums[n] += hits[n - 1] / n
            rec_sums[n] += hits[n - 1] / R
            head = fpos[fpos <= n]
            ap_at_sums[n] += (hits[head - 1] / head).sum() / min(R, n)
        retrieved = dist <= 2
        n_ret = int(retrieved.sum())
        if n_ret:
            radius2_sum += float((rel[qi] & retrieved).sum()) / n_ret
        if curve:
            prec_curve_sum += hits / positions
            rec_curve_sum += hits / R

    scored = n_q - no_relevant
    denom = max(scored, 1)
    pr_curve = []
    if curve and scored:
        pr_curve = [
            (float(r), float(p))
            for r, p in zip(rec_curve_sum / scored, prec_curve_sum / scored)
        ]
    return EvalReport(
        map=ap_sum / n_q if n_q else 0.0,
        pre_at={n: pre_sums[n] / denom for n in top_ns},
        rec_at={n: rec_sums[n] / denom for n in top_ns},
        ap_at={n: ap_at_sums[n] / denom for n in top_ns},
        pr_curve=pr_curve,
        radius2_precision=radius2_sum / denom,
        num_queries=n_q,
        num_queries_without_relevant=no_relevant,
        seeds=seeds or {},
    )
