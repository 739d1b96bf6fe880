"""Hamming-space retrieval over packed codes.

The default engine is an exact linear scan using word-level popcounts. An
optional bucket table keyed by a short code prefix accelerates radius-bounded
lookups and is required to return exactly the linear-scan results.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .encoder import CodeSet
from .errors import EmptyIndexError, ParamError, ShapeError


def hamming(a: np.ndarray, b: np.ndarray) -> int:
    """Hamming distance between two packed codes (popcount of their XOR)."""
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    if a.shape != b.shape:
        raise ShapeError(f"code word counts differ: {a.shape} vs {b.shape}")
    return int(np.bitwise_count(a ^ b).sum())


def distances_to(codes: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Hamming distances from one packed query to every row of a code matrix."""
    return np.bitwise_count(codes ^ query[None, :]).sum(axis=1).astype(np.int64)


@dataclass
class SearchResult:
    """Ranked retrieval output; distances are non-decreasing, ties by ascending id."""

    ids: np.ndarray
    distances: np.ndarray
    cutoff: dict = field(default_factory=dict)


class HammingIndex:
    """Immutable retrieval structure over a CodeSet.

    Args:
        codeset: database codes.
        with_buckets: also build the prefix bucket table used to prune
            radius queries (first min(l, 16) bits).
    """

    PREFIX_BITS = 16

    def __init__(self, codeset: CodeSet, with_buckets: bool = False):
        self.codeset = codeset
        self.prefix_bits = min(codeset.l, self.PREFIX_BITS)
        self.buckets: dict[int, np.ndarray] | None = None
        if with_buckets and len(codeset) > 0:
            prefixes = self._prefixes(codeset.codes)
            order = np.argsort(prefixes, kind="stable")
            sorted_pref = prefixes[order]
            starts = np.flatnonzero(np.diff(sorted_pref, prepend=-1))
            bounds = np.append(starts, len(order))
            self.buckets = {
                int(sorted_pref[s]): order[s:e] for s, e in zip(bounds[:-1], bounds[1:])
            }

    def _prefixes(self, codes: np.ndarray) -> np.ndarray:
        mask = np.uint64((1 << self.prefix_bits) - 1)
        return (codes[:, 0] & mask).astype(np.int64)

    def _check_query(self, q: np.ndarray, l: int | None) -> np.ndarray:
        if len(self.codeset) == 0:
            raise EmptyIndexError("index holds no codes")
        q = np.asarray(q, dtype=np.uint64)
        if q.shape != (self.codeset.codes.shape[1],):
            raise ShapeError(
                f"query has {q.shape} words, index codes have "
                f"{(self.codeset.codes.shape[1],)}"
            )
        if l is not None and l != self.codeset.l:
            raise ShapeError(f"query l={l} differs from index l={self.codeset.l}")
        return q


def _ranked(ids: np.ndarray, dist: np.ndarray, limit: int | None) -> SearchResult:
    order = np.lexsort((ids, dist))
    if limit is not None:
        order = order[:limit]
    return SearchResult(ids[order], dist[order])


def search_ranked(
    idx: HammingIndex, q: np.ndarray, top_n: int, l: int | None = None
) -> SearchResult:
    """The top_n database codes by ascending Hamming distance (ties by id)."""
    if top_n < 1:
        raise ParamError(f"top_n must be >= 1, got {top_n}")
    q = idx._check_query(q, l)
    dist = distances_to(idx.codeset.codes, q)
    res = _ranked(idx.codeset.ids, dist, top_n)
    res.cutoff = {"top_n": top_n}
    return res


def search_radius(
    idx: HammingIndex, q: np.ndarray, r: int, l: int | None = None
) -> SearchResult:
    """Exactly the database codes within Hamming distance r, ranked as search_ranked."""
    if r < 0 or r > idx.codeset.l:
        raise ParamError(f"radius must be in [0, {idx.codeset.l}], got {r}")
    q = idx._check_query(q, l)
    if idx.buckets is not None:
        rows = _bucket_candidates(idx, q, r)
        if rows.size == 0:
            return SearchResult(
                idx.codeset.ids[:0], np.empty(0, dtype=np.int64), {"radius": r}
            )
        dist = distances_to(idx.codeset.codes[rows], q)
        keep = dist <= r
        res = _ranked(idx.codeset.ids[rows[keep]], dist[keep], None)
    else:
        dist = distances_to(idx.codeset.codes, q)
        keep = dist <= r
        res = _ranked(idx.codeset.ids[keep], dist[keep], None)
    res.cutoff = {"radius": r}
    return res


def _bucket_candidates(idx: HammingIndex, q: np.ndarray, r: int) -> np.ndarray:
    """Rows whose prefix lies within distance r of the query prefix.

    Any code within full distance r differs from the query in at most r prefix
    bits, so probing every prefix mask of weight <= r is exhaustive.
    """
    b = idx.prefix_bits
    qpref = int(q[0] & np.uint64((1 << b) - 1))
    hit_rows = []
    max_flips = min(r, b)
    for flips in range(max_flips + 1):
        for positions in combinations(range(b), flips):
            mask = 0
            for p in positions:
                mask |= 1 << p
            bucket = idx.buckets.get(qpref ^ mask)
            if bucket is not None:
                hit_rows.append(bucket)
    if not hit_rows:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(hit_rows)
