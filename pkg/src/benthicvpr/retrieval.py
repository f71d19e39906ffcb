"""Exact descriptor retrieval and recall metrics against a link set."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import DimensionMismatch, EmptyDatabase, EmptyLinkSet, NoValidQueries
from .linking import LinkSet, VisitPair

RECOGNIZED = "recognized"
UNRECOGNIZED = "unrecognized"
INVALID = "invalid"


@dataclass(frozen=True, eq=False)
class DescriptorSet:
    view_ids: tuple[str, ...]
    data: np.ndarray

    def __post_init__(self):
        ids = tuple(str(v) for v in self.view_ids)
        data = np.array(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] != len(ids):
            raise ValueError(f"need one descriptor row per view, got {data.shape} for {len(ids)} ids")
        if not np.all(np.isfinite(data)):
            raise ValueError("descriptors must be finite")
        if len(set(ids)) != len(ids):
            raise ValueError("view ids must be unique")
        data.setflags(write=False)
        object.__setattr__(self, "view_ids", ids)
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def __len__(self) -> int:
        return len(self.view_ids)

    def row(self, view_id: str) -> np.ndarray:
        return self.data[self.view_ids.index(view_id)]


@dataclass(frozen=True)
class RetrievalResult:
    query_view_id: str
    ranked_candidates: tuple[tuple[str, float], ...]

    @property
    def ids(self) -> list[str]:
        return [c for c, _ in self.ranked_candidates]


def _id_rank(db: DescriptorSet) -> np.ndarray:
    order = sorted(range(len(db.view_ids)), key=db.view_ids.__getitem__)
    rank = np.empty(len(order), dtype=np.int64)
    rank[order] = np.arange(len(order))
    return rank


def _check_k(K: int, n: int) -> int:
    if K < 1:
        raise ValueError("K must be >= 1")
    if K > n:
        warnings.warn(f"K={K} exceeds database size {n}; clamping", RuntimeWarning, stacklevel=3)
        return n
    return K


def _select(d2: np.ndarray, K: int, id_rank: np.ndarray) -> np.ndarray:
    """Indices of the K smallest distances; equal distances ordered by view id."""
    if K < len(d2):
        part = np.argpartition(d2, K - 1)[:K]
        kth = d2[part].max()
        cand = np.flatnonzero(d2 <= kth)
    else:
        cand = np.arange(len(d2))
    order = np.lexsort((id_rank[cand], d2[cand]))
    return cand[order[:K]]


def top_k(query, db: DescriptorSet, K: int, query_view_id: str = "") -> RetrievalResult:
    """The K database views nearest to ``query`` in squared L2 distance."""
    if len(db) == 0:
        raise EmptyDatabase("database is empty")
    q = np.asarray(query, dtype=float).reshape(-1)
    if q.shape[0] != db.dim:
        raise DimensionMismatch(f"query dim {q.shape[0]} != database dim {db.dim}")
    K = _check_k(K, len(db))
    d2 = ((db.data - q) ** 2).sum(axis=1)
    sel = _select(d2, K, _id_rank(db))
    return RetrievalResult(query_view_id, tuple((db.view_ids[i], float(d2[i])) for i in sel))


def retrieve(queries: DescriptorSet, db: DescriptorSet, K: int, block_bytes: int = 64 << 20) -> dict[str, RetrievalResult]:
    """Top-K for every query row, computed in memory-bounded blocks."""
    if len(db) == 0:
        raise EmptyDatabase("database is empty")
    if queries.dim != db.dim:
        raise DimensionMismatch(f"query dim {queries.dim} != database dim {db.dim}")
    K = _check_k(K, len(db))
    id_rank = _id_rank(db)
    rows = max(1, block_bytes // max(1, 8 * len(db) * db.dim))
    out: dict[str, RetrievalResult] = {}
    for start in range(0, len(queries), rows):
        block = queries.data[start : start + rows]
        d2 = ((block[:, None, :] - db.data[None, :, :]) ** 2).sum(axis=2)
        for r in range(len(block)):
            sel = _select(d2[r], K, id_rank)
            qid = queries.view_ids[start + r]
            out[qid] = RetrievalResult(qid, tuple((db.view_ids[i], float(d2[r, i])) for i in sel))
    return out


Results = Union[Mapping[str, RetrievalResult], Iterable[RetrievalResult]]


def _as_map(results: Results) -> dict[str, RetrievalResult]:
    if isinstance(results, Mapping):
        return dict(results)
    return {r.query_view_id: r for r in results}


def first_hit_ranks(results: Results, links: LinkSet) -> dict[str, Optional[int]]:
    """1-based rank of the first linked candidate per valid query (None if never hit)."""
    res = _as_map(results)
    by_q = links.by_query()
    missing = set(by_q) - set(res)
    if missing:
        raise ValueError(f"no retrieval results for linked queries: {sorted(missing)[:5]}")
    out: dict[str, Optional[int]] = {}
    for q, linked in by_q.items():
        out[q] = next((k + 1 for k, c in enumerate(res[q].ids) if c in linked), None)
    return out


def recall_at_k(results: Results, links: LinkSet, K: int) -> float:
    """Fraction of valid queries with a linked view among their top-K candidates."""
    if K < 1:
        raise ValueError("K must be >= 1")
    ranks = first_hit_ranks(results, links)
    if not ranks:
        raise NoValidQueries("no query has a ground-truth link")
    hits = sum(1 for r in ranks.values() if r is not None and r <= K)
    return hits / len(ranks)


def tp_fn_at_k(results: Results, links: LinkSet, K: int) -> tuple[int, int]:
    res = _as_map(results)
    tp = 0
    for q, linked in links.by_query().items():
        if q in res:
            tp += len(linked.intersection(res[q].ids[:K]))
    return tp, len(links.pairs()) - tp


def ir_recall_at_k(results: Results, links: LinkSet, K: int) -> float:
    """Fraction of all ground-truth links retrieved within the top-K."""
    if len(links) == 0:
        raise EmptyLinkSet("link set is empty")
    tp, fn = tp_fn_at_k(results, links, K)
    return tp / (tp + fn)


@dataclass
class EvalReport:
    visit_pair: Optional[VisitPair]
    k_values: list[int]
    recall_at_k: list[float]
    ir_recall_at_k: list[float]
    tp_at_k: list[int]
    fn_at_k: list[int]
    valid_query_count: int
    invalid_query_count: int
    link_count: int
    first_hit_rank: dict[str, Optional[int]] = field(default_factory=dict)
    query_ids: list[str] = field(default_factory=list)

    def outcome(self, query_view_id: str, K: int) -> str:
        if query_view_id not in self.first_hit_rank:
            return INVALID
        r = self.first_hit_rank[query_view_id]
        return RECOGNIZED if r is not None and r <= K else UNRECOGNIZED

    def to_dict(self) -> dict:
        pair = None
        if self.visit_pair is not None:
            pair = {
                "query_visit_id": self.visit_pair.query_visit_id,
                "database_visit_id": self.visit_pair.database_visit_id,
            }
        return {
            "visit_pair": pair,
            "k_values": list(self.k_values),
            "recall_at_k": list(self.recall_at_k),
            "ir_recall_at_k": list(self.ir_recall_at_k),
            "tp_at_k": list(self.tp_at_k),
            "fn_at_k": list(self.fn_at_k),
            "valid_query_count": self.valid_query_count,
            "invalid_query_count": self.invalid_query_count,
            "link_count": self.link_count,
            "per_query": [
                {
                    "query_view_id": q,
                    "first_hit_rank": self.first_hit_rank.get(q),
                    "outcomes": [self.outcome(q, k) for k in self.k_values],
                }
                for q in self.query_ids
            ],
        }


def recall_curve(
    results: Results,
    links: LinkSet,
    k_values: Sequence[int],
    visit_pair: Optional[VisitPair] = None,
) -> EvalReport:
    """Recall@K and IRRecall@K for each K from one retrieval pass."""
    ks = [int(k) for k in k_values]
    if not ks or any(k < 1 for k in ks) or ks != sorted(ks):
        raise ValueError("k_values must be a non-empty ascending list of positive integers")
    res = _as_map(results)
    ranks = first_hit_ranks(res, links)
    if not ranks:
        raise NoValidQueries("no query has a ground-truth link")
    if len(links) == 0:
        raise EmptyLinkSet("link set is empty")
    depth = min((len(r.ranked_candidates) for r in res.values()), default=0)
    if depth < ks[-1]:
        warnings.warn(f"retrieval depth {depth} < max K {ks[-1]}", RuntimeWarning, stacklevel=2)
    recalls, irs, tps, fns = [], [], [], []
    for k in ks:
        hits = sum(1 for r in ranks.values() if r is not None and r <= k)
        recalls.append(hits / len(ranks))
        tp, fn = tp_fn_at_k(res, links, k)
        tps.append(tp)
        fns.append(fn)
        irs.append(tp / (tp + fn))
    query_ids = list(res)
    return EvalReport(
        visit_pair=visit_pair if visit_pair is not None else links.pair,
        k_values=ks,
        recall_at_k=recalls,
        ir_recall_at_k=irs,
        tp_at_k=tps,
        fn_at_k=fns,
        valid_query_count=len(ranks),
        invalid_query_count=sum(1 for q in query_ids if q not in ranks),
        link_count=len(links.pairs()),
        first_hit_rank=ranks,
        query_ids=query_ids,
    )


def evaluate(queries: DescriptorSet, db: DescriptorSet, links: LinkSet, k_values: Sequence[int]) -> EvalReport:
    """Retrieve once at ``max(k_values)`` and score every K."""
    results = retrieve(queries, db, max(k_values))
    return recall_curve(results, links, k_values)
