"""Exact gallery ranking: full-corpus cosine pass, then ITM rerank of the top K.

Ties are always broken by ascending video_id, at every stage, so orderings
are a total order and every downstream artifact is deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import DimensionMismatchError, ProviderError, SessionStateError
from .corpus import EmbeddingMatrix

if TYPE_CHECKING:
    from .gateway import ModelGateway


@dataclass(frozen=True)
class RankEntry:
    video_id: str
    cosine_score: float
    itm_score: float | None = None


@dataclass(frozen=True)
class RankedList:
    entries: tuple[RankEntry, ...]
    stage: str = "cosine_only"  # cosine_only | reranked
    k_used: int | None = None

    def ids(self) -> tuple[str, ...]:
        return tuple(e.video_id for e in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def to_json(self) -> dict:
        return {
            "stage": self.stage,
            "k_used": self.k_used,
            "entries": [
                {"video_id": e.video_id, "cosine_score": e.cosine_score,
                 "itm_score": e.itm_score}
                for e in self.entries
            ],
        }

    def serialize(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


@dataclass(frozen=True)
class RankOfTarget:
    video_id: str
    rank: int  # 1-based


def order_desc(scores: np.ndarray, id_rank: np.ndarray) -> np.ndarray:
    """Indices sorted by descending score, ties by ascending video_id."""
    return np.lexsort((id_rank, -scores))


def rank_cosine(query_vec: np.ndarray, index: EmbeddingMatrix) -> RankedList:
    """Full permutation of the gallery by descending dot product.

    Gallery vectors are unit-norm at ingestion, so with a unit query the dot
    product is the cosine similarity.
    """
    query_vec = np.asarray(query_vec, dtype=np.float64)
    if query_vec.shape != (index.dimension,):
        raise DimensionMismatchError(
            f"query dimension {query_vec.shape} != index dimension {index.dimension}")
    scores = index.whole_matrix @ query_vec
    order = order_desc(scores, index.id_rank)
    ids = index.whole_ids
    entries = tuple(RankEntry(ids[i], float(scores[i])) for i in order)
    return RankedList(entries, stage="cosine_only")


def rerank_itm(ranked: RankedList, query_text: str, k: int,
               gateway: "ModelGateway", *, max_concurrency: int = 1) -> RankedList:
    """Reorder the first ``k`` entries by descending ITM score; keep the tail.

    ITM scores are fetched per candidate and keyed by id, so concurrent
    fetches cannot change the result.
    """
    if ranked.stage != "cosine_only":
        raise SessionStateError(f"rerank requires a cosine_only list, got {ranked.stage!r}")
    if not 1 <= k <= len(ranked):
        raise ValueError(f"K={k} out of range for corpus of {len(ranked)}")

    head = ranked.entries[:k]

    def fetch(entry: RankEntry) -> tuple[str, float]:
        try:
            return entry.video_id, float(gateway.itm(entry.video_id, query_text))
        except ProviderError:
            raise
        except Exception as exc:
            raise ProviderError(f"itm failed for {entry.video_id!r}: {exc}",
                                video_id=entry.video_id) from exc

    if max_concurrency > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=max_concurrency) as pool:
            scores = dict(pool.map(fetch, head))
    else:
        scores = dict(fetch(e) for e in head)

    new_head = sorted(
        (RankEntry(e.video_id, e.cosine_score, scores[e.video_id]) for e in head),
        key=lambda e: (-e.itm_score, e.video_id),
    )
    return RankedList(tuple(new_head) + ranked.entries[k:], stage="reranked", k_used=k)


def rank_of(ranked: RankedList, target: str) -> RankOfTarget:
    """1-based position of ``target`` in the list."""
    for pos, entry in enumerate(ranked.entries, start=1):
        if entry.video_id == target:
            return RankOfTarget(target, pos)
    raise KeyError(f"video_id {target!r} not in ranked list")
