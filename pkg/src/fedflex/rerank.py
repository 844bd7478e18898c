"""Diversity-enhanced ranking: genre Jaccard similarity, greedy MMR
selection, and the diverse/personalized slate blend."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

# default MMR trade-off and candidate pool depth; overridable in config
DEFAULT_LAMBDA = 0.3
DEFAULT_POOL_DEPTH = 200

# repeating provenance pattern over each window of 5 slate positions
BLEND_PATTERN = ("diverse", "personalized", "diverse", "diverse", "personalized")


@dataclass(frozen=True)
class ScoredCandidate:
    item_id: str
    relevance: float  # min-max normalized to [0,1] over the candidate pool
    genres: frozenset[str]


@dataclass(frozen=True)
class SlateSlot:
    item_id: str
    provenance: str  # "personalized" | "diverse"
    position: int


def genre_similarity(a: Iterable[str], b: Iterable[str]) -> float:
    """Jaccard index of two genre sets; two empty sets count as 0."""
    a, b = set(a), set(b)
    union = a | b
    if not union:
        return 0.0
    return len(a & b) / len(union)


def normalize_relevance(scores: Sequence[float]) -> list[float]:
    """Min-max normalize raw scores to [0,1]; a constant pool maps to all 0."""
    if not scores:
        return []
    lo, hi = min(scores), max(scores)
    if hi == lo:
        return [0.0] * len(scores)
    return [(s - lo) / (hi - lo) for s in scores]


def mmr_select(
    candidates: Sequence[ScoredCandidate], lam: float, k: int
) -> list[str]:
    """Greedy Maximal Marginal Relevance.

    Each step picks the unselected candidate maximizing
    ``lam * relevance - (1 - lam) * max similarity to the selected set``;
    with nothing selected the similarity term is 0, so the first pick is the
    most relevant. Ties break by ascending item_id.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must be in [0,1]")
    if k < 1:
        raise ValueError("k must be >= 1")
    ids = [c.item_id for c in candidates]
    if len(set(ids)) != len(ids):
        raise ValueError("candidates must be duplicate-free")
    remaining = list(candidates)
    selected: list[ScoredCandidate] = []
    while remaining and len(selected) < k:
        best = None
        best_score = -math.inf
        for cand in remaining:
            penalty = max(
                (genre_similarity(cand.genres, s.genres) for s in selected),
                default=0.0,
            )
            mmr = lam * cand.relevance - (1.0 - lam) * penalty
            if best is None or mmr > best_score or (
                mmr == best_score and cand.item_id < best.item_id
            ):
                best, best_score = cand, mmr
        selected.append(best)
        remaining.remove(best)
    return [c.item_id for c in selected]


def blend_slate(
    personalized: Sequence[str], diverse: Sequence[str], k: int
) -> list[SlateSlot]:
    """Compose a slate of ceil(0.6k) diverse and floor(0.4k) personalized
    slots, interleaved D,P,D,D,P per window of 5 positions.

    Items are drawn in order from each source, skipping anything already
    placed; when a source runs dry (or its quota is spent) the other fills in.
    """
    if len(set(personalized)) != len(personalized) or len(set(diverse)) != len(diverse):
        raise ValueError("source lists must be duplicate-free")
    quota = {"diverse": math.ceil(0.6 * k), "personalized": k - math.ceil(0.6 * k)}
    queues = {"diverse": list(diverse), "personalized": list(personalized)}
    placed: set[str] = set()
    slots: list[SlateSlot] = []

    def draw(source: str) -> str | None:
        queue = queues[source]
        while queue:
            item = queue.pop(0)
            if item not in placed:
                return item
        return None

    position = 0
    while position < k:
        preferred = BLEND_PATTERN[position % len(BLEND_PATTERN)]
        other = "personalized" if preferred == "diverse" else "diverse"
        item = None
        source = preferred
        if quota[preferred] > 0:
            item = draw(preferred)
        if item is None:
            source = other
            item = draw(other)
        if item is None and quota[preferred] <= 0:
            # preferred side still has items but its quota is spent and the
            # other is empty; spill over rather than truncate the slate
            source = preferred
            item = draw(preferred)
        if item is None:
            break
        quota[source] -= 1
        placed.add(item)
        slots.append(SlateSlot(item_id=item, provenance=source, position=position))
        position += 1
    return slots
