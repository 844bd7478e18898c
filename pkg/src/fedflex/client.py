"""The participant-side service backing the UI: slate generation in either
ranking mode, explanations, feedback, settings, and participation control.

One ClientNode = one participant. It owns the profile (single writer), the
local model snapshot, and the slate cache used for click attribution.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import bpr, metrics, rerank
from .bpr import ModelParameters, TrainConfig
from .catalog import ItemCatalog
from .dp import DpConfig
from .federation import ModelUpdateMessage, client_sync_cycle
from .profiles import MODES, EventError, InteractionEvent, UserProfile
from .rerank import DEFAULT_LAMBDA, DEFAULT_POOL_DEPTH, ScoredCandidate, SlateSlot


class ClientError(ValueError):
    pass


@dataclass
class RecommendationSlate:
    slate_id: str
    mode: str
    slots: list[SlateSlot]
    created_at: int


@dataclass
class Explanation:
    item_id: str
    overlapping_genres: list[str]
    similar_liked: list[str]


@dataclass
class RerankConfig:
    lam: float = DEFAULT_LAMBDA
    pool_depth: int = DEFAULT_POOL_DEPTH


class ClientNode:
    def __init__(
        self,
        profile: UserProfile,
        catalog: ItemCatalog,
        model: ModelParameters,
        train_config: TrainConfig | None = None,
        dp_config: DpConfig | None = None,
        rerank_config: RerankConfig | None = None,
        clock=None,
    ):
        self.profile = profile
        self.catalog = catalog
        self.model = model
        self.train_config = train_config or TrainConfig()
        self.dp_config = dp_config or DpConfig()
        self.rerank_config = rerank_config or RerankConfig()
        self.participation_mode = "sharing"
        self.opt_out_reason: str | None = None
        self._slates: dict[str, RecommendationSlate] = {}
        self._slate_counter = 0
        self._clock = clock or (lambda: int(time.time() * 1000))

    # -- feed ----------------------------------------------------------

    def _excluded(self) -> set[str]:
        return self.profile.blocked | self.profile.clicked()

    def get_feed(self, mode: str, k: int) -> RecommendationSlate:
        """Build a slate in the requested mode and log one impression per
        slot. Deterministic given the profile and model snapshots; only the
        slate_id and timestamps vary."""
        if mode not in MODES:
            raise ClientError(f"unknown mode {mode!r}")
        if k < 1:
            raise ClientError("k must be >= 1")
        excluded = self._excluded()
        if mode == "personalized":
            items = bpr.top_k(self.model, self.profile.user_id, self.catalog, k, excluded)
            slots = [
                SlateSlot(item_id=iid, provenance="personalized", position=n)
                for n, iid in enumerate(items)
            ]
        else:
            slots = self._diversity_slots(k, excluded)
        self._slate_counter += 1
        slate = RecommendationSlate(
            slate_id=f"{self.profile.user_id}-s{self._slate_counter}",
            mode=mode,
            slots=slots,
            created_at=self._clock(),
        )
        self._slates[slate.slate_id] = slate
        for slot in slots:
            self.profile.record_event(
                InteractionEvent(
                    ts=self._clock(),
                    type="impression",
                    item_id=slot.item_id,
                    slate_id=slate.slate_id,
                    mode=mode,
                )
            )
        return slate

    def _diversity_slots(self, k: int, excluded: set[str]) -> list[SlateSlot]:
        pool_ids = bpr.top_k(
            self.model,
            self.profile.user_id,
            self.catalog,
            self.rerank_config.pool_depth,
            excluded,
        )
        if not pool_ids:
            return []
        raw = [bpr.score(self.model, self.profile.user_id, iid) for iid in pool_ids]
        rels = rerank.normalize_relevance(raw)
        candidates = [
            ScoredCandidate(iid, rel, self.catalog.genres_of(iid))
            for iid, rel in zip(pool_ids, rels)
        ]
        diverse = rerank.mmr_select(candidates, self.rerank_config.lam, k)
        personalized = pool_ids[:k]
        return rerank.blend_slate(personalized, diverse, k)

    # -- explanations --------------------------------------------------

    def explain(self, item_id: str) -> Explanation:
        """Genre overlap with liked items plus the 3 most factor-similar
        positives. A stand-in for an unspecified product surface; empty for
        cold profiles."""
        item = self.catalog.get(item_id)
        positives = sorted(self.profile.positives())
        liked_genres: set[str] = set()
        for pid in positives:
            liked_genres |= self.catalog.genres_of(pid)
        overlap = sorted(item.genres & liked_genres)
        target = self.model.item_factors[self.model.item_index[item_id]]
        scored = []
        for pid in positives:
            vec = self.model.item_factors[self.model.item_index[pid]]
            denom = float(np.linalg.norm(target) * np.linalg.norm(vec))
            cosine = float(target @ vec) / denom if denom > 0 else 0.0
            scored.append((-cosine, pid))
        scored.sort()
        return Explanation(
            item_id=item_id,
            overlapping_genres=overlap,
            similar_liked=[pid for _, pid in scored[:3]],
        )

    # -- feedback ------------------------------------------------------

    def click(self, slate_id: str, item_id: str) -> None:
        slate = self._slates.get(slate_id)
        if slate is None:
            raise ClientError(f"unknown slate {slate_id}")
        if all(slot.item_id != item_id for slot in slate.slots):
            raise ClientError(f"item {item_id} not on slate {slate_id}")
        self.profile.record_event(
            InteractionEvent(
                ts=self._clock(),
                type="click",
                item_id=item_id,
                slate_id=slate_id,
                mode=slate.mode,
            )
        )

    def block(self, item_id: str) -> None:
        self.profile.record_event(
            InteractionEvent(ts=self._clock(), type="block", item_id=item_id)
        )
        for slate in self._slates.values():
            slate.slots = [s for s in slate.slots if s.item_id != item_id]

    def unblock(self, item_id: str) -> None:
        self.profile.record_event(
            InteractionEvent(ts=self._clock(), type="unblock", item_id=item_id)
        )

    def watchlist_toggle(self, item_id: str) -> bool:
        """Returns True when the item ends up on the watchlist."""
        adding = item_id not in self.profile.watchlist
        self.profile.record_event(
            InteractionEvent(
                ts=self._clock(),
                type="watchlist_add" if adding else "watchlist_remove",
                item_id=item_id,
            )
        )
        return adding

    def set_setting(self, key: str, value: str) -> None:
        self.profile.record_event(
            InteractionEvent(
                ts=self._clock(), type="settings_change", payload=f"{key}={value}"
            )
        )

    def rate_satisfaction(self, value: int) -> None:
        self.profile.record_event(
            InteractionEvent(
                ts=self._clock(), type="satisfaction_rating", payload=str(value)
            )
        )

    def record_mode_switch(self, mode: str) -> None:
        self.profile.record_event(
            InteractionEvent(ts=self._clock(), type="mode_switch", mode=mode)
        )

    def set_participation(self, mode: str, reason: str | None = None) -> None:
        if mode not in ("sharing", "local_only"):
            raise ClientError(f"unknown participation mode {mode!r}")
        if mode == "local_only" and not (reason and reason.strip()):
            raise ClientError("opt-out requires a reason")
        self.participation_mode = mode
        self.opt_out_reason = reason if mode == "local_only" else None
        self.profile.record_event(
            InteractionEvent(
                ts=self._clock(),
                type="opt_out" if mode == "local_only" else "opt_in",
                payload=reason,
            )
        )

    # -- metrics -------------------------------------------------------

    def stats(self) -> metrics.EngagementSummary:
        return metrics.counters(self.profile.events)

    def activity(self) -> list[dict]:
        """Daily event counts for the activity chart."""
        events = self.profile.events
        if not events:
            return []
        start = min(e.ts for e in events) // metrics.MS_PER_DAY
        buckets: dict[int, int] = {}
        for e in events:
            day = e.ts // metrics.MS_PER_DAY - start
            buckets[day] = buckets.get(day, 0) + 1
        return [
            {"day": day, "events": buckets.get(day, 0)}
            for day in range(max(buckets) + 1)
        ]

    # -- federation ----------------------------------------------------

    def sync_cycle(
        self,
        round_no: int,
        global_vector: np.ndarray | None,
        rng: np.random.Generator,
        train_config: TrainConfig | None = None,
        include_counters: bool = True,
    ) -> ModelUpdateMessage | None:
        """Run one federation round locally; updates self.model in place and
        returns the outgoing message, if any."""
        counters = self.stats().to_counters() if include_counters else None
        self.model, msg = client_sync_cycle(
            self.profile,
            self.model,
            global_vector,
            self.catalog,
            train_config or self.train_config,
            self.dp_config,
            rng,
            round_no,
            sharing=self.participation_mode == "sharing",
            counters=counters,
        )
        return msg
