"""Engagement metrics computed from event logs.

CTR is the fraction of displayed recommendation slots that receive a click;
duplicate clicks on the same (slate, item) slot count once. All functions are
pure folds over immutable event snapshots, so replaying a log reproduces
every number exactly.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .profiles import InteractionEvent

MS_PER_DAY = 86_400_000


@dataclass
class ModeStats:
    impressions: int = 0
    clicks: int = 0

    @property
    def ctr(self) -> float | None:
        if self.impressions == 0:
            return None
        return self.clicks / self.impressions


@dataclass
class EngagementSummary:
    impressions: int = 0
    unique_clicked: int = 0
    per_mode: dict[str, ModeStats] = field(default_factory=dict)
    settings_changes: int = 0
    feedback_entries: int = 0
    dont_recommend_actions: int = 0
    satisfaction_sum: int = 0
    satisfaction_n: int = 0

    @property
    def ctr(self) -> float | None:
        if self.impressions == 0:
            return None
        return self.unique_clicked / self.impressions

    @property
    def satisfaction_mean(self) -> float | None:
        if self.satisfaction_n == 0:
            return None
        return self.satisfaction_sum / self.satisfaction_n

    def to_counters(self) -> dict:
        """Flat counter payload safe to share with the aggregator: counts
        only, no item ids, no timestamps."""
        return {
            "impressions": self.impressions,
            "unique_clicked": self.unique_clicked,
            "settings_changes": self.settings_changes,
            "feedback_entries": self.feedback_entries,
            "dont_recommend_actions": self.dont_recommend_actions,
            "satisfaction_sum": self.satisfaction_sum,
            "satisfaction_n": self.satisfaction_n,
            "per_mode": {
                mode: {"impressions": st.impressions, "clicks": st.clicks}
                for mode, st in sorted(self.per_mode.items())
            },
        }


def _unique_clicks(events: Iterable[InteractionEvent]) -> set[tuple[str, str]]:
    return {
        (e.slate_id, e.item_id) for e in events if e.type == "click"
    }


def ctr(events: Sequence[InteractionEvent], mode: str | None = None) -> float | None:
    """Unique clicked slots over impression count, optionally restricted to
    one ranking mode. No impressions -> None, never 0."""
    if mode is not None:
        events = [e for e in events if e.mode == mode]
    impressions = sum(1 for e in events if e.type == "impression")
    if impressions == 0:
        return None
    return len(_unique_clicks(events)) / impressions


def ctr_timeseries(
    events: Sequence[InteractionEvent], bucket_ms: int = MS_PER_DAY
) -> list[tuple[int, dict[str, float | None]]]:
    """Per-day, per-mode CTR. Days index from the earliest event's bucket;
    buckets with no impressions for a mode report None for it."""
    if not events:
        return []
    start = min(e.ts for e in events) // bucket_ms
    by_day: dict[int, list[InteractionEvent]] = defaultdict(list)
    for e in events:
        by_day[e.ts // bucket_ms - start].append(e)
    out = []
    for day in range(max(by_day) + 1):
        day_events = by_day.get(day, [])
        modes = sorted({e.mode for e in day_events if e.mode is not None})
        out.append((day, {m: ctr(day_events, m) for m in modes}))
    return out


def counters(events: Sequence[InteractionEvent]) -> EngagementSummary:
    """Fold a log into the counter set shown on dashboards."""
    summary = EngagementSummary()
    clicked_slots: set[tuple[str, str]] = set()
    per_mode_clicked: dict[str, set[tuple[str, str]]] = defaultdict(set)
    for e in events:
        if e.type == "impression":
            summary.impressions += 1
            if e.mode is not None:
                summary.per_mode.setdefault(e.mode, ModeStats()).impressions += 1
        elif e.type == "click":
            clicked_slots.add((e.slate_id, e.item_id))
            if e.mode is not None:
                per_mode_clicked[e.mode].add((e.slate_id, e.item_id))
        elif e.type == "settings_change":
            summary.settings_changes += 1
        elif e.type == "block":
            summary.dont_recommend_actions += 1
        elif e.type == "opt_out" and e.payload:
            summary.feedback_entries += 1
        elif e.type == "satisfaction_rating":
            summary.satisfaction_sum += int(e.payload)
            summary.satisfaction_n += 1
    summary.unique_clicked = len(clicked_slots)
    for mode, slots in per_mode_clicked.items():
        summary.per_mode.setdefault(mode, ModeStats()).clicks = len(slots)
    return summary


def merge_counters(payloads: Iterable[dict]) -> dict:
    """Aggregate per-participant counter payloads into dashboard totals.

    Inputs are the flat dictionaries produced by
    ``EngagementSummary.to_counters`` — counts only, by construction.
    """
    totals = Counter()
    per_mode: dict[str, Counter] = defaultdict(Counter)
    n = 0
    for payload in payloads:
        n += 1
        for key in (
            "impressions",
            "unique_clicked",
            "settings_changes",
            "feedback_entries",
            "dont_recommend_actions",
            "satisfaction_sum",
            "satisfaction_n",
        ):
            totals[key] += payload.get(key, 0)
        for mode, stats in payload.get("per_mode", {}).items():
            per_mode[mode]["impressions"] += stats.get("impressions", 0)
            per_mode[mode]["clicks"] += stats.get("clicks", 0)
    impressions = totals["impressions"]
    sat_n = totals["satisfaction_n"]
    return {
        "participants_reporting": n,
        "impressions": impressions,
        "clicks": totals["unique_clicked"],
        "ctr": (totals["unique_clicked"] / impressions) if impressions else None,
        "settings_changes": totals["settings_changes"],
        "feedback_entries": totals["feedback_entries"],
        "blocks": totals["dont_recommend_actions"],
        "satisfaction_mean": (totals["satisfaction_sum"] / sat_n) if sat_n else None,
        "per_mode": {
            mode: {
                "impressions": stats["impressions"],
                "clicks": stats["clicks"],
                "ctr": (stats["clicks"] / stats["impressions"])
                if stats["impressions"]
                else None,
            }
            for mode, stats in sorted(per_mode.items())
        },
    }


def format_ctr_percent(value: float) -> str:
    """Render a CTR the way reports print it, e.g. 0.6537 -> '65.37%'."""
    return f"{value * 100:.2f}%"
