"""On-device interaction log and derived participant state.

All raw behavioral data lives here and only here. The event log is append-only
JSON lines; blocked set, watchlist, and settings are deterministic folds over
it, so replaying a log from empty always reproduces the same state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .catalog import ItemCatalog

EVENT_TYPES = frozenset(
    {
        "impression",
        "click",
        "block",
        "unblock",
        "watchlist_add",
        "watchlist_remove",
        "settings_change",
        "satisfaction_rating",
        "opt_out",
        "opt_in",
        "mode_switch",
    }
)

MODES = frozenset({"personalized", "diversity"})


class EventError(ValueError):
    """Raised when an event violates the log contract."""


@dataclass(frozen=True)
class InteractionEvent:
    ts: int  # UTC milliseconds
    type: str
    item_id: str | None = None
    slate_id: str | None = None
    mode: str | None = None
    payload: str | None = None

    def validate(self) -> None:
        if self.type not in EVENT_TYPES:
            raise EventError(f"unknown event type {self.type!r}")
        if self.type in ("impression", "click") and not (self.item_id and self.slate_id):
            raise EventError(f"{self.type} events require item_id and slate_id")
        if self.mode is not None and self.mode not in MODES:
            raise EventError(f"unknown mode {self.mode!r}")
        if self.type == "satisfaction_rating":
            try:
                value = int(self.payload or "")
            except ValueError:
                raise EventError("satisfaction_rating payload must be an integer") from None
            if not 1 <= value <= 5:
                raise EventError(f"satisfaction rating {value} outside [1,5]")

    def to_json(self) -> str:
        record: dict = {"ts": self.ts, "type": self.type}
        for key in ("item_id", "slate_id", "mode", "payload"):
            value = getattr(self, key)
            if value is not None:
                record[key] = value
        return json.dumps(record, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "InteractionEvent":
        record = json.loads(line)
        return cls(
            ts=record["ts"],
            type=record["type"],
            item_id=record.get("item_id"),
            slate_id=record.get("slate_id"),
            mode=record.get("mode"),
            payload=record.get("payload"),
        )


class UserProfile:
    """Event log plus incrementally maintained derived state for one user.

    Single-writer: mutations go through ``record_event``; readers may take
    snapshots of the derived sets, which are returned as copies.
    """

    def __init__(
        self,
        user_id: str,
        catalog: ItemCatalog,
        data_dir: str | Path | None = None,
    ):
        self.user_id = user_id
        self.catalog = catalog
        self._events: list[InteractionEvent] = []
        self._blocked: set[str] = set()
        self._watchlist: set[str] = set()
        self._clicked: set[str] = set()
        self._settings: dict[str, str] = {}
        self._log_fh = None
        self._dir: Path | None = None
        if data_dir is not None:
            self._dir = Path(data_dir)
            self._dir.mkdir(parents=True, exist_ok=True)
            log_path = self._dir / "events.jsonl"
            if log_path.exists():
                for line in log_path.read_text(encoding="utf-8").splitlines():
                    if line:
                        self._apply(InteractionEvent.from_json(line))
            self._log_fh = log_path.open("a", encoding="utf-8")

    # -- derived views -------------------------------------------------

    @property
    def events(self) -> list[InteractionEvent]:
        return list(self._events)

    @property
    def blocked(self) -> set[str]:
        return set(self._blocked)

    @property
    def watchlist(self) -> set[str]:
        return set(self._watchlist)

    @property
    def settings(self) -> dict[str, str]:
        return dict(self._settings)

    def positives(self) -> set[str]:
        """Clicked items minus currently blocked ones: the implicit-feedback
        training set."""
        return self._clicked - self._blocked

    def clicked(self) -> set[str]:
        return set(self._clicked)

    # -- mutation ------------------------------------------------------

    def record_event(self, event: InteractionEvent) -> None:
        event.validate()
        if event.item_id is not None and event.item_id not in self.catalog:
            raise EventError(f"unknown item_id {event.item_id}")
        if self._events and event.ts < self._events[-1].ts:
            raise EventError("event timestamp precedes the log tail")
        if self._log_fh is not None:
            self._log_fh.write(event.to_json() + "\n")
            self._log_fh.flush()
        self._apply(event)

    def _apply(self, event: InteractionEvent) -> None:
        self._events.append(event)
        kind, item = event.type, event.item_id
        if kind == "click":
            self._clicked.add(item)
        elif kind == "block":
            self._blocked.add(item)
        elif kind == "unblock":
            self._blocked.discard(item)
        elif kind == "watchlist_add":
            self._watchlist.add(item)
        elif kind == "watchlist_remove":
            self._watchlist.discard(item)
        elif kind == "settings_change":
            key, _, value = (event.payload or "").partition("=")
            if key:
                self._settings[key] = value
                if self._dir is not None:
                    settings_path = self._dir / "settings.json"
                    settings_path.write_text(
                        json.dumps(self._settings, sort_keys=True), encoding="utf-8"
                    )

    def close(self) -> None:
        if self._log_fh is not None:
            self._log_fh.close()
            self._log_fh = None


def replay(user_id: str, catalog: ItemCatalog, events: Iterable[InteractionEvent]) -> UserProfile:
    """Rebuild a profile by folding a stored event log from empty."""
    profile = UserProfile(user_id, catalog)
    for event in events:
        profile.record_event(event)
    return profile
