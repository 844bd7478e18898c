"""Item catalog loading and validation.

The catalog is the only shared, non-sensitive dataset in the system: a CSV of
titles with pipe-separated genre labels. Everything else (histories, feedback,
settings) stays on the participant's device.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path


class CatalogError(ValueError):
    """Raised when a catalog file violates the format contract."""


@dataclass(frozen=True)
class Item:
    item_id: str
    title: str
    genres: frozenset[str]
    year: int | None = None


class ItemCatalog:
    """Immutable mapping item_id -> Item plus the union of genre labels."""

    def __init__(self, items: list[Item]):
        by_id: dict[str, Item] = {}
        for item in items:
            if item.item_id in by_id:
                raise CatalogError(f"duplicate item_id {item.item_id}")
            if not item.genres:
                raise CatalogError(f"item {item.item_id} has no genres")
            by_id[item.item_id] = item
        self._items = by_id
        self._genre_universe = frozenset(g for it in items for g in it.genres)

    @property
    def items(self) -> dict[str, Item]:
        return dict(self._items)

    @property
    def genre_universe(self) -> frozenset[str]:
        return self._genre_universe

    @property
    def item_ids(self) -> list[str]:
        """All item ids in ascending order (the canonical coordinate order)."""
        return sorted(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._items

    def get(self, item_id: str) -> Item:
        try:
            return self._items[item_id]
        except KeyError:
            raise CatalogError(f"unknown item_id {item_id}") from None

    def genres_of(self, item_id: str) -> frozenset[str]:
        return self.get(item_id).genres


CSV_HEADER = ["item_id", "title", "genres", "year"]


def load_catalog(path: str | Path) -> ItemCatalog:
    """Parse a catalog CSV (header ``item_id,title,genres,year``).

    Genres are pipe-separated inside one quoted field. Rows with a missing id,
    empty genre field, or duplicate id are rejected with the offending row
    number in the error message.
    """
    path = Path(path)
    items: list[Item] = []
    seen: set[str] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise CatalogError(f"bad header {header!r}, expected {CSV_HEADER!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise CatalogError(f"row {lineno}: expected 4 fields, got {len(row)}")
            item_id, title, genre_field, year_field = row
            if not item_id:
                raise CatalogError(f"row {lineno}: empty item_id")
            if item_id in seen:
                raise CatalogError(f"duplicate item_id {item_id}")
            genres = frozenset(g for g in genre_field.split("|") if g)
            if not genres:
                raise CatalogError(f"row {lineno}: empty genre field for {item_id}")
            year: int | None = None
            if year_field:
                try:
                    year = int(year_field)
                except ValueError:
                    raise CatalogError(f"row {lineno}: bad year {year_field!r}") from None
            seen.add(item_id)
            items.append(Item(item_id, title, genres, year))
    return ItemCatalog(items)


def write_catalog(path: str | Path, items: list[Item]) -> None:
    """Write a catalog CSV in the same format ``load_catalog`` reads."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for item in items:
            writer.writerow(
                [
                    item.item_id,
                    item.title,
                    "|".join(sorted(item.genres)),
                    "" if item.year is None else str(item.year),
                ]
            )
