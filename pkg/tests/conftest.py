"""Shared fixtures: a small hand-built catalog and helpers used across the
suite."""

import numpy as np
import pytest

from fedflex.catalog import Item, ItemCatalog


@pytest.fixture
def small_catalog() -> ItemCatalog:
    """Six items over three genres, ids deliberately unsorted on input."""
    return ItemCatalog(
        [
            Item("m03", "Gamma", frozenset({"Drama"}), 2001),
            Item("m01", "Alpha", frozenset({"Action", "Sci-Fi"}), 1999),
            Item("m02", "Beta", frozenset({"Action"}), 2000),
            Item("m05", "Epsilon", frozenset({"Sci-Fi"}), 2003),
            Item("m04", "Delta", frozenset({"Drama", "Action"}), 2002),
            Item("m06", "Zeta", frozenset({"Drama"}), None),
        ]
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
