"""Shared utilities for simquery modules.

Seeded RNG helpers, upper-triangular edge indexing and the logging setup
used by the command-line entry point.

NOT part of the public API (prefixed with _).
"""

import logging
import os
from functools import lru_cache

import numpy as np

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s - %(message)s"


def configure_logging() -> None:
    """Configure root logging from the LOG_LEVEL environment variable."""
    logging.basicConfig(
        level=os.environ.get("LOG_LEVEL", "INFO").upper(),
        format=LOG_FORMAT,
    )


def get_seeded_rng(seed: int = 42) -> np.random.Generator:
    """Return a deterministic numpy RNG."""
    return np.random.default_rng(seed)


def seeded_streams(seed: int, names: tuple[str, ...]) -> dict[str, np.random.Generator]:
    """Return one independent generator per name, all derived from `seed`.

    The i-th name always gets the i-th spawned child, so a caller that only
    uses the "uniform" stream draws the same edges whether or not other
    streams were consumed.
    """
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: np.random.default_rng(child) for name, child in zip(names, children)}


def edge_count(n: int) -> int:
    """Number of unordered vertex pairs, C(n, 2)."""
    return n * (n - 1) // 2


@lru_cache(maxsize=32)
def _edge_pairs_cached(n: int) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = np.triu_indices(n, k=1)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def edge_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column arrays of the upper triangle; edge id e <-> (rows[e], cols[e])."""
    return _edge_pairs_cached(n)


def edge_id(n: int, i: int, j: int) -> int:
    """Inverse of edge_pairs for a single pair (order of i, j does not matter)."""
    if i == j:
        raise ValueError(f"Self-pair ({i}, {j}) is not an edge")
    if i > j:
        i, j = j, i
    # Rows before i contribute (n-1) + (n-2) + ... + (n-i) ids.
    return i * n - i * (i + 1) // 2 + (j - i - 1)
