"""Loading and grouping the long-form diagnostic CSV files."""

from __future__ import annotations

import csv
from math import comb
from pathlib import Path

import numpy as np

# columns every long-form diagnostic file must carry
REQUIRED_COLUMNS = (
    "scenario_id",
    "model",
    "L",
    "q",
    "seed",
    "theta",
    "t",
    "value",
)


class SchemaError(ValueError):
    """A CSV file is absent, empty, or missing required columns."""


def load_table(path) -> dict:
    """Read a long-form CSV into a column dict with typed arrays."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"CSV file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in cols]
        if missing:
            raise SchemaError(f"{path.name}: missing columns {missing}")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path.name}: no data rows")
    table = {c: [r[c] for r in rows] for c in cols}
    for c in ("L", "seed"):
        table[c] = np.array([int(v) if v != "" else -1 for v in table[c]])
    for c in ("t", "value"):
        table[c] = np.array([float(v) for v in table[c]])
    table["q"] = np.array([int(v) if v != "" else 0 for v in table["q"]])
    for c in ("model", "theta", "scenario_id"):
        table[c] = np.array(table[c])
    return table


def group_rows(table: dict, keys: tuple) -> dict:
    """Row-index masks per distinct combination of the grouping keys."""
    n = len(table["value"])
    if not keys:
        return {(): np.ones(n, dtype=bool)}
    combos = sorted(set(zip(*(table[k] for k in keys))))
    out = {}
    for combo in combos:
        mask = np.ones(n, dtype=bool)
        for k, v in zip(keys, combo):
            mask &= table[k] == v
        out[combo] = mask
    return out


def sector_dimension(model: str, L: int) -> int:
    """State-space dimension the sweep axes use for a given system size."""
    if model == "coupled-ising":
        return 4**L
    return comb(L, L // 2)


def seed_mean_series(table: dict, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Average value over seeds at each time point within a row subset."""
    t = table["t"][mask]
    v = table["value"][mask]
    times = np.unique(t)
    means = np.array([v[t == ti].mean() for ti in times])
    return times, means
