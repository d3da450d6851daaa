"""Time-indexed scalar diagnostic series with run metadata."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class DiagnosticSeries:
    name: str
    times: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.values = np.asarray(self.values)
        if self.times.shape[0] != self.values.shape[0]:
            raise ValueError("times and values must have equal length")

    def __len__(self) -> int:
        return len(self.times)
