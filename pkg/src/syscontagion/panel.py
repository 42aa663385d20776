"""Date-aligned panel of per-entity default intensities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_labels
from .exceptions import ArgumentError, DomainError

__all__ = ["IntensityPanel"]


@dataclass(frozen=True)
class IntensityPanel:
    """``values[i, k]`` is the per-annum intensity of entity k on ``dates[i]``."""

    dates: np.ndarray
    entities: tuple
    values: np.ndarray

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ArgumentError("values must be a 2-D (dates x entities) array")
        if dates.ndim != 1 or dates.size != values.shape[0]:
            raise ArgumentError("one date per row is required")
        if dates.size > 1 and np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise ArgumentError("dates must be strictly increasing")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise DomainError("intensities must be finite and strictly positive")
        entities = check_labels(self.entities, values.shape[1])
        dates.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "entities", entities)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def window(self, start: int, stop: int) -> "IntensityPanel":
        return IntensityPanel(self.dates[start:stop], self.entities, self.values[start:stop])

    def select(self, entities) -> "IntensityPanel":
        idx = [self.entities.index(e) for e in entities]
        return IntensityPanel(self.dates, tuple(entities), self.values[:, idx])

    @classmethod
    def from_array(cls, values, entities=None, start="2000-01-01") -> "IntensityPanel":
        """Panel on a consecutive daily grid starting at ``start``."""
        values = np.asarray(values, dtype=float)
        if entities is None:
            entities = tuple(f"e{k}" for k in range(values.shape[1]))
        dates = np.datetime64(start, "D") + np.arange(values.shape[0])
        return cls(dates, tuple(entities), values)
