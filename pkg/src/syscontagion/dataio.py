"""CDS spread ingestion and the file formats used by the command line.

All CSV documents are UTF-8, comma separated, with ISO-8601 dates. Readers
fail on the first malformed row instead of skipping it.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_nonnegative
from .exceptions import ArgumentError, DomainError, IngestionError
from .panel import IntensityPanel

__all__ = [
    "DEFAULT_RECOVERY",
    "MIN_DATES",
    "SpreadPanel",
    "IngestConfig",
    "IngestReport",
    "spread_to_intensity",
    "ingest",
    "ingest_with_report",
    "survival_from_intensity",
    "parse_spreads_csv",
    "intensity_to_csv",
    "parse_intensity_csv",
    "write_text_atomic",
]

DEFAULT_RECOVERY = 0.40
MIN_DATES = 30
SPREAD_HEADER = ("date", "entity", "spread_bps")
INTENSITY_HEADER = ("date", "entity", "intensity")


def _check_recovery(recovery):
    if not (0.0 <= recovery < 1.0):
        raise DomainError(f"recovery rate must lie in [0, 1), got {recovery!r}")
    return float(recovery)


def spread_to_intensity(spread_bps, recovery: float = DEFAULT_RECOVERY):
    """Flat default intensity ``(spread / 1e4) / (1 - R)`` per annum."""
    recovery = _check_recovery(recovery)
    s = np.asarray(spread_bps, dtype=float)
    if np.any(~(s > 0)) or np.any(~np.isfinite(s)):
        raise DomainError("spreads must be finite and strictly positive")
    out = (s / 1e4) / (1.0 - recovery)
    return float(out) if out.ndim == 0 else out


def survival_from_intensity(mu, horizon):
    """``exp(-mu * horizon)``."""
    mu = np.asarray(mu, dtype=float)
    if np.any(~(mu > 0)):
        raise DomainError("intensity must be strictly positive")
    h = check_nonnegative(horizon, "horizon")
    out = np.exp(-mu * h)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SpreadPanel:
    """Long-format spread quotes; one record per (date, entity)."""

    dates: np.ndarray
    entities: np.ndarray
    spreads: np.ndarray

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]").ravel()
        ents = np.asarray(self.entities, dtype=str).ravel()
        s = np.asarray(self.spreads, dtype=float).ravel()
        if not (dates.size == ents.size == s.size):
            raise ArgumentError("dates, entities and spreads must have equal length")
        if np.any(~(s > 0)) or np.any(~np.isfinite(s)):
            raise DomainError("spreads must be finite and strictly positive")
        seen = set()
        for d, e in zip(dates.tolist(), ents.tolist()):
            if (d, e) in seen:
                raise IngestionError(f"duplicate quote for {e} on {d}")
            seen.add((d, e))
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "entities", ents)
        object.__setattr__(self, "spreads", s)

    @classmethod
    def from_records(cls, records):
        records = list(records)
        if not records:
            return cls(np.array([], "datetime64[D]"), np.array([], str), np.array([], float))
        d, e, s = zip(*records)
        return cls(np.array(d, dtype="datetime64[D]"), np.array(e, dtype=str), np.array(s, dtype=float))

    def __len__(self):
        return self.spreads.size


@dataclass(frozen=True)
class IngestConfig:
    """Conversion and alignment settings.

    ``policy="intersection"`` drops every date on which any entity is missing;
    ``policy="ffill"`` first carries the last quote forward over gaps of at
    most ``max_gap`` consecutive dates. ``scale`` and ``shift`` apply the
    affine adjustment ``scale * mu + shift``.
    """

    recovery: float = DEFAULT_RECOVERY
    policy: str = "intersection"
    max_gap: int = 0
    scale: float = 1.0
    shift: float = 0.0

    def __post_init__(self):
        _check_recovery(self.recovery)
        if self.policy not in ("intersection", "ffill"):
            raise ArgumentError(f"unknown alignment policy {self.policy!r}")
        if int(self.max_gap) != self.max_gap or self.max_gap < 0:
            raise ArgumentError("max_gap must be a non-negative integer")


@dataclass
class IngestReport:
    rows_read: int
    dates_seen: int
    dates_kept: int
    dropped_dates: list = field(default_factory=list)
    entities: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True, indent=2) + "\n"


def _first_seen(values):
    return list(dict.fromkeys(values.tolist()))


def ingest_with_report(panel: SpreadPanel, cfg: IngestConfig = IngestConfig()):
    """Aligned intensity panel plus counts of what was read, filled and dropped."""
    ents = _first_seen(panel.entities)
    dates = np.unique(panel.dates)
    grid = np.full((dates.size, len(ents)), np.nan)
    if len(panel):
        r = np.searchsorted(dates, panel.dates)
        c = np.array([ents.index(e) for e in panel.entities.tolist()])
        grid[r, c] = spread_to_intensity(panel.spreads, cfg.recovery)
    observed = ~np.isnan(grid)
    filled = np.zeros_like(observed)
    if cfg.policy == "ffill" and cfg.max_gap > 0:
        for k in range(grid.shape[1]):
            last, run = np.nan, 0
            for i in range(grid.shape[0]):
                if observed[i, k]:
                    last, run = grid[i, k], 0
                elif not np.isnan(last) and run < cfg.max_gap:
                    run += 1
                    grid[i, k] = last
                    filled[i, k] = True
                else:
                    run += 1
    keep = ~np.isnan(grid).any(axis=1)
    report = IngestReport(
        rows_read=len(panel),
        dates_seen=int(dates.size),
        dates_kept=int(keep.sum()),
        dropped_dates=[str(d) for d in dates[~keep]],
        entities={
            e: {
                "rows_read": int(observed[:, k].sum()),
                "filled": int(filled[keep, k].sum()),
                "dropped": int(observed[~keep, k].sum()),
            }
            for k, e in enumerate(ents)
        },
    )
    if len(ents) < 2 or keep.sum() < MIN_DATES:
        raise IngestionError(
            f"insufficient aligned data: {len(ents)} entities and {int(keep.sum())} aligned dates "
            f"(need >= 2 and >= {MIN_DATES}; {len(panel)} rows read)"
        )
    values = cfg.scale * grid[keep] + cfg.shift
    if np.any(~(values > 0)):
        raise DomainError("affine adjustment produced non-positive intensities")
    return IntensityPanel(dates[keep], tuple(ents), values), report


def ingest(panel: SpreadPanel, cfg: IngestConfig = IngestConfig()) -> IntensityPanel:
    return ingest_with_report(panel, cfg)[0]


def _parse_date(text, lineno):
    try:
        return np.datetime64(_dt.date.fromisoformat(text.strip()), "D")
    except ValueError:
        raise IngestionError(f"line {lineno}: bad date {text!r}") from None


def _parse_float(text, lineno, what):
    try:
        return float(text)
    except ValueError:
        raise IngestionError(f"line {lineno}: bad {what} {text!r}") from None


def _rows(text: str, header):
    reader = csv.reader(io.StringIO(text.lstrip("﻿")))
    rows = [(n, r) for n, r in enumerate(reader, start=1) if r]
    if not rows:
        return []
    n, head = rows[0]
    if tuple(h.strip() for h in head) != header:
        raise IngestionError(f"expected header {','.join(header)}, got {','.join(head)}")
    for n, r in rows[1:]:
        if len(r) != len(header):
            raise IngestionError(f"line {n}: expected {len(header)} fields, got {len(r)}")
    return rows[1:]


def parse_spreads_csv(text: str) -> SpreadPanel:
    """``date,entity,spread_bps`` rows; an empty document gives an empty panel."""
    recs = []
    for n, (d, e, s) in _rows(text, SPREAD_HEADER):
        val = _parse_float(s, n, "spread")
        if not val > 0:
            raise IngestionError(f"line {n}: spread must be positive, got {s!r}")
        recs.append((_parse_date(d, n), e.strip(), val))
    return SpreadPanel.from_records(recs)


def intensity_to_csv(panel: IntensityPanel) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(INTENSITY_HEADER)
    for i, d in enumerate(panel.dates):
        for k, e in enumerate(panel.entities):
            w.writerow([str(d), e, repr(float(panel.values[i, k]))])
    return buf.getvalue()


def parse_intensity_csv(text: str) -> IntensityPanel:
    """Rectangular ``date,entity,intensity`` document back to a panel."""
    rows = _rows(text, INTENSITY_HEADER)
    if not rows:
        raise IngestionError("insufficient aligned data: empty intensity file")
    dates, ents, vals = [], [], []
    for n, (d, e, v) in rows:
        dates.append(_parse_date(d, n))
        ents.append(e.strip())
        vals.append(_parse_float(v, n, "intensity"))
    dates = np.array(dates, dtype="datetime64[D]")
    labels = list(dict.fromkeys(ents))
    grid_dates = np.unique(dates)
    grid = np.full((grid_dates.size, len(labels)), np.nan)
    r = np.searchsorted(grid_dates, dates)
    c = np.array([labels.index(e) for e in ents])
    if len(set(zip(r.tolist(), c.tolist()))) != len(rows):
        raise IngestionError("duplicate (date, entity) rows in intensity file")
    grid[r, c] = vals
    if np.isnan(grid).any():
        raise IngestionError("intensity file is not rectangular (missing cells)")
    return IntensityPanel(grid_dates, tuple(labels), grid)


def write_text_atomic(path, text: str) -> None:
    """Write UTF-8 text via a temporary file in the same directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
