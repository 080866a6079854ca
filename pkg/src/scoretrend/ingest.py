"""Play-by-play ingestion into validated ScoreSeries objects.

The score difference convention is away minus home: a positive difference
means the away team leads.  Events after the regulation time domain
(48 minutes by default) are dropped, as are events at or before minute 0.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import EmptyAfterTruncation, NonMonotoneScores

DEFAULT_DOMAIN_END = 48.0

CSV_COLUMNS = (
    "match_id",
    "date",
    "home_team",
    "away_team",
    "minute",
    "home_score",
    "away_score",
)

_REQUIRED_ROW_KEYS = ("match_id", "minute", "home_score", "away_score")


@dataclass(frozen=True)
class ScoreSeries:
    """Ordered scoring times and away-minus-home score differences of one match.

    ``times`` are minutes elapsed since tip-off, strictly positive, sorted
    non-decreasing, and at most ``domain_end``.  ``diffs`` holds the score
    difference recorded after each scoring event.  Arrays are stored
    read-only so instances can be shared across threads.
    """

    match_id: str
    home_team: str
    away_team: str
    times: np.ndarray
    diffs: np.ndarray
    domain_end: float = DEFAULT_DOMAIN_END
    date: str = ""

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        diffs = np.array(self.diffs, dtype=float)
        if times.ndim != 1 or diffs.ndim != 1:
            raise ValueError("times and diffs must be 1-D")
        if times.size != diffs.size:
            raise ValueError(
                f"times ({times.size}) and diffs ({diffs.size}) differ in length"
            )
        if times.size < 1:
            raise ValueError("a series needs at least one event")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(diffs))):
            raise ValueError("times and diffs must be finite")
        if np.any(np.diff(times) < 0):
            raise ValueError("times must be sorted non-decreasing")
        if times[0] <= 0 or times[-1] > self.domain_end:
            raise ValueError(
                f"times must lie in (0, {self.domain_end}], "
                f"got range [{times[0]}, {times[-1]}]"
            )
        times.setflags(write=False)
        diffs.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "diffs", diffs)

    @property
    def n_events(self) -> int:
        return int(self.times.size)

    def flipped(self) -> "ScoreSeries":
        """The same match seen from the other reference team (diffs negated)."""
        return ScoreSeries(
            match_id=self.match_id,
            home_team=self.away_team,
            away_team=self.home_team,
            times=self.times,
            diffs=-self.diffs,
            domain_end=self.domain_end,
            date=self.date,
        )


def parse_play_by_play(
    rows: Iterable[Mapping], domain_end: float = DEFAULT_DOMAIN_END
) -> ScoreSeries:
    """Build a ScoreSeries from tabular play-by-play records of a single match.

    Each row must provide ``match_id``, ``minute``, ``home_score`` and
    ``away_score``; ``home_team``, ``away_team`` and ``date`` are carried
    through when present.  Rows are sorted by minute (ties keep input order),
    cumulative scores must be non-decreasing in that order, and rows outside
    (0, domain_end] are dropped.

    Raises NonMonotoneScores when a cumulative score decreases and
    EmptyAfterTruncation when fewer than two usable events remain.
    """
    rows = list(rows)
    if not rows:
        raise EmptyAfterTruncation("no rows supplied")

    match_ids = {str(r["match_id"]) for r in rows}
    if len(match_ids) != 1:
        raise ValueError(f"rows span multiple match_ids: {sorted(match_ids)}")
    match_id = match_ids.pop()

    minutes = np.empty(len(rows))
    homes = np.empty(len(rows))
    aways = np.empty(len(rows))
    for i, r in enumerate(rows):
        for key in _REQUIRED_ROW_KEYS:
            if key not in r:
                raise ValueError(f"row {i} is missing column {key!r}")
        minutes[i] = float(r["minute"])
        homes[i] = float(r["home_score"])
        aways[i] = float(r["away_score"])
    if np.any(minutes < 0) or not np.all(np.isfinite(minutes)):
        raise ValueError("minute values must be non-negative reals")

    order = np.argsort(minutes, kind="stable")
    minutes, homes, aways = minutes[order], homes[order], aways[order]

    if np.any(np.diff(homes) < 0) or np.any(np.diff(aways) < 0):
        raise NonMonotoneScores(f"cumulative score decreases in match {match_id}")

    keep = (minutes > 0) & (minutes <= domain_end)
    if int(keep.sum()) < 2:
        raise EmptyAfterTruncation(
            f"match {match_id}: fewer than two events in (0, {domain_end}]"
        )

    first = rows[int(order[0])]
    return ScoreSeries(
        match_id=match_id,
        home_team=str(first.get("home_team", "")),
        away_team=str(first.get("away_team", "")),
        times=minutes[keep],
        diffs=(aways - homes)[keep],
        domain_end=domain_end,
        date=str(first.get("date", "")),
    )


def validate_series(series: ScoreSeries) -> list[str]:
    """Non-fatal data-quality warnings for a parsed series.

    Checks duplicate timestamps, short series (< 10 events), implausibly
    large differences (> 100), and repeated consecutive differences.  Never
    mutates the input.
    """
    warnings = []
    times = series.times
    dup = times[1:][np.diff(times) == 0]
    for t in np.unique(dup):
        warnings.append(f"duplicate timestamp at t={t:g}")
    if series.n_events < 10:
        warnings.append(f"short series: only {series.n_events} events")
    max_abs = float(np.max(np.abs(series.diffs)))
    if max_abs > 100:
        warnings.append(f"implausible score difference: max |diff| = {max_abs:g}")
    n_repeat = int(np.sum(np.diff(series.diffs) == 0))
    if n_repeat:
        warnings.append(f"unchanged difference across {n_repeat} consecutive events")
    return warnings


def series_to_dict(series: ScoreSeries) -> dict:
    """Canonical JSON-ready form: {match_id, home_team, away_team, domain_end, events}."""
    out = {
        "match_id": series.match_id,
        "home_team": series.home_team,
        "away_team": series.away_team,
        "domain_end": series.domain_end,
        "events": [
            {"t": float(t), "d": float(d)}
            for t, d in zip(series.times, series.diffs)
        ],
    }
    if series.date:
        out["date"] = series.date
    return out


def series_from_dict(data: Mapping) -> ScoreSeries:
    events = data["events"]
    return ScoreSeries(
        match_id=str(data["match_id"]),
        home_team=str(data.get("home_team", "")),
        away_team=str(data.get("away_team", "")),
        times=np.array([e["t"] for e in events], dtype=float),
        diffs=np.array([e["d"] for e in events], dtype=float),
        domain_end=float(data.get("domain_end", DEFAULT_DOMAIN_END)),
        date=str(data.get("date", "")),
    )


def write_series_json(series: ScoreSeries, path) -> None:
    Path(path).write_text(json.dumps(series_to_dict(series), indent=2))


def read_series_json(path) -> ScoreSeries:
    return series_from_dict(json.loads(Path(path).read_text()))


def read_matches_csv(
    path, domain_end: float = DEFAULT_DOMAIN_END
) -> list[ScoreSeries]:
    """Parse a play-by-play CSV (schema `CSV_COLUMNS`) into one series per match.

    Matches are returned in order of first appearance.  UTF-8, '.' decimal
    separator.
    """
    by_match: dict[str, list[dict]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in _REQUIRED_ROW_KEYS if c not in header]
        if missing:
            raise ValueError(f"{path}: missing CSV columns {missing}")
        for row in reader:
            by_match.setdefault(str(row["match_id"]), []).append(row)
    if not by_match:
        raise EmptyAfterTruncation(f"{path}: no data rows")
    return [
        parse_play_by_play(rows, domain_end=domain_end)
        for rows in by_match.values()
    ]
