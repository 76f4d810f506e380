"""Loaders for local price and social-activity archives.

All loaders bucket time by UTC calendar day, validate eagerly, and return
plain immutable records sorted into a total order so that downstream results
do not depend on the physical order of the input files.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from typing import Iterable, NamedTuple

import numpy as np

log = logging.getLogger(__name__)

PRICE_HEADER = ("date", "open", "high", "low", "close")

#: Canonical GitHub event types, in fixed column order.
EVENT_TYPES = (
    "Watch",
    "Fork",
    "Issues",
    "IssueComment",
    "Push",
    "CommitComment",
    "PullRequest",
    "PullRequestReviewComment",
)

_EVENT_BY_RAW = {name + "Event": name for name in EVENT_TYPES}

#: Share of undecodable lines tolerated before an archive is rejected.
MAX_SKIP_RATE = 0.01


class IngestError(ValueError):
    """Raised when an input archive is malformed beyond tolerance."""


class CommentRecord(NamedTuple):
    created_utc: int
    subreddit: str
    body: str
    score: int


class EventRecord(NamedTuple):
    created_utc: int
    repo: str
    event_type: str


@dataclass(frozen=True)
class PriceSeries:
    """Daily OHLC prices for one coin, strictly ordered by date."""

    coin: str
    dates: tuple[date, ...]
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.dates)
        for name in ("open", "high", "low", "close"):
            arr = getattr(self, name)
            if arr.shape != (n,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({n},)")
            arr.flags.writeable = False
        if not self.dates:
            raise ValueError("empty price series")
        for prev, cur in zip(self.dates, self.dates[1:]):
            if cur <= prev:
                raise ValueError(f"dates not strictly increasing at {cur}")
        if np.any(self.low <= 0):
            raise ValueError("non-positive low price")
        for name in ("open", "close"):
            arr = getattr(self, name)
            if np.any(arr < self.low) or np.any(arr > self.high):
                raise ValueError(f"{name} outside [low, high]")

    def __len__(self) -> int:
        return len(self.dates)

    def index_of(self, day: date) -> int:
        """Position of ``day`` in the series, or ValueError if absent."""
        try:
            return self.dates.index(day)
        except ValueError:
            raise ValueError(f"date {day} not in price series for {self.coin}") from None


def day_of(created_utc: int) -> date:
    """UTC calendar day of an epoch timestamp."""
    return datetime.fromtimestamp(created_utc, timezone.utc).date()


def daily_calendar(start: date, end: date) -> tuple[date, ...]:
    """Consecutive days from start through end inclusive."""
    if start > end:
        raise ValueError(f"start {start} after end {end}")
    return tuple(start + timedelta(days=i) for i in range((end - start).days + 1))


def load_price_series(path: str, coin: str) -> PriceSeries:
    """Read a daily OHLC CSV (header: date,open,high,low,close).

    Rows may arrive in any order; the result is sorted by date. Duplicate
    dates, malformed rows, and price rows violating low <= open,close <= high
    or low <= 0 are reported with their line number.
    """
    rows: dict[date, tuple[float, float, float, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        if tuple(h.strip().lower() for h in header) != PRICE_HEADER:
            raise IngestError(f"{path}: expected header {','.join(PRICE_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise IngestError(f"{path}: malformed row at line {lineno}")
            try:
                day = date.fromisoformat(row[0].strip())
                o, h, l, c = (float(v) for v in row[1:])
            except ValueError:
                raise IngestError(f"{path}: malformed row at line {lineno}") from None
            if day in rows:
                raise IngestError(f"{path}: duplicate date {day} at line {lineno}")
            if l <= 0:
                raise IngestError(f"{path}: non-positive price at line {lineno}")
            if h < l:
                raise IngestError(f"{path}: high below low at line {lineno}")
            for name, v in (("open", o), ("close", c)):
                if v < l:
                    raise IngestError(f"{path}: {name} below low at line {lineno}")
                if v > h:
                    raise IngestError(f"{path}: {name} exceeds high at line {lineno}")
            rows[day] = (o, h, l, c)
    if not rows:
        raise IngestError(f"{path}: no data rows")
    days = tuple(sorted(rows))
    cols = np.array([rows[d] for d in days], dtype=np.float64)
    return PriceSeries(
        coin=coin,
        dates=days,
        open=cols[:, 0].copy(),
        high=cols[:, 1].copy(),
        low=cols[:, 2].copy(),
        close=cols[:, 3].copy(),
    )


def save_price_series(path: str, series: PriceSeries) -> None:
    """Write a PriceSeries back to CSV, full float precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PRICE_HEADER)
        for i, day in enumerate(series.dates):
            writer.writerow(
                [
                    day.isoformat(),
                    repr(float(series.open[i])),
                    repr(float(series.high[i])),
                    repr(float(series.low[i])),
                    repr(float(series.close[i])),
                ]
            )


def _check_skip_rate(path: str, skipped: int, total: int) -> None:
    if total and skipped / total > MAX_SKIP_RATE:
        raise IngestError(
            f"{path}: {skipped} of {total} lines unreadable "
            f"({100.0 * skipped / total:.1f}%, tolerance {100.0 * MAX_SKIP_RATE:.0f}%)"
        )


def _parse_epoch(value: object) -> int:
    """Epoch seconds from an int, float, or decimal string."""
    if isinstance(value, bool):
        raise ValueError("boolean timestamp")
    if isinstance(value, (int, float)):
        ts = int(value)
    elif isinstance(value, str):
        ts = int(float(value))
    else:
        raise ValueError(f"bad timestamp type {type(value).__name__}")
    if ts <= 0:
        raise ValueError("non-positive timestamp")
    return ts


def load_reddit_comments(path: str, subreddit: str) -> list[CommentRecord]:
    """Read an NDJSON comment dump, keeping one subreddit (case-insensitive).

    Lines that fail to decode or lack created_utc/subreddit/body/score are
    skipped and counted; more than 1% skipped lines rejects the file. The
    result is sorted by the full record tuple, so any shuffling of the input
    lines yields an identical list.
    """
    want = subreddit.lower()
    records: list[CommentRecord] = []
    skipped = 0
    total = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            total += 1
            try:
                obj = json.loads(line)
                created = _parse_epoch(obj["created_utc"])
                sub = obj["subreddit"]
                body = obj["body"]
                score = int(obj["score"])
                if not isinstance(sub, str) or not isinstance(body, str):
                    raise ValueError("bad field type")
            except (ValueError, KeyError, TypeError, json.JSONDecodeError):
                skipped += 1
                continue
            if sub.lower() != want:
                continue
            records.append(CommentRecord(created, sub, body, score))
    _check_skip_rate(path, skipped, total)
    if not records:
        log.warning("%s: no comments matched subreddit %r", path, subreddit)
    records.sort()
    return records


def _parse_iso_instant(value: str) -> int:
    """Epoch seconds from an ISO-8601 instant such as 2015-01-01T15:04:05Z."""
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    ts = int(dt.timestamp())
    if ts <= 0:
        raise ValueError("non-positive timestamp")
    return ts


def load_github_events(path: str, repo: str) -> list[EventRecord]:
    """Read a GitHub Archive NDJSON dump, keeping one repository.

    Repository match is case-insensitive on the full owner/name. Event types
    outside the eight canonical ones are dropped (and counted in the log)
    rather than treated as corruption. Skip tolerance and ordering follow
    load_reddit_comments.
    """
    want = repo.lower()
    records: list[EventRecord] = []
    skipped = 0
    total = 0
    unknown = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            total += 1
            try:
                obj = json.loads(line)
                raw_type = obj["type"]
                created = _parse_iso_instant(obj["created_at"])
                name = obj["repo"]["name"]
                if not isinstance(raw_type, str) or not isinstance(name, str):
                    raise ValueError("bad field type")
            except (ValueError, KeyError, TypeError, json.JSONDecodeError):
                skipped += 1
                continue
            if name.lower() != want:
                continue
            event_type = _EVENT_BY_RAW.get(raw_type)
            if event_type is None:
                unknown += 1
                continue
            records.append(EventRecord(created, name, event_type))
    _check_skip_rate(path, skipped, total)
    if unknown:
        log.info("%s: dropped %d events of unrecognized type", path, unknown)
    if not records:
        log.warning("%s: no events matched repo %r", path, repo)
    records.sort()
    return records


def align_calendar(
    price: PriceSeries, start: date, end: date
) -> tuple[PriceSeries, int]:
    """Restrict a price series to [start, end] with forward-filled gaps.

    Returns the consecutive-day series and the number of filled days. The
    requested range must lie inside the available data and start on a day
    that actually has a row (a missing first day leaves nothing to carry
    forward).
    """
    if start > end:
        raise ValueError(f"start {start} after end {end}")
    if start < price.dates[0] or end > price.dates[-1]:
        raise ValueError(
            f"requested range {start}..{end} extends beyond available "
            f"data {price.dates[0]}..{price.dates[-1]}"
        )
    by_day = {d: i for i, d in enumerate(price.dates)}
    if start not in by_day:
        raise ValueError(f"first requested day {start} missing, nothing to carry forward")
    days = daily_calendar(start, end)
    out = np.empty((len(days), 4), dtype=np.float64)
    fills = 0
    for row, day in enumerate(days):
        i = by_day.get(day)
        if i is None:
            out[row] = out[row - 1]
            fills += 1
        else:
            out[row] = (price.open[i], price.high[i], price.low[i], price.close[i])
    return (
        PriceSeries(
            coin=price.coin,
            dates=days,
            open=out[:, 0].copy(),
            high=out[:, 1].copy(),
            low=out[:, 2].copy(),
            close=out[:, 3].copy(),
        ),
        fills,
    )


def write_ndjson(path: str, objects: Iterable[dict]) -> None:
    """Write dicts as one JSON object per line (sorted keys, compact)."""
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objects:
            fh.write(json.dumps(obj, sort_keys=True, separators=(",", ":")))
            fh.write("\n")
