"""Daily social-signal extraction from comment and event archives.

Every extractor produces a SignalMatrix: one row per consecutive calendar
day, one named column per feature, float64 throughout. Matrices over the
same calendar can be concatenated column-wise.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from datetime import date
from importlib import resources
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ingest import (
    EVENT_TYPES,
    CommentRecord,
    EventRecord,
    PriceSeries,
    day_of,
)

#: Words are maximal runs of lowercase ascii letters and digits.
_TOKEN_RE = re.compile(r"[a-z0-9]+")

DEFAULT_VOCAB_SIZE = 10000

#: Column name of the forecast target in assembled feature matrices.
PRICE_COLUMN = "price_high"


@dataclass(frozen=True)
class SignalMatrix:
    """Per-day feature matrix over a consecutive calendar."""

    dates: tuple[date, ...]
    columns: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        if not self.dates:
            raise ValueError("empty calendar")
        if self.values.shape != (len(self.dates), len(self.columns)):
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.dates)} days x {len(self.columns)} columns"
            )
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("duplicate column names")
        for prev, cur in zip(self.dates, self.dates[1:]):
            if (cur - prev).days != 1:
                raise ValueError(f"calendar gap before {cur}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite signal values")
        self.values.flags.writeable = False

    def column(self, name: str) -> np.ndarray:
        try:
            i = self.columns.index(name)
        except ValueError:
            raise ValueError(f"no column named {name!r}") from None
        return self.values[:, i]


@dataclass(frozen=True)
class Vocabulary:
    """Fixed token list with lookup index."""

    tokens: tuple[str, ...]
    index: Mapping[str, int] = field(repr=False, default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if not self.tokens:
            raise ValueError("empty vocabulary")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("duplicate vocabulary tokens")
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class SentimentLexicon:
    """token -> (polarity in [-1, 1], subjectivity in [0, 1])."""

    entries: Mapping[str, tuple[float, float]]

    def __post_init__(self) -> None:
        for token, (pol, subj) in self.entries.items():
            if not -1.0 <= pol <= 1.0:
                raise ValueError(f"polarity out of range for {token!r}")
            if not 0.0 <= subj <= 1.0:
                raise ValueError(f"subjectivity out of range for {token!r}")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on anything outside [a-z0-9]."""
    return _TOKEN_RE.findall(text.lower())


def build_vocabulary(
    comments: Iterable[CommentRecord], size: int = DEFAULT_VOCAB_SIZE
) -> Vocabulary:
    """Top ``size`` tokens by frequency, ties broken lexicographically."""
    if size < 1:
        raise ValueError(f"vocabulary size must be positive, got {size}")
    counts: dict[str, int] = {}
    for rec in comments:
        for token in tokenize(rec.body):
            counts[token] = counts.get(token, 0) + 1
    if not counts:
        raise ValueError("empty corpus, no tokens to build a vocabulary from")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary(tokens=tuple(t for t, _ in ranked[:size]))


def load_lexicon(path: str) -> SentimentLexicon:
    """Read a 3-column TSV: token, polarity, subjectivity."""
    entries: dict[str, tuple[float, float]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}: expected 3 tab-separated fields at line {lineno}")
            token, pol, subj = parts
            try:
                entries[token] = (float(pol), float(subj))
            except ValueError:
                raise ValueError(f"{path}: bad number at line {lineno}") from None
    if not entries:
        raise ValueError(f"{path}: empty lexicon")
    return SentimentLexicon(entries=entries)


def bundled_lexicon() -> SentimentLexicon:
    """The small demonstration lexicon shipped with the package."""
    ref = resources.files("coinseer").joinpath("data/lexicon.tsv")
    with resources.as_file(ref) as path:
        return load_lexicon(str(path))


def quartiles(values: Sequence[float] | np.ndarray) -> tuple[float, float, float]:
    """(q1, median, q3) by linear interpolation; empty input gives zeros."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return (0.0, 0.0, 0.0)
    q1, q2, q3 = np.quantile(arr, [0.25, 0.5, 0.75])
    return (float(q1), float(q2), float(q3))


def score_sentiment(
    text: str, lexicon: SentimentLexicon
) -> tuple[float, float]:
    """Mean (polarity, subjectivity) over lexicon tokens in ``text``.

    Tokens missing from the lexicon are ignored; a text with no lexicon
    tokens scores (0.0, 0.0).
    """
    pols = []
    subjs = []
    for token in tokenize(text):
        entry = lexicon.entries.get(token)
        if entry is not None:
            pols.append(entry[0])
            subjs.append(entry[1])
    if not pols:
        return (0.0, 0.0)
    return (float(np.mean(pols)), float(np.mean(subjs)))


def _bucket_comments(
    comments: Iterable[CommentRecord], calendar: Sequence[date]
) -> list[list[CommentRecord]]:
    index = {d: i for i, d in enumerate(calendar)}
    buckets: list[list[CommentRecord]] = [[] for _ in calendar]
    for rec in comments:
        i = index.get(day_of(rec.created_utc))
        if i is not None:
            buckets[i].append(rec)
    return buckets


def _matrix(
    calendar: Sequence[date], columns: Sequence[str], values: np.ndarray
) -> SignalMatrix:
    return SignalMatrix(tuple(calendar), tuple(columns), values)


def github_popularity_signal(
    events: Iterable[EventRecord], calendar: Sequence[date]
) -> SignalMatrix:
    """Daily Watch and Fork counts: columns gh_watch, gh_fork."""
    index = {d: i for i, d in enumerate(calendar)}
    values = np.zeros((len(calendar), 2), dtype=np.float64)
    col = {"Watch": 0, "Fork": 1}
    for rec in events:
        j = col.get(rec.event_type)
        if j is None:
            continue
        i = index.get(day_of(rec.created_utc))
        if i is not None:
            values[i, j] += 1.0
    return _matrix(calendar, ("gh_watch", "gh_fork"), values)


def github_all_signal(
    events: Iterable[EventRecord], calendar: Sequence[date]
) -> SignalMatrix:
    """Daily counts for all eight event types: columns gh_all_<type>."""
    index = {d: i for i, d in enumerate(calendar)}
    col = {name: j for j, name in enumerate(EVENT_TYPES)}
    values = np.zeros((len(calendar), len(EVENT_TYPES)), dtype=np.float64)
    for rec in events:
        i = index.get(day_of(rec.created_utc))
        if i is not None:
            values[i, col[rec.event_type]] += 1.0
    columns = tuple(f"gh_all_{name.lower()}" for name in EVENT_TYPES)
    return _matrix(calendar, columns, values)


def reddit_volume_signal(
    comments: Iterable[CommentRecord], calendar: Sequence[date]
) -> SignalMatrix:
    """Daily comment count: column r_vol."""
    buckets = _bucket_comments(comments, calendar)
    values = np.array([[float(len(b))] for b in buckets], dtype=np.float64)
    return _matrix(calendar, ("r_vol",), values)


def reddit_language_signal(
    comments: Iterable[CommentRecord],
    vocabulary: Vocabulary,
    calendar: Sequence[date],
) -> SignalMatrix:
    """Daily relative frequency of each vocabulary token.

    Each row is the day's vocabulary-token counts divided by the day's
    total in-vocabulary count, so nonzero rows sum to one; days without
    any in-vocabulary token are all zero. Columns are r_lang_<token> in
    vocabulary order.
    """
    values = np.zeros((len(calendar), len(vocabulary)), dtype=np.float64)
    for i, bucket in enumerate(_bucket_comments(comments, calendar)):
        for rec in bucket:
            for token in tokenize(rec.body):
                j = vocabulary.index.get(token)
                if j is not None:
                    values[i, j] += 1.0
        total = values[i].sum()
        if total > 0:
            values[i] /= total
    columns = tuple(f"r_lang_{t}" for t in vocabulary.tokens)
    return _matrix(calendar, columns, values)


def reddit_score_signal(
    comments: Iterable[CommentRecord], calendar: Sequence[date]
) -> SignalMatrix:
    """Daily quartiles of comment scores: columns r_score_q1..q3."""
    values = np.zeros((len(calendar), 3), dtype=np.float64)
    for i, bucket in enumerate(_bucket_comments(comments, calendar)):
        values[i] = quartiles([rec.score for rec in bucket])
    return _matrix(calendar, ("r_score_q1", "r_score_q2", "r_score_q3"), values)


def reddit_sentiment_signal(
    comments: Iterable[CommentRecord],
    lexicon: SentimentLexicon,
    calendar: Sequence[date],
) -> SignalMatrix:
    """Daily quartiles of per-comment polarity and subjectivity.

    Columns r_pol_q1..q3, r_subj_q1..q3.
    """
    values = np.zeros((len(calendar), 6), dtype=np.float64)
    for i, bucket in enumerate(_bucket_comments(comments, calendar)):
        scored = [score_sentiment(rec.body, lexicon) for rec in bucket]
        values[i, :3] = quartiles([s[0] for s in scored])
        values[i, 3:] = quartiles([s[1] for s in scored])
    columns = ("r_pol_q1", "r_pol_q2", "r_pol_q3", "r_subj_q1", "r_subj_q2", "r_subj_q3")
    return _matrix(calendar, columns, values)


def price_high_signal(price: PriceSeries) -> SignalMatrix:
    """The daily price high as a one-column matrix (column price_high)."""
    return _matrix(price.dates, (PRICE_COLUMN,), price.high.reshape(-1, 1).copy())


def concat_signals(parts: Sequence[SignalMatrix]) -> SignalMatrix:
    """Column-wise concatenation of matrices sharing one calendar."""
    if not parts:
        raise ValueError("nothing to concatenate")
    first = parts[0]
    for part in parts[1:]:
        if part.dates != first.dates:
            raise ValueError("calendar mismatch between signal matrices")
    columns: list[str] = []
    for part in parts:
        columns.extend(part.columns)
    if len(set(columns)) != len(columns):
        raise ValueError("column name collision in concatenation")
    values = np.hstack([part.values for part in parts])
    return _matrix(first.dates, columns, values)


def write_signal_csv(path: str, matrix: SignalMatrix) -> None:
    """Write a SignalMatrix as CSV (date column first, full precision)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("date",) + matrix.columns)
        for i, day in enumerate(matrix.dates):
            writer.writerow([day.isoformat()] + [repr(float(v)) for v in matrix.values[i]])


def read_signal_csv(path: str) -> SignalMatrix:
    """Inverse of write_signal_csv."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if not header or header[0] != "date":
            raise ValueError(f"{path}: first column must be date")
        columns = tuple(header[1:])
        dates: list[date] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: malformed row at line {lineno}")
            dates.append(date.fromisoformat(row[0]))
            rows.append([float(v) for v in row[1:]])
    return SignalMatrix(tuple(dates), columns, np.array(rows, dtype=np.float64))
