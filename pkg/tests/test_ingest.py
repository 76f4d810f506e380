"""Archive loaders: CSV prices, reddit NDJSON, GitHub Archive NDJSON."""

import json
from datetime import date, datetime, timezone

import numpy as np
import numpy.testing as npt
import pytest

from coinseer import ingest


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def price_csv(path, rows):
    write_lines(path, ["date,open,high,low,close"] + rows)


def epoch(day, hour=12):
    return int(datetime(day.year, day.month, day.day, hour, tzinfo=timezone.utc).timestamp())


def comment_line(day, sub="CryptoCurrency", body="to the moon", score=3, hour=12):
    return json.dumps(
        {"created_utc": epoch(day, hour), "subreddit": sub, "body": body, "score": score}
    )


def event_line(day, repo="bitcoin/bitcoin", kind="WatchEvent", hour=12):
    stamp = datetime(day.year, day.month, day.day, hour, tzinfo=timezone.utc)
    return json.dumps(
        {
            "type": kind,
            "created_at": stamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "repo": {"name": repo},
        }
    )


def test_price_round_trip_and_sorting(tmp_path):
    src = tmp_path / "p.csv"
    price_csv(
        src,
        [
            "2021-01-03,11.5,12.0,11.0,11.8",
            "2021-01-01,10.0,10.5,9.5,10.2",
            "2021-01-02,10.2,11.9,10.1,11.5",
        ],
    )
    series = ingest.load_price_series(str(src), "btc")
    assert series.coin == "btc"
    assert series.dates == (date(2021, 1, 1), date(2021, 1, 2), date(2021, 1, 3))
    npt.assert_allclose(series.high, [10.5, 11.9, 12.0])
    assert series.index_of(date(2021, 1, 2)) == 1
    with pytest.raises(ValueError):
        series.index_of(date(2021, 2, 1))

    out = tmp_path / "q.csv"
    ingest.save_price_series(str(out), series)
    again = ingest.load_price_series(str(out), "btc")
    assert again.dates == series.dates
    npt.assert_array_equal(again.open, series.open)
    npt.assert_array_equal(again.close, series.close)


def test_price_series_arrays_are_frozen(tmp_path):
    src = tmp_path / "p.csv"
    price_csv(src, ["2021-01-01,10.0,10.5,9.5,10.2"])
    series = ingest.load_price_series(str(src), "btc")
    with pytest.raises(ValueError):
        series.high[0] = 99.0


def test_price_loader_rejects_bad_rows(tmp_path):
    cases = [
        ("2021-01-01,10,10.5,9.5", "malformed row at line 2"),
        ("not-a-date,10,10.5,9.5,10.2", "malformed row at line 2"),
        ("2021-01-01,10,abc,9.5,10.2", "malformed row at line 2"),
        ("2021-01-01,10,10.5,-1,10.2", "non-positive price at line 2"),
        ("2021-01-01,10,10.5,0,10.2", "non-positive price at line 2"),
        ("2021-01-01,20,10.5,9.5,10.2", "open exceeds high at line 2"),
        ("2021-01-01,10,10.5,9.5,1.2", "close below low at line 2"),
        ("2021-01-01,10,9.0,9.5,9.6", "high below low at line 2"),
    ]
    for row, message in cases:
        src = tmp_path / "bad.csv"
        price_csv(src, [row])
        with pytest.raises(ingest.IngestError, match=message):
            ingest.load_price_series(str(src), "btc")


def test_price_loader_rejects_duplicates_and_bad_header(tmp_path):
    src = tmp_path / "dup.csv"
    price_csv(src, ["2021-01-01,10,10.5,9.5,10.2", "2021-01-01,10,10.5,9.5,10.2"])
    with pytest.raises(ingest.IngestError, match="duplicate date .* at line 3"):
        ingest.load_price_series(str(src), "btc")

    src2 = tmp_path / "head.csv"
    write_lines(src2, ["day,open,high,low,close", "2021-01-01,10,10.5,9.5,10.2"])
    with pytest.raises(ingest.IngestError, match="expected header"):
        ingest.load_price_series(str(src2), "btc")

    src3 = tmp_path / "empty.csv"
    src3.write_text("")
    with pytest.raises(ingest.IngestError, match="empty file"):
        ingest.load_price_series(str(src3), "btc")


def test_day_of_and_daily_calendar():
    assert ingest.day_of(epoch(date(2017, 6, 1), hour=23)) == date(2017, 6, 1)
    cal = ingest.daily_calendar(date(2020, 12, 30), date(2021, 1, 2))
    assert cal == (
        date(2020, 12, 30),
        date(2020, 12, 31),
        date(2021, 1, 1),
        date(2021, 1, 2),
    )
    with pytest.raises(ValueError):
        ingest.daily_calendar(date(2021, 1, 2), date(2021, 1, 1))


def test_reddit_loader_filters_and_sorts(tmp_path):
    src = tmp_path / "r.ndjson"
    lines = [
        comment_line(date(2021, 1, 2), sub="cryptocurrency", body="b", hour=9),
        comment_line(date(2021, 1, 1), sub="CryptoCurrency", body="a"),
        comment_line(date(2021, 1, 1), sub="aww", body="cat"),
    ]
    write_lines(src, lines)
    records = ingest.load_reddit_comments(str(src), "CRYPTOCURRENCY")
    assert [r.body for r in records] == ["a", "b"]
    assert records[0].created_utc < records[1].created_utc

    shuffled = tmp_path / "r2.ndjson"
    write_lines(shuffled, [lines[2], lines[0], lines[1]])
    assert ingest.load_reddit_comments(str(shuffled), "cryptocurrency") == records


def test_reddit_loader_skip_tolerance(tmp_path):
    good = [comment_line(date(2021, 1, 1), hour=h % 24) for h in range(199)]
    src = tmp_path / "ok.ndjson"
    write_lines(src, good + ["{broken"])
    records = ingest.load_reddit_comments(str(src), "cryptocurrency")
    assert len(records) == 199

    src2 = tmp_path / "bad.ndjson"
    write_lines(src2, good[:50] + ["{broken"])
    with pytest.raises(ingest.IngestError, match="unreadable"):
        ingest.load_reddit_comments(str(src2), "cryptocurrency")


def test_reddit_loader_skips_field_problems(tmp_path):
    src = tmp_path / "r.ndjson"
    rows = [comment_line(date(2021, 1, 1))] * 398
    rows.append(json.dumps({"created_utc": -5, "subreddit": "CryptoCurrency", "body": "x", "score": 1}))
    rows.append(json.dumps({"subreddit": "CryptoCurrency", "body": "x", "score": 1}))
    write_lines(src, rows)
    records = ingest.load_reddit_comments(str(src), "cryptocurrency")
    assert len(records) == 398


def test_github_loader_filters_types_and_repo(tmp_path):
    src = tmp_path / "g.ndjson"
    lines = [
        event_line(date(2021, 1, 1), kind="WatchEvent"),
        event_line(date(2021, 1, 1), kind="ForkEvent", hour=13),
        event_line(date(2021, 1, 1), kind="GollumEvent", hour=14),
        event_line(date(2021, 1, 1), repo="Bitcoin/Bitcoin", kind="PushEvent", hour=15),
        event_line(date(2021, 1, 1), repo="other/repo", kind="WatchEvent", hour=16),
    ]
    write_lines(src, lines)
    records = ingest.load_github_events(str(src), "bitcoin/bitcoin")
    assert [r.event_type for r in records] == ["Watch", "Fork", "Push"]

    shuffled = tmp_path / "g2.ndjson"
    write_lines(shuffled, list(reversed(lines)))
    assert ingest.load_github_events(str(shuffled), "BITCOIN/BITCOIN") == records


def test_github_loader_accepts_offset_timestamps(tmp_path):
    src = tmp_path / "g.ndjson"
    write_lines(
        src,
        [
            json.dumps(
                {
                    "type": "WatchEvent",
                    "created_at": "2021-01-01T12:00:00+02:00",
                    "repo": {"name": "a/b"},
                }
            )
        ],
    )
    (record,) = ingest.load_github_events(str(src), "a/b")
    assert ingest.day_of(record.created_utc) == date(2021, 1, 1)


def test_align_calendar_forward_fills(tmp_path):
    src = tmp_path / "p.csv"
    price_csv(
        src,
        [
            "2021-01-01,10.0,10.5,9.5,10.2",
            "2021-01-02,10.2,11.9,10.1,11.5",
            "2021-01-05,12.0,12.5,11.5,12.2",
        ],
    )
    series = ingest.load_price_series(str(src), "btc")
    aligned, fills = ingest.align_calendar(series, date(2021, 1, 1), date(2021, 1, 5))
    assert fills == 2
    assert len(aligned) == 5
    npt.assert_allclose(aligned.high, [10.5, 11.9, 11.9, 11.9, 12.5])
    npt.assert_allclose(aligned.close, [10.2, 11.5, 11.5, 11.5, 12.2])

    with pytest.raises(ValueError, match="beyond available"):
        ingest.align_calendar(series, date(2020, 12, 31), date(2021, 1, 5))
    with pytest.raises(ValueError, match="nothing to carry forward"):
        ingest.align_calendar(series, date(2021, 1, 3), date(2021, 1, 5))


def test_write_ndjson_round_trip(tmp_path):
    path = tmp_path / "o.ndjson"
    objects = [{"b": 2, "a": 1}, {"x": [1, 2]}]
    ingest.write_ndjson(str(path), objects)
    lines = path.read_text().splitlines()
    assert lines[0] == '{"a":1,"b":2}'
    assert [json.loads(line) for line in lines] == objects
