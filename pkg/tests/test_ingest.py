import random
from datetime import datetime, timezone

import pytest

from lacclean.errors import MalformedRow
from lacclean.ingest import TRACE_HEADER, extract_unique_cells, parse_trace
from lacclean.models import CellIdentity
from lacclean.synth import DEFAULT_REGION, generate_topology, generate_trace

HEADER = TRACE_HEADER + "\n"


def test_empty_input_gives_empty_sequence():
    assert parse_trace(b"").events == []
    assert parse_trace("").events == []


def test_header_only_gives_empty_sequence():
    assert parse_trace(HEADER).events == []


def test_row_with_absent_mcc_mnc():
    parsed = parse_trace(HEADER + "2004-09-01T12:00:00Z,,,24127,51\n")
    (event,) = parsed.events
    assert event.cell == CellIdentity(None, None, 24127, 51)
    assert event.timestamp == datetime(2004, 9, 1, 12, tzinfo=timezone.utc)


def test_full_row():
    parsed = parse_trace(HEADER + "2004-09-01T12:00:00Z,310,26,24127,51\n")
    assert parsed.events[0].cell == CellIdentity(310, 26, 24127, 51)


def test_lac_zero_is_malformed_in_strict_mode():
    text = HEADER + "2004-09-01T12:00:00Z,,,24127,51\n2004-09-01T12:01:00Z,,,0,51\n"
    with pytest.raises(MalformedRow) as exc:
        parse_trace(text)
    assert exc.value.line_no == 3


def test_lenient_mode_skips_and_counts():
    text = (
        HEADER
        + "2004-09-01T12:00:00Z,,,24127,51\n"
        + "garbage line\n"
        + "2004-09-01T12:02:00Z,,,24127,52\n"
    )
    parsed = parse_trace(text, lenient=True)
    assert len(parsed.events) == 2
    assert parsed.skipped == [(3, "expected 5 fields, got 1")]


@pytest.mark.parametrize(
    "row",
    [
        "2004-09-01 12:00:00,,,24127,51",   # bad timestamp format
        "2004-09-01T12:00:00Z,,,24127,-1",  # negative cell id
        "2004-09-01T12:00:00Z,1000,,24127,51",  # mcc out of range
        "2004-09-01T12:00:00Z,,,65534,51",  # lac beyond reserved bound
        "2004-09-01T12:00:00Z,,,24127",     # missing field
        "2004-13-01T12:00:00Z,,,24127,51",  # impossible month
    ],
)
def test_malformed_rows(row):
    with pytest.raises(MalformedRow):
        parse_trace(HEADER + row + "\n")


def test_bad_header_strict():
    with pytest.raises(MalformedRow) as exc:
        parse_trace("time,mcc,mnc,lac,cell\n2004-09-01T12:00:00Z,,,24127,51\n")
    assert exc.value.line_no == 1


def test_crlf_and_trailing_newline_insensitive():
    rows = ["2004-09-01T12:00:00Z,,,24127,51", "2004-09-01T12:01:00Z,,,24127,52"]
    lf = TRACE_HEADER + "\n" + "\n".join(rows) + "\n"
    crlf = TRACE_HEADER + "\r\n" + "\r\n".join(rows) + "\r\n"
    bare = TRACE_HEADER + "\n" + "\n".join(rows)
    assert parse_trace(lf).events == parse_trace(crlf).events == parse_trace(bare).events


def test_duplicate_rows_kept_in_events_but_collapsed_in_cellset():
    row = "2004-09-01T12:00:00Z,,,24127,51"
    parsed = parse_trace(HEADER + row + "\n" + row + "\n")
    assert len(parsed.events) == 2
    assert len(extract_unique_cells(parsed.events)) == 1


def test_lenient_never_returns_fewer_than_strict_prefix():
    rng = random.Random(11)
    good = [
        f"2004-09-01T{h:02d}:{m:02d}:00Z,,,24127,{cid}"
        for h, m, cid in ((rng.randrange(24), rng.randrange(60), rng.randrange(1, 99)) for _ in range(30))
    ]
    for trial in range(20):
        rows = good[:]
        for _ in range(rng.randrange(4)):
            rows.insert(rng.randrange(len(rows) + 1), "not,a,valid,row,at all,extra")
        text = TRACE_HEADER + "\n" + "\n".join(rows) + "\n"
        try:
            strict_events = parse_trace(text).events
        except MalformedRow as exc:
            prefix = rows[: exc.line_no - 2]
            prefix_text = TRACE_HEADER + "\n"
            if prefix:
                prefix_text += "\n".join(prefix) + "\n"
            strict_events = parse_trace(prefix_text).events
        lenient_events = parse_trace(text, lenient=True).events
        assert len(lenient_events) >= len(strict_events)
        assert lenient_events[: len(strict_events)] == strict_events


def test_extract_unique_cells_empty():
    assert len(extract_unique_cells([])) == 0


def test_extract_unique_cells_dedup_and_order():
    a = CellIdentity(None, None, 5, 9)
    b = CellIdentity(310, 26, 5, 1)
    parsed = parse_trace(
        HEADER
        + "2004-09-01T12:00:00Z,,,5,9\n"
        + "2004-09-01T12:01:00Z,310,26,5,1\n"
        + "2004-09-01T12:02:00Z,,,5,9\n"
    )
    cells = extract_unique_cells(parsed.events)
    # absent mcc/mnc sorts before present
    assert list(cells) == [a, b]


def test_extract_unique_cells_idempotent_on_reexpansion():
    parsed = parse_trace(
        HEADER
        + "2004-09-01T12:00:00Z,,,5,9\n"
        + "2004-09-01T12:01:00Z,310,26,7,1\n"
        + "2004-09-01T12:02:00Z,,,5,9\n"
    )
    cells = extract_unique_cells(parsed.events)
    ts = datetime(2004, 9, 1, tzinfo=timezone.utc)
    from lacclean.models import TraceEvent

    reexpanded = [TraceEvent(ts, c) for c in cells]
    assert extract_unique_cells(reexpanded) == cells


def test_synthetic_trace_recovers_1744_unique_cells():
    # 16 LACs x 109 cells = 1744, the size of a well-known trace corpus
    world = generate_topology(16, 109, 120.0, DEFAULT_REGION, seed=3)
    events = generate_trace(world, 10_000, seed=4)
    assert len(extract_unique_cells(events)) == 1744
