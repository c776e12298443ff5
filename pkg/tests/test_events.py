"""Event model: parsing, serialization round-trips, windowing."""
from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ransomwatch.events import (
    FileEvent,
    Operation,
    ParseIssueKind,
    ProcessWindow,
    TriggerKind,
    extension_of,
    parse_event_log,
    serialize_events,
    window_events,
)

GOOD_LINE = (
    '{"time":0,"pid":4,"pid_name":"a.exe","operation":"Create",'
    '"file_name":"C:/u/x.txt","file_type":"txt"}'
)


def test_parse_single_line():
    result = parse_event_log(GOOD_LINE)
    assert len(result.events) == 1 and not result.issues
    ev = result.events[0]
    assert ev == FileEvent(0, 4, "a.exe", Operation.CREATE, "C:/u/x.txt", "txt")


def test_parse_empty_stream():
    result = parse_event_log("")
    assert result.events == [] and result.issues == []


def test_malformed_middle_line_reported_with_line_number():
    lines = [
        GOOD_LINE,
        '{"time":1,"pid":4,"pid_name":"a.exe","file_name":"C:/u/y.txt","file_type":"txt"}',
        GOOD_LINE.replace('"time":0', '"time":2'),
    ]
    result = parse_event_log("\n".join(lines))
    assert len(result.events) == 2
    assert [i.kind for i in result.issues] == [ParseIssueKind.MALFORMED_LINE]
    assert result.issues[0].line_no == 2


def test_unknown_operation_reported():
    bad = GOOD_LINE.replace("Create", "Defragment")
    result = parse_event_log(bad)
    assert not result.events
    issue = result.issues[0]
    assert issue.kind is ParseIssueKind.UNKNOWN_OPERATION and "Defragment" in issue.detail


def test_non_monotonic_time_is_warning_not_fatal():
    lines = [GOOD_LINE.replace('"time":0', '"time":5'), GOOD_LINE.replace('"time":0', '"time":3')]
    result = parse_event_log("\n".join(lines))
    assert len(result.events) == 2
    assert [i.kind for i in result.issues] == [ParseIssueKind.NON_MONOTONIC_TIME]


def test_extra_fields_ignored_and_rename_old_path():
    line = (
        '{"time":9,"pid":1,"pid_name":"m.exe","operation":"Rename",'
        '"file_name":"C:/d/b.locked","file_type":"locked",'
        '"old_file_name":"C:/d/b.docx","comment":"ignored"}'
    )
    result = parse_event_log(line)
    assert not result.issues
    assert result.events[0].old_file_name == "C:/d/b.docx"


def test_invalid_json_and_bad_types():
    result = parse_event_log('{"time": "zero"}\nnot json at all\n')
    assert not result.events
    assert [i.line_no for i in result.issues] == [1, 2]
    assert all(i.kind is ParseIssueKind.MALFORMED_LINE for i in result.issues)


@pytest.mark.parametrize(
    "path,ext",
    [
        ("C:/u/x.txt", "txt"),
        ("C:/u/archive.tar.gz", "gz"),
        ("C:\\u\\REPORT.DOCX", "docx"),
        ("C:/u/noext", ""),
        ("C:/u/.profile", ""),
    ],
)
def test_extension_of(path, ext):
    assert extension_of(path) == ext


_paths = st.sampled_from(["C:/u/a.txt", "C:/u/b.docx", "C:/u/sub/c.pdf", "D:/x/d.jpg"])
_ops = st.sampled_from(list(Operation))


@st.composite
def _events(draw):
    op = draw(_ops)
    path = draw(_paths)
    old = draw(_paths) if op is Operation.RENAME and draw(st.booleans()) else None
    return FileEvent(
        time=draw(st.integers(min_value=0, max_value=10_000_000)),
        pid=draw(st.integers(min_value=1, max_value=5)),
        pid_name=draw(st.sampled_from(["a.exe", "b.exe"])),
        operation=op,
        file_name=path,
        file_type=extension_of(path),
        old_file_name=old,
    )


@settings(max_examples=100, deadline=None)
@given(st.lists(_events(), max_size=30))
def test_serialize_parse_round_trip(events):
    text = serialize_events(events)
    parsed = parse_event_log(text)
    assert parsed.events == list(events)
    assert serialize_events(parsed.events) == text


def test_parse_then_serialize_normalizes():
    noisy = (
        '  {"pid": 4, "time": 0, "pid_name": "a.exe", "operation": "Create", '
        '"file_name": "C:/u/x.txt", "file_type": "txt", "zz": 1}  \n\n'
    )
    parsed = parse_event_log(noisy)
    assert serialize_events(parsed.events) == GOOD_LINE + "\n"


def _mk(time, pid=4):
    return FileEvent(time, pid, "a.exe", Operation.WRITE, "C:/u/x.txt", "txt")


def test_window_boundary_arithmetic():
    events = [_mk(0), _mk(500_000), _mk(1_500_000)]
    window = window_events(events, 4, 0, 1_000_000)
    assert [ev.time for ev in window.events] == [0, 500_000]
    assert window.duration == 1_000_000


def test_window_other_pid_empty():
    events = [_mk(0, pid=9), _mk(100, pid=9)]
    window = window_events(events, 4, 0, 1_000_000)
    assert window.events == ()


def test_window_requires_positive_delta():
    with pytest.raises(ValueError):
        window_events([], 4, 0, 0)


def test_window_matches_brute_force_filter_bulk():
    rng = random.Random(5)
    events = [
        FileEvent(rng.randrange(0, 5_000_000), rng.randrange(1, 6), "p", Operation.READ, "C:/f", "")
        for _ in range(10_000)
    ]
    pid, t0, dt = 3, 1_000_000, 3_000_000
    window = window_events(events, pid, t0, dt)
    brute = [ev for ev in events if ev.pid == pid and t0 <= ev.time < t0 + dt]
    assert list(window.events) == brute


@settings(max_examples=100, deadline=None)
@given(
    st.lists(_events(), max_size=40),
    st.integers(min_value=1, max_value=5),
    st.integers(min_value=0, max_value=9_000_000),
    st.integers(min_value=1, max_value=4_000_000),
)
def test_window_equals_brute_force_property(events, pid, t0, dt):
    window = window_events(events, pid, t0, dt)
    brute = [ev for ev in events if ev.pid == pid and t0 <= ev.time < t0 + dt]
    assert list(window.events) == brute
    assert window.trigger is TriggerKind.MANUAL


def test_process_window_validates_members():
    with pytest.raises(ValueError):
        ProcessWindow(4, "a.exe", 0, 1_000, (_mk(5_000),))
    with pytest.raises(ValueError):
        ProcessWindow(4, "a.exe", 0, 1_000, (_mk(10, pid=9),))
    with pytest.raises(ValueError):
        ProcessWindow(4, "a.exe", 1_000, 1_000, ())
