"""Canonical data types for file-system events, process windows, threat levels and alerts.

All timestamps are trace-relative microseconds (integers), never wall clock,
so replays are deterministic. Types are immutable after construction and safe
to share across threads.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable, Iterator, Optional, Union

US_PER_SECOND = 1_000_000


class Operation(str, Enum):
    """File operation kinds carried by an event record."""

    CREATE = "Create"
    DELETE = "Delete"
    RENAME = "Rename"
    WRITE = "Write"
    READ = "Read"
    OVERWRITE = "Overwrite"
    SMASH = "Smash"


# Operations that modify or destroy a file; a Read never qualifies.
MUTATING_OPS = frozenset(
    (Operation.WRITE, Operation.DELETE, Operation.RENAME, Operation.OVERWRITE, Operation.SMASH)
)

# Operations that remove the path they name from the file system.
REMOVING_OPS = frozenset((Operation.DELETE, Operation.SMASH))


class TriggerKind(str, Enum):
    """Which monitoring point opened a process window."""

    DECOY_TOUCH = "DecoyTouch"
    RANSOM_NOTE = "RansomNote"
    MANUAL = "Manual"


class Level(str, Enum):
    NONE = "None"
    LOW = "Low"
    HIGH = "High"


_LEVEL_RANK = {Level.NONE: 0, Level.LOW: 1, Level.HIGH: 2}


def level_at_least(a: Level, b: Level) -> bool:
    return _LEVEL_RANK[a] >= _LEVEL_RANK[b]


class Response(str, Enum):
    NONE_YET = "NoneYet"
    TRACK_ONLY = "TrackOnly"
    TERMINATE_SIMULATED = "TerminateSimulated"
    ISOLATE_SIMULATED = "IsolateSimulated"


def extension_of(path: str) -> str:
    """Lowercase extension of ``path`` without the dot, '' if none.

    A leading dot does not start an extension (".profile" has none).
    """
    base = basename_of(path)
    dot = base.rfind(".")
    if dot <= 0:
        return ""
    return base[dot + 1 :].lower()


def basename_of(path: str) -> str:
    cut = max(path.rfind("/"), path.rfind("\\"))
    return path[cut + 1 :]


def dirname_of(path: str) -> str:
    cut = max(path.rfind("/"), path.rfind("\\"))
    if cut < 0:
        return ""
    return path[:cut]


@dataclass(frozen=True, slots=True)
class FileEvent:
    """One file-system operation record.

    ``file_name`` holds the new path for renames; the old path travels in
    ``old_file_name``. ``file_type`` is the lowercase extension without dot.
    """

    time: int
    pid: int
    pid_name: str
    operation: Operation
    file_name: str
    file_type: str
    old_file_name: Optional[str] = None

    def type_consistent(self) -> bool:
        """True when file_type matches the extension parsed from file_name."""
        return self.file_type == extension_of(self.file_name)


@dataclass(frozen=True, slots=True)
class ProcessWindow:
    """All events of one process inside one monitoring interval."""

    pid: int
    pid_name: str
    window_start: int
    window_end: int
    events: tuple[FileEvent, ...]
    trigger: TriggerKind = TriggerKind.MANUAL

    def __post_init__(self) -> None:
        if self.window_end <= self.window_start:
            raise ValueError("window_end must be greater than window_start")
        for ev in self.events:
            if ev.pid != self.pid:
                raise ValueError(f"event pid {ev.pid} does not match window pid {self.pid}")
            if not (self.window_start <= ev.time < self.window_end):
                raise ValueError(f"event time {ev.time} outside window bounds")

    @property
    def duration(self) -> int:
        return self.window_end - self.window_start


@dataclass(frozen=True, slots=True)
class ThreatLevel:
    level: Level
    source: Optional[TriggerKind]
    score: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0,1], got {self.score}")


@dataclass(frozen=True, slots=True)
class Alert:
    """One detection record; evidence must be non-empty unless threat is None."""

    created_at: int
    pid: int
    pid_name: str
    threat: ThreatLevel
    evidence: tuple[str, ...]
    response_taken: Response = Response.NONE_YET

    def __post_init__(self) -> None:
        if self.threat.level is not Level.NONE and not self.evidence:
            raise ValueError("evidence required for non-None threat level")

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "created_at": self.created_at,
                "pid": self.pid,
                "pid_name": self.pid_name,
                "level": self.threat.level.value,
                "source": self.threat.source.value if self.threat.source else None,
                "score": round(self.threat.score, 6),
                "evidence": list(self.evidence),
                "response": self.response_taken.value,
            },
            separators=(",", ":"),
        )


@dataclass(frozen=True, slots=True)
class Trigger:
    """A monitoring-point firing that marks a process as suspicious."""

    kind: TriggerKind
    pid: int
    path: str
    time: int
    detail: str = ""


class ParseIssueKind(str, Enum):
    MALFORMED_LINE = "MalformedLine"
    UNKNOWN_OPERATION = "UnknownOperation"
    NON_MONOTONIC_TIME = "NonMonotonicTime"


@dataclass(frozen=True, slots=True)
class ParseIssue:
    kind: ParseIssueKind
    line_no: int
    detail: str = ""


@dataclass(slots=True)
class ParseResult:
    events: list[FileEvent]
    issues: list[ParseIssue] = field(default_factory=list)

    def __iter__(self) -> Iterator[FileEvent]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)


_REQUIRED_FIELDS = ("time", "pid", "pid_name", "operation", "file_name", "file_type")
_OP_BY_TOKEN = {op.value: op for op in Operation}


def parse_event_line(line: str, line_no: int, issues: list[ParseIssue]) -> Optional[FileEvent]:
    """Parse one JSON event line; append issues instead of raising.

    Returns None for malformed lines. Unknown extra fields are ignored.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        issues.append(ParseIssue(ParseIssueKind.MALFORMED_LINE, line_no, f"invalid JSON: {exc.msg}"))
        return None
    if not isinstance(obj, dict):
        issues.append(ParseIssue(ParseIssueKind.MALFORMED_LINE, line_no, "event must be a JSON object"))
        return None
    for name in _REQUIRED_FIELDS:
        if name not in obj:
            issues.append(ParseIssue(ParseIssueKind.MALFORMED_LINE, line_no, f"missing field {name!r}"))
            return None
    time, pid = obj["time"], obj["pid"]
    if type(time) is not int or type(pid) is not int:
        issues.append(ParseIssue(ParseIssueKind.MALFORMED_LINE, line_no, "time and pid must be integers"))
        return None
    op_token = obj["operation"]
    op = _OP_BY_TOKEN.get(op_token)
    if op is None:
        issues.append(ParseIssue(ParseIssueKind.UNKNOWN_OPERATION, line_no, str(op_token)))
        return None
    pid_name, file_name, file_type = obj["pid_name"], obj["file_name"], obj["file_type"]
    if not (isinstance(pid_name, str) and isinstance(file_name, str) and isinstance(file_type, str)):
        issues.append(ParseIssue(ParseIssueKind.MALFORMED_LINE, line_no, "name fields must be strings"))
        return None
    old = obj.get("old_file_name")
    if old is not None and not isinstance(old, str):
        issues.append(ParseIssue(ParseIssueKind.MALFORMED_LINE, line_no, "old_file_name must be a string"))
        return None
    return FileEvent(time, pid, pid_name, op, file_name, file_type, old)


def parse_event_log(stream: Union[str, bytes, IO]) -> ParseResult:
    """Parse a JSON-Lines event log into events plus a list of issues.

    Accepts a text/bytes blob or a file-like object. Malformed lines and
    unknown operations are reported with their 1-based line numbers and
    skipped; non-monotonic per-pid timestamps are reported as warnings but
    the events are kept.
    """
    if isinstance(stream, bytes):
        lines: Iterable[str] = stream.decode("utf-8").splitlines()
    elif isinstance(stream, str):
        lines = stream.splitlines()
    else:
        lines = stream
    events: list[FileEvent] = []
    issues: list[ParseIssue] = []
    last_time_by_pid: dict[int, int] = {}
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        ev = parse_event_line(line, line_no, issues)
        if ev is None:
            continue
        prev = last_time_by_pid.get(ev.pid)
        if prev is not None and ev.time < prev:
            issues.append(
                ParseIssue(ParseIssueKind.NON_MONOTONIC_TIME, line_no, f"pid={ev.pid} {ev.time} < {prev}")
            )
        last_time_by_pid[ev.pid] = ev.time
        events.append(ev)
    return ParseResult(events, issues)


def serialize_event(ev: FileEvent) -> str:
    """Canonical single-line JSON form of an event (field order fixed)."""
    obj = {
        "time": ev.time,
        "pid": ev.pid,
        "pid_name": ev.pid_name,
        "operation": ev.operation.value,
        "file_name": ev.file_name,
        "file_type": ev.file_type,
    }
    if ev.old_file_name is not None:
        obj["old_file_name"] = ev.old_file_name
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def serialize_events(events: Iterable[FileEvent]) -> str:
    return "".join(serialize_event(ev) + "\n" for ev in events)


def window_events(
    events: Iterable[FileEvent],
    pid: int,
    trigger_time: int,
    delta_us: int,
    trigger: TriggerKind = TriggerKind.MANUAL,
) -> ProcessWindow:
    """Collect the pid's events inside [trigger_time, trigger_time + delta_us).

    An empty window is valid; delta_us must be positive.
    """
    if delta_us <= 0:
        raise ValueError("delta_us must be positive")
    end = trigger_time + delta_us
    selected = []
    pid_name = ""
    for ev in events:
        if ev.pid != pid:
            continue
        if not pid_name:
            pid_name = ev.pid_name
        if trigger_time <= ev.time < end:
            selected.append(ev)
    return ProcessWindow(pid, pid_name, trigger_time, end, tuple(selected), trigger)
