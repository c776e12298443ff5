"""The monitoring-detection-response funnel.

Events stream past two cheap monitors (decoy registry lookups and ransom-note
scoring). Only a trigger opens a per-process window; the window is classified
at one-second slides up to its three-second span, and the first positive
classification escalates to a High alert with a simulated response. A process
that never trips a monitoring point is never deeply analyzed.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import queue
import threading
import time as time_mod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence, Union

import numpy as np

from .decoys import DecoyRegistry, WatchUnavailable
from .events import (
    Alert,
    FileEvent,
    Level,
    MUTATING_OPS,
    Operation,
    ParseIssue,
    ParseIssueKind,
    ProcessWindow,
    Response,
    ThreatLevel,
    Trigger,
    TriggerKind,
    extension_of,
    parse_event_line,
)
from .features import extract_features
from .gbdt import BoostedForest
from .graph import build_graph, encode, name_pattern_class
from .notes import DEFAULT_TAU_SIM, GenePool, similarity, tokenize

logger = logging.getLogger(__name__)

US = 1_000_000

# Extensions whose create/write closes are scored for ransom-note content.
TEXT_EXTENSIONS = frozenset(("txt", "html", "htm", "hta", "md", "rtf"))


class ContentProvider(Protocol):
    def get(self, path: str) -> Optional[bytes]: ...


class NullContentProvider:
    """No content available; note scoring is effectively off."""

    def get(self, path: str) -> Optional[bytes]:
        return None


class MappingContentProvider:
    """Content from an in-memory path -> text/bytes mapping (trace replay)."""

    def __init__(self, mapping: dict[str, Union[str, bytes]]):
        self._mapping = mapping

    def get(self, path: str) -> Optional[bytes]:
        value = self._mapping.get(path)
        if value is None:
            return None
        return value.encode("utf-8") if isinstance(value, str) else value

    @classmethod
    def from_json_file(cls, path: Union[str, Path]) -> "MappingContentProvider":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))


class FilesystemContentProvider:
    """Content read from the real file system (live mode)."""

    def __init__(self, max_bytes: int = 65536):
        self.max_bytes = max_bytes

    def get(self, path: str) -> Optional[bytes]:
        try:
            with open(path, "rb") as fp:
                return fp.read(self.max_bytes)
        except OSError:
            return None


@dataclass(frozen=True, slots=True)
class PipelineConfig:
    window_total_us: int = 3 * US
    slide_us: int = 1 * US
    decision_threshold: float = 0.5
    tau_sim: float = DEFAULT_TAU_SIM
    max_note_bytes: int = 65536
    response: Response = Response.TERMINATE_SIMULATED

    @property
    def n_slides(self) -> int:
        return max(1, self.window_total_us // self.slide_us)


@dataclass
class RunMetrics:
    events: int = 0
    triggers: int = 0
    windows_opened: int = 0
    classifier_calls: int = 0
    alerts_low: int = 0
    alerts_high: int = 0
    dropped_events: int = 0
    decision_latencies_us: list[int] = field(default_factory=list)
    wall_seconds: float = 0.0

    @property
    def events_per_second(self) -> float:
        return self.events / self.wall_seconds if self.wall_seconds > 0 else 0.0

    @property
    def alerts_by_level(self) -> dict[str, int]:
        return {"low": self.alerts_low, "high": self.alerts_high}

    @staticmethod
    def _percentile(values: Sequence[int], q: float) -> Optional[int]:
        if not values:
            return None
        ordered = sorted(values)
        rank = max(1, math.ceil(q * len(ordered)))  # nearest-rank
        return ordered[min(rank, len(ordered)) - 1]

    def to_dict(self) -> dict:
        return {
            "events": self.events,
            "triggers": self.triggers,
            "windows_opened": self.windows_opened,
            "classifier_calls": self.classifier_calls,
            "alerts_by_level": self.alerts_by_level,
            "decision_latency_p50_us": self._percentile(self.decision_latencies_us, 0.50),
            "decision_latency_p99_us": self._percentile(self.decision_latencies_us, 0.99),
            "decision_latencies_us": list(self.decision_latencies_us),
            "dropped_events": self.dropped_events,
            "events_per_second": round(self.events_per_second, 1),
            "wall_seconds": round(self.wall_seconds, 4),
        }


def metrics_report(metrics: RunMetrics) -> dict:
    """The report fields promised by the engine interface."""
    report = metrics.to_dict()
    report.pop("decision_latencies_us")
    return report


@dataclass
class _WindowState:
    trigger: Trigger
    pid_name: str
    events: list[FileEvent] = field(default_factory=list)
    slides_done: int = 0
    last_row_digest: str = ""


@dataclass
class ReplayResult:
    alerts: list[Alert]
    metrics: RunMetrics
    issues: list[ParseIssue] = field(default_factory=list)
    threat_by_pid: dict[int, Level] = field(default_factory=dict)

    def alerts_jsonl(self) -> str:
        return "".join(a.to_json_line() + "\n" for a in self.alerts)

    def save_alerts(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.alerts_jsonl(), encoding="utf-8")

    def save_metrics(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(metrics_report(self.metrics), indent=2), encoding="utf-8")


class Engine:
    """Streaming MDR core shared by trace replay and live watching.

    Single ingestion sequence; per-pid window state lives in a keyed map with
    one writer (this engine). Alert emission is serialized through the
    result list.
    """

    def __init__(
        self,
        registry: DecoyRegistry,
        pool: Optional[GenePool],
        forest: BoostedForest,
        config: PipelineConfig = PipelineConfig(),
        content_provider: Optional[ContentProvider] = None,
    ) -> None:
        self.config = config
        self.pool = pool
        self.forest = forest
        self.content = content_provider or NullContentProvider()
        self.metrics = RunMetrics()
        self.alerts: list[Alert] = []
        self.threat_by_pid: dict[int, Level] = {}
        self._decoy_paths = frozenset(registry.entries())
        self._windows: dict[int, _WindowState] = {}
        self._terminated: set[int] = set()
        self._scored_paths: set[str] = set()
        self._text_exts = TEXT_EXTENSIONS

    # -- monitors ------------------------------------------------------------

    def _decoy_trigger(self, ev: FileEvent) -> Optional[Trigger]:
        if ev.operation not in MUTATING_OPS:
            return None
        path = None
        if ev.file_name in self._decoy_paths:
            path = ev.file_name
        elif ev.old_file_name is not None and ev.old_file_name in self._decoy_paths:
            path = ev.old_file_name
        if path is None:
            return None
        return Trigger(
            TriggerKind.DECOY_TOUCH, ev.pid, path, ev.time,
            f"decoy {ev.operation.value.lower()} {path}",
        )

    def _note_trigger(self, ev: FileEvent) -> Optional[Trigger]:
        if self.pool is None:
            return None
        op = ev.operation
        if op is not Operation.CREATE and op is not Operation.WRITE:
            return None
        if ev.file_type not in self._text_exts:
            if ev.file_type or name_pattern_class(ev.file_name) != "note":
                return None
        if ev.file_name in self._scored_paths:
            return None
        blob = self.content.get(ev.file_name)
        if blob is None:
            return None
        self._scored_paths.add(ev.file_name)
        try:
            text = blob[: self.config.max_note_bytes].decode("utf-8")
        except UnicodeDecodeError:
            return None
        verdict = similarity(tokenize(text), self.pool, tau=self.config.tau_sim)
        if not verdict.is_note:
            return None
        return Trigger(
            TriggerKind.RANSOM_NOTE, ev.pid, ev.file_name, ev.time,
            f"ransom note {ev.file_name} sim={verdict.score:.3f} matched={len(verdict.matched)}",
        )

    # -- window lifecycle ------------------------------------------------------

    def _escalate(self, pid: int, level: Level) -> None:
        current = self.threat_by_pid.get(pid, Level.NONE)
        if (level is Level.HIGH) or (level is Level.LOW and current is Level.NONE):
            self.threat_by_pid[pid] = level

    def _classify(self, state: _WindowState, boundary: int) -> float:
        trigger = state.trigger
        window = ProcessWindow(
            trigger.pid,
            state.pid_name,
            trigger.time,
            boundary,
            tuple(state.events),
            trigger.kind,
        )
        expert = extract_features(window).as_array()
        embedding = encode(build_graph(window), self.forest.dims, self.forest.hash_seed).values
        row = np.concatenate([expert, embedding])
        self.metrics.classifier_calls += 1
        prob = self.forest.predict_row(row)
        state.last_row_digest = hashlib.sha256(row.tobytes()).hexdigest()[:12]
        return prob

    def _emit_high(self, state: _WindowState, boundary: int, prob: float) -> None:
        trigger = state.trigger
        pid = trigger.pid
        self._escalate(pid, Level.HIGH)
        self._terminated.add(pid)
        latency = boundary - trigger.time
        self.metrics.decision_latencies_us.append(latency)
        self.metrics.alerts_high += 1
        self.alerts.append(
            Alert(
                created_at=boundary,
                pid=pid,
                pid_name=state.pid_name,
                threat=ThreatLevel(Level.HIGH, trigger.kind, prob),
                evidence=(
                    trigger.detail,
                    f"trigger_time_us={trigger.time}",
                    f"classifier_p={prob:.4f}",
                    f"feature_digest={state.last_row_digest}",
                ),
                response_taken=self.config.response,
            )
        )
        del self._windows[pid]

    def _emit_low(self, state: _WindowState) -> None:
        trigger = state.trigger
        pid = trigger.pid
        self._escalate(pid, Level.LOW)
        self.metrics.alerts_low += 1
        score = 0.0
        if trigger.kind is TriggerKind.RANSOM_NOTE and "sim=" in trigger.detail:
            score = min(1.0, float(trigger.detail.split("sim=")[1].split()[0]))
        self.alerts.append(
            Alert(
                created_at=trigger.time + self.config.window_total_us,
                pid=pid,
                pid_name=state.pid_name,
                threat=ThreatLevel(Level.LOW, trigger.kind, score),
                evidence=(trigger.detail, f"trigger_time_us={trigger.time}"),
                response_taken=Response.TRACK_ONLY,
            )
        )
        del self._windows[pid]

    def _advance(self, state: _WindowState, now: int) -> None:
        cfg = self.config
        while True:
            boundary = state.trigger.time + (state.slides_done + 1) * cfg.slide_us
            if now < boundary:
                return
            prob = self._classify(state, boundary)
            if prob >= cfg.decision_threshold:
                self._emit_high(state, boundary, prob)
                return
            state.slides_done += 1
            if state.slides_done >= cfg.n_slides:
                self._emit_low(state)
                return

    def _open_window(self, trigger: Trigger, pid_name: str) -> None:
        self.metrics.windows_opened += 1
        self._escalate(trigger.pid, Level.LOW)
        self._windows[trigger.pid] = _WindowState(trigger, pid_name)

    # -- ingestion -------------------------------------------------------------

    def process(self, ev: FileEvent) -> None:
        self.metrics.events += 1
        pid = ev.pid
        if pid in self._terminated:
            return
        state = self._windows.get(pid)
        if state is not None:
            self._advance(state, ev.time)
            if pid in self._terminated:
                return
        trigger = self._decoy_trigger(ev)
        if trigger is None:
            trigger = self._note_trigger(ev)
        if trigger is not None:
            self.metrics.triggers += 1
            if pid not in self._windows:
                self._open_window(trigger, ev.pid_name)
        state = self._windows.get(pid)
        if state is not None and ev.time < state.trigger.time + self.config.window_total_us:
            state.events.append(ev)

    def advance_time(self, now: int) -> None:
        """Drive open windows forward against a clock (live mode)."""
        for pid in list(self._windows):
            state = self._windows.get(pid)
            if state is not None:
                self._advance(state, now)

    def finish(self) -> None:
        """Flush every open window at end of stream."""
        for pid in list(self._windows):
            state = self._windows.get(pid)
            if state is None:
                continue
            boundary = state.trigger.time + (state.slides_done + 1) * self.config.slide_us
            prob = self._classify(state, boundary)
            if prob >= self.config.decision_threshold:
                self._emit_high(state, boundary, prob)
            else:
                self._emit_low(state)

    def result(self, issues: Optional[list[ParseIssue]] = None) -> ReplayResult:
        return ReplayResult(self.alerts, self.metrics, issues or [], dict(self.threat_by_pid))


def run_replay(
    log_path: Union[str, Path],
    registry: DecoyRegistry,
    pool: Optional[GenePool],
    forest: BoostedForest,
    config: PipelineConfig = PipelineConfig(),
    content_provider: Optional[ContentProvider] = None,
) -> ReplayResult:
    """Replay a JSON-Lines trace through the full funnel.

    Deterministic: alert timestamps are simulated (trace-relative), so two
    replays of the same artifacts produce identical alert streams.
    """
    engine = Engine(registry, pool, forest, config, content_provider)
    issues: list[ParseIssue] = []
    last_time_by_pid: dict[int, int] = {}
    process = engine.process
    started = time_mod.perf_counter()
    with open(log_path, "r", encoding="utf-8") as fp:
        for line_no, raw in enumerate(fp, start=1):
            line = raw.strip()
            if not line:
                continue
            ev = parse_event_line(line, line_no, issues)
            if ev is None:
                continue
            prev = last_time_by_pid.get(ev.pid)
            if prev is not None and ev.time < prev:
                issues.append(
                    ParseIssue(
                        kind=ParseIssueKind.NON_MONOTONIC_TIME,
                        line_no=line_no,
                        detail=f"pid={ev.pid} {ev.time} < {prev}",
                    )
                )
            last_time_by_pid[ev.pid] = ev.time
            process(ev)
    engine.finish()
    engine.metrics.wall_seconds = time_mod.perf_counter() - started
    return engine.result(issues)


class DirectoryWatcher:
    """Polling directory watcher emitting FileEvents for live runs.

    User space cannot attribute file changes to a process, so every live
    event carries pid 0. New paths become Create, metadata changes become
    Write, vanished paths become Delete. Events land in a bounded queue;
    overflow is counted.
    """

    def __init__(self, dirs: Sequence[Union[str, Path]], poll_interval: float = 0.05, queue_size: int = 8192):
        self.dirs = [str(d) for d in dirs]
        missing = [d for d in self.dirs if not os.path.isdir(d)]
        if missing:
            raise WatchUnavailable(f"not watchable: {', '.join(missing)}")
        self.poll_interval = poll_interval
        self.events: "queue.Queue[FileEvent]" = queue.Queue(maxsize=queue_size)
        self.dropped = 0
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None
        self._origin = time_mod.monotonic()
        self._snapshot = self._scan()

    def _scan(self) -> dict[str, tuple[int, int]]:
        snap: dict[str, tuple[int, int]] = {}
        for root in self.dirs:
            for dirpath, _dirnames, filenames in os.walk(root):
                for name in filenames:
                    path = os.path.join(dirpath, name)
                    try:
                        st = os.stat(path)
                    except OSError:
                        continue
                    snap[path] = (st.st_mtime_ns, st.st_size)
        return snap

    def now_us(self) -> int:
        return int((time_mod.monotonic() - self._origin) * US)

    def _emit(self, op: Operation, path: str, when: int) -> None:
        ev = FileEvent(when, 0, "live", op, path, extension_of(path))
        try:
            self.events.put_nowait(ev)
        except queue.Full:
            self.dropped += 1
            if self.dropped == 1 or self.dropped % 1000 == 0:
                logger.warning("live event queue full; %d events dropped so far", self.dropped)

    def _run(self) -> None:
        while not self._stop.is_set():
            current = self._scan()
            when = self.now_us()
            for path, meta in current.items():
                old = self._snapshot.get(path)
                if old is None:
                    self._emit(Operation.CREATE, path, when)
                elif old != meta:
                    self._emit(Operation.WRITE, path, when)
            for path in self._snapshot:
                if path not in current:
                    self._emit(Operation.DELETE, path, when)
            self._snapshot = current
            self._stop.wait(self.poll_interval)

    def start(self) -> None:
        self._stop.clear()
        self._thread = threading.Thread(target=self._run, name="dir-watcher", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None


def run_live(
    dirs: Sequence[Union[str, Path]],
    registry: DecoyRegistry,
    pool: Optional[GenePool],
    forest: BoostedForest,
    config: PipelineConfig = PipelineConfig(),
    duration_s: Optional[float] = None,
    stop: Optional[threading.Event] = None,
    content_provider: Optional[ContentProvider] = None,
    on_alert: Optional[Callable[[Alert], None]] = None,
    poll_interval: float = 0.05,
) -> ReplayResult:
    """Watch directories live and run the same funnel over observed events.

    Raises WatchUnavailable when the directories cannot be watched; the
    caller degrades to replay-only operation.
    """
    watcher = DirectoryWatcher(dirs, poll_interval=poll_interval)
    engine = Engine(registry, pool, forest, config, content_provider or FilesystemContentProvider())
    stop = stop or threading.Event()
    started = time_mod.perf_counter()
    watcher.start()
    seen_alerts = 0
    try:
        while not stop.is_set():
            if duration_s is not None and time_mod.perf_counter() - started >= duration_s:
                break
            try:
                ev = watcher.events.get(timeout=poll_interval)
            except queue.Empty:
                engine.advance_time(watcher.now_us())
            else:
                engine.process(ev)
            if on_alert is not None:
                while seen_alerts < len(engine.alerts):
                    on_alert(engine.alerts[seen_alerts])
                    seen_alerts += 1
    finally:
        watcher.stop()
    engine.finish()
    engine.metrics.dropped_events = watcher.dropped
    engine.metrics.wall_seconds = time_mod.perf_counter() - started
    if on_alert is not None:
        while seen_alerts < len(engine.alerts):
            on_alert(engine.alerts[seen_alerts])
            seen_alerts += 1
    return engine.result()
