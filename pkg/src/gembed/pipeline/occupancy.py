"""
Stage busy time, queue depth and IO stall instrumentation.

Besides run totals the recorder keeps a time series in fixed-width windows measured
from the first start(). When the series would exceed max_windows, adjacent windows
are merged pairwise and the width doubles; the timeline never holds more than
max_windows windows.
"""

import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Union

import pandas as pd

STAGES = ("load", "transfer_in", "compute", "transfer_out", "update")
IO_STALL = "io_stall"

TIMELINE_COLUMNS = (
    ["time", "window_seconds"]
    + [f"busy_{stage}" for stage in STAGES]
    + [f"queue_{stage}" for stage in STAGES]
    + ["io_stall_seconds"]
)


def _empty_timeline() -> pd.DataFrame:
    return pd.DataFrame(columns=TIMELINE_COLUMNS)


@dataclass
class OccupancyReport:
    wall_seconds: float
    busy_fraction: Dict[str, float]
    queue_mean_depth: Dict[str, float] = field(default_factory=dict)
    queue_max_depth: Dict[str, int] = field(default_factory=dict)
    io_stall_seconds: float = 0.0
    timeline: pd.DataFrame = field(default_factory=_empty_timeline)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for stage, fraction in self.busy_fraction.items():
            rows.append({
                "stage": stage,
                "busy_fraction": fraction,
                "queue_mean_depth": self.queue_mean_depth.get(stage, 0.0),
                "queue_max_depth": self.queue_max_depth.get(stage, 0),
            })
        return pd.DataFrame(rows, columns=["stage", "busy_fraction", "queue_mean_depth", "queue_max_depth"])

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False)
        return path

    def write_timeline_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.timeline.to_csv(path, index=False)
        return path


class _QueueStat:
    __slots__ = ("total", "count", "peak")

    def __init__(self) -> None:
        self.total = 0.0
        self.count = 0
        self.peak = 0

    def add(self, depth: int) -> None:
        self.total += depth
        self.count += 1
        self.peak = max(self.peak, depth)

    def merge(self, other: "_QueueStat") -> None:
        self.total += other.total
        self.count += other.count
        self.peak = max(self.peak, other.peak)

    @property
    def mean(self) -> float:
        return self.total / self.count if self.count else 0.0


class OccupancyRecorder:
    """
    Accumulates per-stage busy seconds, queue depth samples and IO stalls.

    Busy fraction of a stage = busy seconds / (wall seconds * workers of that stage).
    Wall time accumulates between start() and stop() calls.

    Args:
        window_seconds: Initial width of a timeline window
        max_windows: Timeline length at which windows are merged pairwise
    """

    def __init__(self, window_seconds: float = 0.25, max_windows: int = 4096) -> None:
        if window_seconds <= 0:
            raise ValueError(f"window_seconds must be > 0, got {window_seconds}")
        if max_windows < 2:
            raise ValueError(f"max_windows must be >= 2, got {max_windows}")
        self.max_windows = max_windows
        self._lock = threading.Lock()
        self._busy: Dict[str, float] = {stage: 0.0 for stage in STAGES}
        self._workers: Dict[str, int] = {stage: 1 for stage in STAGES}
        self._queues: Dict[str, _QueueStat] = {}
        self._stall = 0.0
        self._wall = 0.0
        self._started: Optional[float] = None

        self._width = window_seconds
        self._origin: Optional[float] = None
        self._last: Optional[float] = None
        # window index -> key -> busy or stall seconds
        self._spans: Dict[int, Dict[str, float]] = {}
        # window index -> stage -> queue depth samples
        self._window_queues: Dict[int, Dict[str, _QueueStat]] = {}

    def set_workers(self, stage: str, workers: int) -> None:
        with self._lock:
            self._workers[stage] = max(1, workers)

    def start(self) -> None:
        if self._started is None:
            now = time.perf_counter()
            self._started = now
            with self._lock:
                self._touch(now)
                self._coarsen()

    def stop(self) -> None:
        if self._started is not None:
            now = time.perf_counter()
            self._wall += now - self._started
            self._started = None
            with self._lock:
                self._touch(now)
                self._coarsen()

    @property
    def wall_seconds(self) -> float:
        running = time.perf_counter() - self._started if self._started is not None else 0.0
        return self._wall + running

    @property
    def window_seconds(self) -> float:
        return self._width

    @property
    def num_windows(self) -> int:
        with self._lock:
            return self._window_count()

    # windows; callers hold the lock

    def _touch(self, now: float) -> None:
        if self._origin is None:
            self._origin = now
        if self._last is None or now > self._last:
            self._last = now

    def _window_count(self) -> int:
        if self._origin is None or self._last is None:
            return 0
        return int((self._last - self._origin) // self._width) + 1

    def _index(self, t: float) -> int:
        return max(0, int((t - self._origin) // self._width))

    def _add_span(self, key: str, start: float, end: float) -> None:
        self._touch(start)
        self._touch(end)
        t = max(start, self._origin)
        while t < end:
            k = self._index(t)
            edge = self._origin + (k + 1) * self._width
            if edge <= t:
                k += 1
                edge += self._width
            stop = min(end, edge)
            window = self._spans.setdefault(k, {})
            window[key] = window.get(key, 0.0) + (stop - t)
            t = stop
        self._coarsen()

    def _coarsen(self) -> None:
        while self._window_count() > self.max_windows:
            spans: Dict[int, Dict[str, float]] = {}
            for k, window in self._spans.items():
                merged = spans.setdefault(k // 2, {})
                for key, seconds in window.items():
                    merged[key] = merged.get(key, 0.0) + seconds
            queues: Dict[int, Dict[str, _QueueStat]] = {}
            for k, window in self._window_queues.items():
                merged_q = queues.setdefault(k // 2, {})
                for stage, stat in window.items():
                    merged_q.setdefault(stage, _QueueStat()).merge(stat)
            self._spans, self._window_queues = spans, queues
            self._width *= 2

    # recording

    @contextmanager
    def busy(self, stage: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            end = time.perf_counter()
            with self._lock:
                self._busy[stage] = self._busy.get(stage, 0.0) + (end - start)
                self._add_span(stage, start, end)

    def busy_seconds(self, stage: str) -> float:
        with self._lock:
            return self._busy.get(stage, 0.0)

    def sample_queue(self, stage: str, depth: int) -> None:
        now = time.perf_counter()
        with self._lock:
            self._touch(now)
            self._queues.setdefault(stage, _QueueStat()).add(depth)
            window = self._window_queues.setdefault(self._index(now), {})
            window.setdefault(stage, _QueueStat()).add(depth)
            self._coarsen()

    def record_stall(self, seconds: float, end: Optional[float] = None) -> None:
        """Account `seconds` of waiting on partition IO that ended at `end` (now by default)."""
        if seconds <= 0:
            return
        end = time.perf_counter() if end is None else end
        with self._lock:
            self._stall += seconds
            self._add_span(IO_STALL, end - seconds, end)

    @property
    def stall_seconds(self) -> float:
        with self._lock:
            return self._stall

    # reporting

    def timeline_frame(self) -> pd.DataFrame:
        """One row per window: start time, width, busy fraction and mean queue depth per stage, stall seconds."""
        now = time.perf_counter() if self._started is not None else None
        with self._lock:
            if now is not None:
                self._touch(now)
            self._coarsen()
            count = self._window_count()
            if count == 0:
                return _empty_timeline()
            width = self._width
            horizon = self._last - self._origin
            workers = dict(self._workers)
            rows: List[dict] = []
            for k in range(count):
                start = k * width
                covered = min(width, horizon - start)
                covered = covered if covered > 0 else width
                spans = self._spans.get(k, {})
                queues = self._window_queues.get(k, {})
                row = {"time": start, "window_seconds": covered}
                for stage in STAGES:
                    row[f"busy_{stage}"] = min(1.0, spans.get(stage, 0.0) / (covered * workers.get(stage, 1)))
                for stage in STAGES:
                    stat = queues.get(stage)
                    row[f"queue_{stage}"] = stat.mean if stat is not None else 0.0
                row["io_stall_seconds"] = spans.get(IO_STALL, 0.0)
                rows.append(row)
        return pd.DataFrame(rows, columns=TIMELINE_COLUMNS)

    def report(self) -> OccupancyReport:
        wall = self.wall_seconds
        timeline = self.timeline_frame()
        with self._lock:
            busy = dict(self._busy)
            workers = dict(self._workers)
            queues = {stage: (stat.mean, stat.peak) for stage, stat in self._queues.items()}
            stall = self._stall
        fractions = {
            stage: (min(1.0, seconds / (wall * workers.get(stage, 1))) if wall > 0 else 0.0)
            for stage, seconds in busy.items()
        }
        return OccupancyReport(
            wall,
            fractions,
            {stage: mean for stage, (mean, _) in queues.items()},
            {stage: peak for stage, (_, peak) in queues.items()},
            stall,
            timeline,
        )


def occupancy_report(
    recorder: OccupancyRecorder,
    csv_path: Optional[Union[str, Path]] = None,
    timeline_path: Optional[Union[str, Path]] = None,
) -> OccupancyReport:
    """Summarize a recorder; writes the per-stage summary and the windowed timeline when paths are given."""
    report = recorder.report()
    if csv_path is not None:
        report.write_csv(csv_path)
    if timeline_path is not None:
        report.write_timeline_csv(timeline_path)
    return report
