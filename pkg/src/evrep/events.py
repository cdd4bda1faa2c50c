"""Event stream ingestion and fixed-duration windowing.

Timestamps are integer microseconds everywhere; window boundaries are exact
rationals (``fractions.Fraction``) so that empty-window fallbacks and
elapsed-time arithmetic stay drift-free over long recordings. Conversion to
float seconds happens only at the decay-formula boundary.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Union

import numpy as np

US_PER_S = 1_000_000

PACKED_MAGIC = b"EVT1"
_PACKED_HEADER = struct.Struct("<4sHH")
_PACKED_RECORD = struct.Struct("<HHqb")


class StreamFormatError(ValueError):
    """Malformed record in an event file (carries line/offset context)."""


class StreamValidationError(ValueError):
    """Well-formed record that violates stream invariants (bounds, order, polarity)."""


class Event(NamedTuple):
    x: int
    y: int
    t: int  # microseconds
    p: int  # -1 or +1


@dataclass(frozen=True)
class SensorGeometry:
    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"sensor dimensions must be positive, got {self.width}x{self.height}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def npixels(self) -> int:
        return self.width * self.height


@dataclass(frozen=True)
class EventArrays:
    """Struct-of-arrays event batch; the fast in-memory form of a stream."""

    xs: np.ndarray  # int64
    ys: np.ndarray  # int64
    ts: np.ndarray  # int64 microseconds, non-decreasing
    ps: np.ndarray  # int8, -1/+1

    def __len__(self) -> int:
        return len(self.ts)

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self.ts)):
            yield Event(int(self.xs[i]), int(self.ys[i]), int(self.ts[i]), int(self.ps[i]))

    def __getitem__(self, i: int) -> Event:
        return Event(int(self.xs[i]), int(self.ys[i]), int(self.ts[i]), int(self.ps[i]))

    @classmethod
    def empty(cls) -> "EventArrays":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z.copy(), z.copy(), np.zeros(0, dtype=np.int8))

    @classmethod
    def from_events(cls, events: Iterable[Event]) -> "EventArrays":
        rows = list(events)
        if not rows:
            return cls.empty()
        arr = np.asarray(rows, dtype=np.int64)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3].astype(np.int8))

    @classmethod
    def from_columns(cls, xs, ys, ts, ps) -> "EventArrays":
        return cls(np.asarray(xs, dtype=np.int64), np.asarray(ys, dtype=np.int64),
                   np.asarray(ts, dtype=np.int64), np.asarray(ps, dtype=np.int8))


EventSource = Union[EventArrays, Iterable[Event]]


@dataclass(frozen=True)
class EventWindow:
    """All events with start_t <= t < end_t, ordered by t.

    Boundaries are exact rationals in microseconds. ``last_event_t`` is None
    for an empty window; consumers fall back to ``end_t`` so decay continues
    through silent stretches.
    """

    xs: np.ndarray
    ys: np.ndarray
    ts: np.ndarray
    ps: np.ndarray
    start_t: Fraction
    end_t: Fraction
    index: int

    @property
    def count(self) -> int:
        return len(self.ts)

    @property
    def is_empty(self) -> bool:
        return len(self.ts) == 0

    @property
    def last_event_t(self):
        if len(self.ts) == 0:
            return None
        return int(self.ts[-1])

    @property
    def events(self) -> tuple[Event, ...]:
        return tuple(Event(int(x), int(y), int(t), int(p))
                     for x, y, t, p in zip(self.xs, self.ys, self.ts, self.ps))

    def arrays(self) -> EventArrays:
        return EventArrays(self.xs, self.ys, self.ts, self.ps)


def _normalize_polarity(p_raw: int, polarity01: bool, where: str) -> int:
    if polarity01:
        if p_raw == 0:
            return -1
        if p_raw == 1:
            return 1
        raise StreamValidationError(f"{where}: polarity {p_raw} outside declared {{0,1}} convention")
    if p_raw in (-1, 1):
        return p_raw
    raise StreamValidationError(f"{where}: polarity {p_raw} outside declared {{-1,1}} convention")


def _validated(event: Event, geometry: SensorGeometry | None, last_t: int | None, where: str) -> Event:
    if geometry is not None:
        if not (0 <= event.x < geometry.width and 0 <= event.y < geometry.height):
            raise StreamValidationError(
                f"{where}: coordinate ({event.x},{event.y}) outside {geometry.width}x{geometry.height}")
    if last_t is not None and event.t < last_t:
        raise StreamValidationError(f"{where}: timestamp {event.t} < previous {last_t} (non-monotone)")
    return event


def read_event_csv(path, *, geometry: SensorGeometry | None = None,
                   polarity01: bool = False) -> Iterator[Event]:
    """Yield events from a `x,y,t,p` CSV (header row expected, tolerated absent)."""
    last_t = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if lineno == 1 and not line.split(",")[0].strip().lstrip("-").isdigit():
                continue  # header
            parts = line.split(",")
            if len(parts) != 4:
                raise StreamFormatError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            try:
                x, y, t, p_raw = (int(v) for v in parts)
            except ValueError as exc:
                raise StreamFormatError(f"{path}:{lineno}: {exc}") from None
            p = _normalize_polarity(p_raw, polarity01, f"{path}:{lineno}")
            ev = _validated(Event(x, y, t, p), geometry, last_t, f"{path}:{lineno}")
            last_t = ev.t
            yield ev


def write_event_csv(path, events: EventSource) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,y,t,p\n")
        for ev in events:
            fh.write(f"{ev.x},{ev.y},{ev.t},{ev.p}\n")


def read_packed_header(path) -> SensorGeometry:
    with open(path, "rb") as fh:
        head = fh.read(_PACKED_HEADER.size)
    if len(head) < _PACKED_HEADER.size:
        raise StreamFormatError(f"{path}: truncated header")
    magic, width, height = _PACKED_HEADER.unpack(head)
    if magic != PACKED_MAGIC:
        raise StreamFormatError(f"{path}: bad magic {magic!r}, expected {PACKED_MAGIC!r}")
    return SensorGeometry(width, height)


def read_event_packed(path, *, geometry: SensorGeometry | None = None) -> Iterator[Event]:
    """Yield events from the packed binary format (EVT1 header + fixed records)."""
    file_geometry = read_packed_header(path)
    geometry = geometry or file_geometry
    rec = _PACKED_RECORD
    last_t = None
    with open(path, "rb") as fh:
        fh.seek(_PACKED_HEADER.size)
        offset = _PACKED_HEADER.size
        while True:
            chunk = fh.read(rec.size)
            if not chunk:
                break
            if len(chunk) != rec.size:
                raise StreamFormatError(f"{path}: truncated record at offset {offset}")
            x, y, t, p_raw = rec.unpack(chunk)
            p = _normalize_polarity(p_raw, False, f"{path}@{offset}")
            ev = _validated(Event(x, y, t, p), geometry, last_t, f"{path}@{offset}")
            last_t = ev.t
            offset += rec.size
            yield ev


def write_event_packed(path, geometry: SensorGeometry, events: EventSource) -> None:
    with open(path, "wb") as fh:
        fh.write(_PACKED_HEADER.pack(PACKED_MAGIC, geometry.width, geometry.height))
        for ev in events:
            fh.write(_PACKED_RECORD.pack(ev.x, ev.y, ev.t, ev.p))


def read_event_stream(path, format: str = "csv", *, geometry: SensorGeometry | None = None,
                      polarity01: bool = False) -> Iterator[Event]:
    """Lazy event reader dispatching on format ('csv' or 'packed_binary')."""
    if format == "csv":
        return read_event_csv(path, geometry=geometry, polarity01=polarity01)
    if format == "packed_binary":
        return read_event_packed(path, geometry=geometry)
    raise ValueError(f"unknown stream format {format!r}")


def read_event_array(path, format: str = "csv", *, geometry: SensorGeometry | None = None,
                     polarity01: bool = False) -> tuple[SensorGeometry | None, EventArrays]:
    """Load a whole stream into arrays (vectorized validation)."""
    path = Path(path)
    if format == "csv":
        data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
        if data.size == 0:
            return geometry, EventArrays.empty()
        if data.shape[1] != 4:
            raise StreamFormatError(f"{path}: expected 4 columns, got {data.shape[1]}")
        xs, ys, ts, ps = data[:, 0], data[:, 1], data[:, 2], data[:, 3]
        file_geom = None
    elif format == "packed_binary":
        file_geom = read_packed_header(path)
        raw = np.fromfile(path, dtype=np.dtype([("x", "<u2"), ("y", "<u2"), ("t", "<i8"), ("p", "<i1")]),
                          offset=_PACKED_HEADER.size)
        xs = raw["x"].astype(np.int64)
        ys = raw["y"].astype(np.int64)
        ts = raw["t"].astype(np.int64)
        ps = raw["p"].astype(np.int64)
        geometry = geometry or file_geom
    else:
        raise ValueError(f"unknown stream format {format!r}")

    if polarity01 and format == "csv":
        bad = ~np.isin(ps, (0, 1))
        if bad.any():
            raise StreamValidationError(f"{path}: polarity outside {{0,1}} at row {int(np.flatnonzero(bad)[0])}")
        ps = np.where(ps == 0, -1, 1)
    else:
        bad = ~np.isin(ps, (-1, 1))
        if bad.any():
            raise StreamValidationError(f"{path}: polarity outside {{-1,1}} at row {int(np.flatnonzero(bad)[0])}")
    if geometry is not None:
        oob = (xs < 0) | (xs >= geometry.width) | (ys < 0) | (ys >= geometry.height)
        if oob.any():
            i = int(np.flatnonzero(oob)[0])
            raise StreamValidationError(f"{path}: event {i} at ({xs[i]},{ys[i]}) outside bounds")
    if len(ts) > 1:
        drops = np.flatnonzero(np.diff(ts) < 0)
        if drops.size:
            raise StreamValidationError(f"{path}: non-monotone timestamp at event {int(drops[0]) + 1}")
    return geometry, EventArrays.from_columns(xs, ys, ts, ps)


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    return Fraction(value)  # exact binary value of the float


def window_period_us(frequency_hz) -> Fraction:
    f = _as_fraction(frequency_hz)
    if f <= 0:
        raise ValueError(f"frequency must be positive, got {frequency_hz}")
    return Fraction(US_PER_S) / f


def window_index_of(t: int, t0: int, frequency_hz) -> int:
    """Window index containing microsecond timestamp t (exact rational boundaries)."""
    period = window_period_us(frequency_hz)
    return ((t - t0) * period.denominator) // period.numerator


def window_count_for(duration_span_us: int, frequency_hz) -> int:
    """Number of windows needed to cover [t0, t0 + span] inclusive of the last instant."""
    if duration_span_us < 0:
        return 0
    return window_index_of(duration_span_us, 0, frequency_hz) + 1


def _window_from_slices(xs, ys, ts, ps, k: int, t0: int, period: Fraction) -> EventWindow:
    start = t0 + k * period
    return EventWindow(xs=xs, ys=ys, ts=ts, ps=ps, start_t=start, end_t=start + period, index=k)


def window_stream(events: EventSource, frequency_hz, t0: int = 0, *,
                  count: int | None = None) -> Iterator[EventWindow]:
    """Partition a monotone event stream into fixed-duration windows.

    Window k spans [t0 + k*1e6/f, t0 + (k+1)*1e6/f) in exact arithmetic.
    Empty windows are emitted so downstream decay keeps running; with
    ``count`` the stream is padded/truncated to exactly that many windows.
    """
    period = window_period_us(frequency_hz)
    empty = EventArrays.empty()

    if isinstance(events, EventArrays):
        ts = events.ts
        if len(ts) and int(ts[0]) < t0:
            raise StreamValidationError(f"event at t={int(ts[0])} precedes t0={t0}")
        ks = ((ts - t0) * period.denominator) // period.numerator if len(ts) else np.zeros(0, dtype=np.int64)
        n_data = int(ks[-1]) + 1 if len(ts) else 0
        total = n_data if count is None else count
        bounds = np.searchsorted(ks, np.arange(total + 1))
        for k in range(total):
            lo, hi = int(bounds[k]), int(bounds[k + 1])
            if hi > lo:
                yield _window_from_slices(events.xs[lo:hi], events.ys[lo:hi],
                                          events.ts[lo:hi], events.ps[lo:hi], k, t0, period)
            else:
                yield _window_from_slices(empty.xs, empty.ys, empty.ts, empty.ps, k, t0, period)
        return

    pending: list[Event] = []
    k = 0
    emitted = 0

    def emit(window_events: list[Event], idx: int) -> EventWindow:
        arr = EventArrays.from_events(window_events)
        return _window_from_slices(arr.xs, arr.ys, arr.ts, arr.ps, idx, t0, period)

    for ev in events:
        if ev.t < t0:
            raise StreamValidationError(f"event at t={ev.t} precedes t0={t0}")
        ek = ((ev.t - t0) * period.denominator) // period.numerator
        while ek > k:
            if count is not None and emitted >= count:
                return
            yield emit(pending, k)
            emitted += 1
            pending = []
            k += 1
        if count is not None and emitted >= count:
            return
        pending.append(ev)
    if count is None:
        if pending:
            yield emit(pending, k)
        return
    while emitted < count:
        yield emit(pending, k)
        emitted += 1
        pending = []
        k += 1


def elapsed_dt(prev: EventWindow, curr: EventWindow) -> float:
    """Seconds between the final events of two consecutive windows.

    An empty window substitutes its end boundary for the missing final event,
    so two adjacent empty windows yield exactly 1/f.
    """
    t_prev = Fraction(prev.last_event_t) if prev.last_event_t is not None else prev.end_t
    t_curr = Fraction(curr.last_event_t) if curr.last_event_t is not None else curr.end_t
    delta = t_curr - t_prev
    if delta < 0:
        raise ValueError(f"window {curr.index} ends before window {prev.index} (internal ordering error)")
    return float(delta / US_PER_S)


def merge_streams(*streams: EventArrays) -> EventArrays:
    """Time-sorted merge; ties keep the argument order (stable)."""
    if not streams:
        return EventArrays.empty()
    xs = np.concatenate([s.xs for s in streams])
    ys = np.concatenate([s.ys for s in streams])
    ts = np.concatenate([s.ts for s in streams])
    ps = np.concatenate([s.ps for s in streams])
    order = np.argsort(ts, kind="stable")
    return EventArrays(xs[order], ys[order], ts[order], ps[order])
