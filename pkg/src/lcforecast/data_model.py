"""Event-log and ground-truth data model, file formats and window slicing.

Events file: one record per line, ``timestamp,actor,kind[,field...]``.
Lines starting with ``#`` are comments (an optional header).  Fields per kind:

============== =====================================
kind           fields
============== =====================================
call           direction, duration_s, peer
sms            direction, peer
bluetooth      peer_device
wifi           ssid
cell           tower_id
app_install    app
app_uninstall  app
running_apps   count
alarm          action (``set`` or ``snooze``)
search         (none)
bookmark       (none)
============== =====================================

Profiles file: CSV with header
``id,gender,age_over_30,has_children,is_student,us_native,ethnicity,partner``.
Empty cells mean "unknown".

A peer identifier that equals a participant id refers to an in-study person;
anything else is an out-of-study hash.
"""

from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

SECONDS_PER_DAY = 86400

CALL_DIRECTIONS = ("incoming", "outgoing", "missed")
SMS_DIRECTIONS = ("incoming", "outgoing")
ALARM_ACTIONS = ("set", "snooze")

# kind -> number of trailing fields
EVENT_KINDS: dict[str, int] = {
    "call": 3,
    "sms": 2,
    "bluetooth": 1,
    "wifi": 1,
    "cell": 1,
    "app_install": 1,
    "app_uninstall": 1,
    "running_apps": 1,
    "alarm": 1,
    "search": 0,
    "bookmark": 0,
}

PEER_KINDS = frozenset({"call", "sms", "bluetooth", "wifi", "cell"})

PROFILE_COLUMNS = (
    "id",
    "gender",
    "age_over_30",
    "has_children",
    "is_student",
    "us_native",
    "ethnicity",
    "partner",
)
BOOLEAN_ATTRIBUTES = ("age_over_30", "has_children", "is_student", "us_native")
GENDERS = ("female", "male")


class DataError(ValueError):
    """Base class for malformed or inconsistent input data."""


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.msg = message
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class ReferentialError(DataError):
    """An event or partner refers to a participant that is not in the profiles."""


@dataclass(frozen=True, slots=True)
class TimeWindow:
    """Half-open interval ``[start, end)`` in epoch seconds."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start < 0 or self.end < 0:
            raise ValueError("timestamps must be non-negative")
        if not self.start < self.end:
            raise ValueError(f"empty window [{self.start}, {self.end})")

    def __contains__(self, t: int) -> bool:
        return self.start <= t < self.end

    @classmethod
    def days(cls, first: int, last: int, origin: int = 0) -> "TimeWindow":
        """Window covering day indices ``first..last`` inclusive (0-based)."""
        return cls(origin + first * SECONDS_PER_DAY, origin + (last + 1) * SECONDS_PER_DAY)


@dataclass(frozen=True, slots=True)
class EventRecord:
    """One timestamped probe observation.

    Only the fields relevant to ``kind`` are populated; the rest keep their
    defaults.  ``peer`` holds the peer number, Bluetooth device, wifi SSID or
    cell tower id depending on the kind.
    """

    time: int
    actor: str
    kind: str
    direction: str | None = None
    duration_s: int = 0
    peer: str | None = None
    app: str | None = None
    count: int = 0
    action: str | None = None

    def __post_init__(self) -> None:
        _validate_event(self)

    def fields(self) -> list[str]:
        k = self.kind
        if k == "call":
            return [self.direction, str(self.duration_s), self.peer]
        if k == "sms":
            return [self.direction, self.peer]
        if k in ("bluetooth", "wifi", "cell"):
            return [self.peer]
        if k in ("app_install", "app_uninstall"):
            return [self.app]
        if k == "running_apps":
            return [str(self.count)]
        if k == "alarm":
            return [self.action]
        return []

    def to_line(self) -> str:
        return ",".join([str(self.time), self.actor, self.kind, *self.fields()])


def _validate_event(ev: EventRecord) -> None:
    if ev.kind not in EVENT_KINDS:
        raise ValueError(f"unknown event kind {ev.kind!r}")
    if ev.time < 0:
        raise ValueError("timestamp must be non-negative")
    if ev.kind == "call":
        if ev.direction not in CALL_DIRECTIONS:
            raise ValueError(f"bad call direction {ev.direction!r}")
        if ev.duration_s < 0:
            raise ValueError("call duration must be >= 0")
        if ev.direction == "missed" and ev.duration_s != 0:
            raise ValueError("missed calls have zero duration")
    elif ev.kind == "sms":
        if ev.direction not in SMS_DIRECTIONS:
            raise ValueError(f"bad sms direction {ev.direction!r}")
    elif ev.kind == "running_apps":
        if ev.count < 0:
            raise ValueError("running app count must be >= 0")
    elif ev.kind == "alarm":
        if ev.action not in ALARM_ACTIONS:
            raise ValueError(f"bad alarm action {ev.action!r}")
    elif ev.kind in ("app_install", "app_uninstall"):
        if not ev.app:
            raise ValueError("app name required")
    if ev.kind in PEER_KINDS:
        if not ev.peer:
            raise ValueError("peer identifier required")
        if ev.peer.isdigit():
            raise ValueError("peer identifiers must be opaque hashes, not raw numbers")


@dataclass(frozen=True, slots=True)
class ParticipantProfile:
    """Ground-truth attributes; ``None`` marks an unknown value."""

    id: str
    gender: str | None = None
    age_over_30: bool | None = None
    has_children: bool | None = None
    is_student: bool | None = None
    us_native: bool | None = None
    ethnicity: str | None = None
    partner: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("participant id must be non-empty")
        if self.gender is not None and self.gender not in GENDERS:
            raise ValueError(f"bad gender {self.gender!r}")
        if self.partner == self.id:
            raise ValueError(f"{self.id} cannot be their own partner")

    def get(self, attribute: str):
        return getattr(self, attribute)

    def to_row(self) -> list[str]:
        row = [self.id, self.gender or ""]
        for name in BOOLEAN_ATTRIBUTES:
            v = getattr(self, name)
            row.append("" if v is None else ("1" if v else "0"))
        row += [self.ethnicity or "", self.partner or ""]
        return row


@dataclass(frozen=True)
class EventLog:
    """Immutable, time-sorted events plus the participant table."""

    events: tuple[EventRecord, ...]
    participants: Mapping[str, ParticipantProfile]
    _times: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        events = tuple(self.events)
        times = tuple(e.time for e in events)
        if any(b < a for a, b in zip(times, times[1:])):
            order = sorted(range(len(events)), key=times.__getitem__)
            events = tuple(events[i] for i in order)
            times = tuple(e.time for e in events)
        participants = dict(sorted(self.participants.items()))
        for pid, prof in participants.items():
            if pid != prof.id:
                raise ReferentialError(f"profile key {pid!r} != id {prof.id!r}")
        _check_partners(participants)
        for e in events:
            if e.actor not in participants:
                raise ReferentialError(f"event actor {e.actor!r} not in participants")
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "participants", participants)
        object.__setattr__(self, "_times", times)

    def __len__(self) -> int:
        return len(self.events)

    @property
    def participant_ids(self) -> list[str]:
        return list(self.participants)

    def is_participant(self, node: str) -> bool:
        return node in self.participants

    def time_span(self) -> tuple[int, int] | None:
        if not self.events:
            return None
        return self._times[0], self._times[-1]

    def slice(self, w: TimeWindow) -> "EventLog":
        return slice_window(self, w)


def _check_partners(participants: Mapping[str, ParticipantProfile]) -> None:
    for pid, prof in participants.items():
        q = prof.partner
        if q is None:
            continue
        if q not in participants:
            raise ReferentialError(f"partner {q!r} of {pid!r} is not a participant")
        back = participants[q].partner
        if back is not None and back != pid:
            raise ReferentialError(f"partner relation not symmetric: {pid}->{q}->{back}")


def slice_window(log: EventLog, w: TimeWindow) -> EventLog:
    """Events with ``w.start <= time < w.end``; participants unchanged."""
    lo = bisect.bisect_left(log._times, w.start)
    hi = bisect.bisect_left(log._times, w.end)
    if lo == 0 and hi == len(log.events):
        return log
    sliced = object.__new__(EventLog)
    object.__setattr__(sliced, "events", log.events[lo:hi])
    object.__setattr__(sliced, "participants", log.participants)
    object.__setattr__(sliced, "_times", log._times[lo:hi])
    return sliced


def events_in(log: EventLog, w: TimeWindow) -> Sequence[EventRecord]:
    lo = bisect.bisect_left(log._times, w.start)
    hi = bisect.bisect_left(log._times, w.end)
    return log.events[lo:hi]


# --------------------------------------------------------------------------- parsing


def _parse_int(text: str, what: str, lineno: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"{what} is not an integer: {text!r}", lineno) from None


def parse_event_line(line: str, lineno: int = 1) -> EventRecord:
    parts = [p.strip() for p in line.split(",")]
    if len(parts) < 3:
        raise ParseError("expected at least timestamp,actor,kind", lineno)
    ts, actor, kind, rest = parts[0], parts[1], parts[2], parts[3:]
    if kind not in EVENT_KINDS:
        raise ParseError(f"unknown event kind {kind!r}", lineno)
    if len(rest) != EVENT_KINDS[kind]:
        raise ParseError(f"{kind} takes {EVENT_KINDS[kind]} field(s), got {len(rest)}", lineno)
    t = _parse_int(ts, "timestamp", lineno)
    if not actor:
        raise ParseError("empty actor", lineno)
    kw: dict = {}
    if kind == "call":
        kw = dict(direction=rest[0], duration_s=_parse_int(rest[1], "duration", lineno), peer=rest[2])
    elif kind == "sms":
        kw = dict(direction=rest[0], peer=rest[1])
    elif kind in ("bluetooth", "wifi", "cell"):
        kw = dict(peer=rest[0])
    elif kind in ("app_install", "app_uninstall"):
        kw = dict(app=rest[0])
    elif kind == "running_apps":
        kw = dict(count=_parse_int(rest[0], "count", lineno))
    elif kind == "alarm":
        kw = dict(action=rest[0])
    try:
        return EventRecord(t, actor, kind, **kw)
    except ValueError as exc:
        raise ParseError(str(exc), lineno) from None


def parse_events(lines: Iterable[str]) -> list[EventRecord]:
    events = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        events.append(parse_event_line(line, lineno))
    return events


def _parse_bool(text: str, name: str, lineno: int) -> bool | None:
    t = text.strip().lower()
    if t == "":
        return None
    if t in ("1", "true", "yes"):
        return True
    if t in ("0", "false", "no"):
        return False
    raise ParseError(f"{name} must be boolean, got {text!r}", lineno)


def parse_profiles(path: str | Path) -> dict[str, ParticipantProfile]:
    path = Path(path)
    out: dict[str, ParticipantProfile] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != PROFILE_COLUMNS:
            raise ParseError(f"profiles header must be {','.join(PROFILE_COLUMNS)}", 1, str(path))
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(PROFILE_COLUMNS):
                raise ParseError(f"expected {len(PROFILE_COLUMNS)} columns", lineno, str(path))
            pid, gender, *bools, eth, partner = (c.strip() for c in row)
            kw = {name: _parse_bool(v, name, lineno) for name, v in zip(BOOLEAN_ATTRIBUTES, bools)}
            try:
                prof = ParticipantProfile(
                    pid, gender or None, ethnicity=eth or None, partner=partner or None, **kw
                )
            except ValueError as exc:
                raise ParseError(str(exc), lineno, str(path)) from None
            if pid in out:
                raise ParseError(f"duplicate participant {pid!r}", lineno, str(path))
            out[pid] = prof
    return out


def parse_event_log(events_path: str | Path, profiles_path: str | Path) -> EventLog:
    """Read and validate an events file against its profiles file."""
    participants = parse_profiles(profiles_path)
    events_path = Path(events_path)
    with events_path.open(encoding="utf-8") as fh:
        try:
            events = parse_events(fh)
        except ParseError as exc:
            raise ParseError(exc.msg, exc.line, str(events_path)) from None
    for e in events:
        if e.actor not in participants:
            raise ReferentialError(f"{events_path}: actor {e.actor!r} not in profiles file")
    return EventLog(tuple(events), participants)


def write_events(events: Iterable[EventRecord], path: str | Path, header: bool = True) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write("# timestamp,actor,kind,fields...\n")
        for e in events:
            fh.write(e.to_line())
            fh.write("\n")


def write_profiles(participants: Mapping[str, ParticipantProfile], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROFILE_COLUMNS)
        for pid in sorted(participants):
            w.writerow(participants[pid].to_row())


def write_event_log(log: EventLog, events_path: str | Path, profiles_path: str | Path) -> None:
    write_events(log.events, events_path)
    write_profiles(log.participants, profiles_path)
