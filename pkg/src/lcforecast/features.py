"""Per-participant behavioral feature vectors and information-gain ranking."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data_model import EventLog, EventRecord, TimeWindow, events_in

FEATURE_GROUPS: dict[str, tuple[str, ...]] = {
    "internet": ("n_searches", "n_bookmarks"),
    "calls": (
        "n_calls_total",
        "n_call_peers",
        "call_duration_total",
        "n_calls_incoming",
        "n_calls_outgoing",
        "n_calls_missed",
        "duration_incoming",
        "duration_outgoing",
        "n_peers_incoming",
        "n_peers_outgoing",
        "n_peers_missed",
    ),
    "sms": (
        "n_sms_total",
        "n_sms_peers",
        "n_sms_in",
        "n_sms_out",
        "n_peers_sms_in",
        "n_peers_sms_out",
        "sms_in_out_ratio",
    ),
    "apps": (
        "n_installs",
        "n_installs_distinct",
        "n_uninstalls",
        "n_uninstalls_distinct",
        "running_apps_total",
        "running_apps_mean",
    ),
    "alarms": ("n_alarms_set", "n_snoozes"),
    "location": ("n_distinct_cell_towers", "n_distinct_wifi_names", "n_cell_events", "n_wifi_events"),
}
FEATURE_NAMES: tuple[str, ...] = tuple(n for group in FEATURE_GROUPS.values() for n in group)
FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}
N_FEATURES = len(FEATURE_NAMES)

# features that are plain counts/sums, additive over disjoint windows
ADDITIVE_FEATURES = tuple(
    n
    for n in FEATURE_NAMES
    if not (n.startswith("n_peers") or n.endswith("_peers") or "distinct" in n)
    and n not in ("sms_in_out_ratio", "running_apps_mean")
)

# attribute name -> function mapping a profile value to a 0/1 label
TASK_ATTRIBUTES = ("gender", "us_native", "has_children", "is_student", "age_over_30")


def encode_label(attribute: str, value) -> int | None:
    if value is None:
        return None
    if attribute == "gender":
        return 1 if value == "female" else 0
    return 1 if value else 0


class UnknownParticipantError(KeyError):
    pass


class EmptyMatrixError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray

    def __getitem__(self, name: str) -> float:
        return float(self.values[FEATURE_INDEX[name]])

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.values.tolist()))


class _Accumulator:
    """Running state for one participant; ``snapshot`` gives the feature row."""

    __slots__ = ("counts", "call_peers", "dir_peers", "sms_peers", "sms_dir_peers",
                 "installs", "uninstalls", "towers", "wifis", "n_running")

    def __init__(self) -> None:
        self.counts = np.zeros(N_FEATURES)
        self.call_peers: set[str] = set()
        self.dir_peers = {"incoming": set(), "outgoing": set(), "missed": set()}
        self.sms_peers: set[str] = set()
        self.sms_dir_peers = {"incoming": set(), "outgoing": set()}
        self.installs: set[str] = set()
        self.uninstalls: set[str] = set()
        self.towers: set[str] = set()
        self.wifis: set[str] = set()
        self.n_running = 0

    def add(self, e: EventRecord) -> None:
        c = self.counts
        k = e.kind
        if k == "call":
            c[_I_CALLS] += 1
            c[_I_CALL_DUR] += e.duration_s
            d = e.direction
            c[_I_CALL_DIR[d]] += 1
            if d != "missed":
                c[_I_CALL_DIR_DUR[d]] += e.duration_s
            self.call_peers.add(e.peer)
            self.dir_peers[d].add(e.peer)
        elif k == "sms":
            c[_I_SMS] += 1
            c[_I_SMS_DIR[e.direction]] += 1
            self.sms_peers.add(e.peer)
            self.sms_dir_peers[e.direction].add(e.peer)
        elif k == "search":
            c[_I_SEARCH] += 1
        elif k == "bookmark":
            c[_I_BOOKMARK] += 1
        elif k == "app_install":
            c[_I_INSTALL] += 1
            self.installs.add(e.app)
        elif k == "app_uninstall":
            c[_I_UNINSTALL] += 1
            self.uninstalls.add(e.app)
        elif k == "running_apps":
            c[_I_RUNNING] += e.count
            self.n_running += 1
        elif k == "alarm":
            c[_I_ALARM_SET if e.action == "set" else _I_SNOOZE] += 1
        elif k == "cell":
            c[_I_CELL] += 1
            self.towers.add(e.peer)
        elif k == "wifi":
            c[_I_WIFI] += 1
            self.wifis.add(e.peer)
        # bluetooth sightings feed the proximity graph, not the feature vector

    def snapshot(self) -> np.ndarray:
        v = self.counts.copy()
        v[FEATURE_INDEX["n_call_peers"]] = len(self.call_peers)
        v[FEATURE_INDEX["n_peers_incoming"]] = len(self.dir_peers["incoming"])
        v[FEATURE_INDEX["n_peers_outgoing"]] = len(self.dir_peers["outgoing"])
        v[FEATURE_INDEX["n_peers_missed"]] = len(self.dir_peers["missed"])
        v[FEATURE_INDEX["n_sms_peers"]] = len(self.sms_peers)
        v[FEATURE_INDEX["n_peers_sms_in"]] = len(self.sms_dir_peers["incoming"])
        v[FEATURE_INDEX["n_peers_sms_out"]] = len(self.sms_dir_peers["outgoing"])
        v[FEATURE_INDEX["sms_in_out_ratio"]] = v[_I_SMS_DIR["incoming"]] / max(1.0, v[_I_SMS_DIR["outgoing"]])
        v[FEATURE_INDEX["n_installs_distinct"]] = len(self.installs)
        v[FEATURE_INDEX["n_uninstalls_distinct"]] = len(self.uninstalls)
        v[FEATURE_INDEX["running_apps_mean"]] = v[_I_RUNNING] / self.n_running if self.n_running else 0.0
        v[FEATURE_INDEX["n_distinct_cell_towers"]] = len(self.towers)
        v[FEATURE_INDEX["n_distinct_wifi_names"]] = len(self.wifis)
        return v


_I = FEATURE_INDEX
_I_CALLS = _I["n_calls_total"]
_I_CALL_DUR = _I["call_duration_total"]
_I_CALL_DIR = {"incoming": _I["n_calls_incoming"], "outgoing": _I["n_calls_outgoing"], "missed": _I["n_calls_missed"]}
_I_CALL_DIR_DUR = {"incoming": _I["duration_incoming"], "outgoing": _I["duration_outgoing"]}
_I_SMS = _I["n_sms_total"]
_I_SMS_DIR = {"incoming": _I["n_sms_in"], "outgoing": _I["n_sms_out"]}
_I_SEARCH = _I["n_searches"]
_I_BOOKMARK = _I["n_bookmarks"]
_I_INSTALL = _I["n_installs"]
_I_UNINSTALL = _I["n_uninstalls"]
_I_RUNNING = _I["running_apps_total"]
_I_ALARM_SET = _I["n_alarms_set"]
_I_SNOOZE = _I["n_snoozes"]
_I_CELL = _I["n_cell_events"]
_I_WIFI = _I["n_wifi_events"]


def extract_features(log: EventLog, participant: str, w: TimeWindow) -> FeatureVector:
    if participant not in log.participants:
        raise UnknownParticipantError(participant)
    acc = _Accumulator()
    for e in events_in(log, w):
        if e.actor == participant:
            acc.add(e)
    return FeatureVector(acc.snapshot())


def cumulative_features(
    log: EventLog, participants: Sequence[str], origin: int, boundaries: Sequence[int]
) -> list[np.ndarray]:
    """Feature rows over ``[origin, b)`` for each boundary ``b`` in one event pass.

    Equivalent to calling :func:`extract_features` per participant and
    boundary, but linear in the number of events.  Returns one
    ``len(participants) x 32`` array per boundary.
    """
    if any(b2 <= b1 for b1, b2 in zip(boundaries, boundaries[1:])):
        raise ValueError("boundaries must be strictly increasing")
    accs = {p: _Accumulator() for p in participants}
    out = []
    events = events_in(log, TimeWindow(origin, max(boundaries[-1], origin + 1))) if boundaries else ()
    i = 0
    for b in boundaries:
        while i < len(events) and events[i].time < b:
            acc = accs.get(events[i].actor)
            if acc is not None:
                acc.add(events[i])
            i += 1
        out.append(np.vstack([accs[p].snapshot() for p in participants]) if participants else np.zeros((0, N_FEATURES)))
    return out


@dataclass
class FeatureMatrix:
    ids: list[str]
    X: np.ndarray
    y: np.ndarray
    attribute: str
    feature_names: tuple[str, ...] = FEATURE_NAMES

    def __len__(self) -> int:
        return len(self.ids)

    def subset(self, rows: np.ndarray) -> "FeatureMatrix":
        rows = np.asarray(rows)
        return FeatureMatrix([self.ids[i] for i in rows], self.X[rows], self.y[rows], self.attribute, self.feature_names)

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", *self.feature_names, "label"])
            for pid, row, label in zip(self.ids, self.X.tolist(), self.y.tolist()):
                w.writerow([pid, *(repr(v) for v in row), label])


def labelled_ids(log: EventLog, attribute: str) -> list[tuple[str, int]]:
    if attribute not in TASK_ATTRIBUTES:
        raise ValueError(f"{attribute!r} is not a task attribute; choose from {TASK_ATTRIBUTES}")
    out = []
    for pid in sorted(log.participants):
        lab = encode_label(attribute, log.participants[pid].get(attribute))
        if lab is not None:
            out.append((pid, lab))
    return out


def matrix_from_rows(ids: list[str], X: np.ndarray, y: Iterable[int], attribute: str) -> FeatureMatrix:
    return FeatureMatrix(list(ids), np.asarray(X, dtype=np.float64), np.asarray(list(y), dtype=np.int64), attribute)


def build_matrix(log: EventLog, attribute: str, w: TimeWindow) -> FeatureMatrix:
    """One row per participant with a known ``attribute``, in id order."""
    pairs = labelled_ids(log, attribute)
    if not pairs:
        raise EmptyMatrixError(f"no participant has a known {attribute!r}")
    ids = [p for p, _ in pairs]
    [X] = cumulative_features(log, ids, w.start, [w.end])
    return matrix_from_rows(ids, X, (lab for _, lab in pairs), attribute)


# --------------------------------------------------------------------------- information gain


def entropy(labels: Sequence) -> float:
    n = len(labels)
    if n == 0:
        return 0.0
    h = 0.0
    for cnt in Counter(labels).values():
        p = cnt / n
        h -= p * math.log2(p)
    return h


def information_gain(labels: Sequence, bins: Sequence) -> float:
    n = len(labels)
    if n != len(bins):
        raise ValueError("labels and bins differ in length")
    groups: dict = {}
    for lab, b in zip(labels, bins):
        groups.setdefault(b, []).append(lab)
    cond = sum(len(g) / n * entropy(g) for g in groups.values())
    return max(0.0, entropy(labels) - cond)


def discretize_equal_frequency(values: Sequence[float], max_bins: int = 10) -> np.ndarray:
    """Equal-frequency bins; tied values always share a bin."""
    v = np.asarray(values, dtype=np.float64)
    n = v.size
    distinct = np.unique(v)
    n_bins = min(max_bins, distinct.size)
    if n_bins <= 1:
        return np.zeros(n, dtype=np.int64)
    sorted_v = np.sort(v)
    first_rank = np.searchsorted(sorted_v, v, side="left")
    return (first_rank * n_bins) // n


def information_gain_ranking(m: FeatureMatrix, max_bins: int = 10) -> list[tuple[str, float]]:
    if len(m) < 2:
        raise ValueError("information gain needs at least two rows")
    labels = m.y.tolist()
    gains = [
        (name, information_gain(labels, discretize_equal_frequency(m.X[:, j], max_bins).tolist()))
        for j, name in enumerate(m.feature_names)
    ]
    return sorted(gains, key=lambda kv: -kv[1])
