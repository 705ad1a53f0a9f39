"""Interaction networks (SMS, calls, Bluetooth) and the graph-based predictors."""

from __future__ import annotations

import csv
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from . import kernels
from .data_model import EventLog, ParticipantProfile, TimeWindow, events_in


class WeightedGraph:
    """Undirected weighted graph without self-loops.

    Nodes carry an ``in_study`` flag separating participants from
    out-of-study peer hashes.
    """

    def __init__(self) -> None:
        self.in_study: dict[str, bool] = {}
        self.adj: dict[str, dict[str, float]] = {}

    def add_node(self, node: str, in_study: bool) -> None:
        if node not in self.adj:
            self.adj[node] = {}
            self.in_study[node] = in_study

    def add_edge(self, u: str, v: str, w: float = 1.0, in_study_u: bool = True, in_study_v: bool = True) -> None:
        if u == v:
            raise ValueError("self-loops are not allowed")
        if not w > 0:
            raise ValueError("edge weights must be positive")
        self.add_node(u, in_study_u)
        self.add_node(v, in_study_v)
        self.adj[u][v] = self.adj[u].get(v, 0.0) + w
        self.adj[v][u] = self.adj[v].get(u, 0.0) + w

    def remove_node(self, node: str) -> None:
        for nb in self.adj.pop(node):
            del self.adj[nb][node]
        del self.in_study[node]

    @property
    def nodes(self) -> list[str]:
        return sorted(self.adj)

    def __contains__(self, node: str) -> bool:
        return node in self.adj

    def __len__(self) -> int:
        return len(self.adj)

    def weight(self, u: str, v: str) -> float:
        return self.adj.get(u, {}).get(v, 0.0)

    def neighbors(self, u: str) -> dict[str, float]:
        return self.adj.get(u, {})

    def edges(self) -> list[tuple[str, str, float]]:
        return sorted((u, v, w) for u, nbrs in self.adj.items() for v, w in nbrs.items() if u < v)

    def n_edges(self) -> int:
        return sum(len(n) for n in self.adj.values()) // 2

    def total_weight(self) -> float:
        return sum(w for _, _, w in self.edges())

    def scaled(self, factor: float) -> "WeightedGraph":
        g = WeightedGraph()
        for u in self.nodes:
            g.add_node(u, self.in_study[u])
        for u, v, w in self.edges():
            g.add_edge(u, v, w * factor, self.in_study[u], self.in_study[v])
        return g

    def to_csv(self, path: str | Path, min_weight: float = 0.0) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["u", "v", "w", "in_study_u", "in_study_v"])
            for u, v, w in self.edges():
                if w >= min_weight:
                    out.writerow([u, v, repr(w), int(self.in_study[u]), int(self.in_study[v])])

    @classmethod
    def from_edges(cls, edges: Iterable[tuple], in_study: Mapping[str, bool] | None = None) -> "WeightedGraph":
        g = cls()
        flags = in_study or {}
        for u, v, w in edges:
            g.add_edge(u, v, w, flags.get(u, True), flags.get(v, True))
        return g


def _interaction_graph(log: EventLog, w: TimeWindow, kind: str) -> WeightedGraph:
    counts: Counter = Counter()
    for e in events_in(log, w):
        if e.kind != kind or e.peer == e.actor:
            continue
        pair = (e.actor, e.peer) if e.actor < e.peer else (e.peer, e.actor)
        counts[pair] += 1
    return _graph_from_counts(log, counts)


def cumulative_graphs(log: EventLog, kind: str, origin: int, boundaries: list[int]) -> list[WeightedGraph]:
    """Interaction graphs over ``[origin, b)`` for each boundary, in one pass."""
    if any(b2 <= b1 for b1, b2 in zip(boundaries, boundaries[1:])):
        raise ValueError("boundaries must be strictly increasing")
    if not boundaries:
        return []
    events = events_in(log, TimeWindow(origin, max(boundaries[-1], origin + 1)))
    counts: Counter = Counter()
    out = []
    i = 0
    for b in boundaries:
        while i < len(events) and events[i].time < b:
            e = events[i]
            i += 1
            if e.kind != kind or e.peer == e.actor:
                continue
            counts[(e.actor, e.peer) if e.actor < e.peer else (e.peer, e.actor)] += 1
        out.append(_graph_from_counts(log, counts))
    return out


def _graph_from_counts(log: EventLog, counts: Counter) -> WeightedGraph:
    g = WeightedGraph()
    for (u, v), c in sorted(counts.items()):
        g.add_edge(u, v, float(c), log.is_participant(u), log.is_participant(v))
    # out-of-study peers count only if more than one participant reached them
    for node in [n for n in g.nodes if not g.in_study[n]]:
        if sum(1 for nb in g.neighbors(node) if g.in_study[nb]) < 2:
            g.remove_node(node)
    for node in [n for n in g.nodes if not g.neighbors(n)]:
        g.remove_node(node)
    return g


def build_sms_graph(log: EventLog, w: TimeWindow) -> WeightedGraph:
    """Edge weight = SMS messages between the pair, both directions summed."""
    return _interaction_graph(log, w, "sms")


def build_call_graph(log: EventLog, w: TimeWindow) -> WeightedGraph:
    """Edge weight = calls between the pair, any direction, missed included."""
    return _interaction_graph(log, w, "call")


def build_bluetooth_graph(log: EventLog, w: TimeWindow) -> WeightedGraph:
    """Edge weight = sightings reported by either device of the pair."""
    return _interaction_graph(log, w, "bluetooth")


# --------------------------------------------------------------------------- significant other


class OtherPrediction(NamedTuple):
    node: str | None
    tie: bool = False


def predict_significant_other(g: WeightedGraph, u: str) -> OtherPrediction:
    """In-study neighbour of ``u`` with the largest weight; ties go to the smallest id."""
    best: str | None = None
    best_w = 0.0
    tie = False
    for v, w in sorted(g.neighbors(u).items()):
        if not g.in_study[v]:
            continue
        if best is None or w > best_w:
            best, best_w, tie = v, w, False
        elif w == best_w:
            tie = True
    return OtherPrediction(best, tie)


def couples_accuracy(g: WeightedGraph, profiles: Mapping[str, ParticipantProfile]) -> float:
    hits = total = 0
    for pid in sorted(profiles):
        partner = profiles[pid].partner
        if partner is None or pid not in g:
            continue
        pred = predict_significant_other(g, pid).node
        if pred is None:
            continue
        total += 1
        hits += pred == partner
    if total == 0:
        raise ValueError("no participant has both a known partner and a prediction")
    return hits / total


# --------------------------------------------------------------------------- louvain


@dataclass
class CommunityPartition:
    assignment: dict[str, int]
    modularity: float
    level_modularity: list[float] = field(default_factory=list)

    def communities(self) -> list[list[str]]:
        groups: dict[int, list[str]] = defaultdict(list)
        for node, c in self.assignment.items():
            groups[c].append(node)
        return [sorted(groups[c]) for c in sorted(groups)]

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["node", "community"])
            for node in sorted(self.assignment):
                out.writerow([node, self.assignment[node]])


def _csr(n: int, rows: np.ndarray, cols: np.ndarray, vals: np.ndarray):
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    indptr = np.zeros(n + 1, dtype=np.intp)
    np.add.at(indptr, rows + 1, 1)
    return np.cumsum(indptr).astype(np.intp), cols.astype(np.intp), vals.astype(np.float64)


def _modularity_arrays(rows, cols, vals, comm, degree, m2, resolution) -> float:
    if m2 == 0:
        return 0.0
    inside = float(vals[comm[rows] == comm[cols]].sum())
    tot = np.bincount(comm, weights=degree)
    return inside / m2 - resolution * float((tot**2).sum()) / (m2 * m2)


def modularity(g: WeightedGraph, assignment: Mapping[str, int], resolution: float = 1.0) -> float:
    """Q = sum over communities of in/2m - (tot/2m)^2, computed from scratch."""
    m2 = 2.0 * g.total_weight()
    if m2 == 0:
        return 0.0
    inside: dict[int, float] = defaultdict(float)
    tot: dict[int, float] = defaultdict(float)
    for u in g.nodes:
        cu = assignment[u]
        for v, w in g.neighbors(u).items():
            tot[cu] += w
            if assignment[v] == cu:
                inside[cu] += w
    return sum(inside[c] / m2 - resolution * (tot[c] / m2) ** 2 for c in tot)


def _relabel(comm: np.ndarray) -> np.ndarray:
    _, first, inv = np.unique(comm, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.intp)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    return rank[inv].astype(np.intp)


def louvain(
    g: WeightedGraph, seed: int = 0, resolution: float = 1.0, tol: float = 1e-7, restarts: int = 64
) -> CommunityPartition:
    """Two-phase Louvain modularity maximization with seeded node order.

    Each run alternates local moves (until no pass gains more than ``tol``)
    with aggregation of communities into nodes.  ``restarts`` independent
    runs with different visit orders are made and the highest-modularity
    partition is kept (earliest run on ties), since a single run can stall
    in a local optimum that needs two simultaneous moves to escape.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best: CommunityPartition | None = None
    for child in np.random.SeedSequence(seed).spawn(restarts):
        part = _louvain_once(g, np.random.default_rng(child), resolution, tol)
        if best is None or part.modularity > best.modularity + 1e-12:
            best = part
    return best


def _louvain_once(g: WeightedGraph, rng: np.random.Generator, resolution: float, tol: float) -> CommunityPartition:
    nodes = g.nodes
    if not nodes:
        raise ValueError("louvain needs a non-empty graph")
    index = {u: i for i, u in enumerate(nodes)}
    n = len(nodes)
    edges = g.edges()
    if not edges:
        return CommunityPartition({u: i for i, u in enumerate(nodes)}, 0.0, [0.0])
    ui = np.array([index[u] for u, _, _ in edges], dtype=np.intp)
    vi = np.array([index[v] for _, v, _ in edges], dtype=np.intp)
    wv = np.array([w for _, _, w in edges], dtype=np.float64)
    rows = np.concatenate([ui, vi])
    cols = np.concatenate([vi, ui])
    vals = np.concatenate([wv, wv])
    degree = np.bincount(rows, weights=vals, minlength=n)
    m2 = float(degree.sum())

    node_comm = np.arange(n, dtype=np.intp)
    cur_rows, cur_cols, cur_vals, cur_deg = rows, cols, vals, degree
    n_cur = n
    q_levels = [_modularity_arrays(rows, cols, vals, node_comm, degree, m2, resolution)]
    for _level in range(64):
        indptr, indices, weights = _csr(n_cur, cur_rows, cur_cols, cur_vals)
        comm = np.arange(n_cur, dtype=np.intp)
        tot = cur_deg.astype(np.float64).copy()
        q_prev = _modularity_arrays(cur_rows, cur_cols, cur_vals, comm, cur_deg, m2, resolution)
        q_start = q_prev
        for _pass in range(10_000):
            order = rng.permutation(n_cur).astype(np.intp)
            moves = kernels.move_nodes(indptr, indices, weights, cur_deg, comm, tot, order, m2, resolution)
            q_new = _modularity_arrays(cur_rows, cur_cols, cur_vals, comm, cur_deg, m2, resolution)
            improved = q_new - q_prev
            q_prev = q_new
            if moves == 0 or improved <= tol:
                break
        comm = _relabel(comm)
        k = int(comm.max()) + 1
        node_comm = comm[node_comm]
        q_levels.append(_modularity_arrays(rows, cols, vals, node_comm, degree, m2, resolution))
        if k == n_cur or q_prev - q_start <= tol:
            break
        # aggregate: communities become nodes, internal weight becomes a self-loop
        key = comm[cur_rows] * k + comm[cur_cols]
        agg = np.bincount(key, weights=cur_vals, minlength=k * k)
        nz = np.flatnonzero(agg)
        cur_rows, cur_cols, cur_vals = (nz // k).astype(np.intp), (nz % k).astype(np.intp), agg[nz]
        cur_deg = np.bincount(comm, weights=cur_deg, minlength=k)
        n_cur = k
    assignment = {u: int(node_comm[i]) for i, u in enumerate(nodes)}
    return CommunityPartition(assignment, modularity(g, assignment, resolution), q_levels)


# --------------------------------------------------------------------------- ethnicity


def predict_ethnicity(p: CommunityPartition, known: Mapping[str, str]) -> dict[str, str | None]:
    """Majority known label of each node's community; ``None`` on ties or no labels."""
    votes: dict[int, Counter] = defaultdict(Counter)
    for node, c in p.assignment.items():
        lab = known.get(node)
        if lab is not None:
            votes[c][lab] += 1
    winner: dict[int, str | None] = {}
    for c, cnt in votes.items():
        top = cnt.most_common(2)
        winner[c] = None if len(top) > 1 and top[0][1] == top[1][1] else top[0][0]
    return {node: winner.get(c) for node, c in p.assignment.items()}


def ethnicity_accuracy(
    predictions: Mapping[str, str | None],
    profiles: Mapping[str, ParticipantProfile],
    among: Iterable[str] | None = None,
) -> float:
    """Share of participants with known ethnicity predicted correctly.

    Missing predictions count as misses.  ``among`` restricts the scored set,
    e.g. to the participants whose labels were hidden.
    """
    pool = sorted(profiles) if among is None else sorted(set(among))
    scored = [pid for pid in pool if pid in profiles and profiles[pid].ethnicity is not None]
    if not scored:
        raise ValueError("no participant with a known ethnicity to score")
    hits = sum(predictions.get(pid) == profiles[pid].ethnicity for pid in scored)
    return hits / len(scored)


def hide_labels(
    profiles: Mapping[str, ParticipantProfile], fraction: float, seed: int
) -> tuple[dict[str, str], list[str]]:
    """Split known ethnicities into visible labels and a hidden evaluation set."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must be in [0, 1]")
    known = sorted(pid for pid, p in profiles.items() if p.ethnicity is not None)
    n_hide = int(round(fraction * len(known)))
    rng = np.random.default_rng(seed)
    hidden = sorted(known[i] for i in rng.permutation(len(known))[:n_hide])
    hidden_set = set(hidden)
    visible = {pid: profiles[pid].ethnicity for pid in known if pid not in hidden_set}
    return visible, hidden


def majority_baseline(profiles: Mapping[str, ParticipantProfile], visible: Mapping[str, str], hidden: Iterable[str]) -> float:
    """Accuracy of predicting the most frequent visible label for every hidden node."""
    hidden = list(hidden)
    if not hidden or not visible:
        return 0.0
    counts = Counter(visible.values())
    top = max(sorted(counts), key=lambda lab: counts[lab])
    return sum(profiles[pid].ethnicity == top for pid in hidden) / len(hidden)


@dataclass
class EthnicityResult:
    accuracy: float
    baseline: float
    partition: CommunityPartition | None
    predictions: dict[str, str | None]
    hidden: list[str]


def ethnicity_experiment(
    log: EventLog,
    w: TimeWindow,
    hidden_fraction: float = 0.3,
    label_seed: int = 0,
    louvain_seed: int = 0,
) -> EthnicityResult:
    """Hide a share of labels, cluster the SMS graph, score the hidden ones."""
    visible, hidden = hide_labels(log.participants, hidden_fraction, label_seed)
    g = build_sms_graph(log, w)
    if len(g) == 0:
        part, preds = None, {}
    else:
        part = louvain(g, louvain_seed)
        preds = predict_ethnicity(part, visible)
    acc = ethnicity_accuracy(preds, log.participants, among=hidden or None)
    return EthnicityResult(acc, majority_baseline(log.participants, visible, hidden), part, preds, hidden)
