"""End-to-end experiment: incremental evaluation, fitting, forecasting, reports.

Every evaluation point re-runs its task from scratch on the data accumulated
since the log origin.  Point seeds are hashed from (run seed, task, point) so
tasks never perturb each other.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import classifiers, social_graph
from .curvefit import (
    UNITS_IN_DAYS,
    FitResult,
    Forecast,
    InsufficientDataError,
    LearningCurve,
    correlation_matrix,
    fit_gompertz,
    forecast_from_prefix,
)
from .data_model import SECONDS_PER_DAY, EventLog
from .features import (
    FEATURE_NAMES,
    cumulative_features,
    information_gain_ranking,
    labelled_ids,
    matrix_from_rows,
)
from .plots import curve_figure, extrapolation_figure
from .synthgen import DEFAULT_SEED

MAX_ETHNICITY_WEEKS = 65


@dataclass(frozen=True)
class TaskSpec:
    name: str
    method: str  # "ml" or "graph"
    kind: str  # model kind for ml, graph task name otherwise
    metric: str
    attribute: str | None = None
    unit: str = "day"

    def __post_init__(self) -> None:
        if self.method == "ml" and (self.kind not in classifiers.MODEL_KINDS or self.metric != "auc"):
            raise ValueError(f"ml task {self.name!r} needs a model kind and metric 'auc'")
        if self.method == "graph" and (self.kind not in ("significant_other", "ethnicity") or self.metric != "accuracy"):
            raise ValueError(f"graph task {self.name!r} needs a graph kind and metric 'accuracy'")
        if self.method not in ("ml", "graph"):
            raise ValueError(f"unknown method {self.method!r}")


TASKS: dict[str, TaskSpec] = {
    t.name: t
    for t in (
        TaskSpec("gender", "ml", "decision_tree", "auc", "gender"),
        TaskSpec("origin", "ml", "naive_bayes", "auc", "us_native"),
        TaskSpec("children", "ml", "naive_bayes", "auc", "has_children"),
        TaskSpec("student", "ml", "bagged_trees", "auc", "is_student"),
        TaskSpec("age", "ml", "decision_tree", "auc", "age_over_30"),
        TaskSpec("significant_other", "graph", "significant_other", "accuracy"),
        TaskSpec("ethnicity", "graph", "ethnicity", "accuracy", unit="week"),
    )
}
TASK_NAMES = tuple(TASKS)


def resolve_tasks(names: Sequence[str] | None) -> list[TaskSpec]:
    if not names:
        return list(TASKS.values())
    unknown = [n for n in names if n not in TASKS]
    if unknown:
        raise ValueError(f"unknown task(s) {unknown}; choose from {list(TASKS)}")
    return [TASKS[n] for n in names]


@dataclass
class RunConfig:
    days: int = 30
    seed: int = DEFAULT_SEED
    tasks: list[TaskSpec] = field(default_factory=lambda: list(TASKS.values()))
    prefix_k: int = 15
    horizon: float = 730.0  # days
    targets: tuple[float, ...] = (0.7, 0.8, 0.9)
    hidden_fraction: float = 0.3
    label_repeats: int = 10  # hidden-label draws averaged per ethnicity point
    weeks: int | None = None  # ethnicity span; defaults to covering `days`
    folds: int = 10

    def __post_init__(self) -> None:
        if self.days < 1:
            raise ValueError("days must be >= 1")
        if self.prefix_k < 1:
            raise ValueError("prefix_k must be >= 1")
        if self.weeks is not None and not 1 <= self.weeks <= MAX_ETHNICITY_WEEKS:
            raise ValueError(f"weeks must be in [1, {MAX_ETHNICITY_WEEKS}]")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.label_repeats < 1:
            raise ValueError("label_repeats must be >= 1")

    def ethnicity_span_days(self) -> int:
        if self.weeks is not None:
            return 7 * self.weeks
        return min(self.days, 7 * MAX_ETHNICITY_WEEKS)


def point_seed(seed: int, task: str, point: int | str) -> int:
    digest = hashlib.sha256(f"{seed}|{task}|{point}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def log_origin(log: EventLog) -> int:
    span = log.time_span()
    return 0 if span is None else (span[0] // SECONDS_PER_DAY) * SECONDS_PER_DAY


def span_days(log: EventLog) -> int:
    span = log.time_span()
    if span is None:
        return 0
    return (span[1] - log_origin(log)) // SECONDS_PER_DAY + 1


def week_grid(total_days: int) -> list[tuple[float, int]]:
    """(time in weeks, day count) per weekly point; a trailing partial week is kept."""
    n = min(MAX_ETHNICITY_WEEKS, -(-total_days // 7))
    return [(min(7 * w, total_days) / 7.0, min(7 * w, total_days)) for w in range(1, n + 1)]


@dataclass
class TaskCurve:
    spec: TaskSpec
    curve: LearningCurve | None
    missing: list[tuple[float, str]]  # (time, reason)


# --------------------------------------------------------------------------- incremental evaluation


def _ml_curve(spec: TaskSpec, log: EventLog, cfg: RunConfig, rows_by_day: list[np.ndarray], index: dict[str, int]) -> TaskCurve:
    pairs = labelled_ids(log, spec.attribute)
    ids = [p for p, _ in pairs]
    sel = np.array([index[p] for p in ids], dtype=np.int64)
    labels = [lab for _, lab in pairs]
    times, values, missing = [], [], []
    for d, X in enumerate(rows_by_day, start=1):
        try:
            if not ids:
                raise ValueError(f"no participant has a known {spec.attribute}")
            m = matrix_from_rows(ids, X[sel], labels, spec.attribute)
            rep = classifiers.cross_validate(spec.kind, m, seed=point_seed(cfg.seed, spec.name, d), k=cfg.folds, task=spec.name)
            times.append(float(d))
            values.append(rep.auc)
        except ValueError as exc:
            missing.append((float(d), str(exc)))
    return _task_curve(spec, times, values, missing)


def _couples_curve(spec: TaskSpec, log: EventLog, cfg: RunConfig, origin: int) -> TaskCurve:
    bounds = [origin + d * SECONDS_PER_DAY for d in range(1, cfg.days + 1)]
    times, values, missing = [], [], []
    for d, g in enumerate(social_graph.cumulative_graphs(log, "bluetooth", origin, bounds), start=1):
        try:
            values.append(social_graph.couples_accuracy(g, log.participants))
            times.append(float(d))
        except ValueError as exc:
            missing.append((float(d), str(exc)))
    return _task_curve(spec, times, values, missing)


def _ethnicity_curve(spec: TaskSpec, log: EventLog, cfg: RunConfig, origin: int) -> TaskCurve:
    """Hidden-label accuracy of community majority voting, one point per week.

    The hidden sets are drawn once and reused at every point, so the curve
    tracks the graph rather than the draw; accuracy is averaged over
    ``cfg.label_repeats`` such draws.
    """
    grid = week_grid(cfg.ethnicity_span_days())
    draws = [
        social_graph.hide_labels(log.participants, cfg.hidden_fraction, point_seed(cfg.seed, spec.name, f"labels{r}"))
        for r in range(cfg.label_repeats)
    ]
    bounds = [origin + days * SECONDS_PER_DAY for _, days in grid]
    times, values, missing = [], [], []
    for (t, days), g in zip(grid, social_graph.cumulative_graphs(log, "sms", origin, bounds)):
        try:
            part = social_graph.louvain(g, seed=point_seed(cfg.seed, spec.name, days)) if len(g) else None
            scores = []
            for visible, hidden in draws:
                preds = social_graph.predict_ethnicity(part, visible) if part is not None else {}
                scores.append(social_graph.ethnicity_accuracy(preds, log.participants, among=hidden or None))
            values.append(float(np.mean(scores)))
            times.append(t)
        except ValueError as exc:
            missing.append((t, str(exc)))
    return _task_curve(spec, times, values, missing)


def _task_curve(spec: TaskSpec, times, values, missing) -> TaskCurve:
    curve = LearningCurve(spec.name, times, values, spec.metric, spec.unit) if times else None
    return TaskCurve(spec, curve, missing)


def run_incremental(log: EventLog, cfg: RunConfig) -> list[TaskCurve]:
    """One learning curve per task, evaluated on growing day prefixes."""
    need = max(cfg.days, cfg.ethnicity_span_days() if any(t.kind == "ethnicity" for t in cfg.tasks) else 0)
    have = span_days(log)
    if have < need:
        raise ValueError(f"log spans {have} days but the run needs {need}")
    origin = log_origin(log)
    out = []
    ml = [t for t in cfg.tasks if t.method == "ml"]
    rows_by_day: list[np.ndarray] = []
    index: dict[str, int] = {}
    if ml:
        ids = log.participant_ids
        index = {p: i for i, p in enumerate(ids)}
        bounds = [origin + d * SECONDS_PER_DAY for d in range(1, cfg.days + 1)]
        rows_by_day = cumulative_features(log, ids, origin, bounds)
    for spec in cfg.tasks:
        if spec.method == "ml":
            out.append(_ml_curve(spec, log, cfg, rows_by_day, index))
        elif spec.kind == "significant_other":
            out.append(_couples_curve(spec, log, cfg, origin))
        else:
            out.append(_ethnicity_curve(spec, log, cfg, origin))
    return out


# --------------------------------------------------------------------------- report


@dataclass
class TaskReport:
    task: TaskCurve
    fit: FitResult | None = None
    forecast_prefix: Forecast | None = None
    forecast_full: Forecast | None = None
    diagnostics: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.fit is not None and self.forecast_prefix is not None and self.forecast_full is not None


@dataclass
class ReportBundle:
    reports: list[TaskReport]
    correlation: np.ndarray | None
    correlation_tasks: list[str]
    feature_ranking: dict[str, list[tuple[str, float]]]
    files: list[Path] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 0 if all(r.ok for r in self.reports) else 2


def analyse(curves: list[TaskCurve], cfg: RunConfig) -> list[TaskReport]:
    """Fit each curve and forecast from its prefix and from all of it."""
    reports = []
    for tc in curves:
        rep = TaskReport(tc)
        reports.append(rep)
        if tc.curve is None:
            rep.diagnostics.append("no valid evaluation points")
            continue
        n = len(tc.curve)
        if n < 4:
            rep.diagnostics.append(f"unfittable: {n} valid points, need 4")
            continue
        horizon = cfg.horizon / UNITS_IN_DAYS[tc.curve.unit]
        try:
            rep.fit = fit_gompertz(tc.curve)
            rep.forecast_full = forecast_from_prefix(tc.curve, n, horizon, cfg.targets)
            rep.forecast_prefix = forecast_from_prefix(tc.curve, max(4, min(cfg.prefix_k, n)), horizon, cfg.targets)
        except InsufficientDataError as exc:
            rep.diagnostics.append(f"unfittable: {exc}")
            continue
        if not rep.fit.converged:
            rep.diagnostics.append("fit did not converge within the iteration limit")
    return reports


def _clean(x):
    """JSON-safe copy: non-finite floats become null, tuples become lists."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def _write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    return path


def _write_csv(path: Path, header: Sequence[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def _num(v: float | None) -> str:
    return "" if v is None or not math.isfinite(v) else repr(float(v))


def write_curves_csv(curves: list[TaskCurve], path: Path) -> Path:
    rows = []
    for tc in curves:
        pts = []
        if tc.curve is not None:
            pts += [(t, v) for t, v in zip(tc.curve.times, tc.curve.values)]
        pts += [(t, None) for t, _ in tc.missing]
        for t, v in sorted(pts):
            rows.append([tc.spec.name, _num(t), tc.spec.unit, tc.spec.metric, _num(v)])
    return _write_csv(path, ["task", "t", "unit", "metric", "value"], rows)


def read_curves_csv(path: str | Path) -> list[LearningCurve]:
    """Curves CSV back to learning curves; missing values are skipped."""
    grouped: dict[str, dict] = {}
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["task", "t", "unit", "metric", "value"]:
            raise ValueError(f"{path}: expected header task,t,unit,metric,value")
        for row in reader:
            g = grouped.setdefault(row["task"], {"t": [], "v": [], "unit": row["unit"], "metric": row["metric"]})
            if row["value"] != "":
                g["t"].append(float(row["t"]))
                g["v"].append(float(row["value"]))
    return [LearningCurve(task, g["t"], g["v"], g["metric"], g["unit"]) for task, g in grouped.items() if g["t"]]


def write_correlation_csv(names: list[str], r: np.ndarray, path: Path) -> Path:
    rows = [[a, *(_num(v) for v in r[i])] for i, a in enumerate(names)]
    return _write_csv(path, ["task", *names], rows)


def feature_rankings(log: EventLog, cfg: RunConfig) -> dict[str, list[tuple[str, float]]]:
    """Information-gain ranking of the features on the full window, per ML task."""
    origin = log_origin(log)
    ids = log.participant_ids
    [X] = cumulative_features(log, ids, origin, [origin + cfg.days * SECONDS_PER_DAY])
    index = {p: i for i, p in enumerate(ids)}
    out = {}
    for spec in cfg.tasks:
        if spec.method != "ml":
            continue
        pairs = labelled_ids(log, spec.attribute)
        if not pairs:
            continue
        m = matrix_from_rows([p for p, _ in pairs], X[[index[p] for p, _ in pairs]], [lab for _, lab in pairs], spec.attribute)
        out[spec.name] = information_gain_ranking(m)
    return out


def write_bundle(
    curves: list[TaskCurve],
    reports: list[TaskReport],
    cfg: RunConfig,
    out: str | Path,
    ranking: dict[str, list[tuple[str, float]]] | None = None,
) -> ReportBundle:
    out = Path(out)
    files = [write_curves_csv(curves, out / "curves.csv")]
    for rep in reports:
        name = rep.task.spec.name
        if rep.fit is not None:
            files.append(_write_json(out / "fits" / f"{name}.json", rep.fit.to_dict()))
        for tag, fc in (("prefix", rep.forecast_prefix), ("full", rep.forecast_full)):
            if fc is None:
                continue
            files.append(_write_json(out / "forecasts" / f"{name}_{tag}.json", fc.to_dict()))
            for ex in (fc.extrapolated, fc.extrapolated_loglog):
                files.append(_write_csv(out / "extrapolation" / f"{name}_{tag}_{ex.scale}.csv", ["t", "value"],
                                        [[_num(t), _num(v)] for t, v in ex.rows()]))
        if rep.task.curve is not None:
            svg = curve_figure(rep.task.curve, rep.fit, rep.forecast_full, title=name)
            files.append(_write_text(out / "plots" / f"{name}.svg", svg))
    fcs = [r.forecast_full for r in reports if r.forecast_full is not None]
    files.append(_write_text(out / "plots" / "extrapolation.svg", extrapolation_figure(fcs)))

    valid = [tc.curve for tc in curves if tc.curve is not None]
    corr = None
    names = [c.task for c in valid]
    if len(valid) >= 2:
        corr = correlation_matrix(valid)
        files.append(write_correlation_csv(names, corr, out / "correlation.csv"))

    summary = {
        "config": {
            "days": cfg.days,
            "seed": cfg.seed,
            "prefix_k": cfg.prefix_k,
            "horizon_days": cfg.horizon,
            "targets": list(cfg.targets),
            "hidden_fraction": cfg.hidden_fraction,
            "label_repeats": cfg.label_repeats,
            "ethnicity_span_days": cfg.ethnicity_span_days(),
            "folds": cfg.folds,
        },
        "feature_names": list(FEATURE_NAMES),
        "feature_ranking": {k: [{"feature": f, "gain": g} for f, g in v] for k, v in (ranking or {}).items()},
        "tasks": {
            r.task.spec.name: {
                "method": r.task.spec.method,
                "kind": r.task.spec.kind,
                "metric": r.task.spec.metric,
                "unit": r.task.spec.unit,
                "n_points": 0 if r.task.curve is None else len(r.task.curve),
                "missing": [{"t": t, "reason": why} for t, why in r.task.missing],
                "status": "ok" if r.ok else "unfittable",
                "diagnostics": r.diagnostics,
                "asymptote_prefix": None if r.forecast_prefix is None else r.forecast_prefix.asymptote,
                "asymptote_full": None if r.forecast_full is None else r.forecast_full.asymptote,
                "rse": None if r.fit is None else r.fit.rse,
            }
            for r in reports
        },
    }
    files.append(_write_json(out / "summary.json", summary))
    return ReportBundle(reports, corr, names, ranking or {}, files)


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def run_pipeline(log: EventLog, cfg: RunConfig, out: str | Path) -> ReportBundle:
    """Curves, fits, forecasts, correlations and plots for ``log`` into ``out``."""
    curves = run_incremental(log, cfg)
    reports = analyse(curves, cfg)
    return write_bundle(curves, reports, cfg, out, feature_rankings(log, cfg))
