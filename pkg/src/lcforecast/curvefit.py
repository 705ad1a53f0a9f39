"""Gompertz learning-curve model: evaluation, fitting and forecasting.

The model is ``f(t) = a * exp(b * exp(c * t))`` with ``a > 0`` (the
asymptote) and ``b, c < 0`` so that ``f`` rises monotonically towards ``a``.

Fitting is Levenberg-Marquardt on the unconstrained parameters
``(log a, log(-b), log(-c))``.  Every trial point therefore satisfies the
sign constraints without clipping; the analytic Jacobian is chained through
the reparameterization (``d f / d log a = a * df/da`` and so on).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

UNITS_IN_DAYS = {"day": 1.0, "week": 7.0}
_EXP_FLOOR = -700.0


class InsufficientDataError(ValueError):
    pass


class UndefinedCorrelationError(ValueError):
    pass


@dataclass(frozen=True)
class GompertzParams:
    a: float
    b: float
    c: float

    def __post_init__(self) -> None:
        if not (self.a > 0 and self.b < 0 and self.c < 0):
            raise ValueError(f"need a > 0, b < 0, c < 0; got ({self.a}, {self.b}, {self.c})")
        if not all(math.isfinite(v) for v in (self.a, self.b, self.c)):
            raise ValueError("parameters must be finite")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.a, self.b, self.c)


@dataclass(frozen=True)
class LearningCurve:
    """Accuracy (or AUC) measured at increasing amounts of accumulated data."""

    task: str
    times: tuple[float, ...]
    values: tuple[float, ...]
    metric: str = "auc"
    unit: str = "day"

    def __post_init__(self) -> None:
        times = tuple(float(t) for t in self.times)
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if len(times) != len(values):
            raise ValueError("times and values differ in length")
        if not times:
            raise ValueError("a learning curve needs at least one point")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("times must be strictly increasing")
        if any(not (0.0 <= v <= 1.0) for v in values):
            raise ValueError("values must lie in [0, 1]")
        if self.metric not in ("auc", "accuracy"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.unit not in UNITS_IN_DAYS:
            raise ValueError(f"unknown time unit {self.unit!r}")

    def __len__(self) -> int:
        return len(self.times)

    def prefix(self, k: int) -> "LearningCurve":
        return LearningCurve(self.task, self.times[:k], self.values[:k], self.metric, self.unit)

    def times_in_days(self) -> np.ndarray:
        return np.asarray(self.times) * UNITS_IN_DAYS[self.unit]


@dataclass
class FitResult:
    params: GompertzParams
    rse: float
    converged: bool
    tolerance_achieved: float
    iterations: int
    n_points: int
    ss_res: float = 0.0
    task: str = ""

    def to_dict(self) -> dict:
        a, b, c = self.params.as_tuple()
        return {
            "task": self.task,
            "a": a,
            "b": b,
            "c": c,
            "rse": self.rse,
            "converged": self.converged,
            "tolerance": self.tolerance_achieved,
            "iterations": self.iterations,
            "n_points": self.n_points,
        }


def gompertz(p: GompertzParams, t):
    """Evaluate the model at scalar or array ``t``."""
    inner = np.multiply(p.c, t, dtype=np.float64)
    # far left of the curve e overflows to inf and f underflows to exactly 0
    with np.errstate(over="ignore"):
        e = np.where(inner < _EXP_FLOOR, 0.0, np.exp(np.maximum(inner, _EXP_FLOOR)))
        out = p.a * np.exp(p.b * e)
    return float(out) if np.ndim(out) == 0 else out


def gompertz_jacobian(p: GompertzParams, t) -> np.ndarray:
    """Partial derivatives with respect to ``(a, b, c)``, shape ``(n, 3)``."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    inner = p.c * t
    with np.errstate(over="ignore", invalid="ignore"):
        e = np.where(inner < _EXP_FLOOR, 0.0, np.exp(np.maximum(inner, _EXP_FLOOR)))
        g = np.exp(p.b * e)
        eg = np.where(g == 0.0, 0.0, e * g)  # inf * 0 far left of the curve
    d_a = g
    d_b = p.a * eg
    d_c = p.a * p.b * t * eg
    return np.column_stack([d_a, d_b, d_c])


def time_to_accuracy(p: GompertzParams, y: float) -> float | None:
    """Time at which the model reaches ``y``; ``None`` if ``y >= a`` or ``y <= 0``."""
    if not (0.0 < y < p.a):
        return None
    return math.log(math.log(y / p.a) / p.b) / p.c


# --------------------------------------------------------------------------- fitting


def _to_theta(p: GompertzParams, a_max: float | None = None) -> np.ndarray:
    la = math.log(p.a) if a_max is None else math.log(p.a / (a_max - p.a))
    return np.array([la, math.log(-p.b), math.log(-p.c)])


def _from_theta(theta: np.ndarray, a_max: float | None = None) -> GompertzParams | None:
    with np.errstate(over="ignore"):
        a, nb, nc = np.exp(theta)
        if a_max is not None:
            a = a_max / (1.0 + np.exp(-theta[0]))
    if not (np.isfinite(a) and np.isfinite(nb) and np.isfinite(nc)) or a == 0 or nb == 0 or nc == 0:
        return None
    return GompertzParams(float(a), -float(nb), -float(nc))


def initial_guess(t: np.ndarray, y: np.ndarray, metric: str | None = "auc") -> GompertzParams:
    """Linearized start: fix the asymptote, then regress ``ln(ln(a/y))`` on ``t``."""
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    bounded = metric in ("auc", "accuracy")
    if bounded:
        y = np.clip(y, 1e-9, 1.0 - 1e-9)
    else:
        y = np.maximum(y, 1e-9)
    a0 = 1.02 * float(y.max())
    if bounded:
        a0 = min(a0, 1.0)
    z = np.log(np.log(a0 / y))
    tm = t.mean()
    sxx = float(((t - tm) ** 2).sum())
    if sxx > 0:
        slope = float(((t - tm) * (z - z.mean())).sum()) / sxx
        intercept = float(z.mean()) - slope * tm
    else:
        slope, intercept = 0.0, float(z.mean())
    if not slope < 0:
        span = float(t.max() - t.min()) or 1.0
        slope = -1.0 / span
        intercept = float(z.mean()) - slope * tm
    return GompertzParams(a0, -math.exp(intercept), slope)


def fit_gompertz_xy(
    t: Sequence[float],
    y: Sequence[float],
    *,
    tolerance: float = 1e-8,
    max_iter: int = 200,
    init: GompertzParams | None = None,
    metric: str | None = "auc",
    task: str = "",
    a_max: float | None = None,
) -> FitResult:
    """Least-squares Gompertz fit of raw ``(t, y)`` samples.

    Converged means the last iteration reduced the residual sum of squares by
    a relative amount below ``tolerance`` (a rejected step counts as zero
    reduction, so a rejected step below 1e-10 ends the search), or the fit
    is exact to rounding.  ``tolerance_achieved`` is that final relative reduction.

    ``a_max`` caps the asymptote (logistic reparameterization of ``a``); with
    ``None`` only the sign constraints apply.
    """
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = t.size
    if n != y.size:
        raise ValueError("t and y differ in length")
    if n < 4:
        raise InsufficientDataError(f"need at least 4 points to fit 3 parameters, got {n}")
    if np.ptp(y) == 0:
        raise InsufficientDataError("values do not vary; the curve shape is unidentifiable")

    if a_max is not None and not a_max > 0:
        raise ValueError("a_max must be positive")
    p = init if init is not None else initial_guess(t, y, metric)
    if a_max is not None and p.a >= a_max:
        p = GompertzParams(a_max * (1.0 - 1e-4), p.b, p.c)
    theta = _to_theta(p, a_max)

    def residuals(q: GompertzParams) -> np.ndarray:
        return y - gompertz(q, t)

    r = residuals(p)
    ss = float(r @ r)
    ss_floor = 1e-28 * max(1.0, float(y @ y))
    lam = 1e-3
    rel = math.inf
    converged = ss <= ss_floor
    it = 0
    if converged:
        rel = 0.0
    while not converged and it < max_iter:
        it += 1
        da = p.a if a_max is None else p.a * (1.0 - p.a / a_max)
        jac = gompertz_jacobian(p, t) * np.array([da, p.b, p.c])
        jtj = jac.T @ jac
        g = jac.T @ r
        diag = np.maximum(np.diag(jtj), 1e-12 * max(1.0, float(np.diag(jtj).max())))
        try:
            delta = np.linalg.solve(jtj + lam * np.diag(diag), g)
        except np.linalg.LinAlgError:
            lam *= 4.0
            rel = 0.0
            continue
        cand = _from_theta(theta + delta, a_max)
        step_small = float(np.max(np.abs(delta))) < 1e-10
        if cand is not None:
            r_new = residuals(cand)
            ss_new = float(r_new @ r_new)
        else:
            ss_new = math.inf
        if math.isfinite(ss_new) and ss_new < ss:
            rel = (ss - ss_new) / ss
            theta = theta + delta
            p, r, ss = cand, r_new, ss_new
            lam = max(lam * 0.5, 1e-15)
            if ss <= ss_floor:
                rel = 0.0
                converged = True
            elif rel <= tolerance:
                converged = True
        else:
            rel = 0.0
            lam *= 4.0
            if step_small or lam > 1e16:
                converged = True
    rse = math.sqrt(ss / (n - 3))
    return FitResult(
        params=p,
        rse=rse,
        converged=converged,
        tolerance_achieved=float(rel),
        iterations=it,
        n_points=n,
        ss_res=ss,
        task=task,
    )


def fit_gompertz(curve: LearningCurve, **opts) -> FitResult:
    """Fit a learning curve; keyword options as for :func:`fit_gompertz_xy`.

    AUC and accuracy cannot exceed 1, so the asymptote is capped there unless
    ``a_max`` is given explicitly.
    """
    opts.setdefault("a_max", 1.0)
    opts.setdefault("metric", curve.metric)
    opts.setdefault("task", curve.task)
    return fit_gompertz_xy(curve.times, curve.values, **opts)


# --------------------------------------------------------------------------- forecasting


@dataclass
class Extrapolation:
    times: np.ndarray
    values: np.ndarray
    scale: str = "linear"

    def rows(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.values.tolist()))


@dataclass
class Forecast:
    task: str
    asymptote: float
    t_for: dict[float, float | None]
    status: dict[float, str]
    extrapolated: Extrapolation
    extrapolated_loglog: Extrapolation
    fitted_on: int
    fit: FitResult
    unit: str = "day"

    def to_dict(self) -> dict:
        d = self.fit.to_dict()
        d.update(
            {
                "task": self.task,
                "k": self.fitted_on,
                "asymptote": self.asymptote,
                "unit": self.unit,
                "t_for": {repr(float(y)): t for y, t in self.t_for.items()},
                "t_for_status": {repr(float(y)): s for y, s in self.status.items()},
            }
        )
        return d


def extrapolate(p: GompertzParams, start: float, horizon: float, step: float) -> Extrapolation:
    if step <= 0:
        raise ValueError("step must be positive")
    n = int(math.floor((horizon - start) / step + 1e-9)) + 1
    times = start + step * np.arange(max(n, 1))
    return Extrapolation(times, np.asarray(gompertz(p, times), dtype=np.float64), "linear")


def extrapolate_loglog(p: GompertzParams, start: float, horizon: float, n: int = 60) -> Extrapolation:
    """Geometric time grid for plotting on log-log axes."""
    lo = max(start, 1e-6)
    hi = max(horizon, lo * (1 + 1e-9))
    times = np.geomspace(lo, hi, n)
    return Extrapolation(times, np.asarray(gompertz(p, times), dtype=np.float64), "loglog")


def forecast_from_prefix(
    curve: LearningCurve,
    k: int,
    horizon: float,
    targets: Sequence[float] = (),
    **fit_opts,
) -> Forecast:
    """Fit the first ``k`` points and project the curve out to ``horizon``.

    ``t_for`` maps each target to the time it is first reached, or ``None``
    when the target is at or above the fitted asymptote ("unattainable") or
    already exceeded at the first measurement ("reached").
    """
    if not 4 <= k <= len(curve):
        raise InsufficientDataError(f"prefix length k={k} must be in [4, {len(curve)}]")
    fit = fit_gompertz(curve.prefix(k), **fit_opts)
    p = fit.params
    t1 = curve.times[0]
    f1 = gompertz(p, t1)
    t_for: dict[float, float | None] = {}
    status: dict[float, str] = {}
    for y in targets:
        y = float(y)
        if y >= p.a:
            t_for[y], status[y] = None, "unattainable"
        elif y <= f1:
            t_for[y], status[y] = None, "reached"
        else:
            t_for[y], status[y] = time_to_accuracy(p, y), "ok"
    step = curve.times[1] - curve.times[0] if len(curve) > 1 else 1.0
    return Forecast(
        task=curve.task,
        asymptote=p.a,
        t_for=t_for,
        status=status,
        extrapolated=extrapolate(p, t1, horizon, step),
        extrapolated_loglog=extrapolate_loglog(p, t1, horizon),
        fitted_on=k,
        fit=fit,
        unit=curve.unit,
    )


# --------------------------------------------------------------------------- correlation


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size:
        raise ValueError("series differ in length")
    if x.size < 2:
        raise UndefinedCorrelationError("need at least two points")
    xm = x - x.mean()
    ym = y - y.mean()
    sxx = float(xm @ xm)
    syy = float(ym @ ym)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("a constant series has no correlation")
    r = float(xm @ ym) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def align(c1: LearningCurve, c2: LearningCurve) -> tuple[np.ndarray, np.ndarray]:
    """Values of both curves on their common time points (compared in days)."""
    t1 = np.round(c1.times_in_days(), 9)
    t2 = np.round(c2.times_in_days(), 9)
    common, i1, i2 = np.intersect1d(t1, t2, return_indices=True)
    v1 = np.asarray(c1.values)[i1]
    v2 = np.asarray(c2.values)[i2]
    return v1, v2


def correlation_matrix(curves: Sequence[LearningCurve]) -> np.ndarray:
    """Pairwise Pearson matrix; ``nan`` where a pair cannot be correlated."""
    if len(curves) < 2:
        raise ValueError("need at least two curves")
    n = len(curves)
    out = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            v1, v2 = align(curves[i], curves[j])
            try:
                r = pearson(v1, v2)
            except UndefinedCorrelationError:
                r = math.nan
            out[i, j] = out[j, i] = r
    return out
