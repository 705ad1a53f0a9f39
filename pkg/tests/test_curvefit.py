import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lcforecast.curvefit import (
    GompertzParams,
    InsufficientDataError,
    LearningCurve,
    UndefinedCorrelationError,
    correlation_matrix,
    extrapolate,
    fit_gompertz,
    fit_gompertz_xy,
    forecast_from_prefix,
    gompertz,
    gompertz_jacobian,
    initial_guess,
    pearson,
    time_to_accuracy,
)

from .oracles import bisect_time, gompertz_ref

REF = GompertzParams(0.8, -0.4, -0.14)
TRIPLES = [(0.8, -0.4, -0.14), (0.69, -0.35, -0.06), (0.66, -0.78, -0.12), (0.68, -2.18, -0.05)]
T30 = np.arange(1, 31, dtype=float)

valid_params = st.builds(
    GompertzParams,
    st.floats(0.05, 1.0),
    st.floats(-5.0, -0.01),
    st.floats(-2.0, -0.005),
)


def _curve(p, t=T30, noise=0.0, seed=0, task="x"):
    y = gompertz(p, t) + np.random.default_rng(seed).normal(0, noise, t.size) if noise else gompertz(p, t)
    return LearningCurve(task, t, np.clip(y, 0, 1))


class TestModel:
    def test_fig7_at_zero(self):
        assert gompertz(REF, 0.0) == pytest.approx(0.8 * math.exp(-0.4), abs=1e-12)
        assert gompertz(REF, 0.0) == pytest.approx(0.53626, abs=5e-6)

    def test_unit_params(self):
        assert gompertz(GompertzParams(1, -1, -1), 0.0) == pytest.approx(math.exp(-1), abs=1e-15)

    @pytest.mark.parametrize("triple", TRIPLES)
    def test_limit(self, triple):
        assert gompertz(GompertzParams(*triple), 1e4) == pytest.approx(triple[0], abs=1e-9)

    def test_sign_constraints(self):
        for bad in [(0.0, -1, -1), (1, 0.5, -1), (1, -1, 0.0)]:
            with pytest.raises(ValueError):
                GompertzParams(*bad)

    def test_extreme_time_safe(self):
        assert gompertz(GompertzParams(0.9, -3.0, -0.5), -1e4) == 0.0

    @given(valid_params, st.floats(-20, 200), st.floats(0.01, 50))
    def test_increasing_and_bounded(self, p, t, dt):
        lo, hi = gompertz(p, t), gompertz(p, t + dt)
        assert 0.0 <= lo <= hi <= p.a

    def test_jacobian_finite_difference(self):
        rng = np.random.default_rng(0)
        h = 1e-6
        for _ in range(100):
            p = GompertzParams(rng.uniform(0.1, 1), rng.uniform(-3, -0.05), rng.uniform(-1, -0.01))
            t = rng.uniform(0, 60)
            jac = gompertz_jacobian(p, np.array([t]))[0]
            base = np.array(p.as_tuple())
            for j in range(3):
                up, dn = base.copy(), base.copy()
                up[j] += h
                dn[j] -= h
                fd = (gompertz_ref(*up, t) - gompertz_ref(*dn, t)) / (2 * h)
                # floor: central differences carry ~eps*f/h = 1e-10 rounding noise
                assert abs(jac[j] - fd) <= 1e-4 * max(abs(fd), 1e-6)


class TestFit:
    @pytest.mark.parametrize("triple", TRIPLES)
    def test_noiseless_recovery(self, triple):
        p = GompertzParams(*triple)
        fr = fit_gompertz_xy(T30, gompertz(p, T30))
        np.testing.assert_allclose(fr.params.as_tuple(), triple, rtol=1e-3)
        assert fr.rse < 1e-6 and fr.converged

    def test_fig8_curve(self):
        fr = fit_gompertz(_curve(GompertzParams(0.69, -0.35, -0.06)))
        np.testing.assert_allclose(fr.params.as_tuple(), (0.69, -0.35, -0.06), rtol=1e-3)

    def test_constant_curve(self):
        with pytest.raises(InsufficientDataError):
            fit_gompertz(LearningCurve("x", T30, [0.7] * 30))

    def test_too_few_points(self):
        with pytest.raises(InsufficientDataError):
            fit_gompertz_xy([1, 2, 3], [0.1, 0.2, 0.3])

    def test_noisy_fixed_seed(self):
        fr = fit_gompertz(_curve(REF, noise=0.02591, seed=12345))
        assert fr.converged
        assert 0.015 <= fr.rse <= 0.04

    def test_rse_definition(self):
        c = _curve(REF, noise=0.03, seed=2)
        fr = fit_gompertz(c)
        resid = np.asarray(c.values) - gompertz(fr.params, np.asarray(c.times))
        assert fr.rse == pytest.approx(math.sqrt(resid @ resid / (len(c) - 3)), rel=1e-12)

    def test_converged_within_tolerance(self):
        for seed in range(20):
            fr = fit_gompertz(_curve(REF, noise=0.02, seed=seed))
            if fr.converged:
                assert fr.tolerance_achieved <= 1e-8

    def test_init_used(self):
        fr = fit_gompertz_xy(T30, gompertz(REF, T30), init=GompertzParams(0.5, -1, -0.5))
        np.testing.assert_allclose(fr.params.as_tuple(), REF.as_tuple(), rtol=1e-6)

    def test_initial_guess_valid_on_awkward_data(self):
        for y in ([0.9, 0.8, 0.7, 0.6], [0.0, 1.0, 0.0, 1.0], [1.0, 1.0, 0.99, 1.0]):
            g = initial_guess(np.arange(1.0, 5.0), np.array(y))
            assert 0 < g.a <= 1.0 and g.b < 0 and g.c < 0

    def test_jacobian_far_left_finite(self):
        assert np.isfinite(gompertz_jacobian(REF, np.array([-1e4, 0.0]))).all()

    def test_asymptote_cap(self):
        t = np.arange(1, 6, dtype=float)
        fr = fit_gompertz(LearningCurve("e", t, [0.75, 0.725, 0.8, 0.775, 0.85], "accuracy", "week"))
        assert fr.params.a <= 1.0 and fr.converged

    @settings(max_examples=25, deadline=None)
    @given(valid_params)
    def test_signs_always_hold(self, p):
        y = np.clip(gompertz(p, T30) + np.random.default_rng(1).normal(0, 0.02, 30), 0, 1)
        if np.ptp(y) == 0:
            return
        fr = fit_gompertz_xy(T30, y)
        assert fr.params.a > 0 and fr.params.b < 0 and fr.params.c < 0


class TestForecast:
    def test_time_to_accuracy_closed_form(self):
        t = time_to_accuracy(REF, 0.75)
        assert t == pytest.approx(bisect_time(0.8, -0.4, -0.14, 0.75), abs=1e-9)
        assert t == pytest.approx(13.03, abs=0.01)

    def test_forecast_targets(self):
        fc = forecast_from_prefix(_curve(REF), 15, 100, [0.75, 0.85, 0.5])
        assert fc.t_for[0.75] == pytest.approx(13.03, abs=0.01)
        assert fc.status[0.85] == "unattainable" and fc.t_for[0.85] is None
        assert fc.status[0.5] == "reached"
        assert fc.fitted_on == 15

    def test_full_prefix_equals_full_fit(self):
        c = _curve(REF, noise=0.02, seed=4)
        assert forecast_from_prefix(c, len(c), 60).asymptote == fit_gompertz(c).params.a

    def test_noiseless_asymptote(self):
        assert forecast_from_prefix(_curve(REF), 30, 60).asymptote == pytest.approx(0.8, abs=1e-9)

    def test_prefix_bounds(self):
        c = _curve(REF)
        for k in (3, 31):
            with pytest.raises(InsufficientDataError):
                forecast_from_prefix(c, k, 60)

    def test_extrapolation_grid(self):
        fc = forecast_from_prefix(_curve(REF), 15, 100)
        ex = fc.extrapolated
        assert ex.times[0] == 1 and ex.times[-1] == 100
        np.testing.assert_allclose(np.diff(ex.times), 1.0)
        assert np.all(np.diff(ex.values) >= 0) and ex.values[-1] < fc.asymptote
        assert np.all(np.diff(np.log(fc.extrapolated_loglog.times)) > 0)

    def test_extrapolate_step(self):
        ex = extrapolate(REF, 0, 10, 2.5)
        assert ex.times.tolist() == [0, 2.5, 5, 7.5, 10]


class TestCorrelation:
    def test_hand_value(self):
        assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)

    def test_affine(self):
        x = np.array([0.3, 1.2, 2.2, 5.0])
        assert pearson(x, 2 * x + 3) == pytest.approx(1.0, abs=1e-12)
        assert pearson(x, -x) == pytest.approx(-1.0, abs=1e-12)

    @given(st.lists(st.floats(-100, 100), min_size=3, max_size=20), st.floats(0.1, 10), st.floats(-10, 10))
    def test_affine_invariance(self, xs, s, o):
        x = np.array(xs)
        y = np.sin(np.arange(x.size) * 1.7)
        if np.ptp(x) < 1e-6:
            return
        assert pearson(s * x + o, y) == pytest.approx(pearson(x, y), abs=1e-9)

    def test_constant_undefined(self):
        with pytest.raises(UndefinedCorrelationError):
            pearson([1, 1, 1], [1, 2, 3])

    def test_matrix(self):
        rng = np.random.default_rng(0)
        trend = np.linspace(0.5, 0.8, 30)
        curves = [LearningCurve(f"c{i}", T30, trend + rng.normal(0, 0.01, 30)) for i in range(3)]
        curves.append(curves[0])
        r = correlation_matrix(curves)
        assert np.array_equal(r, r.T)
        assert np.all(np.diag(r) == 1.0)
        assert (r[:3, :3] > 0).all()
        assert r[0, 3] == pytest.approx(1.0)

    def test_weekly_aligned_on_days(self):
        days = LearningCurve("d", T30, np.linspace(0.5, 0.9, 30))
        weeks = LearningCurve("w", [1, 2, 3, 4], [0.6, 0.7, 0.72, 0.8], "accuracy", "week")
        r = correlation_matrix([days, weeks])
        assert math.isfinite(r[0, 1])
        short = LearningCurve("s", [40.0, 41.0], [0.1, 0.2])
        assert math.isnan(correlation_matrix([days, short])[0, 1])
