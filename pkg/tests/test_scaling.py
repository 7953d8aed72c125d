import math

import numpy as np
import pytest

from gcqpt import scaling
from gcqpt.ensemble import EnsembleResult, ModelParams


def fake_series(distances, mean_m=None, energy=None, mean_f=None, log_xi=None, lambda_d=1.0):
    series = scaling.SweepSeries(lambda_d, 1.0, -1.5)
    for i, d in enumerate(distances):
        lam = lambda_d - d
        res = EnsembleResult(
            ModelParams(lam, 1.0, -1.5),
            log_xi=0.0 if log_xi is None else log_xi[i],
            m_max_used=10,
            converged=True,
            tolerance=1e-8,
            mean_m=None if mean_m is None else mean_m[i],
            energy=None if energy is None else energy[i],
            mean_f=None if mean_f is None else mean_f[i],
        )
        series.points.append(scaling.SweepPoint(lam, d, res))
    series.points.sort(key=lambda p: p.lam)
    return series


def test_exact_power_law():
    xs = np.geomspace(0.01, 0.1, 8)
    fit = scaling.powerlaw_fit(xs, 3.0 / xs)
    assert fit.exponent == pytest.approx(-1.0, abs=1e-12)
    assert fit.amplitude == pytest.approx(3.0, rel=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.window == (pytest.approx(0.01), pytest.approx(0.1))
    assert fit.n_points == 8


def test_noisy_fit_r_squared_in_range():
    rng = np.random.default_rng(3)
    xs = np.geomspace(0.01, 0.1, 12)
    ys = 2 * xs**-1.25 * np.exp(rng.normal(0, 0.05, xs.size))
    fit = scaling.powerlaw_fit(xs, ys)
    assert 0.0 <= fit.r_squared <= 1.0
    assert fit.exponent == pytest.approx(-1.25, abs=0.1)


def test_fit_errors():
    with pytest.raises(scaling.InsufficientPoints):
        scaling.powerlaw_fit([1, 2, 3, 4], [1, 2, 3, 4])
    with pytest.raises(scaling.NonPositiveData):
        scaling.powerlaw_fit([1, 2, 3, 4, 5], [1, 2, 0, 4, 5])
    with pytest.raises(scaling.NonPositiveData):
        scaling.powerlaw_fit([-1, 2, 3, 4, 5], [1, 2, 3, 4, 5])


def test_geometric_grid():
    g = scaling.geometric_grid(0.01, 0.1, 8)
    assert g[0] == pytest.approx(0.1) and g[-1] == pytest.approx(0.01)
    ratios = g[1:] / g[:-1]
    np.testing.assert_allclose(ratios, ratios[0])
    assert scaling.geometric_grid(0.01, 0.1, 0).size == 0
    with pytest.raises(ValueError):
        scaling.geometric_grid(0.1, 0.01, 3)


def test_empty_sweep():
    s = scaling.sweep(1.0, points=0)
    assert s.points == []
    assert s.mu == -1.5


def test_small_real_sweep_ordered_and_growing():
    s = scaling.sweep(0.5, dmin=0.2, dmax=0.4, points=3)
    lams = s.column("lambda")
    assert np.all(np.diff(lams) > 0) and np.all(lams < 0.5)
    assert len(s.converged_points()) == 3
    assert np.all(np.diff(s.column("mean_m")) > 0)
    np.testing.assert_allclose(s.column("xi_minus_one"), np.expm1(s.column("log_xi")))


def test_unconverged_point_kept():
    s = scaling.sweep(1.0, dmin=0.05, dmax=0.1, points=2, m_cap=15)
    assert len(s.points) == 2
    assert not any(p.converged for p in s.points)
    assert s.converged_points() == []


def test_fit_series_on_log_xi():
    d = np.geomspace(0.01, 0.1, 8)
    s = fake_series(d, log_xi=np.log(5.0) - 1.25 * np.log(d))
    fit = scaling.fit_series(s)
    assert fit.exponent == pytest.approx(-1.25, abs=1e-12)
    assert fit.amplitude == pytest.approx(5.0, rel=1e-12)
    fit = scaling.fit_series(s, "xi_minus_one")
    assert fit.exponent == pytest.approx(-1.25, abs=0.01)


def test_fit_series_huge_xi_stays_finite():
    d = np.geomspace(0.01, 0.1, 6)
    s = fake_series(d, log_xi=900.0 - np.log(d))
    assert scaling.fit_series(s).exponent == pytest.approx(-1.0, abs=1e-12)


def test_constant_product_extrapolates_exactly():
    d = np.geomspace(0.01, 0.1, 6)
    s = fake_series(d, mean_m=2.5 / d)
    assert scaling.divergence_coefficient(s) == pytest.approx(2.5, rel=1e-12)


def test_linear_product_extrapolates_intercept():
    d = np.geomspace(0.01, 0.1, 6)
    s = fake_series(d, mean_m=(2.0 + 3.0 * d) / d)
    assert scaling.divergence_coefficient(s) == pytest.approx(2.0, rel=1e-10)


def test_coefficient_needs_points():
    s = fake_series([0.1, 0.05], mean_m=[1.0, 2.0])
    with pytest.raises(scaling.InsufficientPoints):
        scaling.divergence_coefficient(s)


def test_exact_line():
    x = np.array([1.0, 2.0, 5.0, 9.0])
    s = fake_series([0.4, 0.3, 0.2, 0.1], mean_m=x, energy=2 * x + 1)
    slope, intercept, r2 = scaling.linear_relation_fit(s)
    assert (slope, intercept, r2) == (pytest.approx(2.0), pytest.approx(1.0), pytest.approx(1.0))


def test_line_selection():
    x = np.array([1.0, 2.0, 60.0, 70.0, 80.0])
    y = np.where(x >= 50, 0.5 * x, 10 * x)
    s = fake_series([0.5, 0.4, 0.3, 0.2, 0.1], mean_m=x, mean_f=y)
    assert scaling.linear_relation_fit(s, "mean_m", "mean_f", min_x=50)[0] == pytest.approx(0.5)
    assert scaling.linear_relation_fit(s, "mean_m", "mean_f", largest=3)[0] == pytest.approx(0.5)
    with pytest.raises(scaling.InsufficientPoints):
        scaling.linear_relation_fit(s, "mean_m", "mean_f", min_x=75)
