"""Sweeps toward the divergence and power-law / linear fits on them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import meanfield
from .ensemble import DEFAULT_MCAP, DEFAULT_TOL, EnsembleResult, ModelParams, NotConverged, observables

__all__ = [
    "InsufficientPoints",
    "NonPositiveData",
    "SweepPoint",
    "SweepSeries",
    "ScalingFit",
    "geometric_grid",
    "sweep",
    "powerlaw_fit",
    "fit_series",
    "divergence_coefficient",
    "linear_relation_fit",
]


class InsufficientPoints(ValueError):
    pass


class NonPositiveData(ValueError):
    pass


@dataclass(frozen=True)
class SweepPoint:
    lam: float
    distance: float  # lambda_D - lambda
    result: EnsembleResult

    @property
    def converged(self) -> bool:
        return self.result.converged


@dataclass
class SweepSeries:
    lambda_d: float
    beta: float
    mu: float
    points: List[SweepPoint] = field(default_factory=list)

    def converged_points(self) -> List[SweepPoint]:
        return [p for p in self.points if p.converged]

    def column(self, name: str, converged_only: bool = True) -> np.ndarray:
        pts = self.converged_points() if converged_only else self.points
        if name == "lambda":
            return np.array([p.lam for p in pts])
        if name == "distance":
            return np.array([p.distance for p in pts])
        if name == "xi_minus_one":
            return np.array([math.expm1(p.result.log_xi) for p in pts])
        return np.array([getattr(p.result, name) for p in pts], dtype=float)


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    amplitude: float
    r_squared: float
    window: Tuple[float, float]
    n_points: int


def geometric_grid(dmin: float, dmax: float, points: int) -> np.ndarray:
    """Distances lambda_D - lambda, largest first (so lambda increases)."""
    if points <= 0:
        return np.empty(0)
    if not 0 < dmin <= dmax:
        raise ValueError(f"need 0 < dmin <= dmax, got dmin={dmin}, dmax={dmax}")
    if points == 1:
        return np.array([dmin])
    return np.geomspace(dmax, dmin, points)


def sweep(
    lambda_d: float,
    beta: float = 1.0,
    dmin: float = 1e-2,
    dmax: float = 1e-1,
    points: int = 8,
    tol: float = DEFAULT_TOL,
    m_cap: int = DEFAULT_MCAP,
    with_f: bool = False,
    cache=None,
    workers: int = 1,
) -> SweepSeries:
    """Ensemble results at ``mu = mu(lambda_D)`` on a geometric grid of distances.

    A point that hits ``m_cap`` keeps its partial result and is flagged as
    unconverged; the sweep carries on.
    """
    mu = meanfield.mu_of_lambda_D(lambda_d).mu
    series = SweepSeries(lambda_d, beta, mu)
    for d in geometric_grid(dmin, dmax, points):
        lam = lambda_d - d
        params = ModelParams(lam, beta, mu)
        try:
            res = observables(params, tol=tol, m_cap=m_cap, with_f=with_f, cache=cache, workers=workers)
        except NotConverged as exc:
            res = exc.partial
        series.points.append(SweepPoint(lam, float(d), res))
    series.points.sort(key=lambda p: p.lam)
    return series


def _ols(x: np.ndarray, y: np.ndarray):
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx == 0:
        raise InsufficientPoints("all abscissae coincide")
    slope = np.sum((x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    ss_res = np.sum((y - intercept - slope * x) ** 2)
    ss_tot = np.sum((y - ym) ** 2)
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - ss_res / ss_tot)
    return float(slope), float(intercept), float(min(r2, 1.0))


def powerlaw_fit(xs: Sequence[float], ys: Sequence[float], min_points: int = 5) -> ScalingFit:
    """Least-squares line through ``(log x, log y)``: ``y ~ amplitude * x**exponent``."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape:
        raise ValueError("xs and ys differ in length")
    if x.size < min_points:
        raise InsufficientPoints(f"power-law fit needs >= {min_points} points, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise NonPositiveData("power-law fit needs strictly positive data")
    slope, intercept, r2 = _ols(np.log(x), np.log(y))
    return ScalingFit(slope, math.exp(intercept), r2, (float(x.min()), float(x.max())), int(x.size))


def fit_series(series: SweepSeries, observable: str = "xi") -> ScalingFit:
    """Power-law fit of an observable against ``lambda_D - lambda``.

    ``observable`` is ``"xi"`` (Xi itself), ``"xi_minus_one"``, or any
    EnsembleResult field such as ``"mean_m"``.
    """
    xs = series.column("distance")
    if observable == "xi":
        # fit in the log domain directly; Xi may overflow
        ly = series.column("log_xi")
        if xs.size < 5:
            raise InsufficientPoints(f"power-law fit needs >= 5 points, got {xs.size}")
        slope, intercept, r2 = _ols(np.log(xs), ly)
        amplitude = math.exp(intercept) if intercept < 709.0 else math.inf
        return ScalingFit(slope, amplitude, r2, (float(xs.min()), float(xs.max())), int(xs.size))
    return powerlaw_fit(xs, series.column(observable))


def divergence_coefficient(series: SweepSeries) -> float:
    """Extrapolate ``<M> beta (lambda_D - lambda)`` linearly to zero distance."""
    d = series.column("distance")
    if d.size < 3:
        raise InsufficientPoints(f"need >= 3 converged points, got {d.size}")
    prod = series.column("mean_m") * series.beta * d
    _, intercept, _ = _ols(d, prod)
    return intercept


def linear_relation_fit(
    series: SweepSeries,
    x_observable: str = "mean_m",
    y_observable: str = "energy",
    largest: Optional[int] = None,
    min_x: Optional[float] = None,
):
    """OLS of one observable against another over the sweep.

    ``largest`` keeps only the points with the largest x values, ``min_x``
    drops points below a threshold.  Returns ``(slope, intercept, r_squared)``.
    """
    x = series.column(x_observable)
    y = series.column(y_observable)
    keep = np.ones(x.size, dtype=bool)
    if min_x is not None:
        keep &= x >= min_x
    x, y = x[keep], y[keep]
    if largest is not None:
        idx = np.argsort(x)[-largest:]
        x, y = x[idx], y[idx]
    if x.size < 3:
        raise InsufficientPoints(f"linear fit needs >= 3 points, got {x.size}")
    return _ols(x, y)
