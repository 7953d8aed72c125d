"""Closed-form mean-field results for the grand-canonical two-mode model.

Covers the map between the chemical potential and the limiting coupling
``lambda_D`` beyond which the grand partition function diverges, the
near-divergence estimates of Xi, the double-integral representation of its
two mean-field pieces, and the leading asymptotics of the observables.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

__all__ = [
    "Branch",
    "DivergencePoint",
    "AsymptoticPrediction",
    "NoDivergencePoint",
    "SingularIntegrand",
    "lambda_D_of_mu",
    "mu_of_lambda_D",
    "divergence_coefficient",
    "xi_coefficient",
    "xi_divergent_form",
    "xi12_integrand",
    "xi12_quadrature",
    "asymptotics",
    "min_exponent",
]

SEAM_MU = -1.5


class NoDivergencePoint(ValueError):
    """mu >= -1: the sum diverges for every positive coupling."""


class SingularIntegrand(ArithmeticError):
    """The csch argument of the mean-field integrand reaches zero."""


class Branch(str, enum.Enum):
    LE1 = "LE1"  # lambda_D <= 1
    GT1 = "GT1"  # lambda_D > 1


@dataclass(frozen=True)
class DivergencePoint:
    lambda_d: float
    mu: float
    branch: Branch


@dataclass(frozen=True)
class AsymptoticPrediction:
    coefficient: float
    mean_m: float
    mean_f: float
    energy: float
    sigma_m: float


def lambda_D_of_mu(mu: float) -> DivergencePoint:
    """Limiting coupling for chemical potential ``mu`` (requires mu < -1)."""
    mu = float(mu)
    if not mu < -1.0:
        raise NoDivergencePoint(f"no convergent coupling exists for mu={mu} (need mu < -1)")
    if mu >= SEAM_MU:
        return DivergencePoint(-2.0 * (1.0 + mu), mu, Branch.LE1)
    return DivergencePoint(0.5 * (-mu + math.sqrt(mu * mu - 2.0)), mu, Branch.GT1)


def mu_of_lambda_D(lambda_d: float) -> DivergencePoint:
    """Chemical potential at which ``lambda_d`` is the limiting coupling."""
    lambda_d = float(lambda_d)
    if not lambda_d > 0:
        raise ValueError(f"lambda_D must be positive, got {lambda_d}")
    if lambda_d <= 1.0:
        return DivergencePoint(lambda_d, -(1.0 + lambda_d / 2.0), Branch.LE1)
    return DivergencePoint(lambda_d, -(lambda_d + 1.0 / (2.0 * lambda_d)), Branch.GT1)


def divergence_coefficient(lambda_d: float) -> float:
    """c in <M> ~ c / (beta (lambda_D - lambda)); jumps at lambda_D = 1."""
    if lambda_d < 1.0:
        return 2.0
    if lambda_d == 1.0:
        return 2.5
    return 1.0 / (1.0 - 1.0 / (2.0 * lambda_d**2))


def _check_beta(beta):
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")


def xi_coefficient(lam: float, lambda_d: float, beta: float) -> float:
    """Finite prefactor of the pole term of Xi (xi_<= or xi_>)."""
    _check_beta(beta)
    if not 0 < lam <= lambda_d:
        raise ValueError(f"need 0 < lambda <= lambda_D, got lambda={lam}, lambda_D={lambda_d}")
    gap = lambda_d - lam
    if lambda_d <= 1.0:
        ratio = 1.0 if lam == 1.0 else gap / (1.0 - lam)
        inner = math.sqrt(1.5 * (1.0 - lam + lam * lam * ratio)) + 1.5 * math.sqrt(1.0 - lam)
        return math.pi / (beta * (1.0 - math.exp(-2.0 * beta))) / math.sqrt(inner)
    if lam <= 1.0:
        raise ValueError(f"the lambda_D > 1 estimate needs lambda > 1, got {lam}")
    shift = lam - 1.0 / (2.0 * lambda_d)
    if gap == 0.0:
        bracket = math.pi
    else:
        arg = math.sqrt(3.0 * (lam * lam - 1.0) ** 2 / (4.0 * lam * lam * gap * shift))
        bracket = math.pi / 2.0 + math.atan(arg)
    denom = beta * (1.0 - math.exp(-2.0 * beta * lam)) * math.sqrt(1.5 * (lam * lam - 1.0)) * shift
    return lam * lam * bracket / denom


def xi_divergent_form(lam: float, lambda_d: float, beta: float) -> float:
    """Pole part of Xi near the divergence (without the ``1 + Xi_2`` remainder)."""
    if not 0 < lam < lambda_d:
        raise ValueError(f"need 0 < lambda < lambda_D, got lambda={lam}, lambda_D={lambda_d}")
    xi = xi_coefficient(lam, lambda_d, beta)
    if lambda_d <= 1.0:
        return xi / ((lambda_d - lam) * (1.0 - lam) ** 0.25)
    return xi / (lambda_d - lam)


def min_exponent(lam: float, beta: float, mu: float) -> float:
    """Minimum over (v, w) of the csch argument of the Xi_1 integrand.

    Equals ``beta (e_G(lam) - mu)``; positive exactly when lam < lambda_D(mu).
    """
    if lam <= 1.0:
        return beta * (-mu - 1.0 - lam / 2.0)
    return beta * (-mu - lam - 1.0 / (2.0 * lam))


def xi12_integrand(v: float, w: float, lam: float, beta: float, mu: float, sign: int = -1) -> float:
    """Integrand of Xi_1 (``sign=-1``) or Xi_2 (``sign=+1``) without 1/(8 pi).

    ``csch(A/2)**2 / (1 - exp(2 sign s))`` with
    ``s = sqrt(beta (lam w^2 + beta))`` and
    ``A = (v^2 + w^2)/2 - v sqrt(beta lam) - mu beta + sign s``.
    Written with expm1 so large A underflows cleanly instead of overflowing.
    """
    s = math.sqrt(beta * (lam * w * w + beta))
    a = 0.5 * (v * v + w * w) - v * math.sqrt(beta * lam) - mu * beta + sign * s
    if a <= 0.0:
        raise SingularIntegrand(f"csch argument {a} <= 0 at v={v}, w={w}")
    csch2 = 4.0 * math.exp(-a) / math.expm1(-a) ** 2
    return csch2 / -math.expm1(2.0 * sign * s)


def _minima_w(lam, beta):
    if lam <= 1.0:
        return [0.0]
    w = math.sqrt(beta * (lam - 1.0 / lam))
    return [-w, w]


def xi12_quadrature(
    lam: float,
    beta: float,
    mu: float,
    guard: float = 1e-3,
    epsrel: float = 1e-9,
    full_output: bool = False,
    radius: float | None = None,
):
    """Mean-field pieces ``(Xi_1, Xi_2)`` by nested adaptive Gauss-Kronrod.

    The square domain is centred on the integrand's peak and its half-width
    doubled until the integrand on the boundary falls below 1e-12 of the
    peak.  With ``full_output`` a dict with the truncation radius and the
    combined error estimates is appended.  Passing ``radius`` skips the
    search and integrates over that fixed half-width.
    """
    _check_beta(beta)
    lam_d = lambda_D_of_mu(mu).lambda_d
    if lam >= lam_d - guard:
        raise SingularIntegrand(
            f"lambda={lam} is within {guard} of lambda_D={lam_d}; the integrand is too close to its pole"
        )
    if min_exponent(lam, beta, mu) <= 0.0:
        raise SingularIntegrand("csch argument changes sign inside the domain")

    v0 = math.sqrt(beta * lam)
    w_peaks = _minima_w(lam, beta)
    peak = xi12_integrand(v0, w_peaks[0], lam, beta, mu, -1)

    edge = np.linspace(-1.0, 1.0, 201)
    fixed = radius is not None
    radius = 4.0 if radius is None else float(radius)
    while not fixed:
        pts = [(v0 + radius * t, radius * side) for t in edge for side in (-1.0, 1.0)]
        pts += [(v0 + radius * side, radius * t) for t in edge for side in (-1.0, 1.0)]
        edge_max = max(xi12_integrand(v, w, lam, beta, mu, -1) for v, w in pts)
        if edge_max < 1e-12 * peak:
            break
        radius *= 2.0
        if radius > 1e4:
            raise SingularIntegrand("integrand does not decay; cannot truncate the domain")

    results = []
    errors = []
    for sign in (-1, 1):
        inner_err = [0.0]

        def inner(w, sign=sign, inner_err=inner_err):
            val, err = integrate.quad(
                lambda v: xi12_integrand(v, w, lam, beta, mu, sign),
                v0 - radius,
                v0 + radius,
                points=[v0],
                epsabs=0.0,
                epsrel=epsrel,
                limit=200,
            )
            inner_err[0] = max(inner_err[0], abs(err) / max(abs(val), 1e-300))
            return val

        val, err = integrate.quad(
            inner,
            -radius,
            radius,
            points=[p for p in w_peaks if p != 0.0] or None,
            epsabs=0.0,
            epsrel=10 * epsrel,
            limit=200,
        )
        results.append(val / (8.0 * math.pi))
        errors.append(abs(err) / max(abs(val), 1e-300) + inner_err[0])

    xi1, xi2 = results
    if full_output:
        return xi1, xi2, {"radius": radius, "relerr": tuple(errors), "peak": peak}
    return xi1, xi2


def asymptotics(lam: float, lambda_d: float, beta: float) -> AsymptoticPrediction:
    """Leading-order observables as lambda -> lambda_D from below."""
    _check_beta(beta)
    if not 0 < lam < lambda_d:
        raise ValueError(f"need 0 < lambda < lambda_D, got lambda={lam}, lambda_D={lambda_d}")
    c = divergence_coefficient(lambda_d)
    mean_m = c / (beta * (lambda_d - lam))
    if lambda_d <= 1.0:
        mean_f = 0.5 * mean_m
    else:
        mean_f = (1.0 - 1.0 / (2.0 * lambda_d**2)) * mean_m
    mu = mu_of_lambda_D(lambda_d).mu
    sigma = math.sqrt(0.8) * mean_m if lambda_d == 1.0 else mean_m
    return AsymptoticPrediction(c, mean_m, mean_f, mu * mean_m, sigma)
