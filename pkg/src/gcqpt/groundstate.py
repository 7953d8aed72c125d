"""Coherent-state variational ground state.

All ``M`` bosons occupy the single mode ``b = cos(t) a1 - sin(t) a2``.
With ``u = sin 2t`` the exact finite-M expectation value of the sector
Hamiltonian is::

    E(t) = -M u - lam u**2 / 2 - lam M (1 - u**2 / 2)

which depends on ``t`` only through ``u`` and is therefore symmetric under
``t -> pi/2 - t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from scipy.special import gammaln

__all__ = [
    "GroundStateResult",
    "variational_energy",
    "fock_expectation",
    "golden_section",
    "minimize_theta",
    "gs_energy_density",
]

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class GroundStateResult:
    M: int
    lam: float
    theta_stars: Tuple[float, ...]
    energy: float

    @property
    def energy_density(self) -> float:
        return self.energy / self.M


def _excess(theta: float, M: int, lam: float) -> float:
    # E(theta) - E(pi/4), written in w = 1 - u = (cos - sin)**2 so that the
    # O(M) offset never enters the comparison
    w = (math.cos(theta) - math.sin(theta)) ** 2
    return w * (M - lam * (M - 1)) + 0.5 * lam * (M - 1) * w * w


def _energy_at_quarter(M: int, lam: float) -> float:
    return -M - lam / 2.0 - lam * M / 2.0


def variational_energy(theta: float, M: int, lam: float) -> float:
    """<G(theta)| H_M |G(theta)> for the M-boson coherent state."""
    if M < 1:
        raise ValueError("variational state needs M >= 1")
    return _energy_at_quarter(M, lam) + _excess(theta, M, lam)


def fock_expectation(theta: float, M: int, lam: float) -> float:
    """Same expectation, evaluated by brute force in the Fock basis.

    Slow and limited to moderate M; kept as an independent check of the
    closed form.
    """
    from .spectrum import build_hamiltonian

    n = np.arange(M + 1)
    c, s = math.cos(theta), math.sin(theta)
    logbinom = gammaln(M + 1) - gammaln(n + 1) - gammaln(M - n + 1)
    with np.errstate(divide="ignore"):
        amp = np.exp(0.5 * logbinom) * np.power(c, n) * np.power(-s, M - n)
    H = build_hamiltonian(M, lam)
    return float(amp @ H.matvec(amp))


def golden_section(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10):
    """Minimise a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def minimize_theta(M: int, lam: float, grid: int = 1000, tol: float = 1e-10) -> GroundStateResult:
    """Global minimum of the variational energy over ``theta in [0, pi]``.

    A coarse scan locates the basin, golden-section search refines it.  For
    ``lam >= 1`` the symmetric partner ``pi/2 - theta`` is refined
    independently and both angles are returned (they coincide at pi/4 when
    the two minima have merged).
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if lam <= 0:
        raise ValueError("coupling must be positive")

    def f(t):
        return _excess(t, M, lam)

    thetas = np.linspace(0.0, math.pi, grid + 1)
    vals = np.array([f(t) for t in thetas])
    step = thetas[1] - thetas[0]

    def refine(t0):
        lo = max(t0 - step, 0.0)
        hi = min(t0 + step, math.pi)
        return golden_section(f, lo, hi, tol)

    if lam < 1.0:
        t, ex = refine(thetas[int(np.argmin(vals))])
        return GroundStateResult(M, lam, (t,), _energy_at_quarter(M, lam) + ex)

    half = thetas <= math.pi / 4
    left = thetas[half][int(np.argmin(vals[half]))]
    right_mask = (thetas >= math.pi / 4) & (thetas <= math.pi / 2)
    right = thetas[right_mask][int(np.argmin(vals[right_mask]))]
    t1, ex1 = refine(left)
    t2, ex2 = refine(right)
    if t1 > t2:
        t1, t2 = t2, t1
    return GroundStateResult(M, lam, (t1, t2), _energy_at_quarter(M, lam) + min(ex1, ex2))


def gs_energy_density(lam: float) -> float:
    """Thermodynamic-limit ground-state energy per particle."""
    if lam <= 0:
        raise ValueError("coupling must be positive")
    if lam < 1.0:
        return -(1.0 + lam / 2.0)
    return -(lam + 1.0 / (2.0 * lam))
