"""Grand partition function and ensemble averages by exact sector sums.

Each particle-number sector contributes ``exp(beta mu M) Tr exp(-beta H_M)``.
Terms are kept in the log domain: a sector is summarised by its ground
energy and ``log sum_k exp(-beta (E_k - E_0))``, and the final reduction
runs in ascending M with exactly rounded summation (``math.fsum``), so
results do not depend on the number of worker threads.

Only levels within ``(36 + log(M + 1)) / beta`` of the sector ground state
are computed; the discarded Boltzmann weight is below ``exp(-36)`` relative
to the sector trace.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

from . import meanfield
from .cache import SpectrumCache
from .spectrum import Spectrum, build_hamiltonian, interaction_diagonal, low_lying

__all__ = [
    "ModelParams",
    "EnsembleResult",
    "SectorTrace",
    "DivergentRegime",
    "NotConverged",
    "DEFAULT_TOL",
    "DEFAULT_MCAP",
    "boltzmann_window",
    "sector_trace",
    "log_partition_term",
    "grand_partition",
    "observables",
    "check_convergent",
]

DEFAULT_TOL = 1e-7
DEFAULT_MCAP = 50_000
STOP_RUN = 10
WINDOW_LOG_MARGIN = 36.0

_default_cache = SpectrumCache()


class DivergentRegime(ArithmeticError):
    """lambda >= lambda_D(mu): the grand partition sum does not converge."""


class NotConverged(ArithmeticError):
    """The sector cap was reached before the stopping rule fired."""

    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class ModelParams:
    lam: float
    beta: float
    mu: float

    def __post_init__(self):
        for name in ("lam", "beta", "mu"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.lam < 0:
            raise ValueError(f"coupling must be non-negative, got {self.lam}")

    @classmethod
    def at_lambda_d(cls, lam: float, lambda_d: float, beta: float = 1.0) -> "ModelParams":
        return cls(lam, beta, meanfield.mu_of_lambda_D(lambda_d).mu)

    @property
    def lambda_d(self) -> Optional[float]:
        try:
            return meanfield.lambda_D_of_mu(self.mu).lambda_d
        except meanfield.NoDivergencePoint:
            return None


@dataclass(frozen=True)
class EnsembleResult:
    params: ModelParams
    log_xi: float
    m_max_used: int
    converged: bool
    tolerance: float
    mean_m: Optional[float] = None
    mean_m2: Optional[float] = None
    sigma_m: Optional[float] = None
    energy: Optional[float] = None
    mean_f: Optional[float] = None

    @property
    def xi(self) -> float:
        """Xi itself, or inf when it overflows a double."""
        return math.exp(self.log_xi) if self.log_xi < 709.0 else math.inf


@dataclass(frozen=True)
class SectorTrace:
    """Thermal summary of one sector at inverse temperature beta."""

    M: int
    e0: float
    log_z: float  # log sum_k exp(-beta (E_k - E0))
    energy: float  # <H_M> in the sector
    mean_f: Optional[float] = None

    def log_term(self, beta: float, mu: float) -> float:
        return beta * mu * self.M - beta * self.e0 + self.log_z


def boltzmann_window(M: int, beta: float) -> float:
    """Energy window above E0 that keeps the sector trace exact to double precision."""
    w = (WINDOW_LOG_MARGIN + math.log(M + 1.0)) / beta
    # round up so nearby beta values share cached spectra
    return 4.0 * math.ceil(w / 4.0)


def _sector_spectrum(M, lam, beta, with_f, cache) -> Spectrum:
    window = boltzmann_window(M, beta)
    if with_f:
        S = low_lying(build_hamiltonian(M, lam), window, vectors=True)
        if cache is not None:
            cache.put(M, lam, replace(S, eigenvectors=None))
        return S
    if cache is None:
        return low_lying(build_hamiltonian(M, lam), window)
    return cache.get(M, lam, window, compute=lambda: low_lying(build_hamiltonian(M, lam), window))


def sector_trace(M: int, lam: float, beta: float, with_f: bool = False, cache=None) -> SectorTrace:
    """Shifted trace, mean energy and (optionally) mean interaction of sector M."""
    S = _sector_spectrum(M, lam, beta, with_f, cache)
    E = np.asarray(S.eigenvalues)
    e0 = float(E[0])
    x = E - e0
    wts = np.exp(-beta * x)
    z = float(np.sum(wts))
    energy = e0 + float(np.dot(x, wts)) / z
    mean_f = None
    if with_f:
        g = interaction_diagonal(M)
        f_k = g @ (np.asarray(S.eigenvectors) ** 2)
        mean_f = float(np.dot(f_k, wts)) / z
    return SectorTrace(M, e0, math.log(z), energy, mean_f)


def log_partition_term(M: int, params: ModelParams, cache=None) -> float:
    """``log[exp(beta mu M) Tr exp(-beta H_M)]`` for one sector."""
    return sector_trace(M, params.lam, params.beta, cache=cache).log_term(params.beta, params.mu)


def check_convergent(params: ModelParams) -> float:
    """Return lambda_D(mu), raising DivergentRegime if the sum cannot converge."""
    try:
        lam_d = meanfield.lambda_D_of_mu(params.mu).lambda_d
    except meanfield.NoDivergencePoint as exc:
        raise DivergentRegime(str(exc)) from exc
    if params.lam >= lam_d:
        raise DivergentRegime(
            f"lambda={params.lam} >= lambda_D={lam_d:.12g} for mu={params.mu}: grand partition sum diverges"
        )
    return lam_d


def _collect(params, tol, m_cap, with_f, cache, workers, batch=32):
    """Sector traces in ascending M until the stopping rule fires.

    Stop once ``STOP_RUN`` consecutive terms are decreasing and each one's
    geometric tail estimate ``t r / (1 - r)`` is below ``tol`` times the
    partial sum.  Returns ``(traces, log_terms, converged, tail)``.
    """
    beta, mu, lam = params.beta, params.mu, params.lam
    traces: List[SectorTrace] = []
    logs: List[float] = []
    log_s = -math.inf
    run = 0
    tail = math.inf
    log_tol = math.log(tol)
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    if pool is None:
        batch = 1
    try:
        M = 0
        while M <= m_cap:
            ms = range(M, min(M + batch, m_cap + 1))
            if pool is None:
                chunk = [sector_trace(m, lam, beta, with_f, cache) for m in ms]
            else:
                chunk = list(pool.map(lambda m: sector_trace(m, lam, beta, with_f, cache), ms))
            for tr in chunk:
                lt = tr.log_term(beta, mu)
                log_s = np.logaddexp(log_s, lt)
                if logs and lt < logs[-1]:
                    log_r = lt - logs[-1]
                    # log of t r / (1 - r) relative to the partial sum
                    log_tail = lt + log_r - math.log(-math.expm1(log_r)) - log_s
                    run = run + 1 if log_tail < log_tol else 0
                    tail = math.exp(log_tail)
                else:
                    run = 0
                    tail = math.inf
                traces.append(tr)
                logs.append(lt)
                if run >= STOP_RUN:
                    return traces, logs, True, tail
            M += batch
    finally:
        if pool is not None:
            pool.shutdown()
    return traces, logs, False, tail


def _reduce(params, traces, logs, converged, tail, moments):
    logs_a = np.asarray(logs)
    top = float(logs_a.max())
    ew = np.exp(logs_a - top)
    s = math.fsum(ew)
    log_xi = top + math.log(s)
    out = dict(
        params=params,
        log_xi=log_xi,
        m_max_used=traces[-1].M,
        converged=converged,
        tolerance=tail,
    )
    if moments:
        w = ew / s
        Ms = np.array([t.M for t in traces], dtype=np.float64)
        mean_m = math.fsum(Ms * w)
        out["mean_m"] = mean_m
        out["mean_m2"] = math.fsum(Ms * Ms * w)
        out["sigma_m"] = math.sqrt(math.fsum((Ms - mean_m) ** 2 * w))
        out["energy"] = math.fsum(np.array([t.energy for t in traces]) * w)
        if traces[0].mean_f is not None:
            out["mean_f"] = math.fsum(np.array([t.mean_f for t in traces]) * w)
    return EnsembleResult(**out)


def _run(params, tol, m_cap, with_f, cache, workers, moments):
    if not tol > 0:
        raise ValueError("tol must be positive")
    if m_cap < 1:
        raise ValueError("m_cap must be >= 1")
    check_convergent(params)
    if cache is None:
        cache = _default_cache
    traces, logs, converged, tail = _collect(params, tol, m_cap, with_f, cache, max(1, int(workers)))
    result = _reduce(params, traces, logs, converged, tail, moments)
    if not converged:
        raise NotConverged(
            f"no convergence to tol={tol} within m_cap={m_cap} sectors "
            f"(lambda={params.lam}, beta={params.beta}, mu={params.mu})",
            result,
        )
    return result


def grand_partition(
    params: ModelParams,
    tol: float = DEFAULT_TOL,
    m_cap: int = DEFAULT_MCAP,
    cache: Optional[SpectrumCache] = None,
    workers: int = 1,
) -> EnsembleResult:
    """Xi (as ``log_xi``) with truncation diagnostics."""
    return _run(params, tol, m_cap, False, cache, workers, moments=False)


def observables(
    params: ModelParams,
    tol: float = DEFAULT_TOL,
    m_cap: int = DEFAULT_MCAP,
    with_f: bool = False,
    cache: Optional[SpectrumCache] = None,
    workers: int = 1,
) -> EnsembleResult:
    """Xi together with <M>, <M^2>, sigma_M, E and optionally <F>.

    ``with_f`` needs eigenvectors of every retained level and is several
    times slower.
    """
    return _run(params, tol, m_cap, with_f, cache, workers, moments=True)
