"""Acceptance gate: one test (and one reported PASS/FAIL line) per criterion.

The four sweeps at beta = 1 are computed once per session; expect several
minutes in total, most of it spent on eigenvectors for <F>.
"""
import math

import numpy as np
import pytest

from gcqpt import meanfield as mf
from gcqpt import scaling
from gcqpt.cache import SpectrumCache
from gcqpt.ensemble import ModelParams, grand_partition, observables
from gcqpt.groundstate import gs_energy_density, minimize_theta
from gcqpt.spectrum import build_hamiltonian, build_lmg_matrix, eigenvalues
from oracles import dense_fock_matrix, jacobi_eigenvalues, xi_free

REPORT = {}

BETA = 1.0
DMIN, DMAX, POINTS = 1e-2, 1e-1, 8


class Checks:
    """Collects named sub-checks so one criterion reports all of them."""

    def __init__(self, number, title):
        self.number = number
        self.title = title
        self.items = []

    def check(self, label, ok, detail=""):
        self.items.append((label, bool(ok), detail))

    def finish(self):
        ok = all(flag for _, flag, _ in self.items)
        failed = [f"{label} ({detail})" for label, flag, detail in self.items if not flag]
        summary = "; ".join(f"{label}: {detail}" for label, _, detail in self.items)
        REPORT[self.number] = (self.title, ok, summary)
        print(f"criterion {self.number} [{self.title}]: {'PASS' if ok else 'FAIL'}")
        assert ok, "failed: " + "; ".join(failed)


@pytest.fixture(scope="module")
def sweeps():
    # <F> needs eigenvectors; skip them where no criterion uses <F>
    with_f = {0.5: True, 1.0: True, 1.5: False, 2.0: True}
    out = {}
    for ld, wf in with_f.items():
        series = scaling.sweep(ld, BETA, DMIN, DMAX, POINTS, with_f=wf, cache=SpectrumCache())
        near = observables(ModelParams.at_lambda_d(ld - 0.02, ld, BETA), cache=SpectrumCache())
        out[ld] = (series, near)
    return out


def _rel(a, b):
    return abs(a - b) / abs(b)


def test_criterion_1_xi_exponents(sweeps):
    c = Checks(1, "Xi power-law exponents")
    for ld, target in ((0.5, -1.0), (1.5, -1.0), (1.0, -1.25)):
        series = sweeps[ld][0]
        c.check(f"lambda_D={ld} all converged", len(series.converged_points()) == POINTS)
        fit = scaling.fit_series(series, "xi")
        # diagnostics only: the closed-form pole term fitted on the same grid,
        # and the local slope d log Xi / d log(distance) = -beta d <F> at the
        # closest point (when <F> was computed)
        d = series.column("distance")
        form = scaling.powerlaw_fit(d, [mf.xi_divergent_form(ld - x, ld, BETA) for x in d]).exponent
        note = f"closed-form slope on same grid {form:.4f}"
        last = series.points[-1].result
        if last.mean_f is not None:
            note += f", local slope at d={series.points[-1].distance:g}: {-BETA * series.points[-1].distance * last.mean_f:.4f}"
        c.check(f"lambda_D={ld} exponent", abs(fit.exponent - target) <= 0.05,
                f"{fit.exponent:.4f} vs {target} +- 0.05, r2={fit.r_squared:.6f}; {note}")
    c.finish()


def test_criterion_2_divergence_coefficient(sweeps):
    c = Checks(2, "divergence coefficient")
    for ld, target in ((0.5, 2.0), (1.0, 2.5), (2.0, 8.0 / 7.0)):
        series, near = sweeps[ld]
        coef = scaling.divergence_coefficient(series)
        c.check(f"lambda_D={ld} extrapolated", _rel(coef, target) <= 0.10, f"{coef:.4f} vs {target:.4f}")
        pred = mf.asymptotics(ld - 0.02, ld, BETA).mean_m
        c.check(f"lambda_D={ld} <M> at d=0.02", _rel(near.mean_m, pred) <= 0.15,
                f"{near.mean_m:.3f} vs {pred:.3f}")
    c.finish()


def test_criterion_3_energy_linearity(sweeps):
    c = Checks(3, "energy vs <M> slope")
    for ld in (0.5, 1.0, 2.0):
        slope, _, _ = scaling.linear_relation_fit(sweeps[ld][0], "mean_m", "energy", largest=3)
        mu = mf.mu_of_lambda_D(ld).mu
        c.check(f"lambda_D={ld}", _rel(slope, mu) <= 0.01, f"{slope:.5f} vs {mu}")
    c.finish()


def test_criterion_4_interaction_ratio(sweeps):
    c = Checks(4, "<F> vs <M> slope")
    for ld, target in ((0.5, 0.5), (1.0, 0.5), (2.0, 7.0 / 8.0)):
        slope, _, _ = scaling.linear_relation_fit(sweeps[ld][0], "mean_m", "mean_f", min_x=50.0)
        c.check(f"lambda_D={ld}", _rel(slope, target) <= 0.10, f"{slope:.4f} vs {target:.4f}")
    c.finish()


def test_criterion_5_fluctuation_ratio(sweeps):
    c = Checks(5, "sigma_M / <M>")
    for ld, target in ((1.5, 1.0), (1.0, math.sqrt(0.8))):
        series = sweeps[ld][0]
        pt = min(series.points, key=lambda p: abs(p.distance - 0.01))
        ratio = pt.result.sigma_m / pt.result.mean_m
        c.check(f"lambda_D={ld}", abs(ratio - target) <= 0.1, f"{ratio:.4f} vs {target:.4f}")
    c.finish()


def _log_xi(lam, beta, mu):
    return grand_partition(ModelParams(lam, beta, mu), tol=1e-15).log_xi


def test_criterion_6_oracle_equivalences():
    c = Checks(6, "oracle equivalences")
    worst_dense = worst_lmg = 0.0
    for lam in (0.0, 0.5, 1.0, 2.0):
        for M in range(1, 65):
            got = eigenvalues(build_hamiltonian(M, lam)).eigenvalues
            lmg = np.linalg.eigvalsh(build_lmg_matrix(M, lam))
            worst_lmg = max(worst_lmg, np.max(np.abs(got - lmg)))
            if M <= 24 or M % 8 == 0:
                ref = jacobi_eigenvalues(dense_fock_matrix(M, lam))
                worst_dense = max(worst_dense, np.max(np.abs(got - ref)) / np.max(np.abs(ref)))
    c.check("(a) tridiagonal vs Jacobi", worst_dense <= 1e-10, f"max rel {worst_dense:.2e}")
    c.check("(b) Fock vs LMG", worst_lmg <= 1e-9, f"max abs {worst_lmg:.2e}")

    worst_free = 0.0
    for beta, mu in ((1.0, -2.0), (0.5, -1.5), (2.0, -1.2)):
        res = grand_partition(ModelParams(0.0, beta, mu))
        worst_free = max(worst_free, _rel(res.xi, xi_free(beta, mu)))
    c.check("(c) zero-coupling Xi", worst_free <= 1e-7, f"max rel {worst_free:.2e}")

    worst = 0.0
    h1, h2 = 1e-6, 1e-4
    for lam in (0.3, 1.1, 1.9):
        for mu in (-2.5, -3.0, -3.5):
            r = observables(ModelParams(lam, BETA, mu), tol=1e-15, with_f=True)
            f = lambda dl=0.0, db=0.0, dm=0.0: _log_xi(lam + dl, BETA + db, mu + dm)
            base = f()
            mean_m = (f(dm=h1) - f(dm=-h1)) / (2 * h1 * BETA)
            var = (f(dm=h2) - 2 * base + f(dm=-h2)) / (h2 * BETA) ** 2
            mean_f = (f(dl=h1) - f(dl=-h1)) / (2 * h1 * BETA)
            energy = mu * r.mean_m - (f(db=h1) - f(db=-h1)) / (2 * h1)
            worst = max(worst, _rel(r.mean_m, mean_m), _rel(r.sigma_m**2, var),
                        _rel(r.mean_f, mean_f), _rel(r.energy, energy))
    c.check("(d) derivative identities", worst <= 1e-4, f"max rel {worst:.2e}")
    c.finish()


def test_criterion_7_ground_state():
    c = Checks(7, "ground state")
    r = minimize_theta(10**6, 0.5)
    c.check("theta* at lambda=0.5", abs(r.theta_stars[0] - math.pi / 4) <= 1e-4, f"{r.theta_stars[0]:.8f}")
    c.check("E_G/M at lambda=0.5", abs(r.energy_density + 1.25) <= 1e-4, f"{r.energy_density:.8f}")
    r = minimize_theta(10**6, 2.0)
    t1 = r.theta_stars[0]
    c.check("theta_1* at lambda=2", abs(t1 - 0.5 * math.asin(0.5)) <= 1e-4, f"{t1:.8f}")
    c.check("theta_2* = pi/2 - theta_1*", abs(r.theta_stars[1] + t1 - math.pi / 2) <= 1e-4)
    c.check("E_G/M at lambda=2", abs(r.energy_density + 2.25) <= 1e-4, f"{r.energy_density:.8f}")

    seam = max(abs(mf.lambda_D_of_mu(-1.5 + s).lambda_d - 1.0 + 2 * s) for s in (1e-13, -1e-13, 0.0))
    c.check("branch continuity", seam <= 1e-12 and mf.mu_of_lambda_D(1.0).mu == -1.5, f"{seam:.1e}")
    h = 1e-3
    e = gs_energy_density
    left2 = (e(1 - 2 * h) - 2 * e(1 - h) + e(1.0)) / h**2
    right2 = (e(1.0) - 2 * e(1 + h) + e(1 + 2 * h)) / h**2
    jump = left2 - right2
    c.check("second-derivative jump", abs(jump - 1.0) <= 1e-2, f"{jump:.5f}")
    same = all(e(x) == mf.mu_of_lambda_D(x).mu for x in (0.25, 0.5, 1.0, 1.5, 2.0, 3.0))
    c.check("mu(lambda_D) = e_G(lambda_D)", same)
    c.finish()


def test_criterion_8_smooth_across_critical_coupling():
    c = Checks(8, "smoothness of log Xi across lambda = 1")
    lams = np.array([0.8, 0.85, 0.9, 0.95, 1.0, 1.05, 1.1, 1.15, 1.2])
    y = np.array([grand_partition(ModelParams(l, BETA, -2.5), tol=1e-12).log_xi for l in lams])
    d2 = np.diff(y, 2) / 0.05**2
    c.check("second differences finite", np.all(np.isfinite(d2)))
    spread = np.max(np.abs(np.diff(d2))) / np.max(np.abs(d2))
    c.check("neighbouring second differences comparable", spread < 0.1,
            "d2 = " + ", ".join(f"{v:.4f}" for v in d2))
    c.finish()
