"""Fock-sector Hamiltonian of the attractive two-mode boson model.

In the sector with ``M`` bosons the basis is ``|n>_1 |M-n>_2`` for
``n = 0..M``.  Hopping couples neighbouring occupations and the attractive
interaction is diagonal, so the sector Hamiltonian is a real symmetric
tridiagonal matrix::

    diag[n]    = -(lam / M) * (n**2 + (M - n)**2)
    offdiag[n] = sqrt((n + 1) * (M - n))

Energies are measured in units of half the single-particle splitting.

Swapping the two modes maps ``|n> -> |M-n>``, which leaves the matrix
invariant.  :func:`parity_blocks` uses that to split a sector into an even
and an odd tridiagonal block of roughly half the size; the ensemble code
relies on this for speed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

__all__ = [
    "ConvergenceError",
    "UnlabeledState",
    "TridiagonalHamiltonian",
    "Spectrum",
    "build_hamiltonian",
    "interaction_diagonal",
    "eigenvalues",
    "eigensystem",
    "low_lying",
    "parity_blocks",
    "parity_labels",
    "build_lmg_matrix",
]


class ConvergenceError(ArithmeticError):
    """The tridiagonal eigensolver failed to converge."""


class UnlabeledState(ValueError):
    """An eigenvector is neither even nor odd under the mode swap."""


def _frozen(a) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TridiagonalHamiltonian:
    """Sector Hamiltonian stored as its diagonal and first off-diagonal."""

    M: int
    lam: float
    diag: np.ndarray
    offdiag: np.ndarray

    @property
    def dim(self) -> int:
        return self.M + 1

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """Apply the matrix to a vector or to the columns of a 2-D array."""
        v = np.asarray(v, dtype=np.float64)
        d = self.diag if v.ndim == 1 else self.diag[:, None]
        e = self.offdiag if v.ndim == 1 else self.offdiag[:, None]
        out = d * v
        out[:-1] += e * v[1:]
        out[1:] += e * v[:-1]
        return out


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Sorted eigenvalues of one sector, optionally with vectors and parities.

    ``cutoff`` is ``None`` for a complete spectrum.  A windowed spectrum from
    :func:`low_lying` holds every level with ``E - E0 <= cutoff``.
    """

    M: int
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None
    parities: Optional[np.ndarray] = None
    cutoff: Optional[float] = None

    @property
    def complete(self) -> bool:
        return self.cutoff is None

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    def covers(self, window: float) -> bool:
        """True if every level up to ``E0 + window`` is present."""
        return self.cutoff is None or self.cutoff >= window


def build_hamiltonian(M: int, lam: float) -> TridiagonalHamiltonian:
    """Tridiagonal matrix of the ``M``-boson sector at coupling ``lam``.

    The vacuum sector ``M = 0`` is the 1x1 zero matrix, so its trace
    contributes exactly 1 to the grand partition function.
    """
    M = int(M)
    if M < 0:
        raise ValueError(f"particle number must be non-negative, got {M}")
    lam = float(lam)
    if not np.isfinite(lam):
        raise ValueError(f"coupling must be finite, got {lam}")
    if M == 0:
        return TridiagonalHamiltonian(0, lam, _frozen([0.0]), _frozen([]))
    n = np.arange(M + 1, dtype=np.int64)
    # exact integer sum before the float scaling
    occ2 = n * n + (M - n) * (M - n)
    diag = -(lam / M) * occ2.astype(np.float64)
    m = n[:-1]
    offdiag = np.sqrt(((m + 1) * (M - m)).astype(np.float64))
    return TridiagonalHamiltonian(M, lam, _frozen(diag), _frozen(offdiag))


def interaction_diagonal(M: int) -> np.ndarray:
    """Diagonal of the interaction observable ``(n1**2 + n2**2) / M``."""
    if M == 0:
        return np.zeros(1)
    n = np.arange(M + 1, dtype=np.int64)
    return (n * n + (M - n) * (M - n)).astype(np.float64) / M


def _solve(d, e, **kwargs):
    try:
        return eigh_tridiagonal(d, e, check_finite=False, **kwargs)
    except LinAlgError as exc:
        raise ConvergenceError(f"tridiagonal eigensolver failed: {exc}") from exc


def eigenvalues(H: TridiagonalHamiltonian) -> Spectrum:
    """Full sorted spectrum (implicit QL/QR, values only)."""
    if H.dim == 1:
        return Spectrum(H.M, _frozen(H.diag.copy()))
    w = _solve(H.diag, H.offdiag, eigvals_only=True, lapack_driver="sterf")
    return Spectrum(H.M, _frozen(np.sort(w)))


def eigensystem(H: TridiagonalHamiltonian) -> Spectrum:
    """Full spectrum with orthonormal eigenvectors as columns, in energy order."""
    if H.dim == 1:
        return Spectrum(H.M, _frozen(H.diag.copy()), _frozen(np.ones((1, 1))))
    w, v = _solve(H.diag, H.offdiag, lapack_driver="stev")
    order = np.argsort(w, kind="stable")
    return Spectrum(H.M, _frozen(w[order]), _frozen(v[:, order]))


def parity_blocks(H: TridiagonalHamiltonian):
    """Split a sector into its swap-even and swap-odd tridiagonal blocks.

    Returns ``((d_even, e_even), (d_odd, e_odd))``.  The even block acts on
    ``(|n> + |M-n>)/sqrt(2)`` for ``n < M/2`` (plus ``|M/2>`` when M is
    even), the odd block on ``(|n> - |M-n>)/sqrt(2)``.  The odd block is
    empty for ``M = 0``.
    """
    M = H.M
    d, e = H.diag, H.offdiag
    h = (M + 1) // 2  # number of pairs n < M - n
    if M % 2 == 0:
        d_even = d[: h + 1].copy()
        e_even = e[: h].copy()
        if h > 0:
            e_even[h - 1] *= np.sqrt(2.0)
        d_odd = d[:h].copy()
        e_odd = e[: max(h - 1, 0)].copy()
    else:
        # pair (h-1, h) couples to itself through the central bond
        d_even = d[:h].copy()
        d_odd = d[:h].copy()
        d_even[h - 1] += e[h - 1]
        d_odd[h - 1] -= e[h - 1]
        e_even = e[: h - 1].copy()
        e_odd = e[: h - 1].copy()
    return (d_even, e_even), (d_odd, e_odd)


def _block_to_fock(c: np.ndarray, M: int, sign: float) -> np.ndarray:
    """Map block eigenvectors (columns) back to the full Fock basis."""
    out = np.zeros((M + 1, c.shape[1]))
    h = (M + 1) // 2
    r = np.sqrt(0.5)
    out[:h] = r * c[:h]
    out[M - h + 1:][::-1] = sign * r * c[:h]
    if M % 2 == 0 and sign > 0:
        out[h] = c[h]
    return out


def _block_window(d, e, lo, hi, vectors):
    if d.size == 0:
        return np.empty(0), np.empty((0, 0))
    if d.size == 1:
        w = d.copy()
        keep = (w > lo) & (w <= hi)
        return w[keep], np.ones((1, int(keep.sum())))
    if vectors:
        return _solve(d, e, select="v", select_range=(lo, hi), lapack_driver="stebz")
    w = _solve(d, e, eigvals_only=True, select="v", select_range=(lo, hi), lapack_driver="stebz")
    return w, None


def _block_ground(d, e) -> float:
    if d.size == 0:
        return np.inf
    if d.size == 1:
        return float(d[0])
    w = _solve(d, e, eigvals_only=True, select="i", select_range=(0, 0), lapack_driver="stebz")
    return float(w[0])


def low_lying(H: TridiagonalHamiltonian, window: float, vectors: bool = False) -> Spectrum:
    """Levels within ``window`` of the ground state, found by bisection.

    Each parity block is solved separately, so parities come for free.
    Eigenvectors, when requested, are returned in the full Fock basis.
    Cost is O(M k) for k retained levels instead of O(M^2).
    """
    if window < 0:
        raise ValueError("window must be non-negative")
    even, odd = parity_blocks(H)
    e0 = min(_block_ground(*even), _block_ground(*odd))
    # slack below e0 absorbs bisection rounding of the ground level itself
    lo = e0 - 1.0
    hi = e0 + window
    w_even, v_even = _block_window(*even, lo, hi, vectors)
    w_odd, v_odd = _block_window(*odd, lo, hi, vectors)
    w = np.concatenate([w_even, w_odd])
    par = np.concatenate([np.ones(w_even.size), -np.ones(w_odd.size)])
    order = np.argsort(w, kind="stable")
    vecs = None
    if vectors:
        blocks = []
        if w_even.size:
            blocks.append(_block_to_fock(v_even, H.M, 1.0))
        if w_odd.size:
            blocks.append(_block_to_fock(v_odd, H.M, -1.0))
        vecs = _frozen(np.hstack(blocks)[:, order])
    return Spectrum(
        H.M,
        _frozen(w[order]),
        eigenvectors=vecs,
        parities=_frozen(par[order]),
        cutoff=float(window),
    )


def parity_labels(S: Spectrum, atol: float = 1e-8) -> np.ndarray:
    """Swap parity (+1 / -1) of each eigenvector of ``S``.

    Raises :class:`UnlabeledState` when a vector is neither symmetric nor
    antisymmetric under ``n -> M - n`` (near-degenerate levels mixed by the
    solver).
    """
    if S.eigenvectors is None:
        raise ValueError("parity labels need eigenvectors")
    V = np.asarray(S.eigenvectors)
    R = V[::-1]
    labels = np.empty(V.shape[1])
    for k in range(V.shape[1]):
        if np.max(np.abs(R[:, k] - V[:, k])) <= atol:
            labels[k] = 1.0
        elif np.max(np.abs(R[:, k] + V[:, k])) <= atol:
            labels[k] = -1.0
        else:
            raise UnlabeledState(
                f"state {k} of sector M={S.M} (E={S.eigenvalues[k]:.12g}) has no definite parity"
            )
    return labels


def build_lmg_matrix(M: int, lam: float) -> np.ndarray:
    """Dense ``2 Jz - (2 lam / M) Jx^2 - M lam / 2`` in the spin-M/2 basis.

    Independent of the Fock construction; used to cross-check it.
    """
    M = int(M)
    if M < 1:
        raise ValueError(f"LMG form needs M >= 1, got {M}")
    j = M / 2.0
    m = np.arange(-j, j + 1.0)
    jz = np.diag(m)
    # <m+1| J+ |m>
    jp = np.diag(np.sqrt(j * (j + 1.0) - m[:-1] * (m[:-1] + 1.0)), -1)
    jx = 0.5 * (jp + jp.T)
    return 2.0 * jz - (2.0 * lam / M) * (jx @ jx) - 0.5 * M * lam * np.eye(M + 1)
