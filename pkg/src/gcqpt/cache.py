"""Spectrum cache keyed by (M, lambda), with optional on-disk persistence.

File layout (one file per key)::

    GCQPT-SPECTRUM <version> M=<M> lambda=<key> n=<count> cutoff=<float|none>
        vectors=<rows>x<cols>|none parities=<0|1> sha256=<hex>\\n
    <count float64 little-endian eigenvalues>
    [<rows*cols float64 little-endian eigenvectors, column-major>]
    [<count float64 little-endian parities>]

The header is a single line; the checksum covers every byte after it.
"""
from __future__ import annotations

import hashlib
import logging
import os
import tempfile
import threading
from collections import OrderedDict
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np

from .spectrum import Spectrum, build_hamiltonian, eigenvalues

__all__ = ["CacheCorrupt", "SpectrumCache", "lambda_key", "write_spectrum", "read_spectrum", "CACHE_ENV"]

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
MAGIC = "GCQPT-SPECTRUM"
CACHE_ENV = "GCQPT_CACHE_DIR"
LE_F8 = np.dtype("<f8")


class CacheCorrupt(IOError):
    """A cache file failed its checksum or could not be parsed."""


def lambda_key(lam: float) -> str:
    """Coupling quantised to 12 decimals, as used in cache keys."""
    key = f"{float(lam):.12f}"
    if key.startswith("-") and float(key) == 0.0:
        key = key[1:]
    return key


def _payload(S: Spectrum) -> bytes:
    parts = [np.asarray(S.eigenvalues, dtype=LE_F8).tobytes()]
    if S.eigenvectors is not None:
        parts.append(np.asarray(S.eigenvectors, dtype=LE_F8).tobytes(order="F"))
    if S.parities is not None:
        parts.append(np.asarray(S.parities, dtype=LE_F8).tobytes())
    return b"".join(parts)


def write_spectrum(path, M: int, lam: float, S: Spectrum) -> None:
    """Atomically write ``S`` to ``path``."""
    path = Path(path)
    body = _payload(S)
    vec = "none" if S.eigenvectors is None else "{}x{}".format(*S.eigenvectors.shape)
    cutoff = "none" if S.cutoff is None else repr(float(S.cutoff))
    header = (
        f"{MAGIC} {FORMAT_VERSION} M={M} lambda={lambda_key(lam)} n={len(S.eigenvalues)} "
        f"cutoff={cutoff} vectors={vec} parities={int(S.parities is not None)} "
        f"sha256={hashlib.sha256(body).hexdigest()}\n"
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".spec")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(body)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_spectrum(path) -> Tuple[int, str, Spectrum]:
    """Read a cache file; returns ``(M, lambda_key, spectrum)``."""
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise CacheCorrupt(f"{path}: missing header")
    try:
        tokens = raw[:nl].decode("ascii").split()
        if tokens[0] != MAGIC or int(tokens[1]) != FORMAT_VERSION:
            raise CacheCorrupt(f"{path}: unknown format {tokens[:2]}")
        fields = dict(t.split("=", 1) for t in tokens[2:])
        M = int(fields["M"])
        n = int(fields["n"])
        cutoff = None if fields["cutoff"] == "none" else float(fields["cutoff"])
        vec_shape = None if fields["vectors"] == "none" else tuple(int(x) for x in fields["vectors"].split("x"))
        has_par = fields["parities"] == "1"
        digest = fields["sha256"]
    except (UnicodeDecodeError, KeyError, ValueError, IndexError) as exc:
        raise CacheCorrupt(f"{path}: malformed header") from exc
    body = raw[nl + 1:]
    if hashlib.sha256(body).hexdigest() != digest:
        raise CacheCorrupt(f"{path}: checksum mismatch")
    expected = 8 * (n + (vec_shape[0] * vec_shape[1] if vec_shape else 0) + (n if has_par else 0))
    if len(body) != expected:
        raise CacheCorrupt(f"{path}: payload has {len(body)} bytes, expected {expected}")
    off = 0

    def take(count):
        nonlocal off
        a = np.frombuffer(body, dtype=LE_F8, count=count, offset=off).astype(np.float64)
        off += 8 * count
        return a

    vals = take(n)
    vecs = take(vec_shape[0] * vec_shape[1]).reshape(vec_shape, order="F") if vec_shape else None
    par = take(n) if has_par else None
    for a in (vals, vecs, par):
        if a is not None:
            a.setflags(write=False)
    return M, fields["lambda"], Spectrum(M, vals, vecs, par, cutoff)


class SpectrumCache:
    """Thread-safe LRU of spectra, optionally backed by a directory.

    Readers and writers share one lock; disk writes go through a temporary
    file and ``os.replace`` so concurrent readers never see partial files.
    """

    def __init__(self, directory=None, max_entries: int = 200_000):
        self.directory = Path(directory) if directory is not None else None
        self.max_entries = max_entries
        self._mem: "OrderedDict[Tuple[int, str], Spectrum]" = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(M: int, lam: float) -> Tuple[int, str]:
        return int(M), lambda_key(lam)

    def path_for(self, M: int, lam: float) -> Optional[Path]:
        if self.directory is None:
            return None
        M, k = self.key(M, lam)
        return self.directory / f"M{M:06d}_lam{k}.spec"

    def __len__(self):
        return len(self._mem)

    def _remember(self, key, S):
        self._mem[key] = S
        self._mem.move_to_end(key)
        while len(self._mem) > self.max_entries:
            self._mem.popitem(last=False)

    @staticmethod
    def _usable(S, window, vectors):
        if not (S.complete if window is None else S.covers(window)):
            return False
        return not vectors or S.eigenvectors is not None

    def lookup(self, M: int, lam: float, window: Optional[float] = None, vectors: bool = False) -> Optional[Spectrum]:
        """Cached spectrum covering ``window`` (full spectrum if None), or None."""
        key = self.key(M, lam)
        with self._lock:
            S = self._mem.get(key)
            if S is not None and self._usable(S, window, vectors):
                self._mem.move_to_end(key)
                self.hits += 1
                return S
            path = self.path_for(M, lam)
            if path is not None and path.exists():
                try:
                    _, _, S = read_spectrum(path)
                except CacheCorrupt as exc:
                    log.warning("discarding corrupt cache entry: %s", exc)
                    path.unlink(missing_ok=True)
                    S = None
                if S is not None and self._usable(S, window, vectors):
                    self._remember(key, S)
                    self.hits += 1
                    return S
            self.misses += 1
            return None

    def put(self, M: int, lam: float, S: Spectrum) -> None:
        if S.M != M:
            raise ValueError(f"spectrum is for M={S.M}, not {M}")
        key = self.key(M, lam)
        with self._lock:
            self._remember(key, S)
            path = self.path_for(M, lam)
            if path is not None:
                write_spectrum(path, M, lam, S)

    def get(
        self,
        M: int,
        lam: float,
        window: Optional[float] = None,
        compute: Optional[Callable[[], Spectrum]] = None,
    ) -> Spectrum:
        """Cached spectrum, computing and storing it on a miss.

        Without ``compute`` a miss falls back to the full eigenvalue spectrum.
        """
        S = self.lookup(M, lam, window)
        if S is not None:
            return S
        S = compute() if compute is not None else eigenvalues(build_hamiltonian(M, lam))
        self.put(M, lam, S)
        return S

    def clear(self) -> None:
        with self._lock:
            self._mem.clear()
