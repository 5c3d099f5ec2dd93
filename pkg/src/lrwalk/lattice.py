"""Long-range hopping Hamiltonian on a ring of ``N`` sites.

The hopping between sites ``i`` and ``j`` is ``-J / d_ij**alpha`` with ``d_ij``
the ring distance.  Because the matrix is circulant, its spectrum is the
discrete Fourier transform of the first row; :func:`dispersion` returns that
exact spectrum, including the single antipodal coupling ``d = N/2``.

Nearest-neighbour hopping (the ``alpha -> inf`` limit) is a separate flag on
:class:`LatticeConfig` so that ``d**-alpha`` never underflows.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from lrwalk.errors import ConfigError


@dataclass(frozen=True)
class LatticeConfig:
    """Ring size, hopping exponent and energy scale.

    Times derived from this lattice are in units of ``1/J``; rates in units
    of ``J``.  ``J`` is never rescaled with ``N``.
    """

    N: int
    alpha: float = 1.0
    J: float = 1.0
    nearest_neighbor: bool = False

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 4 or self.N % 2:
            raise ConfigError("N", f"must be an even integer >= 4, got {self.N!r}")
        if not self.nearest_neighbor and not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ConfigError("alpha", f"must be finite and >= 0, got {self.alpha!r}")
        if not self.J > 0:
            raise ConfigError("J", f"must be > 0, got {self.J!r}")

    @classmethod
    def nn(cls, N: int, J: float = 1.0) -> "LatticeConfig":
        """Nearest-neighbour ring."""
        return cls(N=N, alpha=math.inf, J=J, nearest_neighbor=True)

    @property
    def label(self) -> str:
        return "nn" if self.nearest_neighbor else f"{self.alpha:g}"


def ring_distance(i: int, j: int, N: int) -> int:
    """Minimum distance between sites ``i`` and ``j`` on a ring of ``N`` sites."""
    if not (0 <= i < N and 0 <= j < N):
        raise ConfigError("site", f"indices ({i}, {j}) outside [0, {N})")
    d = abs(i - j)
    return min(d, N - d)


def hopping_row(cfg: LatticeConfig) -> np.ndarray:
    """First row of the Hamiltonian, ``H[0, j]``."""
    N = cfg.N
    d = np.arange(N)
    d = np.minimum(d, N - d)
    row = np.zeros(N)
    if cfg.nearest_neighbor:
        row[1] = row[N - 1] = -cfg.J
    else:
        row[1:] = -cfg.J / d[1:].astype(float) ** cfg.alpha
    return row


def hamiltonian_dense(cfg: LatticeConfig) -> np.ndarray:
    """Dense real symmetric ``N x N`` Hamiltonian."""
    row = hopping_row(cfg)
    idx = np.arange(cfg.N)
    # circulant: H[i, j] depends only on (j - i) mod N
    return row[(idx[None, :] - idx[:, None]) % cfg.N]


@dataclass(frozen=True)
class DispersionTable:
    """Exact eigenvalues ``energy[a]`` of the plane wave with ``k = 2*pi*a/N``."""

    a: np.ndarray
    k: np.ndarray
    energy: np.ndarray

    def to_csv(self, path, header_lines=()) -> None:
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["a", "k", "E_a"])
            for a, k, e in zip(self.a, self.k, self.energy):
                w.writerow([int(a), repr(float(k)), repr(float(e))])


def dispersion(cfg: LatticeConfig) -> DispersionTable:
    """Circulant spectrum ``E_a``, ``a = 0..N-1``.

    Equal to ``-J [2 sum_{d<N/2} cos(2 pi a d/N)/d^alpha + (-1)^a (N/2)^-alpha]``.
    """
    energy = np.fft.fft(hopping_row(cfg)).real
    a = np.arange(cfg.N)
    return DispersionTable(a=a, k=2 * np.pi * a / cfg.N, energy=energy)


def truncated_band(cfg: LatticeConfig, k) -> np.ndarray:
    """Band ``-2J sum_{r=1}^{N/2-1} cos(k r) / r^alpha`` without the antipodal term.

    This is the long-wavelength form used by the approximate decay rates; it
    differs from :func:`dispersion` by ``O((N/2)^-alpha)``.
    """
    k = np.asarray(k, dtype=float)
    r = np.arange(1, cfg.N // 2)
    if cfg.nearest_neighbor:
        w = np.zeros(len(r))
        w[0] = 1.0
    else:
        w = r.astype(float) ** -cfg.alpha
    return -2 * cfg.J * np.cos(np.multiply.outer(k, r)) @ w


def zeta_partial(alpha: float, N: int) -> float:
    """``sum_{r=1}^{N/2} r^-alpha``."""
    r = np.arange(1, N // 2 + 1, dtype=float)
    return float(np.sum(r**-alpha))


class LRScale(NamedTuple):
    label: str
    value: float


def lr_timescale(alpha: float, D: int, N: int) -> LRScale:
    """Lieb-Robinson time regime for hopping exponent ``alpha`` (up to constants).

    Only used to annotate outputs.  Boundaries: ``alpha >= 2`` is linear,
    ``alpha == 1/2`` is grouped with the distance-independent regime.
    """
    if not 1 <= D <= N // 2:
        raise ConfigError("D", f"distance must lie in [1, {N // 2}], got {D}")
    if alpha >= 2:
        return LRScale("O(D)", float(D))
    if alpha > 1:
        return LRScale("O(D^{alpha-1})", float(D) ** (alpha - 1))
    if alpha == 1:
        return LRScale("O(log D)", math.log(D))
    if alpha >= 0.5:
        return LRScale("O(1)", 1.0)
    return LRScale("O(N^{alpha-1/2})", float(N) ** (alpha - 0.5))
