"""Dark states of the monitored ring and the asymptotic survival probability.

Every circulant eigenvalue with ``0 < a < N/2`` is doubly degenerate, with
cosine and sine eigenvectors.  One combination per pair has a node at the
detector and is never detected.  These ``N/2 - 1`` states depend only on the
geometry, not on ``alpha``.  The alternating ``a = N/2`` mode has weight
``1/N`` on every site and is never dark.

At ``alpha = 0`` all ``a != 0`` modes are degenerate and the detectable part
is two-dimensional: the uniform state and the detector site.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from lrwalk.errors import ConfigError
from lrwalk.lattice import LatticeConfig, dispersion


@dataclass(frozen=True)
class DarkBasis:
    """Orthonormal dark vectors (rows of ``vectors``) with their mode index and energy."""

    modes: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray

    def __len__(self):
        return len(self.modes)

    def projector(self) -> np.ndarray:
        return self.vectors.T @ self.vectors

    def to_csv(self, path, header_lines=()) -> None:
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["a", "energy", *[f"site{j}" for j in range(self.vectors.shape[1])]])
            for a, e, v in zip(self.modes, self.energies, self.vectors):
                w.writerow([int(a), repr(float(e)), *(repr(float(x)) for x in v)])


def _pair_vectors(N: int, D: int, a: np.ndarray) -> np.ndarray:
    j = np.arange(N)
    phase = 2 * np.pi * np.outer(a, j) / N
    theta = (2 * np.pi * a * D / N)[:, None]
    # cos(theta) f - sin(theta) e, with e, f the unit cosine / sine modes
    return np.sqrt(2.0 / N) * (np.cos(theta) * np.sin(phase) - np.sin(theta) * np.cos(phase))


def dark_basis(lat: LatticeConfig, D: int) -> DarkBasis:
    """Unit-norm dark states with a node at ``D``, one per degenerate pair."""
    if not lat.nearest_neighbor and lat.alpha == 0:
        raise ConfigError("alpha", "alpha = 0 has an (N-1)-fold degeneracy; use bright_state")
    N = lat.N
    a = np.arange(1, N // 2)
    vectors = _pair_vectors(N, D, a)
    energies = dispersion(lat).energy[a]

    # the alternating mode only joins if it happens to vanish at D (it never does)
    alt = (-1.0) ** np.arange(N) / np.sqrt(N)
    if abs(alt[D]) < 1e-14:
        a = np.append(a, N // 2)
        vectors = np.vstack([vectors, alt])
        energies = np.append(energies, dispersion(lat).energy[N // 2])
    vectors[:, D] = 0.0
    return DarkBasis(a, energies, vectors)


def survival_infinity(N: int, D: int, l: int) -> float:
    """Weight of ``|l>`` on the dark subspace, ``(2/N) sum_{a=1}^{N/2} sin^2(2 pi a (D-l)/N)``.

    Exactly ``1/2`` unless ``2(D-l)`` is a multiple of ``N``, where it is zero.
    """
    if D == l:
        raise ConfigError("l", "initial site must differ from the detector")
    a = np.arange(1, N // 2 + 1)
    return float(2.0 / N * np.sum(np.sin(2 * np.pi * a * (D - l) / N) ** 2))


@dataclass(frozen=True)
class BrightState:
    """Detectable subspace at ``alpha = 0``.

    ``vector`` is the normalised bright direction inside the degenerate level
    (``|D> - 1/N`` up to normalisation); the uniform ground state is the other
    bright direction.  ``pdet_infinity`` is the exact weight of ``|l>`` on
    both, ``1/(N-1)``.  ``pdet_mode_sum`` is the cosine-sum expression
    ``(2/N)|sum_{a!=0} cos(2 pi a (D-l)/N)|^2 = 2/N``, which double counts the
    ``(a, N-a)`` pairs.
    """

    vector: np.ndarray
    pdet_infinity: float
    pdet_mode_sum: float

    @property
    def survival_infinity(self) -> float:
        return 1.0 - self.pdet_infinity


def bright_state(N: int, D: int, l: int) -> BrightState:
    if D == l:
        raise ConfigError("l", "initial site must differ from the detector")
    beta = -np.full(N, 1.0 / N)
    beta[D] += 1.0
    beta /= np.linalg.norm(beta)
    uniform = np.full(N, 1.0 / np.sqrt(N))
    pdet = beta[l] ** 2 + uniform[l] ** 2
    a = np.arange(1, N)
    mode_sum = 2.0 / N * np.sum(np.cos(2 * np.pi * a * (D - l) / N)) ** 2
    return BrightState(beta, float(pdet), float(mode_sum))
