"""Effective non-Hermitian Hamiltonian of the monitored walk.

For ``J*tau << 1`` the no-click map ``P U(tau) P`` is generated by

    H_eff = P H P - (i tau / 2) P H |D><D| H P,     P = I - |D><D|,

a complex symmetric matrix.  Its eigenvalues ``lambda_a = lambda0_a -
i tau gamma_a`` give decay rates ``gamma_a``; modes with ``gamma_a = 0`` are
dark and carry the asymptotic survival.

Both ``H`` and ``H|D>`` are symmetric under the reflection ``D + m <-> D - m``,
so the anti-Hermitian part vanishes identically on the odd sector.  The
eigensolvers here split the problem into even and odd sectors whenever the
input has that symmetry: odd modes come out exactly real (dark) and each
dense solve is half the size.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from lrwalk.errors import NumericalError
from lrwalk.lattice import LatticeConfig, hamiltonian_dense, truncated_band, zeta_partial

DARK_RTOL = 1e-12


@dataclass
class EffectiveSpectrum:
    """Per-mode energies, decay rates and initial-state weights.

    ``overlap0`` are real weights summing to one.  ``weights`` are the complex
    biorthogonal products ``<l|lambda_a><bar lambda_a|l>`` (``None`` for
    perturbative spectra, where they equal ``overlap0``).
    """

    lambda0: np.ndarray
    gamma: np.ndarray
    overlap0: np.ndarray | None
    tau: float
    weights: np.ndarray | None = None

    def __len__(self):
        return len(self.gamma)

    @property
    def gamma_max(self) -> float:
        return float(self.gamma.max())

    @property
    def dark_threshold(self) -> float:
        return DARK_RTOL * self.gamma_max

    @property
    def dark_mask(self) -> np.ndarray:
        return self.gamma < self.dark_threshold

    @property
    def n_dark(self) -> int:
        return int(self.dark_mask.sum())

    def to_csv(self, path, header_lines=(), extra_columns=None) -> None:
        extra_columns = extra_columns or {}
        ov = self.overlap0 if self.overlap0 is not None else np.full(len(self), np.nan)
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["a", "lambda0", "gamma", "overlap0", *extra_columns])
            cols = list(extra_columns.values())
            for a in range(len(self)):
                row = [a, repr(float(self.lambda0[a])), repr(float(self.gamma[a])), repr(float(ov[a]))]
                row += [repr(float(c[a])) for c in cols]
                w.writerow(row)


def _sorted(lambda0, gamma, overlap0, tau, weights=None) -> EffectiveSpectrum:
    order = np.lexsort((lambda0, -gamma))
    pick = lambda x: None if x is None else x[order]
    return EffectiveSpectrum(lambda0[order], gamma[order], pick(overlap0), tau, pick(weights))


# -- reflection sectors -------------------------------------------------------


@dataclass(frozen=True)
class _Sectors:
    """Site pairs ``(D+m, D-m)`` for ``m = 1..N/2-1`` and the antipode of ``D``."""

    N: int
    D: int
    plus: np.ndarray
    minus: np.ndarray
    antipode: int

    @classmethod
    def of(cls, N: int, D: int) -> "_Sectors":
        m = np.arange(1, N // 2)
        return cls(N, D, (D + m) % N, (D - m) % N, (D + N // 2) % N)

    def reflected(self, A: np.ndarray) -> np.ndarray:
        perm = np.arange(self.N)
        perm[self.plus], perm[self.minus] = self.minus, self.plus
        return A[np.ix_(perm, perm)]

    def odd_block(self, A: np.ndarray) -> np.ndarray:
        p, q = self.plus, self.minus
        return 0.5 * (A[np.ix_(p, p)] - A[np.ix_(p, q)] - A[np.ix_(q, p)] + A[np.ix_(q, q)])

    def even_block(self, A: np.ndarray) -> np.ndarray:
        p, q, c = self.plus, self.minus, self.antipode
        n = len(p)
        B = np.empty((n + 1, n + 1), dtype=A.dtype)
        B[:n, :n] = 0.5 * (A[np.ix_(p, p)] + A[np.ix_(p, q)] + A[np.ix_(q, p)] + A[np.ix_(q, q)])
        B[:n, n] = (A[p, c] + A[q, c]) / np.sqrt(2)
        B[n, :n] = (A[c, p] + A[c, q]) / np.sqrt(2)
        B[n, n] = A[c, c]
        return B

    def lift_odd(self, Y: np.ndarray) -> np.ndarray:
        X = np.zeros((self.N, Y.shape[1]), dtype=Y.dtype)
        X[self.plus] = Y / np.sqrt(2)
        X[self.minus] = -Y / np.sqrt(2)
        return X

    def lift_even(self, Y: np.ndarray) -> np.ndarray:
        n = len(self.plus)
        X = np.zeros((self.N, Y.shape[1]), dtype=Y.dtype)
        X[self.plus] = Y[:n] / np.sqrt(2)
        X[self.minus] = Y[:n] / np.sqrt(2)
        X[self.antipode] = Y[n]
        return X


def _detector_site(A: np.ndarray) -> int | None:
    empty = np.flatnonzero(~np.any(A != 0, axis=0) & ~np.any(A != 0, axis=1))
    return int(empty[0]) if len(empty) == 1 else None


def _cond(B: np.ndarray) -> float:
    try:
        return float(np.linalg.cond(B))
    except (np.linalg.LinAlgError, ValueError):
        return float("nan")


def _eig(B: np.ndarray):
    if not np.all(np.isfinite(B)):
        raise NumericalError("eigensolver input has non-finite entries (cond=nan)")
    try:
        w, V = scipy.linalg.eig(B)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigensolver failed (cond={_cond(B):.3g}): {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise NumericalError(f"non-finite eigenvalues (cond={_cond(B):.3g})")
    return w, V


def _hermitian_or_general(B: np.ndarray):
    if np.iscomplexobj(B) and np.any(B.imag != 0):
        return _eig(B)
    w, V = np.linalg.eigh(B.real)
    return w.astype(complex), V.astype(complex)


# -- construction -------------------------------------------------------------


def build_h_eff(lat: LatticeConfig, D: int, tau: float) -> np.ndarray:
    """``P H P - (i tau/2) P H|D><D|H P``; row and column ``D`` are zero."""
    if lat.J * tau > 0.5:
        warnings.warn(f"J*tau = {lat.J * tau:g} is not small; H_eff is a short-tau expansion", stacklevel=2)
    H = hamiltonian_dense(lat)
    h = H[:, D].copy()
    h[D] = 0.0
    A = H.astype(complex)
    A[D, :] = 0.0
    A[:, D] = 0.0
    A -= 0.5j * tau * np.outer(h, h)
    return A


def exact_spectrum(h_eff: np.ndarray, tau: float, initial_site: int | None = None) -> EffectiveSpectrum:
    """Full eigendecomposition of ``h_eff`` (all ``N`` modes, including the
    trivial detector-site mode with eigenvalue zero).

    Rates are ``gamma_a = -Im(lambda_a)/tau``, clamped at zero from below.
    Left eigenvectors of a complex symmetric matrix are transposes of the
    right ones, so weights are ``v_a[l]^2 / (v_a^T v_a)``.
    """
    A = np.asarray(h_eff)
    N = A.shape[0]
    D = _detector_site(A)
    if D is not None and N % 2 == 0:
        sec = _Sectors.of(N, D)
        if not np.array_equal(sec.reflected(A), A):
            sec = None
    else:
        sec = None

    if sec is not None:
        wo, Vo = _hermitian_or_general(sec.odd_block(A))
        we, Ve = _eig(sec.even_block(A))
        w = np.concatenate([wo, we, [0.0]])
        V = np.hstack([sec.lift_odd(Vo), sec.lift_even(Ve), np.eye(N, 1, -D)])
    else:
        w, V = _eig(A)

    gamma = -w.imag / tau
    gamma[(gamma < 0) & (gamma > -1e-10)] = 0.0
    weights = overlap0 = None
    if initial_site is not None:
        norm = np.sum(V * V, axis=0)
        weights = V[initial_site] ** 2 / norm
        overlap0 = weights.real
    return _sorted(w.real.copy(), gamma, overlap0, tau, weights)


def _complement(lat: LatticeConfig, D: int):
    H = hamiltonian_dense(lat)
    keep = np.r_[0:D, D + 1 : lat.N]
    return H, keep


def gamma_perturbative(lat: LatticeConfig, D: int, tau: float = 0.0, initial_site: int | None = None) -> EffectiveSpectrum:
    """First-order rates ``gamma_a = |<lambda0_a|H|D>|^2 / 2`` over the ``N-1``
    eigenmodes of ``H`` with the detector site removed.

    The odd-sector modes have ``gamma = 0`` exactly.  ``tau`` is only stored.
    """
    H = hamiltonian_dense(lat)
    sec = _Sectors.of(lat.N, D)
    wo, Yo = np.linalg.eigh(sec.odd_block(H))
    we, Ye = np.linalg.eigh(sec.even_block(H))
    Ve = sec.lift_even(Ye)
    coupling = H[:, D].copy()
    coupling[D] = 0.0
    g_even = 0.5 * (Ve.T @ coupling) ** 2

    lambda0 = np.concatenate([wo, we])
    gamma = np.concatenate([np.zeros(len(wo)), g_even])
    overlap0 = None
    if initial_site is not None:
        V = np.hstack([sec.lift_odd(Yo), Ve])
        overlap0 = V[initial_site] ** 2
    return _sorted(lambda0, gamma, overlap0, tau)


def paired_rates(lat: LatticeConfig, D: int, tau: float):
    """Exact and first-order rates of the even (decaying) sector, paired by energy.

    Returns ``(lambda0, gamma_perturbative, gamma_exact)`` sorted by ``lambda0``.
    Pairing by energy order is valid while second-order energy shifts stay
    below the level spacing.
    """
    sec = _Sectors.of(lat.N, D)
    H = hamiltonian_dense(lat)
    we, Ye = np.linalg.eigh(sec.even_block(H))
    coupling = H[:, D].copy()
    coupling[D] = 0.0
    g_pert = 0.5 * (sec.lift_even(Ye).T @ coupling) ** 2
    w, _ = _eig(sec.even_block(build_h_eff(lat, D, tau)))
    w = w[np.argsort(w.real)]
    return we, g_pert, -w.imag / tau


def gamma_k_approx(lat: LatticeConfig, D: int, a) -> np.ndarray:
    """Standing-wave estimate ``J_k^2 cos^2(k D) / N`` with ``k = 2 pi a / N``.

    Only quantitative for ``alpha < 1``.
    """
    if lat.nearest_neighbor or lat.alpha >= 1:
        warnings.warn("standing-wave rates are unreliable for alpha >= 1", stacklevel=2)
    k = 2 * np.pi * np.asarray(a, dtype=float) / lat.N
    return truncated_band(lat, k) ** 2 * np.cos(k * D) ** 2 / lat.N


def gamma_max_closed(lat: LatticeConfig) -> float:
    """``2 J^2 zeta_N(alpha)^2 / N``."""
    zeta = 1.0 if lat.nearest_neighbor else zeta_partial(lat.alpha, lat.N)
    return 2 * lat.J**2 * zeta**2 / lat.N


def spectral_gap(spec: EffectiveSpectrum) -> float:
    """Difference between the two largest decay rates."""
    if len(spec) < 2:
        raise ValueError("need at least two modes")
    top = np.sort(spec.gamma)[-2:]
    return float(top[1] - top[0])


def survival_from_spectrum(spec: EffectiveSpectrum, t) -> np.ndarray:
    """``sum_a overlap0_a exp(-2 tau gamma_a t)`` (mode cross terms dropped)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return np.exp(-2 * spec.tau * np.multiply.outer(t, spec.gamma)) @ spec.overlap0


def fidelity_from_spectrum(spec: EffectiveSpectrum, t) -> np.ndarray:
    """``|sum_a w_a exp(-(i lambda0_a + tau gamma_a) t)|^2`` with biorthogonal weights."""
    w = spec.weights if spec.weights is not None else spec.overlap0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    rate = 1j * spec.lambda0 + spec.tau * spec.gamma
    out = np.empty(len(t))
    for s in range(0, len(t), 512):
        amp = np.exp(-np.multiply.outer(t[s : s + 512], rate)) @ w
        out[s : s + 512] = np.abs(amp) ** 2
    return out


def gapped_two_term_survival(lat: LatticeConfig, D: int, tau: float, t, gamma_max: float | None = None) -> np.ndarray:
    """Fast-mode plus continuum approximation for ``alpha < 1/2``.

    ``(2/N) exp(-2 tau gamma_max t) + 2 int_0^pi dk/pi exp(-2 tau gamma_k t)``,
    integrated with the trapezoid rule on ``k = 2 pi a / N``.  Not normalised:
    the value at ``t = 0`` is ``2/N + 2``.  Compare time profiles only.
    """
    if not lat.nearest_neighbor and lat.alpha >= 0.5:
        warnings.warn("two-term form assumes the gapped regime alpha < 1/2", stacklevel=2)
    if gamma_max is None:
        gamma_max = gamma_max_closed(lat)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    a = np.arange(lat.N // 2 + 1)
    k = 2 * np.pi * a / lat.N
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        gk = gamma_k_approx(lat, D, a)
    integrand = np.exp(-2 * tau * np.multiply.outer(t, gk))
    continuum = 2 * np.trapezoid(integrand, k, axis=1) / np.pi
    return 2 / lat.N * np.exp(-2 * tau * gamma_max * t) + continuum


@dataclass(frozen=True)
class ModeDensity:
    """Fraction of modes per ``1/gamma`` bin ``[start, start + delta)``; only
    occupied bins are listed.  Dark modes are a separate mass."""

    bin_start: np.ndarray
    density: np.ndarray
    delta: float
    dark_mass: float

    @property
    def total(self) -> float:
        return float(self.density.sum() + self.dark_mass)


def mode_density(spec: EffectiveSpectrum, delta: float) -> ModeDensity:
    if not delta > 0:
        raise ValueError("bin width must be positive")
    n = len(spec)
    dark = spec.dark_mask
    inv = 1.0 / spec.gamma[~dark]
    idx, counts = np.unique(np.floor(inv / delta).astype(np.int64), return_counts=True)
    return ModeDensity(idx * delta, counts / n, delta, dark.sum() / n)


def compare_rates(lat: LatticeConfig, D: int, tau: float, initial_site: int | None = None):
    """First-order spectrum together with the exact rate of each mode.

    Returns ``(spec, gamma_exact)`` where ``gamma_exact[i]`` belongs to mode
    ``i`` of the perturbative ``spec``.  Odd-sector modes are dark in both.
    """
    H = hamiltonian_dense(lat)
    sec = _Sectors.of(lat.N, D)
    wo, Yo = np.linalg.eigh(sec.odd_block(H))
    we, g_pert, g_exact = paired_rates(lat, D, tau)
    _, Ye = np.linalg.eigh(sec.even_block(H))
    lambda0 = np.concatenate([wo, we])
    gamma = np.concatenate([np.zeros(len(wo)), g_pert])
    exact = np.concatenate([np.zeros(len(wo)), g_exact])
    overlap0 = None
    if initial_site is not None:
        V = np.hstack([sec.lift_odd(Yo), sec.lift_even(Ye)])
        overlap0 = V[initial_site] ** 2
    order = np.lexsort((lambda0, -gamma))
    pick = lambda x: None if x is None else x[order]
    return EffectiveSpectrum(lambda0[order], gamma[order], pick(overlap0), tau), exact[order]
