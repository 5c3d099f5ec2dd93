"""Sharp resetting every ``r`` detection attempts.

Each reset restarts the identical initial state, so survival factorises over
blocks: with ``n = m r + j``,

    P_det(n) = 1 - S(t_r)^m S(t_j).

One survival trace of length ``r_max`` therefore yields the convergence time
for every reset period up to ``r_max``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from lrwalk.errors import ConfigError, NoConvergenceError
from lrwalk.lattice import LatticeConfig
from lrwalk.walk import ProtocolConfig, SurvivalTrace, run_monitored

#: convergence beyond this many detection attempts counts as never
MAX_STEPS = 10**6


def default_r_grid(r_max: int = 500) -> np.ndarray:
    """``1..50`` then 60 log-spaced values up to ``r_max``."""
    head = np.arange(1, min(50, r_max) + 1)
    if r_max <= 50:
        return head
    tail = np.round(np.logspace(np.log10(50), np.log10(r_max), 60)).astype(int)
    return np.unique(np.concatenate([head, tail]))


@dataclass(frozen=True)
class ResetConfig:
    r: int = 1
    target_pdet: float = 0.9
    r_scan: tuple[int, int] = (1, 500)

    def __post_init__(self):
        if self.r < 1:
            raise ConfigError("r", f"reset period must be >= 1 step, got {self.r}")
        if not 0 < self.target_pdet < 1:
            raise ConfigError("target_pdet", f"must lie in (0, 1), got {self.target_pdet}")
        lo, hi = self.r_scan
        if not 1 <= lo <= hi:
            raise ConfigError("r_scan", f"invalid range {self.r_scan}")

    def grid(self) -> np.ndarray:
        lo, hi = self.r_scan
        g = default_r_grid(hi)
        return g[g >= lo]


def _survival(trace) -> np.ndarray:
    s = trace.survival if isinstance(trace, SurvivalTrace) else np.asarray(trace, dtype=float)
    if isinstance(trace, SurvivalTrace) and not trace.contiguous:
        raise ValueError("reset composition needs a contiguous trace")
    return s


def pdet_with_reset(trace, r: int, n: int) -> float:
    """Detection probability after ``n`` attempts with a reset every ``r`` attempts."""
    S = _survival(trace)
    if n < 1:
        raise ValueError("n must be >= 1")
    if r < 1:
        raise ValueError("r must be >= 1")
    if len(S) <= min(r, n):
        raise ValueError(f"trace covers {len(S) - 1} steps, need {min(r, n)}")
    if n < r:
        return float(1.0 - S[n])
    m, j = divmod(n, r)
    return float(1.0 - S[r] ** m * S[j])


def convergence_steps(trace, r: int, target: float = 0.9, max_steps: int = MAX_STEPS) -> int:
    """Smallest ``n`` with ``pdet_with_reset(trace, r, n) >= target``."""
    S = _survival(trace)
    if len(S) <= r:
        raise ValueError(f"trace covers {len(S) - 1} steps, need {r}")
    hit = np.flatnonzero(1.0 - S[1 : r + 1] >= target)
    if hit.size:
        return int(hit[0] + 1)
    Sr = S[r]
    if Sr >= 1 - 1e-14:
        raise NoConvergenceError(f"S(t_r) = 1 for r = {r}: the detector never clicks")
    # full blocks needed before the target can be reached inside the next one
    m = max(math.ceil(math.log(1 - target) / math.log(Sr)) - 1, 0)
    base = Sr**m
    while True:
        j = np.flatnonzero(1.0 - base * S[1 : r + 1] >= target)
        if j.size:
            n = m * r + int(j[0]) + 1
            break
        m += 1
        base *= Sr
    if n > max_steps:
        raise NoConvergenceError(f"convergence needs {n} steps, beyond the cap of {max_steps}")
    return n


def convergence_time(trace, r: int, target: float = 0.9, tau: float | None = None, max_steps: int = MAX_STEPS) -> float:
    """Time ``n tau`` at which resetting every ``r`` steps reaches ``target``."""
    if tau is None:
        if not isinstance(trace, SurvivalTrace):
            raise ValueError("tau is required for a bare survival array")
        tau = trace.tau
    return convergence_steps(trace, r, target, max_steps) * tau


def predicted_optimal_r(gamma_max: float, tau: float) -> int:
    """Reset period matching the fastest decay, ``max(1, round(1/(gamma_max tau)))``."""
    if not gamma_max > 0:
        raise ValueError("gamma_max must be positive")
    return max(1, int(round(1.0 / (gamma_max * tau))))


@dataclass(frozen=True)
class ResetScan:
    r_values: np.ndarray
    t_converge: np.ndarray
    r_best: int
    t_best: float


def scan_reset(trace: SurvivalTrace, r_values, target: float = 0.9, max_steps: int = MAX_STEPS) -> ResetScan:
    """Convergence time for every ``r``; ``inf`` where the target is never reached."""
    r_values = np.asarray(r_values, dtype=int)
    t = np.empty(len(r_values))
    for i, r in enumerate(r_values):
        try:
            t[i] = convergence_time(trace, int(r), target, max_steps=max_steps)
        except NoConvergenceError:
            t[i] = np.inf
    if not np.isfinite(t).any():
        raise NoConvergenceError("no reset period in the scan reaches the target")
    best = int(np.argmin(t))
    return ResetScan(r_values, t, int(r_values[best]), float(t[best]))


def optimize_r(lat: LatticeConfig, prot: ProtocolConfig, scan: ResetConfig) -> ResetScan:
    """Scan ``scan.grid()`` using one monitored trace of ``max(r)`` steps."""
    grid = scan.grid()
    prot = ProtocolConfig(tau=prot.tau, D=prot.D, l=prot.l, n_steps=int(grid.max()))
    trace = run_monitored(lat, prot)
    return scan_reset(trace, grid, scan.target_pdet)
