"""Algebraic approach of ``S(t)`` to its asymptote.

Near the asymptote ``S(t) - S(inf)`` decays as ``t^-1/2`` when the initial
site is farther than ``D* = sqrt(8 J^2 t tau / N)`` from the detector and as
``t^-3/2`` when it is closer, independent of the hopping exponent.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from lrwalk.walk import SurvivalTrace

BRANCH_FAR = "t^-1/2"
BRANCH_NEAR = "t^-3/2"
BRANCH_CROSSOVER = "crossover"


@dataclass(frozen=True)
class TailFit:
    beta: float
    amplitude: float
    window: tuple[float, float]
    residual: float
    beta_err: float

    def as_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return d


def default_window(t_max: float) -> tuple[float, float]:
    """Last decade before ``0.8 t_max``."""
    return (0.08 * t_max, 0.8 * t_max)


def _loglog_fit(t, y):
    x, z = np.log(t), np.log(y)
    slope, intercept = np.polyfit(x, z, 1)
    resid = z - (slope * x + intercept)
    return -slope, math.exp(intercept), float(np.sqrt(np.mean(resid**2)))


def fit_tail(trace: SurvivalTrace, s_inf: float, window=None, jitter: float = 0.1) -> TailFit:
    """Least-squares slope of ``log(S - s_inf)`` against ``log t`` on ``window``.

    ``beta_err`` is the largest change of the exponent when either window edge
    moves by a factor ``1 +- jitter``.
    """
    t, s = trace.t, trace.survival
    if window is None:
        window = default_window(float(t[-1]))
    lo, hi = window
    if not 0 < lo < hi:
        raise ValueError(f"bad fit window {window}")
    if t[-1] < hi * (1 - 1e-9):
        raise ValueError(f"trace ends at t={t[-1]:g}, before the window end {hi:g}")

    def fit_on(a, b):
        m = (t >= a) & (t <= b)
        y = s[m] - s_inf
        if m.sum() < 3:
            raise ValueError(f"fewer than three samples in window [{a:g}, {b:g}]")
        if np.any(y <= 0):
            raise ValueError(f"S - s_inf is not positive everywhere on [{a:g}, {b:g}]")
        return _loglog_fit(t[m], y)

    beta, amp, resid = fit_on(lo, hi)
    spread = []
    for a, b in ((lo * (1 + jitter), hi), (lo * (1 - jitter), hi), (lo, hi * (1 - jitter))):
        try:
            spread.append(abs(fit_on(a, b)[0] - beta))
        except ValueError:
            pass
    return TailFit(float(beta), amp, (float(lo), float(hi)), resid, float(max(spread, default=0.0)))


def tail_closed_form(t, J: float, tau: float, N: int, l: int):
    """Nearest-neighbour tail ``(1/pi) sqrt(pi)/(2J sqrt(g)) (1 + (-1)^l exp(-l^2/(J^2 g)))``
    with ``g = 8 t tau / N``.  Valid for ``t >> N tau``.
    """
    t = np.asarray(t, dtype=float)
    g = 8 * t * tau / N
    return (1 / np.pi) * np.sqrt(np.pi) / (2 * J * np.sqrt(g)) * (1 + (-1) ** l * np.exp(-(l**2) / (J**2 * g)))


def d_star(N: int, J: float, tau: float, t: float) -> float:
    """Crossover distance ``sqrt(8 J^2 t tau / N)``."""
    return math.sqrt(8 * J**2 * t * tau / N)


def tail_branch(D: int, N: int, J: float, tau: float, t: float, margin: float = 0.1) -> str:
    """Which power law applies at distance ``D`` and time ``t``.

    ``(D / D*)^2 <= margin`` is the near branch, ``>= 1/margin`` the far branch,
    anything between is a crossover with no clean fit.
    """
    ratio = (D / d_star(N, J, tau, t)) ** 2
    if ratio <= margin:
        return BRANCH_NEAR
    if ratio >= 1 / margin:
        return BRANCH_FAR
    return BRANCH_CROSSOVER
