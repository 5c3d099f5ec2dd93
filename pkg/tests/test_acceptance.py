"""Acceptance criteria, one test per criterion.

Long horizons use the strided evaluator (a dense power of the one-step
monitored map); it agrees with the FFT loop to 1e-10 (see test_walk).
"""

import time
from functools import lru_cache

import numpy as np
import pytest

from lrwalk.asymptotics import default_window, fit_tail
from lrwalk.cli import main
from lrwalk.darkstates import survival_infinity
from lrwalk.effective import build_h_eff, exact_spectrum, gamma_max_closed, paired_rates, spectral_gap
from lrwalk.lattice import LatticeConfig, hamiltonian_dense
from lrwalk.reset import ResetConfig, optimize_r, pdet_with_reset, predicted_optimal_r
from lrwalk.walk import (
    ProtocolConfig,
    equilibration_time,
    relaxation_time,
    run_monitored,
    run_monitored_strided,
)

from oracles import dense_survival, direct_reset_pdet

TAU = 0.2
ALPHAS_FIG2 = [0.5, 1.5, 3.0, "nn"]


def lattice(N, alpha):
    return LatticeConfig.nn(N) if alpha == "nn" else LatticeConfig(N=N, alpha=alpha)


def report(name, rows):
    print(f"\n[{name}]")
    for row in rows:
        print("   ", row)


@lru_cache(maxsize=None)
def spectrum(N, alpha, D=10):
    return exact_spectrum(build_h_eff(LatticeConfig(N=N, alpha=alpha), D, TAU), TAU)


def test_c01_asymptote_half():
    s_inf = survival_infinity(1000, 10, 0)
    rows, ok = [], True
    for alpha in ALPHAS_FIG2:
        tr = run_monitored(lattice(1000, alpha), ProtocolConfig(tau=TAU, D=10, l=0, n_steps=50_000))
        m = (tr.t >= 5e3) & (tr.t <= 1e4)
        mean = tr.survival[m].mean()
        good = abs(mean - 0.5) <= 0.02 and abs(mean - s_inf) <= 0.01
        ok &= good
        rows.append(f"alpha={alpha}: mean S on [5e3,1e4] = {mean:.4f} (S_inf={s_inf:.4f}) {'ok' if good else 'FAIL'}")
    report("C1", rows)
    assert ok, rows


def test_c02_antipodal_plateau():
    # horizon 1e7/J: the t^-1/2 approach to zero is still at 0.05-0.25 at t = 1e4
    N, D = 200, 100
    assert survival_infinity(N, D, 0) == pytest.approx(0.0, abs=1e-15)
    rows, ok = [], True
    for alpha in ALPHAS_FIG2:
        tr = run_monitored_strided(lattice(N, alpha), ProtocolConfig(tau=TAU, D=D, l=0, n_steps=50_000_000), 25_000)
        plateau = tr.survival[-len(tr.survival) // 10 :].mean()
        ok &= plateau <= 0.02
        rows.append(f"alpha={alpha}: plateau = {plateau:.3g}")
    report("C2", rows)
    assert ok, rows


def test_c03_alpha0_freeze():
    tr = run_monitored(LatticeConfig(N=200, alpha=0.0), ProtocolConfig(tau=TAU, D=10, l=0, n_steps=5000))
    report("C3", [f"min S over t <= 1e3 = {tr.survival.min():.6f}"])
    assert tr.t[-1] == pytest.approx(1e3)
    assert tr.survival.min() >= 0.97


@lru_cache(maxsize=None)
def tail_beta(alpha, D, t_max):
    n = int(round(t_max / TAU))
    tr = run_monitored_strided(lattice(1000, alpha), ProtocolConfig(tau=TAU, D=D, l=0, n_steps=n), n // 2000)
    return fit_tail(tr, survival_infinity(1000, D, 0), default_window(float(tr.t[-1]))).beta


def test_c04_universal_tails():
    rows, ok = [], True
    for D, t_max, target, tol in ((1, 2e6, 1.5, 0.15), (50, 1e6, 0.5, 0.1)):
        betas = [tail_beta(a, D, t_max) for a in (0.5, 1.5, 3.0)]
        spread = max(betas) - min(betas)
        good = all(abs(b - target) <= tol for b in betas) and spread <= 0.1
        ok &= good
        rows.append(f"D={D}: beta = {np.round(betas, 3).tolist()} spread {spread:.3f} {'ok' if good else 'FAIL'}")
    report("C4", rows)
    assert ok, rows


def test_c05_dark_count():
    counts = {a: spectrum(1000, a).n_dark for a in (0.2, 0.5, 1.5, 3.0)}
    report("C5", [f"alpha={a}: {n} dark modes" for a, n in counts.items()])
    assert all(n == 500 for n in counts.values()), counts


def test_c06_perturbation_consistency():
    rows, ok = [], True
    for alpha in (0.5, 1.0, 2.0, 3.0):
        devs = []
        for tau in (0.2, 0.1, 0.05):
            _, gp, ge = paired_rates(LatticeConfig(N=200, alpha=alpha), 10, tau)
            top = np.argsort(ge)[::-1][:50]
            devs.append(np.max(np.abs(gp[top] - ge[top]) / ge[top]))
        good = devs[1] <= devs[0] / 2 and devs[2] <= devs[1] / 2
        ok &= good
        rows.append(f"alpha={alpha}: max rel dev {np.round(devs, 5).tolist()} {'ok' if good else 'FAIL'}")
    report("C6", rows)
    assert ok, rows


def test_c07_gamma_max_scaling():
    Ns = (250, 500, 1000)
    rows, ok = [], True
    for alpha in (0.1, 0.3, 0.7, 0.9):
        g = [spectrum(N, alpha).gamma_max for N in Ns]
        good = (g[0] < g[1] < g[2]) if alpha < 0.5 else (g[0] > g[1] > g[2])
        ok &= good
        rows.append(f"alpha={alpha}: gamma_max {np.round(g, 4).tolist()} {'ok' if good else 'FAIL'}")
    for alpha in (0.1, 0.3, 0.5):
        for N in Ns:
            closed = gamma_max_closed(LatticeConfig(N=N, alpha=alpha))
            rel = abs(closed - spectrum(N, alpha).gamma_max) / spectrum(N, alpha).gamma_max
            ok &= rel <= 0.3
            rows.append(f"alpha={alpha} N={N}: closed form off by {rel:.3%}")
    report("C7", rows)
    assert ok, rows


def test_c08_gap_transition():
    Ns = (200, 400, 800, 1600)
    gaps = {a: [spectral_gap(spectrum(N, a)) for N in Ns] for a in (0.0, 0.25, 0.5, 0.75, 1.0)}
    rows, ok = [], True
    for a, g in gaps.items():
        if a in (0.0, 0.25):
            good = all(x < y for x, y in zip(g, g[1:]))
        elif a == 0.5:
            good = 0.5 <= g[-1] / g[0] <= 2
        else:
            good = all(x > y for x, y in zip(g, g[1:]))
        ok &= good
        rows.append(f"alpha={a}: gap {[f'{x:.4g}' for x in g]} {'ok' if good else 'FAIL'}")
    report("C8", rows)
    assert ok, rows


def test_c09_oracle_equivalence():
    worst_s = worst_p = 0.0
    for N in (8, 16, 32):
        for alpha in (0.0, 0.5, 1.0, 2.0, 3.0):
            lat = LatticeConfig(N=N, alpha=alpha)
            H = hamiltonian_dense(lat)
            D = N // 2 - 1
            tr = run_monitored(lat, ProtocolConfig(tau=TAU, D=D, l=0, n_steps=100))
            worst_s = max(worst_s, np.max(np.abs(tr.survival - dense_survival(H, TAU, D, 0, 100))))
            for r in (1, 3, 10, 37):
                direct = direct_reset_pdet(H, TAU, D, 0, r, 100)
                renewal = np.array([pdet_with_reset(tr, r, n) for n in range(1, 101)])
                worst_p = max(worst_p, np.max(np.abs(renewal - direct[1:])))
    report("C9", [f"max |dS| = {worst_s:.2e}", f"max |dP_det| = {worst_p:.2e}"])
    assert worst_s <= 1e-10
    assert worst_p <= 1e-12


def reset_grid(N):
    out = {}
    for alpha in (0.2, 0.5, 1.0, 1.5, 2.0, 3.0):
        lat = LatticeConfig(N=N, alpha=alpha)
        out[alpha] = (optimize_r(lat, ProtocolConfig(tau=TAU, D=10, l=0), ResetConfig()), spectrum(N, alpha).gamma_max)
    return out


def reset_checks(N):
    start = time.perf_counter()
    grid = reset_grid(N)
    elapsed = time.perf_counter() - start
    D = 10
    scan3 = grid[3.0][0]
    causal = scan3.r_values * TAU < D / 2
    a = bool(np.all(np.isinf(scan3.t_converge[causal])))
    converging = scan3.r_values[causal & np.isfinite(scan3.t_converge)]
    pred = {al: predicted_optimal_r(grid[al][1], TAU) for al in (1.5, 3.0)}
    b = all(1 / 3 <= grid[al][0].r_best / pred[al] <= 3 for al in (1.5, 3.0))
    c = grid[0.2][0].t_best > grid[2.0][0].t_best
    best_alpha = min(grid, key=lambda al: grid[al][0].t_best)
    d = best_alpha > 1
    rows = [
        f"N={N} ({elapsed:.1f} s)",
        f"(a) alpha=3, r tau < D/2J: converging r = {converging.tolist()} {'ok' if a else 'FAIL'}",
        f"(b) r_best vs predicted: " + ", ".join(f"alpha={al}: {grid[al][0].r_best} vs {pred[al]}" for al in (1.5, 3.0)) + (" ok" if b else " FAIL"),
        f"(c) t_best(0.2) = {grid[0.2][0].t_best:.1f} > t_best(2) = {grid[2.0][0].t_best:.1f} {'ok' if c else 'FAIL'}",
        f"(d) global minimum at alpha = {best_alpha} (t = {grid[best_alpha][0].t_best:.1f}) {'ok' if d else 'FAIL'}",
    ]
    return (a, b, c, d), elapsed, rows


def test_c10_reset_structure():
    full, _, rows_full = reset_checks(1000)
    reduced, elapsed, rows_red = reset_checks(400)
    report("C10", rows_full + rows_red)
    assert elapsed < 300
    assert all(full) and all(reduced), rows_full + rows_red


def test_c11_timescale_ordering():
    rows, t_eq, t_rel = [], [], []
    for alpha in (0.3, 1.0, 3.0):
        tr = run_monitored(LatticeConfig(N=1000, alpha=alpha), ProtocolConfig(tau=TAU, D=10, l=0, n_steps=100_000), record_fidelity=True)
        t_eq.append(equilibration_time(tr.t, tr.fidelity))
        t_rel.append(relaxation_time(tr))
        rows.append(f"alpha={alpha}: t_eq = {t_eq[-1]:.1f}, t_1/2 = {t_rel[-1]:.1f}")
    report("C11", rows)
    assert all(r >= e for r, e in zip(t_rel, t_eq))
    assert t_eq[0] > t_eq[1] > t_eq[2]
    assert t_rel[0] > t_rel[1] > t_rel[2]


def test_c12_determinism(tmp_path):
    runs = {
        "survival": ["survival", "--n", "60", "--alpha", "0.5,1.5,3,nn", "--steps", "500", "--detector", "10,30"],
        "spectrum": ["spectrum", "--n", "60,80", "--alpha", "0,0.5,1", "--both"],
        "reset": ["reset", "--n", "60", "--alpha", "0.2,1.5,3", "--reset-r", "1:100"],
        "tails": ["tails", "--n", "60", "--alpha", "0.5,3", "--detector", "1,20", "--tmax", "1e4", "--samples", "200"],
    }
    rows = []
    for command, argv in runs.items():
        outputs = []
        for i, threads in enumerate((1, 4, 1)):
            out = tmp_path / f"{command}{i}"
            assert main([*argv, "--threads", str(threads), "--out", str(out)]) == 0
            outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        same = outputs[0] == outputs[1] == outputs[2]
        rows.append(f"{command}: {len(outputs[0])} files, identical for 1/4/1 workers: {same}")
        assert same, command
    report("C12", rows)
