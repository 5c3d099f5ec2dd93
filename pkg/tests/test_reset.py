import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrwalk.errors import ConfigError, NoConvergenceError
from lrwalk.lattice import LatticeConfig, hamiltonian_dense
from lrwalk.reset import (
    ResetConfig,
    convergence_steps,
    convergence_time,
    default_r_grid,
    optimize_r,
    pdet_with_reset,
    predicted_optimal_r,
    scan_reset,
)
from lrwalk.walk import ProtocolConfig, SurvivalTrace, run_monitored

from oracles import direct_reset_pdet


def test_config_validation():
    with pytest.raises(ConfigError):
        ResetConfig(r=0)
    with pytest.raises(ConfigError):
        ResetConfig(target_pdet=1.0)
    with pytest.raises(ConfigError):
        ResetConfig(r_scan=(5, 2))


def test_default_grid():
    g = default_r_grid()
    assert g[0] == 1 and g[-1] == 500
    assert np.all(np.diff(g) > 0)
    np.testing.assert_array_equal(g[:50], np.arange(1, 51))
    np.testing.assert_array_equal(ResetConfig(r_scan=(7, 7)).grid(), [7])


def test_pdet_without_reset_in_horizon():
    S = np.linspace(1, 0.2, 11)
    for n in range(1, 11):
        assert pdet_with_reset(S, 10, n) == pytest.approx(1 - S[n])


def test_pdet_geometric_composition():
    S = np.array([1.0, 0.8, 0.5])
    assert pdet_with_reset(S, 2, 6) == pytest.approx(1 - 0.125)
    assert pdet_with_reset(S, 2, 5) == pytest.approx(1 - 0.25 * 0.8)
    with pytest.raises(ValueError):
        pdet_with_reset(S, 3, 6)


def test_convergence_block_count():
    # S(t_r) = 0.5, target 0.9: four blocks give 0.9375, refined inside the fourth
    S = np.array([1.0, 0.9, 0.7, 0.5])
    n = convergence_steps(S, 3, 0.9)
    assert n == 11
    assert pdet_with_reset(S, 3, n) >= 0.9 > pdet_with_reset(S, 3, n - 1)
    assert convergence_time(S, 3, 0.9, tau=0.2) == pytest.approx(2.2)
    with pytest.raises(ValueError):
        convergence_time(S, 3, 0.9)


def test_convergence_never():
    S = np.ones(5)
    with pytest.raises(NoConvergenceError, match="never clicks"):
        convergence_steps(S, 4)
    with pytest.raises(NoConvergenceError, match="cap"):
        convergence_steps(np.array([1.0, 1 - 1e-9]), 1, max_steps=10**6)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(0.1, 0.99))
def test_convergence_is_first_crossing(s_mid, frac, target):
    S = np.array([1.0, 1 - (1 - s_mid) * frac, s_mid])
    try:
        n = convergence_steps(S, 2, target)
    except NoConvergenceError:
        return
    assert pdet_with_reset(S, 2, n) >= target
    if n > 1:
        assert pdet_with_reset(S, 2, n - 1) < target


def test_better_block_survival_converges_no_later():
    S1 = np.array([1.0, 0.9, 0.4])
    S2 = np.array([1.0, 0.9, 0.6])
    assert convergence_steps(S1, 2) <= convergence_steps(S2, 2)


@pytest.mark.parametrize("r", [1, 3, 7, 25])
@pytest.mark.parametrize("alpha", [0.0, 1.0, 2.5])
def test_renewal_matches_direct_simulation(r, alpha):
    N = 32
    lat = LatticeConfig(N=N, alpha=alpha)
    tr = run_monitored(lat, ProtocolConfig(tau=0.2, D=9, l=0, n_steps=100))
    direct = direct_reset_pdet(hamiltonian_dense(lat), 0.2, 9, 0, r, 100)
    renewal = [pdet_with_reset(tr, r, n) for n in range(1, 101)]
    np.testing.assert_allclose(renewal, direct[1:], atol=1e-12)


def test_predicted_optimal_r():
    assert predicted_optimal_r(10.0, 0.2) == 1
    assert predicted_optimal_r(0.05, 0.2) == 100
    with pytest.raises(ValueError):
        predicted_optimal_r(0.0, 0.2)


def test_predicted_rate_grows_with_N_at_small_alpha():
    from lrwalk.effective import build_h_eff, exact_spectrum

    rates = []
    for N in (500, 1000):
        g = exact_spectrum(build_h_eff(LatticeConfig(N=N, alpha=0.2), 10, 0.2), 0.2).gamma_max
        rates.append(g)
    assert rates[1] > rates[0]
    assert predicted_optimal_r(rates[0], 0.2) == 1


def test_scan_reset_inf_sentinel_and_empty():
    S = np.concatenate([np.ones(5), np.linspace(1, 0.3, 20)])
    tr = SurvivalTrace(tau=0.1, steps=np.arange(len(S)), survival=S)
    scan = scan_reset(tr, [1, 2, 4, 10, 24])
    assert np.isinf(scan.t_converge[:3]).all()
    assert np.isfinite(scan.t_converge[3:]).all()
    assert scan.r_best in (10, 24)
    with pytest.raises(NoConvergenceError):
        scan_reset(tr, [1, 2])


def test_optimize_r_alpha15_fixture():
    # frozen from the first full-grid run (N=1000, tau=0.2, D=10)
    scan = optimize_r(LatticeConfig(N=1000, alpha=1.5), ProtocolConfig(tau=0.2, D=10, l=0), ResetConfig())
    assert scan.r_best == 28
    assert scan.t_best == pytest.approx(305.2, abs=1e-9)
    finite = scan.t_converge[np.isfinite(scan.t_converge)]
    assert math.isclose(finite.min(), scan.t_best)
