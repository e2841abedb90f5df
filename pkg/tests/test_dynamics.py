import numpy as np
import pytest

import belltraj as bt


def test_hamiltonian_matrix_entries():
    omega = 3.0
    h = bt.hamiltonian_matrix(omega, 12).matrix
    for n in range(12):
        want = (omega * omega + 1.0) * (2 * n + 1) / 4.0
        assert abs(h[n, n] - want) < 1e-13
    for n in range(10):
        want = (omega * omega - 1.0) * np.sqrt((n + 1.0) * (n + 2.0)) / 4.0
        assert abs(h[n, n + 2] - want) < 1e-13
        assert abs(h[n + 2, n] - want) < 1e-13
    assert np.abs(np.triu(h, 3)).max() == 0.0
    assert np.abs(h[1, 0]) == 0.0 and np.abs(h[0, 1]) == 0.0


def test_hamiltonian_edge_cases():
    # a free particle is a legal (if extreme) choice
    h0 = bt.hamiltonian_matrix(0.0, 4).matrix
    assert abs(h0[0, 0] - 0.25) < 1e-15
    # matched frequency: diagonal in the number basis
    h1 = bt.hamiltonian_matrix(1.0, 6).matrix
    assert np.abs(h1 - np.diag(np.arange(6) + 0.5)).max() < 1e-14
    with pytest.raises(ValueError):
        bt.hamiltonian_matrix(-2.0, 4)
    with pytest.raises(ValueError):
        bt.hamiltonian_matrix(1.0, 0)


def test_direct_cache_reconstructs_hamiltonian():
    cache = bt.evolution_cache(4.0, 48, method="direct")
    assert cache.reconstruction_error() < 1e-10
    assert np.all(np.diff(cache.eigenvalues) > 0)
    gram = cache.modes.T @ cache.modes
    assert np.abs(gram - np.eye(48)).max() < 1e-12


def test_ladder_cache_spectrum_is_exact():
    omega = 4.0
    cache = bt.evolution_cache(omega, 32, method="ladder")
    want = omega * (np.arange(32) + 0.5)
    assert np.abs(cache.eigenvalues - want).max() < 1e-12
    gram = cache.modes.T @ cache.modes
    assert np.abs(gram - np.eye(32)).max() < 1e-12


def test_ladder_cache_residual_is_small_on_inner_block():
    # the adapted basis does not exactly diagonalize the truncated
    # quadratic form, but the defect on the retained block is tiny
    cache = bt.evolution_cache(4.0, 64, method="ladder")
    assert cache.reconstruction_error(block=9) < 1e-3


def test_propagator_unitary_and_periodic():
    for omega in (4.0, 2.5):
        cache = bt.evolution_cache(omega, 24)
        u = cache.propagator(0.37)
        assert np.abs(u @ u.conj().T - np.eye(24)).max() < 1e-12
        # one full period returns minus the identity (half-integer spectrum)
        u_full = cache.propagator(2.0 * np.pi / omega)
        assert np.abs(u_full + np.eye(24)).max() < 1e-11


def test_half_period_is_parity_times_phase():
    # exp(-i pi (n + 1/2)) = -i (-1)^n
    for omega in (4.0, 2.5):
        u = bt.evolution_operator(omega, np.pi / omega, 20)
        parity = np.diag((-1.0) ** np.arange(20))
        assert np.abs(u - (-1j) * parity).max() < 1e-11


def test_quarter_period_of_fast_oscillator():
    u = bt.evolution_operator(4.0, np.pi / 2.0, 48)
    assert np.abs(u + np.eye(48)).max() < 1e-11


def test_fourier_operator_properties():
    f = bt.fourier_operator(30)
    # matches the matched-frequency propagator at a quarter period
    u = bt.evolution_operator(1.0, np.pi / 2.0, 30)
    assert np.abs(f - u).max() < 1e-13
    # fourth power completes one period: minus the identity
    f4 = np.linalg.matrix_power(f, 4)
    assert np.abs(f4 + np.eye(30)).max() < 1e-12
    # conjugation sends position to momentum exactly in this basis
    basis = bt.BasisSpec(5, 30)
    q = bt.position_operator(basis).matrix
    p = bt.momentum_operator(basis).matrix
    assert np.abs(f.conj().T @ q @ f - p).max() < 1e-12


def test_ladder_agrees_with_large_direct_reference():
    # the brute-force route needs a much larger space to converge;
    # compare retained columns at a physically relevant time
    t = 1.485
    u_fast = bt.evolution_operator(4.0, t, 128, method="ladder")
    u_slow = bt.evolution_operator(4.0, t, 384, method="direct")
    assert np.abs(u_fast[:9, :9] - u_slow[:9, :9]).max() < 1e-5


def test_evolution_cache_is_memoized():
    a = bt.evolution_cache(4.0, 16)
    b = bt.evolution_cache(4.0, 16)
    assert a is b
    with pytest.raises(ValueError):
        bt.evolution_cache(4.0, 16, method="magic")
    with pytest.raises(ValueError):
        a.propagator(-0.1)


def test_strategy_validation():
    s = bt.HarmonicStrategy()
    assert s.frequency(0) == 4.0
    assert s.frequency(1) == 1.0
    with pytest.raises(ValueError):
        s.frequency(2)
    with pytest.raises(ValueError):
        bt.HarmonicStrategy(omega_map={0: -1.0, 1: 1.0})
    with pytest.raises(ValueError):
        bt.HarmonicStrategy(omega_map={0: 4.0})


def test_heisenberg_observable_consistency():
    basis = bt.BasisSpec(3, 12)
    op = bt.two_mode_abs_difference(basis, cross_check=False)
    evolved = bt.heisenberg_observable(op, 0, 1, 0.8)
    assert evolved.modes == 2 and evolved.dim == 144
    assert np.abs(evolved.matrix - evolved.matrix.conj().T).max() < 1e-12
    # direct sandwich with explicit Kronecker propagators
    ua = bt.evolution_operator(4.0, 0.8, 12)
    ub = bt.evolution_operator(1.0, 0.8, 12)
    u = np.kron(ua, ub)
    want = u.conj().T @ op.matrix @ u
    assert np.abs(evolved.matrix - want).max() < 1e-11
    # zero time is the identity map
    frozen = bt.heisenberg_observable(op, 0, 1, 0.0)
    assert np.abs(frozen.matrix - op.matrix).max() < 1e-12
