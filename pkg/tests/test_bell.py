import numpy as np
import pytest

import belltraj as bt
from belltraj.bell import PAIR_SETTINGS, _select_min_eigenpair

# Minimum eigenvalue of the closed-form probe-time matrix built below,
# frozen at full double precision.
XI_REFERENCE = -0.03351573507249439


def probe_time_matrix(n_sub=9):
    """Closed-form Bell matrix at t = pi/2.

    At a quarter period of the slow oscillator the fast one ends a full
    period (propagator -1) while the slow one applies the diagonal phase
    exp(-i pi (n + 1/2) / 2).  All four correlators are therefore phase
    conjugations of one exactly-compressed distance matrix, with no
    truncated time evolution involved.
    """
    d = bt.distance_kernel(n_sub).dense()
    f = np.exp(-0.5j * np.pi * (np.arange(n_sub) + 0.5))
    ones = np.ones(n_sub)
    fa = np.kron(f, ones)
    fb = np.kron(ones, f)
    fab = fa * fb
    s = d.copy()
    s = s + d * np.outer(np.conj(fb), fb)
    s = s + d * np.outer(np.conj(fa), fa)
    s = s - d * np.outer(np.conj(fab), fab)
    return s


def test_probe_time_reference_value():
    vals = np.linalg.eigvalsh(probe_time_matrix())
    assert abs(vals[0] - XI_REFERENCE) < 2e-12
    # well separated ground state
    assert vals[1] - vals[0] > 0.09


def test_bell_operator_matches_closed_form():
    op = bt.bell_operator(np.pi / 2.0, n_big=48)
    ref = probe_time_matrix()
    assert op.dim == 81 and op.modes == 2
    assert np.abs(op.matrix - ref).max() < 1e-9
    low = np.linalg.eigvalsh(op.matrix)[0]
    assert abs(low - XI_REFERENCE) < 1e-10


def test_find_violating_state():
    res = bt.find_violating_state(n_big=48, check_convergence=False)
    assert abs(res.xi_minus - XI_REFERENCE) < 1e-9
    assert res.violation
    assert not res.degenerate
    assert res.gap > 0.09
    assert abs(res.probe_time - np.pi / 2.0) < 1e-15
    assert res.converged is None
    assert set(res.convergence) == {48}
    assert abs(np.linalg.norm(res.state.amplitudes) - 1.0) < 1e-12

    # independent recomputation of the quadratic form for the same state
    engine = bt.BellEngine(n_big=48)
    direct = engine.bell_value(res.state.matrix, np.pi / 2.0)
    assert abs(direct - res.xi_minus) < 1e-9


def test_optimal_state_structure():
    res = bt.find_violating_state(n_big=32, check_convergence=False)
    c = res.state.matrix
    # symmetric under swapping the two parties
    assert np.abs(c - c.T).max() < 1e-8
    # supported entirely on even total occupation
    m, n = np.meshgrid(np.arange(9), np.arange(9), indexing="ij")
    odd_mass = np.sum(np.abs(c[(m + n) % 2 == 1]) ** 2)
    assert odd_mass < 1e-12


def test_two_mode_state_canonical_phase():
    rng = np.random.default_rng(5)
    raw = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    a = bt.TwoModeState.from_amplitudes(raw)
    b = bt.TwoModeState.from_amplitudes(raw * np.exp(1.37j) * 2.5)
    assert a.n_sub == 4
    assert np.abs(a.amplitudes - b.amplitudes).max() < 1e-12
    assert abs(np.linalg.norm(a.amplitudes) - 1.0) < 1e-12
    lead = np.argmax(np.abs(a.amplitudes))
    assert abs(a.amplitudes[lead].imag) < 1e-12 and a.amplitudes[lead].real > 0


def test_two_mode_state_validation():
    with pytest.raises(ValueError):
        bt.TwoModeState(np.ones(12) / np.sqrt(12.0), 3)
    with pytest.raises(ValueError):
        bt.TwoModeState(np.ones(9), 3)  # not normalised
    v = np.zeros(9)
    v[0] = np.nan
    with pytest.raises(ValueError):
        bt.TwoModeState.from_amplitudes(v)
    prod = bt.TwoModeState.from_amplitudes(np.outer([1, 1], [1, -1]).ravel())
    sv = prod.schmidt_values()
    assert abs(sv[0] - 1.0) < 1e-12 and sv[1] < 1e-12


def test_correlators_definition_consistency():
    # the four correlators must reproduce the Heisenberg-picture sandwich
    res = bt.find_violating_state(n_sub=4, n_big=24, check_convergence=False)
    engine = bt.BellEngine(n_sub=4, n_big=24)
    t = 1.1
    f = engine.correlators(res.state.matrix, t)
    op = bt.two_mode_abs_difference(bt.BasisSpec(4, 24), cross_check=False)
    padded = np.zeros((24, 24), dtype=complex)
    padded[:4, :4] = res.state.matrix
    vec = padded.ravel()
    for k, (a, b) in enumerate(PAIR_SETTINGS):
        evolved = bt.heisenberg_observable(op, a, b, t)
        want = float(np.real(np.conj(vec) @ evolved.matrix @ vec))
        assert abs(f[k] - want) < 1e-10
    assert abs(engine.bell_value(res.state.matrix, t) - (f[0] + f[1] + f[2] - f[3])) < 1e-12


def test_sweep_locates_violation_window():
    res = bt.find_violating_state(n_big=32, check_convergence=False)
    result = bt.sweep(res.state, steps=201, n_big=32, refine_tol=1e-3)
    assert result.values.shape == (201,)
    assert set(result.components) == {"f00", "f01", "f10", "f11"}
    recomposed = (result.components["f00"] + result.components["f01"]
                  + result.components["f10"] - result.components["f11"])
    assert np.abs(recomposed - result.values).max() < 1e-12

    assert len(result.negative_intervals) == 1
    t_i, t_f = result.negative_intervals[0]
    assert abs(t_i - 1.4845) < 2e-3
    assert abs(t_f - 1.6640) < 2e-3
    engine = bt.BellEngine(n_big=32)
    assert abs(engine.bell_value(res.state.matrix, t_i)) < 1e-3
    assert abs(engine.bell_value(res.state.matrix, t_f)) < 1e-3
    assert result.values.min() < -0.03
    assert result.values[0] > 0.5  # starts well inside the classical region


def test_sweep_validation():
    state = bt.TwoModeState.from_amplitudes(np.eye(3).ravel())
    with pytest.raises(ValueError):
        bt.sweep(state, t_start=2.0, t_end=1.0, n_big=12)
    with pytest.raises(ValueError):
        bt.sweep(state, steps=1, n_big=12)
    with pytest.raises(ValueError):
        bt.sweep(state, refine_tol=0.0, n_big=12)


def test_integrated_bell_parameter_linear_exact():
    times = np.linspace(0.0, 3.0, 301)
    values = 2.0 * times - 1.0
    fake = bt.BellSweep(times=times, values=values, components={},
                        negative_intervals=[], refine_tol=1e-3,
                        n_big=0, method="ladder")
    # the integrand is linear, so the interpolated trapezoid rule is exact
    assert abs(bt.integrated_bell_parameter(fake, 0.5, 1.5) - 1.0) < 1e-12
    assert abs(bt.integrated_bell_parameter(fake) - 6.0) < 1e-12
    # window edges between grid points
    assert abs(bt.integrated_bell_parameter(fake, 0.2501, 0.7502)
               - ((0.7502 ** 2 - 0.7502) - (0.2501 ** 2 - 0.2501))) < 1e-12
    with pytest.raises(ValueError):
        bt.integrated_bell_parameter(fake, -0.5, 1.0)
    with pytest.raises(ValueError):
        bt.integrated_bell_parameter(fake, 2.0, 2.0)


def test_select_min_eigenpair_degenerate_tiebreak():
    m = np.diag([1.0, 1.0, 3.0]).astype(complex)
    val1, vec1, deg1, gap1 = _select_min_eigenpair(m)
    val2, vec2, deg2, gap2 = _select_min_eigenpair(m)
    assert deg1 and deg2
    assert abs(val1 - 1.0) < 1e-9
    assert np.abs(vec1 - vec2).max() == 0.0  # fully deterministic
    assert abs(vec1[2]) < 1e-6  # stays inside the degenerate subspace
    val, vec, deg, gap = _select_min_eigenpair(np.diag([1.0, 2.0, 3.0]).astype(complex))
    assert not deg and abs(val - 1.0) < 1e-14 and gap > 0.99
    assert np.abs(vec - np.array([1.0, 0.0, 0.0])).max() < 1e-14


def test_separable_states_stay_positive():
    report = bt.separable_positivity_check(
        n_states=40, seed=3, n_big=32, times=np.linspace(0.0, 3.0, 101))
    assert report.passed
    assert report.min_value >= -1e-9
    assert report.n_states == 40
    assert report.n_components >= 40


def test_separable_check_rejects_entangled_input():
    bell_pair = np.zeros((9, 9))
    bell_pair[0, 0] = bell_pair[1, 1] = 1.0 / np.sqrt(2.0)
    ent = bt.TwoModeState.from_amplitudes(bell_pair.ravel())
    with pytest.raises(ValueError):
        bt.separable_positivity_check(n_states=1, seed=0, n_big=16, states=[ent],
                                      times=np.linspace(0.0, 1.0, 5))
    # a genuine product state passes through the same gate
    prod = np.zeros((9, 9))
    prod[2, 1] = 1.0
    report = bt.separable_positivity_check(n_states=1, seed=0, n_big=16,
                                           states=[prod],
                                           times=np.linspace(0.0, 1.0, 5))
    assert report.n_states == 1 and report.passed
