import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heom1f import bath, heom
from heom1f.heom import SIGMA_X, SIGMA_Z

PLUS = 0.5 * np.ones((2, 2), complex)


def _series(amps, rates, static=0.0):
    return bath.ExponentialSeries(np.asarray(amps, complex), np.asarray(rates, complex), static)


def test_embed_two_qubits():
    assert np.allclose(heom.embed(SIGMA_Z, 0, 2), np.kron(SIGMA_Z, np.eye(2)))
    assert np.allclose(heom.embed(SIGMA_X, 1, 2), np.kron(np.eye(2), SIGMA_X))


def test_hierarchy_size_formula():
    assert heom.hierarchy_size(3, 0) == 1
    assert heom.hierarchy_size(3, 2) == 10
    ch = [heom.DissipationChannel.sigma_z(_series([1e-4, 2e-4], [0.1, 2.0]))]
    h = heom.build_hierarchy(ch, 3, scheme="merged")
    assert len(h) == heom.hierarchy_size(2, 3)
    assert len(heom.build_hierarchy(ch, 3, scheme="pairs")) == heom.hierarchy_size(4, 3)


def test_hierarchy_too_large_carries_count():
    ch = [heom.DissipationChannel.sigma_z(_series(np.full(10, 1e-4), np.linspace(0.1, 1, 10)))]
    with pytest.raises(heom.HierarchyTooLarge) as exc:
        heom.build_hierarchy(ch, 6, scheme="merged", max_ados=100)
    assert exc.value.count == heom.hierarchy_size(10, 6)


def test_no_noise_free_evolution_is_unitary():
    w = 0.3
    h = 0.5 * w * SIGMA_Z
    cfg = heom.PropagatorConfig(depth=2, dt=0.05)
    tr = heom.simulate([], PLUS, h, (0.0, 20.0), cfg, np.array([0.0, 10.0, 20.0]))
    assert np.allclose(tr.rhos[:, 0, 1], 0.5 * np.exp(-1j * w * tr.times), atol=1e-10)


@given(st.floats(1e-5, 5e-4), st.floats(0.05, 2.0))
@settings(max_examples=8, deadline=None)
def test_single_exponential_matches_closed_form(d, g):
    s = _series([d], [g])
    ch = [heom.DissipationChannel.sigma_z(s)]
    cfg = heom.PropagatorConfig(depth=6, dt=0.05)
    times = np.linspace(0, 30, 7)
    tr = heom.simulate(ch, PLUS, None, (0.0, 30.0), cfg, times)
    exact = 0.5 * np.exp(-s.dephasing_exponent(times))
    assert np.max(np.abs(tr.coherence - exact)) < 1e-7


def test_complex_rates_pairs_scheme():
    # a conjugate pair gives a real correlation function; pairs bookkeeping
    s = _series([1e-4 + 5e-5j, 1e-4 - 5e-5j], [0.5 + 1.0j, 0.5 - 1.0j])
    ch = [heom.DissipationChannel.sigma_z(s)]
    times = np.linspace(0, 20, 5)
    tr = heom.simulate(ch, PLUS, None, (0.0, 20.0), heom.PropagatorConfig(depth=6, dt=0.02), times)
    exact = 0.5 * np.exp(-s.dephasing_exponent(times))
    assert np.max(np.abs(tr.coherence - exact)) < 1e-7


def test_trace_and_hermiticity_preserved():
    s = _series([2e-4], [0.3])
    ch = [heom.DissipationChannel.sigma_z(s)]
    h = 0.1 * SIGMA_X
    tr = heom.simulate(ch, PLUS, h, (0.0, 50.0), heom.PropagatorConfig(depth=4, dt=0.05),
                       np.linspace(0, 50, 11))
    assert np.allclose(np.trace(tr.rhos, axis1=1, axis2=2), 1.0, atol=1e-10)
    assert np.allclose(tr.rhos, np.conj(np.swapaxes(tr.rhos, 1, 2)), atol=1e-12)


def test_dt_halving_converges():
    s = _series([2e-4], [0.3])
    ch = [heom.DissipationChannel.sigma_z(s)]
    h = 0.2 * SIGMA_X
    times = np.array([0.0, 25.0])
    a = heom.simulate(ch, PLUS, h, (0, 25), heom.PropagatorConfig(depth=4, dt=0.1), times)
    b = heom.simulate(ch, PLUS, h, (0, 25), heom.PropagatorConfig(depth=4, dt=0.05), times)
    assert np.max(np.abs(a.rhos - b.rhos)) < 1e-9


def test_rk4_and_ifrk4_agree_when_stable():
    s = _series([2e-4], [0.3])
    ch = [heom.DissipationChannel.sigma_z(s)]
    times = np.array([0.0, 10.0])
    a = heom.simulate(ch, PLUS, 0.1 * SIGMA_X, (0, 10), heom.PropagatorConfig(depth=3, dt=0.01), times)
    b = heom.simulate(ch, PLUS, 0.1 * SIGMA_X, (0, 10),
                      heom.PropagatorConfig(depth=3, dt=0.01, stepper="rk4"), times)
    assert np.max(np.abs(a.rhos - b.rhos)) < 1e-10


def test_rk4_divergence_raises_solver_error():
    s = _series([1e-4], [200.0])
    ch = [heom.DissipationChannel.sigma_z(s)]
    with pytest.raises(heom.SolverError):
        heom.simulate(ch, PLUS, None, (0, 50), heom.PropagatorConfig(depth=3, dt=0.5, stepper="rk4"))


def test_batched_inputs_match_individual():
    s = _series([2e-4], [0.3])
    ch = [heom.DissipationChannel.sigma_z(s)]
    rhos = np.array([PLUS, np.diag([1.0, 0.0]).astype(complex)])
    cfg = heom.PropagatorConfig(depth=3, dt=0.05)
    both = heom.simulate(ch, rhos, 0.1 * SIGMA_X, (0, 10), cfg, np.array([10.0]))
    one = heom.simulate(ch, rhos[1], 0.1 * SIGMA_X, (0, 10), cfg, np.array([10.0]))
    assert np.allclose(both.rhos[-1, 1], one.rhos[-1], atol=1e-14)


def test_perturbative_truncation_labels():
    c = heom.perturbative_truncation(heom.PropagatorConfig(depth=5), 2)
    assert c.depth == 2 and c.perturbative and "4" in c.label


def test_static_variance_zero_is_free_evolution():
    ch = [heom.DissipationChannel.sigma_z(bath.ExponentialSeries())]
    tr = heom.simulate(ch, PLUS, None, (0, 10), heom.PropagatorConfig(depth=3, dt=0.1), np.array([10.0]))
    assert np.allclose(tr.rhos[-1], PLUS)


def test_attach_static_mode():
    ch = [heom.DissipationChannel.sigma_z(_series([1e-4], [1.0]))]
    out = heom.attach_static_mode(ch, 3e-6)
    assert out[0].series.static_variance == 3e-6
    with pytest.raises(ValueError):
        heom.attach_static_mode(ch, -1.0)


def test_static_disorder_matches_gaussian():
    v = 1e-5
    t = np.linspace(0, 200, 21)
    tr = heom.static_disorder_propagate(PLUS, None, v, 30, (0, 200), dt=0.1, sample_times=t)
    assert np.max(np.abs(tr.coherence - 0.5 * np.exp(-2 * v * t**2))) < 1e-6


def test_static_disorder_convergence_error():
    with pytest.raises(heom.ConvergenceError):
        heom.static_disorder_propagate(PLUS, None, 1e-3, 2, (0, 100), dt=0.1)


def test_lindblad_rate():
    t = np.linspace(0, 100, 11)
    tr = heom.lindblad_propagate(PLUS, None, 1 / 50.0, (0, 100), 0.1, t)
    assert np.allclose(tr.coherence, 0.5 * np.exp(-t / 50.0), atol=1e-12)


def test_kick_applied_at_time():
    kick = (5.0, SIGMA_X.astype(complex))
    h = heom.PiecewiseHamiltonian([], [], 2, kicks=[kick])
    rho0 = np.diag([1.0, 0.0]).astype(complex)
    tr = heom.simulate([], rho0, h, (0, 10), heom.PropagatorConfig(depth=0, dt=0.1),
                       np.array([4.9, 5.1]))
    assert tr.rhos[0, 0, 0].real == pytest.approx(1.0)
    assert tr.rhos[1, 1, 1].real == pytest.approx(1.0)


def test_invalid_config():
    with pytest.raises(ValueError):
        heom.PropagatorConfig(dt=0.0)
    with pytest.raises(ValueError):
        heom.PropagatorConfig(stepper="euler")
