import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from heom1f import crgate, units


@pytest.fixture(scope="module")
def seed():
    return crgate.CrParams.area_seed(units.angular(0.5148), units.angular(0.05), 132.0)


def test_ideal_unitary():
    assert np.allclose(crgate.ideal_unitary(), expm(-1j * math.pi / 4 * crgate.ZX))


def test_hamiltonian_hermitian_and_structure():
    p = crgate.CrParams.reference()
    h = crgate.cr_static_hamiltonian(p)
    assert np.allclose(h, h.conj().T)
    proj = crgate.pauli_projection(h)
    d = dict(zip(proj.labels, proj.hermitian))
    assert d["ZI"] == pytest.approx(p.detuning / 2)
    assert d["XX"] == pytest.approx(p.coupling) and d["YY"] == pytest.approx(p.coupling)
    assert d["XI"] == pytest.approx(p.amplitude / 2)
    assert np.allclose(crgate.cr_hamiltonian(200.0, p), crgate.cr_static_hamiltonian(p, drive=False))


def test_area_condition(seed):
    assert crgate.cr_area_condition(seed) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        crgate.solve_amplitude(crgate.CrParams(0.0, 0.1, 10.0, 0.0))


def test_rz_convention():
    assert np.allclose(crgate.rz(0.7), expm(-0.35j * crgate.PAULIS["Z"]))


@given(st.lists(st.floats(-math.pi, math.pi), min_size=4, max_size=4))
@settings(max_examples=10, deadline=None)
def test_optimal_rz_recovers_known_corrections(angles):
    target = crgate.ideal_unitary()
    pre = np.kron(crgate.rz(-angles[0]), crgate.rz(-angles[1]))
    post = np.kron(crgate.rz(-angles[2]), crgate.rz(-angles[3]))
    u = post @ target @ pre
    _, fid = crgate.optimal_rz(u)
    assert fid > 1 - 1e-9


def test_unitary_fidelity_phase_insensitive():
    u = crgate.ideal_unitary()
    assert crgate.unitary_fidelity(u, np.exp(0.3j) * u) == pytest.approx(1.0)


def test_pauli_basis_orthonormal():
    P = crgate.pauli_basis(2)
    G = np.einsum("aij,bji->ab", P, P) / 4
    assert np.allclose(G, np.eye(16))
    assert crgate.pauli_labels(2)[:5] == ["II", "IX", "IY", "IZ", "XI"]


def test_calibration_reaches_target(seed):
    params, report = crgate.calibrate(seed)
    assert report.converged and report.fidelity >= 0.999
    assert crgate.unitary_fidelity(crgate.ideal_unitary(), crgate.calibrated_propagator(params)) == \
        pytest.approx(report.fidelity, abs=1e-12)
    assert "fidelity" in report.summary()


def test_calibration_is_deterministic(seed):
    a, _ = crgate.calibrate(seed, max_iter=5)
    b, _ = crgate.calibrate(seed, max_iter=5)
    assert a == b


def test_trivial_search_returns_seed(seed):
    p, r = crgate.calibrate(seed, crgate.CalibrationSearch(trivial=True))
    assert p == seed and r.iterations == 0


def test_calibrated_propagator_window(seed):
    with pytest.raises(ValueError):
        crgate.calibrated_propagator(seed, seed.duration + 1.0)


def test_cr_calibrator_estimator(seed):
    from sklearn.base import clone

    est = crgate.CrCalibrator(max_iter=60)
    assert clone(est).get_params() == est.get_params()
    est.fit(seed)
    assert est.score() >= 0.999
    assert est.predict([0.0, est.params_.duration]).shape == (2, 4, 4)
