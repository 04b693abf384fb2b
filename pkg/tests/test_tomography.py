import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import unitary_group

from heom1f import crgate, tomography


def _random_unitary(seed, d=4):
    return unitary_group.rvs(d, random_state=np.random.default_rng(seed))


def _dephasing(p, d=4):
    # random-free test channel: Z dephasing on the first qubit
    Z = np.kron(crgate.PAULIS["Z"], np.eye(2))
    return lambda rho: (1 - p) * rho + p * Z @ rho @ Z


def test_hermitian_inputs_span():
    mats, labels = tomography.hermitian_inputs(4)
    assert mats.shape == (16, 4, 4)
    assert np.allclose(mats, np.conj(np.swapaxes(mats, 1, 2)))
    assert np.linalg.matrix_rank(mats.reshape(16, 16)) == 16


@given(st.integers(0, 10_000))
@settings(max_examples=10, deadline=None)
def test_reconstruction_matches_unitary_channel(seed):
    U = _random_unitary(seed)
    ch = tomography.channel_from_propagation(lambda r: U @ r @ U.conj().T, 4)
    ref = tomography.unitary_channel(U)
    assert np.allclose(ch.outputs, ref.outputs, atol=1e-12)
    A = _random_unitary(seed + 1)
    assert np.allclose(ch.apply(A), U @ A @ U.conj().T, atol=1e-12)


def test_choi_of_unitary_is_rank_one_and_tp():
    U = _random_unitary(3)
    chi = tomography.choi(tomography.unitary_channel(U))
    ev = np.linalg.eigvalsh(chi)
    assert ev[-1] == pytest.approx(4.0) and np.allclose(ev[:-1], 0, atol=1e-10)
    checks = tomography.cp_tp_checks(chi)
    assert max(abs(checks["trace_defect"]), checks["tp_defect"], checks["hermiticity_defect"]) < 1e-12


def test_gate_fidelity_identity_and_stack():
    U = _random_unitary(5)
    chi = tomography.choi(tomography.unitary_channel(U))
    assert tomography.gate_fidelity(chi, chi) == pytest.approx(1.0)
    stack = np.array([chi, chi])
    assert np.allclose(tomography.gate_fidelity(stack, stack), 1.0)
    with pytest.raises(ValueError):
        tomography.gate_fidelity(chi, np.zeros_like(chi))


def test_ptm_paths_agree():
    U = _random_unitary(11)
    ch = tomography.unitary_channel(U)
    R1 = tomography.ptm(ch)
    R2 = tomography.ptm_from_choi(tomography.choi(ch))
    assert np.allclose(R1, R2, atol=1e-12)
    assert np.allclose(R1 @ R1.T, np.eye(16), atol=1e-10)
    assert np.allclose(R1[0], np.eye(16)[0], atol=1e-12)


def test_dephasing_ptm_diagonal():
    ch = tomography.channel_from_propagation(_dephasing(0.1), 4)
    R = tomography.ptm(ch)
    labels = crgate.pauli_labels(2)
    for i, lbl in enumerate(labels):
        expected = 1.0 if lbl[0] in "IZ" else 0.8
        assert R[i, i] == pytest.approx(expected)
    assert np.allclose(R - np.diag(np.diag(R)), 0, atol=1e-12)


def test_ideal_cr_ptm_entries():
    R = tomography.ptm(tomography.unitary_channel(crgate.ideal_unitary()))
    lab = crgate.pauli_labels(2)
    ix = {l: i for i, l in enumerate(lab)}
    # exp(-i pi/4 ZX) maps IY -> ZZ and IZ -> -ZY
    assert R[ix["ZZ"], ix["IY"]] == pytest.approx(1.0)
    assert R[ix["ZY"], ix["IZ"]] == pytest.approx(-1.0)
    assert R[ix["ZX"], ix["ZX"]] == pytest.approx(1.0)


def test_top_entries_order_and_ties():
    d = np.zeros((16, 16))
    d[3, 4] = -0.5
    d[1, 2] = 0.5
    d[0, 0] = 0.1
    top = tomography.top_entries(d, k=3)
    assert [(r, c) for r, c, _ in top] == [("IX", "IY"), ("IZ", "XI"), ("II", "II")]
    assert "IX,IY: +5.000000e-01" in tomography.format_top_entries(top)


def test_batched_channel_from_outputs():
    U = _random_unitary(2)
    mats, _ = tomography.hermitian_inputs(4)
    outs = np.array([U @ mats @ U.conj().T, mats])
    table = tomography.channel_from_outputs(outs, 4)
    chis = tomography.choi(table)
    assert chis.shape == (2, 16, 16)
    assert np.allclose(chis[0], tomography.choi(tomography.unitary_channel(U)))
