"""Process tomography from propagations: Choi matrix, PTM and diagnostics.

Channels are reconstructed by linearity.  Only Hermitian operators are
ever propagated: the matrix units ``|i><j|`` are recombined from the
outputs for ``|i><j| + |j><i|`` and ``i|i><j| - i|j><i|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .crgate import pauli_basis, pauli_labels


@dataclass(frozen=True)
class QuantumChannel:
    """Linear map stored as its outputs on the matrix units.

    ``outputs[i, j]`` is ``E(|i><j|)``, shape (d, d, d, d).
    """

    outputs: np.ndarray

    @property
    def dim(self):
        return self.outputs.shape[0]

    def apply(self, A):
        A = np.asarray(A, dtype=complex)
        return np.einsum("ij,ijab->ab", A, self.outputs)


def hermitian_inputs(dim):
    """Stack of d^2 Hermitian inputs and their labels.

    Order: the diagonal units ``|i><i|``, then for each ``i < j`` the
    symmetric ``|i><j| + |j><i|`` and antisymmetric ``i|i><j| - i|j><i|``.
    """
    mats, labels = [], []
    for i in range(dim):
        m = np.zeros((dim, dim), complex)
        m[i, i] = 1
        mats.append(m)
        labels.append(("d", i, i))
    for i in range(dim):
        for j in range(i + 1, dim):
            s = np.zeros((dim, dim), complex)
            s[i, j] = s[j, i] = 1
            a = np.zeros((dim, dim), complex)
            a[i, j], a[j, i] = 1j, -1j
            mats += [s, a]
            labels += [("s", i, j), ("a", i, j)]
    return np.array(mats), labels


def channel_from_outputs(outputs, dim):
    """Assemble a channel from the images of :func:`hermitian_inputs`.

    ``outputs`` may carry leading axes (e.g. time); the result then holds
    a stack of channels with ``outputs`` of shape (..., d, d, d, d).
    """
    outputs = np.asarray(outputs, dtype=complex)
    _, labels = hermitian_inputs(dim)
    lead = outputs.shape[:-3]
    table = np.zeros(lead + (dim, dim, dim, dim), complex)
    k = 0
    for kind, i, j in labels:
        if kind == "d":
            table[..., i, i, :, :] = outputs[..., k, :, :]
            k += 1
        elif kind == "s":
            es, ea = outputs[..., k, :, :], outputs[..., k + 1, :, :]
            table[..., i, j, :, :] = 0.5 * (es - 1j * ea)
            table[..., j, i, :, :] = 0.5 * (es + 1j * ea)
            k += 2
    return table


def channel_from_propagation(propagate_fn, dim, batched=False):
    """Reconstruct a channel from a propagation routine.

    Parameters
    ----------
    propagate_fn : callable
        Maps a Hermitian (d, d) matrix to its final reduced matrix, or a
        stack (d^2, d, d) to a stack of outputs when ``batched``.
    dim : int
    batched : bool

    Returns
    -------
    QuantumChannel
    """
    inputs, _ = hermitian_inputs(dim)
    if batched:
        outs = np.asarray(propagate_fn(inputs))
    else:
        outs = np.array([propagate_fn(m) for m in inputs])
    return QuantumChannel(channel_from_outputs(outs, dim))


def unitary_channel(U):
    U = np.asarray(U, dtype=complex)
    d = U.shape[0]
    out = np.einsum("ai,bj->ijab", U, U.conj())
    return QuantumChannel(out.reshape(d, d, d, d))


def choi(channel):
    """Unnormalized Choi matrix ``sum_ij |i><j| (x) E(|i><j|)`` (trace d for TP maps)."""
    out = channel.outputs if isinstance(channel, QuantumChannel) else np.asarray(channel)
    d = out.shape[-1]
    lead = out.shape[:-4]
    return np.swapaxes(out, -3, -2).reshape(lead + (d * d, d * d))


def gate_fidelity(chi_a, chi_b):
    """``Tr(chi_a chi_b) / Tr(chi_b^2)`` (real part)."""
    chi_a = np.asarray(chi_a)
    chi_b = np.asarray(chi_b)
    if chi_a.shape[-2:] != chi_b.shape[-2:]:
        raise ValueError("Choi matrices have different dimensions")
    den = np.real(np.einsum("...ij,...ji->...", chi_b, chi_b))
    if np.any(den == 0):
        raise ValueError("reference Choi matrix is zero")
    num = np.real(np.einsum("...ij,...ji->...", chi_a, chi_b))
    return num / den


def _n_qubits(dim):
    n = int(round(math.log2(dim)))
    if 2**n != dim:
        raise ValueError("Pauli transfer matrices need a qubit dimension")
    return n


def ptm(channel):
    """Pauli transfer matrix ``R_ij = Tr[P_i E(P_j)] / d``."""
    d = channel.dim
    P = pauli_basis(_n_qubits(d))
    images = np.einsum("jab,...abxy->...jxy", P, channel.outputs)
    return np.real(np.einsum("ixy,...jyx->...ij", P, images)) / d


def ptm_from_choi(chi):
    """PTM from a Choi matrix via ``R_ij = Tr[(P_j^T (x) P_i) chi] / d``."""
    chi = np.asarray(chi)
    d = int(round(math.sqrt(chi.shape[-1])))
    P = pauli_basis(_n_qubits(d))
    c = chi.reshape(chi.shape[:-2] + (d, d, d, d))   # [i, a, j, b]
    # Tr[(A^T (x) B) chi] = sum A_ji B_ba chi[(i,a),(j,b)]
    return np.real(np.einsum("pij,qba,...iajb->...qp", P, P, c)) / d


def error_ptm(r_a, r_b):
    return np.asarray(r_a) - np.asarray(r_b)


def cp_tp_checks(chi):
    """Hermiticity, trace, positivity and trace-preservation defects of a Choi matrix."""
    chi = np.asarray(chi)
    d = int(round(math.sqrt(chi.shape[0])))
    herm = float(np.max(np.abs(chi - chi.conj().T)))
    trace = float(np.real(np.trace(chi)) - d)
    eig = float(np.min(np.linalg.eigvalsh(0.5 * (chi + chi.conj().T))))
    partial = np.einsum("iaja->ij", chi.reshape(d, d, d, d))
    tp = float(np.max(np.abs(partial - np.eye(d))))
    return {"hermiticity_defect": herm, "trace_defect": trace,
            "min_eigenvalue": eig, "tp_defect": tp}


def top_entries(delta, k=8, labels=None):
    """The ``k`` largest ``|delta|`` entries as (row label, column label, value).

    Ties are broken by row-major position.
    """
    delta = np.asarray(delta)
    labels = pauli_labels(_n_qubits(int(round(math.sqrt(delta.shape[0]))))) if labels is None else labels
    flat = np.abs(delta).ravel()
    order = sorted(range(flat.size), key=lambda i: (-flat[i], i))[:k]
    n = delta.shape[1]
    return [(labels[i // n], labels[i % n], float(delta[i // n, i % n])) for i in order]


def format_top_entries(entries):
    return "\n".join(f"{r},{c}: {v:+.6e}" for r, c, v in entries)
