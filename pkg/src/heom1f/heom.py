"""Hierarchical equations of motion for qubits with independent
sigma_z-coupled baths.

Every exponential term of a channel's correlation function contributes
one or two *slots* to the hierarchy.  A slot ``k`` carries a decay rate
and three coefficients; an auxiliary density operator (ADO) with
occupation ``v`` obeys

    d/dt rho_v = -i[H, rho_v] - (sum_k v_k rate_k) rho_v
                 + sum_k up_k sqrt(v_k + 1) [q_k, rho_{v + e_k}]
                 + sum_k sqrt(v_k) (dl_k q_k rho_{v - e_k} + dr_k rho_{v - e_k} q_k).

The ``"pairs"`` scheme uses two slots per term (the usual m/n indices):
``m``: rate gamma, up = dl = -i sqrt(d), dr = 0 and ``n``: rate gamma*,
up = -i sqrt(d*), dl = 0, dr = +i sqrt(d*).  For real decay rates the two
slots can be merged into one with up = -i sqrt|d|, dl = -i d / sqrt|d|,
dr = +i d* / sqrt|d| (``"merged"``), which halves the slot count.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse
from scipy.linalg import expm

from .bath import ExponentialSeries


class HierarchyTooLarge(ValueError):
    def __init__(self, count, limit):
        super().__init__(f"hierarchy would contain {count} ADOs (limit {limit})")
        self.count = count


class SolverError(RuntimeError):
    """Propagation produced non-finite values."""

    def __init__(self, time):
        super().__init__(f"non-finite state encountered at t = {time:.6g} ns")
        self.time = time


class ConvergenceError(RuntimeError):
    pass


SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY2 = np.eye(2, dtype=complex)


def embed(op, qubit, n_qubits):
    """Single-qubit ``op`` acting on ``qubit`` (0 = leftmost factor)."""
    mats = [IDENTITY2] * n_qubits
    mats[qubit] = np.asarray(op, dtype=complex)
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


# ---------------------------------------------------------------------------
# channels and hierarchy


@dataclass(frozen=True)
class DissipationChannel:
    """A bath coupled through a Hermitian, diagonal system operator."""

    coupling_op: np.ndarray
    series: ExponentialSeries

    def __post_init__(self):
        q = np.asarray(self.coupling_op, dtype=complex)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError("coupling operator must be square")
        if not np.allclose(q, q.conj().T):
            raise ValueError("coupling operator must be Hermitian")
        if not np.allclose(q, np.diag(np.diag(q))):
            raise ValueError("only diagonal (Z-type) coupling operators are supported")
        object.__setattr__(self, "coupling_op", q)

    @classmethod
    def sigma_z(cls, series, qubit=0, n_qubits=1):
        return cls(embed(SIGMA_Z, qubit, n_qubits), series)

    @property
    def diagonal(self):
        return np.real(np.diag(self.coupling_op))

    @property
    def dim(self):
        return self.coupling_op.shape[0]


@dataclass(frozen=True)
class Slot:
    channel: int
    term: int          # -1 for the static term
    kind: str          # "m", "n" or "merged"
    rate: complex
    up: complex
    down_left: complex
    down_right: complex


def _channel_terms(ch):
    d = list(ch.series.amplitudes)
    g = list(ch.series.rates)
    idx = list(range(len(d)))
    if ch.series.static_variance > 0:
        d.append(complex(ch.series.static_variance))
        g.append(0j)
        idx.append(-1)
    return d, g, idx


def make_slots(channels, scheme="pairs"):
    """Slots for all channels in canonical order (channel, term, m before n)."""
    if scheme == "auto":
        real = all(np.all(np.asarray(c.series.rates).imag == 0) for c in channels)
        scheme = "merged" if real else "pairs"
    slots = []
    for c, ch in enumerate(channels):
        for d, g, k in zip(*_channel_terms(ch)):
            if d == 0:
                continue
            if scheme == "pairs":
                sd = np.sqrt(complex(d))
                sdc = np.sqrt(np.conj(complex(d)))
                slots.append(Slot(c, k, "m", complex(g), -1j * sd, -1j * sd, 0j))
                slots.append(Slot(c, k, "n", np.conj(complex(g)), -1j * sdc, 0j, 1j * sdc))
            elif scheme == "merged":
                if complex(g).imag != 0:
                    raise ValueError("merged slots need real decay rates")
                s = math.sqrt(abs(d))
                slots.append(Slot(c, k, "merged", complex(g), -1j * s, -1j * d / s, 1j * np.conj(d) / s))
            else:
                raise ValueError(f"unknown scheme {scheme!r}")
    return slots, scheme


@dataclass
class Hierarchy:
    """Index set of a truncated hierarchy with neighbour maps.

    Attributes
    ----------
    slots : list of Slot
    indices : ndarray (N, M) of int
        Occupation vectors; row 0 is the root.
    up, down : ndarray (N, M) of int
        Row of the ADO with one more / one fewer excitation in slot k,
        or -1 when it lies outside the hierarchy.
    depth : int
    scheme : str
    """

    slots: list
    indices: np.ndarray
    up: np.ndarray
    down: np.ndarray
    depth: int
    scheme: str
    n_channels: int
    _engine_cache: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return self.indices.shape[0]

    @property
    def tiers(self):
        return self.indices.sum(axis=1)

    def damping(self):
        rates = np.array([s.rate for s in self.slots], dtype=complex)
        if not len(rates):
            return np.zeros(len(self), dtype=complex)
        return self.indices @ rates

    def multi_index(self, row):
        """Per-channel ``(m, n)`` vectors of one ADO (pairs scheme)."""
        out = {}
        for k, s in enumerate(self.slots):
            m, n = out.setdefault(s.channel, ({}, {}))
            (m if s.kind in ("m", "merged") else n)[s.term] = int(self.indices[row, k])
        return out


def hierarchy_size(n_slots, depth):
    return math.comb(n_slots + depth, depth)


def build_hierarchy(channels, depth, scheme="pairs", max_ados=250_000):
    """All occupation vectors with total tier <= depth.

    The count is ``C(M + L, L)`` for ``M`` slots.  Ordering is by tier and
    then by the lexicographic order of the occupied slot multiset.

    Raises
    ------
    HierarchyTooLarge
        If the count exceeds ``max_ados``.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    slots, scheme = make_slots(channels, scheme)
    M = len(slots)
    count = hierarchy_size(M, depth)
    if count > max_ados:
        raise HierarchyTooLarge(count, max_ados)
    rows = []
    for tier in range(depth + 1):
        for combo in itertools.combinations_with_replacement(range(M), tier):
            v = [0] * M
            for k in combo:
                v[k] += 1
            rows.append(tuple(v))
    lookup = {v: i for i, v in enumerate(rows)}
    N = len(rows)
    indices = np.array(rows, dtype=np.int32).reshape(N, M)
    up = -np.ones((N, M), dtype=np.int64)
    down = -np.ones((N, M), dtype=np.int64)
    for i, v in enumerate(rows):
        lst = list(v)
        for k in range(M):
            lst[k] += 1
            j = lookup.get(tuple(lst))
            if j is not None:
                up[i, k] = j
                down[j, k] = i
            lst[k] -= 1
    return Hierarchy(slots, indices, up, down, depth, scheme, len(channels))


# ---------------------------------------------------------------------------
# Hamiltonians


@dataclass
class PiecewiseHamiltonian:
    """Piecewise-constant Hamiltonian with optional instantaneous unitaries.

    ``breaks`` are the piece boundaries; ``values[i]`` holds on
    ``[breaks[i], breaks[i+1])`` (``None`` means zero).  Outside the
    covered range the Hamiltonian is ``default``.  ``kicks`` is a list of
    ``(time, unitary)`` applied to every ADO when the propagation reaches
    that time.
    """

    breaks: list
    values: list
    dim: int
    default: np.ndarray | None = None
    kicks: list = field(default_factory=list)

    def __call__(self, t):
        h = self.piece(t)
        return np.zeros((self.dim, self.dim), complex) if h is None else h

    def piece(self, t):
        b = self.breaks
        if len(b) >= 2 and b[0] <= t < b[-1]:
            i = int(np.searchsorted(b, t, side="right")) - 1
            return self.values[i]
        return self.default

    @classmethod
    def constant(cls, h):
        h = np.asarray(h, dtype=complex)
        return cls([], [], h.shape[0], default=h)


def as_piecewise(hamiltonian, dim):
    if isinstance(hamiltonian, PiecewiseHamiltonian):
        return hamiltonian
    if hamiltonian is None:
        return PiecewiseHamiltonian([], [], dim)
    if callable(hamiltonian):
        return None
    return PiecewiseHamiltonian.constant(hamiltonian)


# ---------------------------------------------------------------------------
# propagation


@dataclass(frozen=True)
class PropagatorConfig:
    """Settings for fixed-step propagation.

    Parameters
    ----------
    depth : int
        Truncation tier L (ADOs beyond it are zero).
    dt : float
        Maximum step in ns; each interval between events is split into
        equal steps no longer than ``dt``.
    stepper : {"ifrk4", "rk4"}
        ``"ifrk4"`` is the integrating-factor (Lawson) fourth-order
        Runge-Kutta method: tier damping and a piecewise-constant system
        Hamiltonian are treated exactly, the bath couplings by RK4.
        ``"rk4"`` is classical RK4 on the full right-hand side and needs
        ``dt * max Re(rate) * depth`` inside its stability region.
    scheme : {"auto", "pairs", "merged"}
    perturbative : bool
        Marks a deliberately shallow truncation (TNL-QME surrogate).
    max_ados : int
    """

    depth: int = 4
    dt: float = 0.01
    stepper: str = "ifrk4"
    scheme: str = "auto"
    perturbative: bool = False
    label: str = ""
    max_ados: int = 250_000

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.depth < 0:
            raise ValueError("depth must be non-negative")
        if self.stepper not in ("ifrk4", "rk4"):
            raise ValueError(f"unknown stepper {self.stepper!r}")


def perturbative_truncation(config, depth):
    """Hard truncation at ``depth``: the order-2L time-nonlocal master equation surrogate."""
    return replace(config, depth=int(depth), perturbative=True,
                   label=f"TNL-QME order {2 * int(depth)}")


@dataclass
class HierarchyState:
    """All ADOs at one time; ``data`` has shape (N, B, d, d)."""

    hierarchy: Hierarchy
    data: np.ndarray
    time: float = 0.0
    batched: bool = False

    @property
    def root(self):
        return self.data[0] if self.batched else self.data[0, 0]

    def as_dict(self):
        return {tuple(v): self.data[i] for i, v in enumerate(self.hierarchy.indices.tolist())}


def initial_state(hierarchy, rho0, time=0.0):
    """Factorized initial condition: root = rho0, all other ADOs zero.

    ``rho0`` may be a single (d, d) matrix or a stack (B, d, d) that is
    propagated as independent columns.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    batched = rho0.ndim == 3
    stack = rho0 if batched else rho0[None]
    data = np.zeros((len(hierarchy),) + stack.shape, dtype=complex)
    data[0] = stack
    return HierarchyState(hierarchy, data, float(time), batched)


def reduced_density(state):
    """The physical reduced density matrix (root ADO)."""
    return state.root.copy()


class _Engine:
    """Linear operator of one hierarchy, split into damping and couplings."""

    def __init__(self, hierarchy, channels):
        self.hierarchy = hierarchy
        self.damp = hierarchy.damping()
        N = len(hierarchy)
        self.dim = channels[0].dim if channels else None
        mats = []
        coefs = []
        for c, ch in enumerate(channels):
            rowsA, colsA, valsA = [], [], []
            rowsB, colsB, valsB = [], [], []
            for k, s in enumerate(hierarchy.slots):
                if s.channel != c:
                    continue
                vk = hierarchy.indices[:, k].astype(float)
                i_up = np.nonzero(hierarchy.up[:, k] >= 0)[0]
                j_up = hierarchy.up[i_up, k]
                f = s.up * np.sqrt(vk[i_up] + 1.0)
                rowsA.append(i_up); colsA.append(j_up); valsA.append(f)
                rowsB.append(i_up); colsB.append(j_up); valsB.append(-f)
                i_dn = np.nonzero(hierarchy.down[:, k] >= 0)[0]
                j_dn = hierarchy.down[i_dn, k]
                r = np.sqrt(vk[i_dn])
                if s.down_left != 0:
                    rowsA.append(i_dn); colsA.append(j_dn); valsA.append(s.down_left * r)
                if s.down_right != 0:
                    rowsB.append(i_dn); colsB.append(j_dn); valsB.append(s.down_right * r)
            q = ch.diagonal
            for rows, cols, vals, coef in ((rowsA, colsA, valsA, q[:, None] * np.ones_like(q)[None, :]),
                                           (rowsB, colsB, valsB, np.ones_like(q)[:, None] * q[None, :])):
                if rows:
                    m = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                          shape=(N, N), dtype=complex)
                else:
                    m = sparse.csr_matrix((N, N), dtype=complex)
                mats.append(m)
                coefs.append(coef)
        self.n_blocks = len(mats)
        self.stack = sparse.vstack(mats, format="csr") if mats else None
        self.coefs = np.array(coefs, dtype=complex) if coefs else None

    def coupling(self, X):
        if self.stack is None:
            return np.zeros_like(X)
        N = X.shape[0]
        Y = self.stack @ X.reshape(N, -1)
        Y = Y.reshape((self.n_blocks,) + X.shape)
        return np.einsum("cnbij,cij->nbij", Y, self.coefs)


def _engine(hierarchy, channels):
    eng = hierarchy._engine_cache.get("engine")
    if eng is None:
        eng = _Engine(hierarchy, channels)
        hierarchy._engine_cache["engine"] = eng
    return eng


def _commutator(H, X):
    return H @ X - X @ H


def heom_rhs(state, t, hamiltonian, channels):
    """Time derivative of every ADO.

    Parameters
    ----------
    state : HierarchyState
    t : float
    hamiltonian : array, callable or PiecewiseHamiltonian
    channels : list of DissipationChannel
        Must be the channels the hierarchy was built from.
    """
    h = state.hierarchy
    if len(h.slots) and max(s.channel for s in h.slots) >= len(channels):
        raise ValueError("hierarchy does not match the channel list")
    eng = _engine(h, channels)
    X = state.data
    H = hamiltonian(t) if callable(hamiltonian) else np.asarray(hamiltonian, dtype=complex)
    out = -1j * _commutator(H, X) - eng.damp[:, None, None, None] * X + eng.coupling(X)
    return out


@dataclass
class Trajectory:
    times: np.ndarray
    rhos: np.ndarray
    state: HierarchyState | None = None
    meta: dict = field(default_factory=dict)

    def element(self, i, j):
        return self.rhos[..., i, j]

    @property
    def coherence(self):
        """|rho_01| for every sample."""
        return np.abs(self.rhos[..., 0, 1])


def _merge_times(times, tol=1e-9):
    times = np.sort(np.asarray(times, dtype=float))
    out = [times[0]]
    for t in times[1:]:
        if t - out[-1] > tol:
            out.append(t)
    return np.array(out)


def _integrate(X, t0, t_end, dt, H, damp, coupling, stepper, dim):
    """Advance X over [t0, t_end] with a constant or callable Hamiltonian."""
    span = t_end - t0
    if span <= 0:
        return X
    n = max(1, int(math.ceil(span / dt - 1e-9)))
    h = span / n
    callable_h = callable(H)
    zero_h = H is None
    d4 = damp[:, None, None, None]

    if stepper == "rk4":
        def f(Y, t):
            out = -d4 * Y + coupling(Y)
            if not zero_h:
                Hm = H(t) if callable_h else H
                out = out - 1j * _commutator(Hm, Y)
            return out
        t = t0
        for _ in range(n):
            k1 = f(X, t)
            k2 = f(X + 0.5 * h * k1, t + 0.5 * h)
            k3 = f(X + 0.5 * h * k2, t + 0.5 * h)
            k4 = f(X + h * k3, t + h)
            X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
        return X

    decay = np.exp(-0.5 * h * damp)[:, None, None, None]
    if not zero_h and not callable_h:
        U = expm(-0.5j * h * H)
        Ud = U.conj().T

        def E(Y):
            return decay * (U @ Y @ Ud)

        def Nf(Y, t):
            return coupling(Y)
    else:
        def E(Y):
            return decay * Y

        def Nf(Y, t):
            out = coupling(Y)
            if callable_h:
                out = out - 1j * _commutator(H(t), Y)
            return out

    t = t0
    for _ in range(n):
        k1 = Nf(X, t)
        Ey = E(X)
        Ek1 = E(k1)
        k2 = Nf(Ey + 0.5 * h * Ek1, t + 0.5 * h)
        k3 = Nf(Ey + 0.5 * h * k2, t + 0.5 * h)
        E2y = E(Ey)
        k4 = Nf(E2y + h * E(k3), t + h)
        X = E2y + (h / 6.0) * (E(Ek1) + 2.0 * E(k2 + k3) + k4)
        t += h
    return X


def _run(X, t_span, hamiltonian, dt, stepper, damp, coupling, sample_times, observer, dim,
         post_sample=None):
    t0, t1 = map(float, t_span)
    if t1 < t0:
        raise ValueError("t_span must be increasing")
    samples = np.array([t0, t1] if sample_times is None else sample_times, dtype=float)
    if np.any(samples < t0 - 1e-9) or np.any(samples > t1 + 1e-9):
        raise ValueError("sample times must lie inside t_span")
    pw = as_piecewise(hamiltonian, dim)
    events = [t0, t1] + list(samples)
    kicks = []
    if pw is not None:
        events += [b for b in pw.breaks if t0 < b < t1]
        kicks = [(float(tk), np.asarray(u, complex)) for tk, u in pw.kicks if t0 <= tk <= t1]
        events += [tk for tk, _ in kicks]
    events = _merge_times(events)
    sample_set = _merge_times(samples)
    out_times, out_rhos = [], []
    si = 0

    def apply_kicks(Xc, t):
        for tk, u in kicks:
            if abs(tk - t) <= 1e-9:
                Xc = u @ Xc @ u.conj().T
        return Xc

    def record(Xc, t):
        nonlocal si
        while si < len(sample_set) and sample_set[si] <= t + 1e-9:
            rho = Xc[0].copy()
            if post_sample is not None:
                rho = post_sample(rho)
            out_times.append(sample_set[si])
            out_rhos.append(rho)
            if observer is not None:
                observer(sample_set[si], rho)
            si += 1

    X = apply_kicks(X, events[0])
    record(X, events[0])
    for a, b in zip(events[:-1], events[1:]):
        if pw is None:
            H = hamiltonian
        else:
            H = pw.piece(0.5 * (a + b))
            if H is not None and not np.any(H):
                H = None
        X = _integrate(X, a, b, dt, H, damp, coupling, stepper, dim)
        if not np.isfinite(X).all():
            raise SolverError(b)
        X = apply_kicks(X, b)
        record(X, b)
    return X, np.array(out_times), np.array(out_rhos)


def propagate(state, hamiltonian, t_span, config, channels, sample_times=None, observer=None):
    """Fixed-step propagation of a hierarchy state.

    Parameters
    ----------
    state : HierarchyState
    hamiltonian : array, callable or PiecewiseHamiltonian
    t_span : (float, float)
    config : PropagatorConfig
    channels : list of DissipationChannel
    sample_times : array_like, optional
        Times (within ``t_span``) at which the root ADO is recorded;
        defaults to the two end points.  Sampling times become step
        boundaries, so the result does not depend on how ``dt`` divides
        the grid.
    observer : callable, optional
        Called as ``observer(t, rho)`` for every sample.

    Returns
    -------
    Trajectory
        ``rhos`` has shape (T, d, d) or (T, B, d, d) for a batched state.

    Raises
    ------
    SolverError
        When the state becomes non-finite.
    """
    eng = _engine(state.hierarchy, channels)
    dim = state.data.shape[-1]
    X, times, rhos = _run(state.data.copy(), t_span, hamiltonian, config.dt, config.stepper,
                          eng.damp, eng.coupling, sample_times, observer, dim)
    final = HierarchyState(state.hierarchy, X, float(t_span[1]), state.batched)
    if not state.batched:
        rhos = rhos[:, 0]
    meta = {"n_ados": len(state.hierarchy), "depth": state.hierarchy.depth,
            "scheme": state.hierarchy.scheme, "stepper": config.stepper, "dt": config.dt}
    if config.perturbative:
        meta["label"] = config.label
    return Trajectory(times, rhos, final, meta)


def simulate(channels, rho0, hamiltonian, t_span, config, sample_times=None, observer=None):
    """Build the hierarchy, initialize it from ``rho0`` and propagate."""
    h = build_hierarchy(channels, config.depth, scheme=config.scheme, max_ados=config.max_ados)
    state = initial_state(h, rho0, t_span[0])
    return propagate(state, hamiltonian, t_span, config, channels, sample_times, observer)


def attach_static_mode(channels, variance, index=0):
    """Add a zero-decay term of amplitude ``variance`` to one channel."""
    if variance < 0:
        raise ValueError("variance must be non-negative")
    out = list(channels)
    ch = out[index]
    out[index] = DissipationChannel(ch.coupling_op,
                                    ch.series.with_static(ch.series.static_variance + variance))
    return out


def static_disorder_propagate(rho0, hamiltonian, variance, depth, t_span, dt=0.01,
                              sample_times=None, n_qubits=1, stepper="ifrk4",
                              convergence_tol=1e-6):
    """Total-static-disorder hierarchy: one zero-frequency mode per qubit.

    The hierarchy is also run at twice the depth; if the sampled reduced
    density matrices differ by more than ``convergence_tol`` a
    :class:`ConvergenceError` is raised (pass ``None`` to skip).
    """
    series = ExponentialSeries(static_variance=float(variance))
    channels = [DissipationChannel.sigma_z(series, q, n_qubits) for q in range(n_qubits)]
    cfg = PropagatorConfig(depth=depth, dt=dt, stepper=stepper, scheme="merged")
    traj = simulate(channels, rho0, hamiltonian, t_span, cfg, sample_times)
    if convergence_tol is not None and variance > 0:
        ref = simulate(channels, rho0, hamiltonian, t_span, replace(cfg, depth=2 * depth), sample_times)
        change = float(np.max(np.abs(ref.rhos - traj.rhos)))
        traj.meta["depth_doubling_change"] = change
        if change > convergence_tol:
            raise ConvergenceError(
                f"static-disorder hierarchy not converged at depth {depth}: change {change:.3e}")
    return traj


def lindblad_propagate(rho0, hamiltonian, rates, t_span, dt=0.01, sample_times=None, n_qubits=1):
    """Markovian pure dephasing with rate ``rates[q]`` on each qubit.

    The dissipator is ``(r/2)(Z rho Z - rho)`` so that off-diagonal
    elements of a single qubit decay as ``exp(-r t)``.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    batched = rho0.ndim == 3
    X = (rho0 if batched else rho0[None])[None].copy()
    dim = X.shape[-1]
    factor = np.zeros((dim, dim))
    for q, r in enumerate(np.broadcast_to(rates, (n_qubits,))):
        z = np.real(np.diag(embed(SIGMA_Z, q, n_qubits)))
        factor += 0.5 * r * (np.outer(z, z) - 1.0)

    def coupling(Y):
        return Y * factor

    X, times, rhos = _run(X, t_span, hamiltonian, dt, "ifrk4", np.zeros(1), coupling,
                          sample_times, None, dim)
    if not batched:
        rhos = rhos[:, 0]
    return Trajectory(times, rhos, None, {"model": "lindblad"})
