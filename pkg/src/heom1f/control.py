"""Rotating-frame drive Hamiltonians and dynamical-decoupling schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .heom import SIGMA_X, SIGMA_Y, PiecewiseHamiltonian, embed

AXIS_PHASE = {"X": 0.0, "Y": 0.5 * math.pi, "-X": math.pi, "-Y": 1.5 * math.pi}


def axis_phase(axis):
    if isinstance(axis, str):
        try:
            return AXIS_PHASE[axis.upper()]
        except KeyError:
            raise ValueError(f"unknown pulse axis {axis!r}") from None
    return float(axis)


def axis_label(phase):
    for name, p in AXIS_PHASE.items():
        if abs((phase - p + math.pi) % (2 * math.pi) - math.pi) < 1e-12:
            return name
    return f"{phase:.6f}"


@dataclass(frozen=True)
class PulseSegment:
    """Rectangular drive: amplitude ``Omega`` (rad/ns) and phase ``phi``."""

    start: float
    duration: float
    amplitude: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("pulse duration must be positive")
        if self.amplitude < 0:
            raise ValueError("pulse amplitude must be non-negative")

    @property
    def end(self):
        return self.start + self.duration

    @property
    def center(self):
        return self.start + 0.5 * self.duration

    @property
    def axis(self):
        return axis_label(self.phase)

    def operator(self):
        """(Omega/2)(sigma_x cos phi + sigma_y sin phi)."""
        return 0.5 * self.amplitude * (math.cos(self.phase) * SIGMA_X + math.sin(self.phase) * SIGMA_Y)

    def unitary(self):
        """Rotation generated by the whole pulse (also used for ideal pulses)."""
        return expm(-1j * self.duration * self.operator())


@dataclass(frozen=True)
class PulseSchedule:
    """Time-ordered, non-overlapping pulses on ``[0, total_time]``.

    With ``ideal=True`` every segment is applied as its rotation at the
    segment centre and the drive is otherwise off.
    """

    segments: tuple = ()
    total_time: float = 0.0
    ideal: bool = False

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        last_end = 0.0
        for k, s in enumerate(segs):
            if s.start < -1e-12:
                raise ValueError("pulse starts before t = 0")
            if k and s.start < last_end - 1e-9:
                raise ValueError(f"pulse {k} overlaps its predecessor")
            last_end = s.end
        if self.total_time < last_end - 1e-9:
            raise ValueError("total_time ends before the last pulse")

    def __len__(self):
        return len(self.segments)

    def as_ideal(self):
        return replace(self, ideal=True)

    def windows(self):
        """Free-evolution window after each pulse: (end of pulse, next start).

        For ideal schedules the pulse is a point at its centre.  The last
        window runs to ``total_time``.
        """
        out = []
        n = len(self.segments)
        for k, s in enumerate(self.segments):
            a = s.center if self.ideal else s.end
            if k + 1 < n:
                nxt = self.segments[k + 1]
                b = nxt.center if self.ideal else nxt.start
            else:
                b = self.total_time
            out.append((a, b))
        return out

    def dump_rows(self):
        return [(k, s.start, s.duration, s.axis) for k, s in enumerate(self.segments)]


def drive_hamiltonian(t, schedule):
    """Rotating-frame drive at time ``t``; zero between pulses and for ideal schedules."""
    if not schedule.ideal:
        for s in schedule.segments:
            if s.start <= t < s.end:
                return s.operator()
    return np.zeros((2, 2), dtype=complex)


def _pattern(axes, n):
    if isinstance(axes, str):
        seq = [axes] if axes.upper() in AXIS_PHASE else list(axes)
    else:
        seq = list(axes)
    if not seq:
        raise ValueError("empty axis pattern")
    return [seq[k % len(seq)] for k in range(n)]


def cpmg_schedule(n, axes="X", tau=15.0, delta_t=118.0, t1=None, ideal=False, amplitude=None):
    """Equally spaced pi pulses.

    Pulse ``j`` (1-based) starts at ``t1 + (j-1)(delta_t + tau)``, so
    ``delta_t`` is the free gap between finite pulses and ``t1`` the half
    gap before the first one (default ``delta_t / 2``).  The same margin
    follows the last pulse: ``total = 2 t1 + n tau + (n-1) delta_t``.
    With ``n = 0`` the schedule is free evolution over ``2 t1``.

    ``axes`` is a single axis or a repeating pattern such as ``"XY"``.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    t1 = 0.5 * delta_t if t1 is None else t1
    amp = math.pi / tau if amplitude is None else amplitude
    segs = [PulseSegment(t1 + j * (delta_t + tau), tau, amp, axis_phase(a))
            for j, a in enumerate(_pattern(axes, n))] if n else []
    total = 2 * t1 + n * tau + (n - 1) * delta_t if n else 2 * t1
    return PulseSchedule(tuple(segs), total, ideal)


def udd_centers(n, total):
    """Uhrig pulse centres ``total * sin^2(pi j / (2n + 2))``, j = 1..n."""
    j = np.arange(1, n + 1)
    return total * np.sin(np.pi * j / (2 * n + 2)) ** 2


def udd_schedule(n, total, tau=15.0, axes="X", ideal=False, amplitude=None):
    """Uhrig dynamical decoupling with finite pulses centred on the Uhrig times.

    Raises
    ------
    ValueError
        If neighbouring pulses overlap or a pulse leaves ``[0, total]``.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    amp = math.pi / tau if amplitude is None else amplitude
    segs = []
    for c, a in zip(udd_centers(n, total), _pattern(axes, n)):
        s = PulseSegment(float(c) - 0.5 * tau, tau, amp, axis_phase(a))
        if s.start < 0 or s.end > total:
            raise ValueError("UDD pulse extends outside the sequence")
        if segs and s.start < segs[-1].end:
            raise ValueError("UDD pulses overlap; increase total or reduce n or tau")
        segs.append(s)
    return PulseSchedule(tuple(segs), float(total), ideal)


def schedule_hamiltonian(schedule, qubit=0, n_qubits=1, base=None):
    """Piecewise-constant Hamiltonian for a schedule.

    ``base`` (optional) is added everywhere.  Ideal schedules become
    instantaneous kicks at the pulse centres.
    """
    dim = 2**n_qubits
    base = None if base is None else np.asarray(base, dtype=complex)
    kicks = []
    breaks, values = [], []
    if schedule.ideal:
        kicks = [(s.center, embed(s.unitary(), qubit, n_qubits)) for s in schedule.segments]
    else:
        t = 0.0
        breaks.append(0.0)
        for s in schedule.segments:
            if s.start > t:
                values.append(base)
                breaks.append(s.start)
            h = embed(s.operator(), qubit, n_qubits)
            values.append(h if base is None else h + base)
            breaks.append(s.end)
            t = s.end
        if len(breaks) == 1:
            breaks = []
    return PiecewiseHamiltonian(breaks, values, dim, default=base, kicks=kicks)


def calibrate_pi_pulse(tau, axis="X", rtol=1e-12, atol=1e-12):
    """Amplitude for a pi rotation of duration ``tau`` and its noiseless fidelity.

    The fidelity ``|Tr(U_target^dag U)| / 2`` is obtained by integrating
    the Schrodinger equation for the propagator.

    Returns
    -------
    amplitude : float
        ``pi / tau`` in rad/ns.
    fidelity : float
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    amp = math.pi / tau
    seg = PulseSegment(0.0, tau, amp, axis_phase(axis))
    h = seg.operator()

    def rhs(t, y):
        return (-1j * h @ y.reshape(2, 2)).ravel()

    sol = solve_ivp(rhs, (0.0, tau), np.eye(2, dtype=complex).ravel(), method="DOP853",
                    rtol=rtol, atol=atol)
    U = sol.y[:, -1].reshape(2, 2)
    n = math.cos(seg.phase) * SIGMA_X + math.sin(seg.phase) * SIGMA_Y
    target = -1j * n
    return amp, float(abs(np.trace(target.conj().T @ U)) / 2.0)
