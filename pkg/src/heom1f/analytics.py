"""Analytic references and post-processing of simulated trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from . import bath


# ---------------------------------------------------------------------------
# oracles


def dephasing_exponent(t, model, quad=bath.DEFAULT_QUAD):
    """Gamma(t) of the exact pure-dephasing solution (quadrature)."""
    return bath.dephasing_integral(t, model, quad)


def analytic_coherence(t, model, rho01_0=0.5, omega=0.0, quad=bath.DEFAULT_QUAD):
    """``rho01(0) exp(-i omega t) exp(-Gamma(t))``.

    ``omega`` is the qubit frequency; the default 0 is the rotating frame.
    """
    t = np.asarray(t, dtype=float)
    g = dephasing_exponent(t, model, quad)
    return rho01_0 * np.exp(-1j * omega * t) * np.exp(-g)


def gaussian_static_coherence(t, variance, rho01_0=0.5):
    """|rho01| for frozen Gaussian detunings: ``|rho01(0)| exp(-2 v t^2)``."""
    if variance < 0:
        raise ValueError("variance must be non-negative")
    t = np.asarray(t, dtype=float)
    return abs(rho01_0) * np.exp(-2.0 * variance * t**2)


def gauss_hermite_coherence(t, variance, rho01_0=0.5, order=80):
    """Average of ``rho01(0) exp(-2 i F t)`` over ``F ~ N(0, variance)`` by Gauss-Hermite quadrature."""
    x, w = np.polynomial.hermite.hermgauss(order)
    F = math.sqrt(2.0 * variance) * x
    t = np.asarray(t, dtype=float)
    vals = np.exp(-2j * np.multiply.outer(t, F)) @ w / math.sqrt(math.pi)
    return np.abs(rho01_0 * vals)


def lindblad_coherence(t, t_phi, rho01_0=0.5):
    """Markovian reference ``|rho01(0)| exp(-t / T_phi)``."""
    if t_phi <= 0:
        raise ValueError("t_phi must be positive")
    return abs(rho01_0) * np.exp(-np.asarray(t, dtype=float) / t_phi)


# ---------------------------------------------------------------------------
# echo extraction


@dataclass(frozen=True)
class EchoSeries:
    """Echo maxima after each pulse.

    ``x`` is the pulse number (1-based) or the window time, ``peak`` the
    maximum ``|rho01|`` in the window, ``delta`` the ideal-minus-finite
    difference (NaN when no reference run was given) and ``population``
    the deviation of ``rho00`` from 0.5 at the echo maximum.
    """

    x: np.ndarray
    peak: np.ndarray
    delta: np.ndarray
    population: np.ndarray
    peak_time: np.ndarray
    abscissa: str = "n"

    def __len__(self):
        return len(self.x)

    def subset(self, mask):
        mask = np.asarray(mask)
        return EchoSeries(self.x[mask], self.peak[mask], self.delta[mask], self.population[mask],
                          self.peak_time[mask], self.abscissa)

    def odd(self):
        """Only odd pulse numbers."""
        return self.subset(np.arange(len(self)) % 2 == 0)

    def even(self):
        return self.subset(np.arange(len(self)) % 2 == 1)

    def rows(self):
        return [(float(a), float(b), float(c)) for a, b, c in zip(self.x, self.peak, self.delta)]


def _window_peaks(times, coh, rho00, windows, min_samples):
    peaks, ptimes, pops = [], [], []
    for a, b in windows:
        if b <= a:
            raise ValueError(f"empty echo window ({a}, {b})")
        sel = np.nonzero((times > a - 1e-9) & (times < b + 1e-9))[0]
        if len(sel) < min_samples:
            raise ValueError(f"echo window ({a:.3f}, {b:.3f}) holds {len(sel)} samples, "
                             f"need {min_samples}")
        k = sel[int(np.argmax(coh[sel]))]
        peaks.append(coh[k])
        ptimes.append(times[k])
        pops.append(abs(rho00[k] - 0.5))
    return np.array(peaks), np.array(ptimes), np.array(pops)


def echo_peaks(trajectory, schedule, reference=None, abscissa="n", min_samples=20):
    """Maximum ``|rho01|`` in each free window after a pulse.

    Parameters
    ----------
    trajectory : Trajectory
        Finite-pulse (or ideal) run.
    schedule : PulseSchedule
        The schedule that produced ``trajectory``; its windows are used
        for both runs so the comparison is window by window.
    reference : Trajectory, optional
        Ideal-pulse run; ``delta = peak_ideal - peak``.
    abscissa : {"n", "t"}
        Pulse number or pulse centre time as ``x``.
    """
    windows = schedule.windows()
    if not windows:
        raise ValueError("schedule has no pulses")
    t = np.asarray(trajectory.times)
    coh = np.abs(trajectory.rhos[:, 0, 1])
    rho00 = np.real(trajectory.rhos[:, 0, 0])
    peak, ptime, pop = _window_peaks(t, coh, rho00, windows, min_samples)
    if reference is not None:
        rt = np.asarray(reference.times)
        rp, _, _ = _window_peaks(rt, np.abs(reference.rhos[:, 0, 1]), np.real(reference.rhos[:, 0, 0]),
                                 windows, min_samples)
        delta = rp - peak
    else:
        delta = np.full(len(peak), np.nan)
    if abscissa == "n":
        x = np.arange(1, len(windows) + 1, dtype=float)
    elif abscissa == "t":
        x = np.array([s.center for s in schedule.segments])
    else:
        raise ValueError("abscissa must be 'n' or 't'")
    return EchoSeries(x, peak, delta, pop, ptime, abscissa)


# ---------------------------------------------------------------------------
# fits


@dataclass(frozen=True)
class ScalingFit:
    """Polynomial least-squares fit; ``coefficients`` in descending powers."""

    model: str
    coefficients: tuple
    r2: float

    def __call__(self, x):
        return np.polyval(self.coefficients, x)

    def report(self):
        names = {"linear": ("slope", "intercept"), "quadratic": ("a2", "a1", "a0")}[self.model]
        parts = [f"{n} = {c:.6e}" for n, c in zip(names, self.coefficients)]
        return f"model: {self.model}\n" + "\n".join(parts) + f"\nR2 = {self.r2:.6f}"


def _r2(y, yhat):
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0:
        return 1.0 if ss_res == 0 else 0.0
    return max(0.0, 1.0 - ss_res / ss_tot)


def fit_polynomial(x, y, model="linear"):
    deg = {"linear": 1, "quadratic": 2}.get(model)
    if deg is None:
        raise ValueError(f"unknown model {model!r}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 5:
        raise ValueError("at least 5 points are needed")
    A = np.vander(x, deg + 1)
    if np.linalg.matrix_rank(A) < deg + 1:
        raise ValueError("degenerate design matrix")
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return ScalingFit(model, tuple(float(c) for c in coef), _r2(y, A @ coef))


def fit_error_scaling(series, model="linear"):
    """Fit ``delta`` of an :class:`EchoSeries` against its ``x``."""
    return fit_polynomial(series.x, series.delta, model)


@dataclass(frozen=True)
class OnsetFit:
    """``y = a t^2 + b t`` through the origin."""

    a: float
    b: float
    r2: float
    linear_fraction: float   # |b t_end| / |y(t_end)| at the last point


def fit_quadratic_onset(t, y):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.column_stack([t**2, t])
    (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    yhat = A @ np.array([a, b])
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum(y**2))           # uncentered: the model has no intercept
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    fit_end = a * t[-1] ** 2 + b * t[-1]
    frac = abs(b * t[-1]) / abs(fit_end) if fit_end != 0 else math.inf
    return OnsetFit(float(a), float(b), float(r2), float(frac))


def compare_decay_shapes(t, y):
    """Residual sums of squares of ``a t^2`` and ``A (1 - exp(-t / T))`` fits to ``y``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    a = float(np.dot(t**2, y) / np.dot(t**2, t**2))
    rss_q = float(np.sum((y - a * t**2) ** 2))
    slope = float(np.dot(t, y) / np.dot(t, t))
    span = float(t[-1]) if t[-1] > 0 else 1.0
    amp0 = max(float(y[-1]) * 2.0, 1e-300)
    T0 = max(amp0 / slope, span) if slope > 0 else span

    def model(tt, A, T):
        return A * -np.expm1(-tt / T)

    try:
        (A, T), _ = curve_fit(model, t, y, p0=(amp0, T0), maxfev=20000)
        rss_e = float(np.sum((y - model(t, A, T)) ** 2))
    except RuntimeError:
        A, T, rss_e = math.nan, math.nan, math.inf
    return {"quadratic_a": a, "quadratic_rss": rss_q, "exp_amplitude": float(A),
            "exp_time": float(T), "exp_rss": rss_e}
