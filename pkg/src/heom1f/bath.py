"""1/f bath model: spectral density, PSD, correlation function and its
sum-of-exponentials decomposition.

All frequencies are angular (rad/ns), times are in ns and hbar = 1.  The
correlation function uses the convention

    C(t) = (1/pi) * integral S(w) exp(-i w t) dw,   S(w) = J(w) / (1 - exp(-beta w)),

so that with coupling ``F sigma_z`` a frozen (static) bath of variance
``v`` gives ``C(t) = v`` and coherence ``exp(-2 v t^2)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import units


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested accuracy."""

    def __init__(self, message, achieved):
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


class FitError(RuntimeError):
    """Exponential fit could not reach the tolerance within ``k_max`` terms."""

    def __init__(self, best_error, k_max):
        super().__init__(
            f"exponential fit reached relative error {best_error:.3e} "
            f"with at most {k_max} terms")
        self.best_error = best_error
        self.k_max = k_max


# ---------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class BathModel:
    """Sub-ohmic / 1/f spectral density with soft low and high cutoffs.

    Parameters
    ----------
    eta : float
        Dimensionless coupling strength entering J(omega).
    s : float
        Spectral exponent; ``s = 0`` is 1/f noise.
    omega_q : float
        Characteristic frequency (rad/ns), the qubit frequency.
    omega_hc, omega_lc : float
        High and low cutoffs (rad/ns).
    phi_width : float, optional
        Width of the soft step; defaults to ``omega_lc / 10``.
    beta : float
        Inverse temperature in ns.
    window : {"odd", "literal"}
        ``"literal"`` multiplies ``sgn(w)`` by the sum of the two soft
        steps.  That product is discontinuous at zero (J(0+) is about
        ``exp(-10)`` of the band value) which makes S ~ 1/w and the
        correlation function divergent.  ``"odd"`` uses
        ``theta(w - a) - theta(-w - a)`` instead; it agrees with the literal
        form to ``exp(-10)`` relative and vanishes linearly at zero.
    """

    eta: float
    s: float = 0.0
    omega_q: float = units.angular(units.QUBIT_FREQUENCY_GHZ)
    omega_hc: float = units.angular(units.HIGH_CUTOFF_GHZ)
    omega_lc: float = units.angular(units.LOW_CUTOFF_GHZ)
    phi_width: float | None = None
    beta: float = units.beta_from_temperature(units.TEMPERATURE_K)
    window: str = "odd"

    def __post_init__(self):
        if self.phi_width is None:
            object.__setattr__(self, "phi_width", self.omega_lc / 10.0)
        self.validate()

    def validate(self):
        if not self.eta >= 0:
            raise ValueError("eta must be non-negative")
        if not self.omega_hc > self.omega_lc > 0:
            raise ValueError("need omega_hc > omega_lc > 0")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.phi_width > 0:
            raise ValueError("phi_width must be positive")
        if self.s <= -1:
            raise ValueError("s must exceed -1")
        if self.window not in ("odd", "literal"):
            raise ValueError(f"unknown window {self.window!r}")

    @classmethod
    def reference(cls, eta_convention="ordinary", low_cutoff_ghz=units.LOW_CUTOFF_GHZ,
                  eta=units.ETA_NOMINAL, **kw):
        """Reference 1/f bath (5 GHz qubit, 10 GHz cutoff, 50 mK)."""
        return cls(eta=units.eta_from_convention(eta, eta_convention),
                   omega_lc=units.angular(low_cutoff_ghz), **kw)

    def scaled(self, factor):
        return replace(self, eta=self.eta * factor)

    # -- spectral functions -------------------------------------------------
    def _soft_step(self, x):
        # 1 - 1/(1+e^{x/phi}) written without overflow
        return 0.5 * (1.0 + np.tanh(0.5 * x / self.phi_width))

    def window_function(self, omega):
        omega = np.asarray(omega, dtype=float)
        a = self.omega_lc
        if self.window == "odd":
            return self._soft_step(omega - a) - self._soft_step(-omega - a)
        return np.sign(omega) * (self._soft_step(omega - a) + self._soft_step(-omega - a))

    def spectral_density(self, omega):
        omega = np.asarray(omega, dtype=float)
        amp = 0.5 * math.pi * self.eta * self.omega_q ** (1.0 - self.s)
        with np.errstate(divide="ignore"):
            power = np.where(omega == 0, 0.0, np.abs(omega) ** self.s)
        return amp * power * self.window_function(omega) / (1.0 + (omega / self.omega_hc) ** 2) ** 2

    def slope_at_zero(self):
        """dJ/dw at w = 0 (finite only for the odd window and s = 0)."""
        if self.s != 0 or self.window != "odd":
            return 0.0
        amp = 0.5 * math.pi * self.eta * self.omega_q
        x = self.omega_lc / (2.0 * self.phi_width)
        return amp / (2.0 * self.phi_width) / math.cosh(x) ** 2

    def breakpoints(self, upper):
        """Positive frequencies where the integrands change character."""
        pts = [0.5 * self.omega_lc, self.omega_lc, 2 * self.omega_lc, 10 * self.omega_lc,
               1.0 / self.beta, self.omega_hc, 4 * self.omega_hc]
        lo = 10 * self.omega_lc
        pts += list(np.geomspace(lo, self.omega_hc, max(2, int(np.log10(self.omega_hc / lo)) + 2)))
        return _clean_points(pts, upper)

    @property
    def rate_scale(self):
        return self.omega_hc


def _clean_points(pts, upper):
    pts = sorted({float(p) for p in pts if 0 < p < upper})
    return [0.0] + pts + [float(upper)]


@dataclass(frozen=True)
class QuadConfig:
    """Quadrature settings.

    ``window_factor`` sets the frequency cut ``c * omega_hc``.  ``rel_tol``
    is relative to the total power scale of the model.
    """

    window_factor: float = 100.0
    rel_tol: float = 1e-12
    limit: int = 400


DEFAULT_QUAD = QuadConfig()


# ---------------------------------------------------------------------------
# pointwise functions


def spectral_density(omega, model):
    """J(omega) in rad/ns; odd in omega."""
    return model.spectral_density(omega)


def psd(omega, model):
    """Noise power spectral density S = J / (1 - exp(-beta omega)).

    The removable point at zero uses the Bose-factor series
    ``w / (1 - e^{-beta w}) = 1/beta + w/2 + beta w^2 / 12``.
    """
    omega = np.asarray(omega, dtype=float)
    out = np.empty_like(omega)
    small = np.abs(model.beta * omega) < 1e-6
    big = ~small
    w = omega[big]
    out[big] = model.spectral_density(w) / -np.expm1(-model.beta * w)
    ws = omega[small]
    # J(w)/w is smooth near zero; use the slope for w == 0 and the ratio otherwise
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(ws == 0, model.slope_at_zero(), model.spectral_density(ws) / np.where(ws == 0, 1.0, ws))
    out[small] = ratio * (1.0 / model.beta + ws / 2.0 + model.beta * ws**2 / 12.0)
    return out if out.ndim else float(out)


def _symmetric_psd(omega, model):
    """S(w) + S(-w) = J(w) coth(beta w / 2) for w >= 0."""
    omega = np.asarray(omega, dtype=float)
    x = 0.5 * model.beta * omega
    with np.errstate(invalid="ignore", divide="ignore"):
        val = model.spectral_density(omega) / np.tanh(x)
    return np.where(omega == 0, 2.0 * model.slope_at_zero() / model.beta, val)


# ---------------------------------------------------------------------------
# quadrature helpers


def _quad(f, a, b, eps, limit, weight=None, wvar=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if weight is None:
            val, err, *rest = integrate.quad(f, a, b, epsabs=eps, epsrel=1e-11, limit=limit,
                                             full_output=1)
        else:
            val, err, *rest = integrate.quad(f, a, b, epsabs=eps, epsrel=1e-11, limit=limit,
                                             weight=weight, wvar=wvar, full_output=1)
    return val, err


def _oscillatory(f, edges, t, kind, eps, limit):
    """Integral of f(w) * cos(w t) or sin(w t) over consecutive edges."""
    total = 0.0
    err = 0.0
    trig = np.cos if kind == "cos" else np.sin
    for a, b in zip(edges[:-1], edges[1:]):
        if t == 0.0:
            if kind == "sin":
                continue
            v, e = _quad(f, a, b, eps, limit)
        elif (b - a) * abs(t) < 20.0:
            v, e = _quad(lambda w: f(w) * trig(w * t), a, b, eps, limit)
        else:
            v, e = _quad(f, a, b, eps, limit, weight=kind, wvar=t)
        total += v
        err += e
    return total, err


@lru_cache(maxsize=64)
def power_scale(model, quad=DEFAULT_QUAD):
    """(1/pi) * integral over all w of S, i.e. C(0); sets absolute tolerances."""
    upper = quad.window_factor * model.omega_hc
    edges = model.breakpoints(upper)
    val, _ = _oscillatory(lambda w: _symmetric_psd(w, model), edges, 0.0, "cos", 0.0, quad.limit)
    return val / math.pi


def _abs_eps(model, quad):
    scale = power_scale(model, quad) if model.eta > 0 else 0.0
    return max(quad.rel_tol * scale, 1e-300)


def correlation_function(t, model, quad=DEFAULT_QUAD, full_output=False):
    """Bath correlation function C(t) by adaptive quadrature.

    The frequency integral is folded onto w > 0 using detailed balance:
    ``Re C = (1/pi) int J coth(beta w/2) cos(w t)`` and
    ``Im C = -(1/pi) int J sin(w t)``.  Long subintervals use QAWO
    (Fourier-weighted) quadrature.

    Parameters
    ----------
    t : float or array_like
        Times in ns (any sign).
    model : BathModel
    quad : QuadConfig
    full_output : bool
        Also return the summed error estimate.

    Returns
    -------
    complex or ndarray of complex
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros(ts.shape, dtype=complex)
    errs = np.zeros(ts.shape)
    if model.eta == 0:
        return (out if np.ndim(t) else out[0], errs if np.ndim(t) else 0.0) if full_output else (
            out if np.ndim(t) else complex(out[0]))
    eps = _abs_eps(model, quad)
    upper = quad.window_factor * model.omega_hc
    edges = model.breakpoints(upper)
    fs = lambda w: _symmetric_psd(w, model)
    fj = lambda w: model.spectral_density(w)
    n_int = len(edges) - 1
    for i, tt in enumerate(ts):
        re, e1 = _oscillatory(fs, edges, abs(tt), "cos", eps / n_int, quad.limit)
        im, e2 = _oscillatory(fj, edges, abs(tt), "sin", eps / n_int, quad.limit)
        im = -im if tt >= 0 else im
        out[i] = (re + 1j * im) / math.pi
        errs[i] = (e1 + e2) / math.pi
        if errs[i] > 1e4 * eps:
            raise QuadratureError(f"correlation function at t={tt} did not converge", errs[i])
    if np.ndim(t) == 0:
        return (complex(out[0]), float(errs[0])) if full_output else complex(out[0])
    return (out, errs) if full_output else out


def band_variance(model, omega_a, omega_b, quad=DEFAULT_QUAD):
    """Integral of S(w) over [omega_a, omega_b] (omega_b may be inf)."""
    if not 0 <= omega_a < omega_b:
        raise ValueError("need 0 <= omega_a < omega_b")
    if model.eta == 0:
        return 0.0
    eps = _abs_eps(model, quad)
    pts = [p for p in model.breakpoints(quad.window_factor * model.omega_hc)
           if omega_a < p < omega_b]
    edges = [omega_a] + pts + [omega_b]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = _quad(lambda w: psd(w, model), a, b, eps / len(edges), quad.limit)
        if e > 1e4 * eps:
            raise QuadratureError("band variance did not converge", e)
        total += v
    return total


def total_power(model, quad=DEFAULT_QUAD):
    """Integral of S over the whole real line (equals pi C(0))."""
    return math.pi * power_scale(model, quad) if model.eta > 0 else 0.0


def t_phi_estimate(model, quad=DEFAULT_QUAD):
    """Equivalent-Gaussian dephasing time from (1/T)^2 = (pi/2) int S dw.

    Returns ``math.inf`` when the bath carries no power.
    """
    p = total_power(model, quad)
    if p <= 0:
        return math.inf
    return 1.0 / math.sqrt(0.5 * math.pi * p)


def dephasing_integral(t, model, quad=DEFAULT_QUAD, abs_tol=1e-11):
    """Gamma(t) = (4/pi) int_0^inf J/w^2 coth(beta w/2) (1 - cos w t) dw.

    On short subintervals the factor is written as ``2 sin^2(w t/2) / w^2``
    (finite at w = 0); on long ones the non-oscillatory and the
    cosine-weighted parts are integrated separately.
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros(ts.shape)
    if model.eta == 0:
        return out if np.ndim(t) else 0.0
    edges = model.breakpoints(quad.window_factor * model.omega_hc)
    s0 = float(_symmetric_psd(0.0, model))

    def g(w):
        return _symmetric_psd(w, model) / w**2

    for i, tt in enumerate(np.abs(ts)):
        if tt == 0:
            continue

        def f(w, tt=tt):
            w = np.asarray(w, dtype=float)
            safe = np.where(w == 0, 1.0, w)
            val = 2.0 * np.sin(0.5 * safe * tt) ** 2 * _symmetric_psd(safe, model) / safe**2
            return np.where(w == 0, 0.5 * tt**2 * s0, val)

        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            if a == 0.0 or (b - a) * tt < 20.0:
                v, _ = _quad(f, a, b, abs_tol, quad.limit)
            else:
                v1, _ = _quad(g, a, b, abs_tol, quad.limit)
                v2, _ = _quad(g, a, b, abs_tol, quad.limit, weight="cos", wvar=tt)
                v = v1 - v2
            total += v
        out[i] = 4.0 / math.pi * total
    return out if np.ndim(t) else float(out[0])


# ---------------------------------------------------------------------------
# exponential series


@dataclass(frozen=True)
class ExponentialSeries:
    """C(t) ~ sum_k d_k exp(-gamma_k t) + static_variance.

    Attributes
    ----------
    amplitudes, rates : ndarray of complex
        ``d_k`` and ``gamma_k``; every ``Re gamma_k > 0``.
    static_variance : float
        Zero-decay term.
    certified_error : float
        Max relative reconstruction error on the certification grid
        (``nan`` when not produced by a fit).
    horizon : float
        Fit horizon in ns (``nan`` when not fitted).
    """

    amplitudes: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    rates: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    static_variance: float = 0.0
    certified_error: float = float("nan")
    horizon: float = float("nan")

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.amplitudes, dtype=complex))
        g = np.atleast_1d(np.asarray(self.rates, dtype=complex))
        if d.shape != g.shape:
            raise ValueError("amplitudes and rates differ in length")
        if np.any(g.real <= 0):
            raise ValueError("dynamic terms need Re(gamma) > 0; use static_variance")
        if self.static_variance < 0:
            raise ValueError("static variance must be non-negative")
        d.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "amplitudes", d)
        object.__setattr__(self, "rates", g)

    @property
    def terms(self):
        return list(zip(self.amplitudes.tolist(), self.rates.tolist()))

    def __len__(self):
        return len(self.rates)

    def with_static(self, variance):
        return replace(self, static_variance=float(variance))

    def scaled(self, factor):
        return replace(self, amplitudes=self.amplitudes * factor,
                       static_variance=self.static_variance * factor)

    def dephasing_exponent(self, t):
        """Exact Gamma(t) for sigma_z pure dephasing with this series.

        ``Gamma = 4 Re sum_k d_k [t/g_k - (1 - e^{-g_k t})/g_k^2] + 2 v t^2``.
        """
        t = np.asarray(t, dtype=float)
        tt = t[..., None]
        g = self.rates
        d = self.amplitudes
        term = tt / g - (-np.expm1(-g * tt)) / g**2
        return 4.0 * np.real(np.sum(d * term, axis=-1)) + 2.0 * self.static_variance * t**2


def reconstruct(series, t):
    """Evaluate the series at ``t >= 0``."""
    t = np.asarray(t, dtype=float)
    val = np.exp(-np.multiply.outer(t, series.rates)) @ series.amplitudes if len(series) else np.zeros(t.shape, complex)
    return val + series.static_variance


def default_fit_grid(horizon, n_lin=240, n_log=240, t_min=1e-3):
    """Union of a uniform and a log-spaced grid on [0, horizon]."""
    lin = np.linspace(0.0, horizon, n_lin)
    log = np.geomspace(min(t_min, horizon / 10), horizon, n_log)
    return np.unique(np.concatenate([lin, log]))


def _bounded_fit(t, y, rates, free_above, scale, iterations=40):
    """Amplitudes on a fixed real-rate grid, with minimax-style reweighting.

    Slow terms are sign constrained (Re d >= 0, Im d <= 0) which keeps the
    series free of large cancelling pairs; fast terms are free.
    """
    A = np.exp(-np.outer(t, rates))
    lb = np.where(rates > free_above, -np.inf, 0.0)
    ub = np.where(rates > free_above, np.inf, 0.0)
    w = np.ones_like(t)
    best = (np.inf, None)
    for _ in range(iterations):
        Aw = A * w[:, None]
        a = optimize.lsq_linear(Aw, y.real * w, bounds=(lb, np.inf), method="bvls").x
        b = optimize.lsq_linear(Aw, y.imag * w, bounds=(-np.inf, ub), method="bvls").x
        d = a + 1j * b
        err = np.abs(A @ d - y) / scale
        if err.max() < best[0]:
            best = (err.max(), d)
        w = w * np.sqrt(err / err.max()) + 1e-12
        w /= w.max()
    return best[1], best[0]


def fit_correlation(t, y, horizon, tolerance=1e-3, k_min=8, k_max=40, rate_max=None,
                    free_fraction=0.02):
    """Sum-of-exponentials fit of sampled values ``y = C(t)``.

    The decay rates form a geometric grid from ``1/(4 horizon)`` to
    ``rate_max``; the grid is refined (``K`` grows by 2) until the maximum
    error on the samples is at most ``tolerance * |C(0)|``.

    Returns
    -------
    ExponentialSeries
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=complex)
    scale = abs(y[np.argmin(t)])
    if scale == 0:
        return ExponentialSeries(certified_error=0.0, horizon=horizon)
    best_err = np.inf
    for K in range(k_min, k_max + 1, 2):
        rates = np.geomspace(1.0 / (4.0 * horizon), rate_max, K)
        d, err = _bounded_fit(t, y, rates, free_fraction * rate_max, scale)
        keep = d != 0
        d, g = d[keep], rates[keep]
        err = float(np.max(np.abs(np.exp(-np.outer(t, g)) @ d - y)) / scale)
        best_err = min(best_err, err)
        if err <= tolerance:
            return ExponentialSeries(amplitudes=d, rates=g.astype(complex), certified_error=err,
                                     horizon=float(horizon))
    raise FitError(best_err, k_max)


@lru_cache(maxsize=16)
def _sampled_correlation(model, horizon, quad):
    t = default_fit_grid(horizon)
    return t, correlation_function(t, model, quad)


def fit_exponentials(model, horizon, tolerance=1e-3, k_max=40, quad=DEFAULT_QUAD, rate_max=None):
    """Certified sum-of-exponentials decomposition of C(t) on [0, horizon].

    Parameters
    ----------
    model : BathModel
    horizon : float
        Fit window in ns.
    tolerance : float
        Allowed max error relative to ``|C(0)|``.
    k_max : int
        Largest rate grid tried.
    rate_max : float, optional
        Fastest rate in the grid, default ``5 * omega_hc``.

    Returns
    -------
    ExponentialSeries
        Deterministic for fixed inputs.

    Raises
    ------
    FitError
        Tolerance not met with ``k_max`` grid rates.
    """
    if horizon <= 0 or tolerance <= 0:
        raise ValueError("horizon and tolerance must be positive")
    if model.eta == 0:
        return ExponentialSeries(certified_error=0.0, horizon=float(horizon))
    t, y = _sampled_correlation(model, float(horizon), quad)
    rate_max = 5.0 * model.rate_scale if rate_max is None else rate_max
    return fit_correlation(t, y, horizon, tolerance, k_max=k_max, rate_max=rate_max)


class ExponentialFitter(BaseEstimator):
    """Estimator wrapper around :func:`fit_exponentials`.

    ``fit`` takes a bath model instead of a data matrix; ``predict``
    evaluates the fitted series.
    """

    def __init__(self, horizon=500.0, tolerance=1e-3, k_max=40, rate_max=None):
        self.horizon = horizon
        self.tolerance = tolerance
        self.k_max = k_max
        self.rate_max = rate_max

    def fit(self, model, y=None):
        self.series_ = fit_exponentials(model, self.horizon, self.tolerance, self.k_max,
                                        rate_max=self.rate_max)
        self.error_ = self.series_.certified_error
        self.n_terms_ = len(self.series_)
        return self

    def predict(self, t):
        check_is_fitted(self, "series_")
        return reconstruct(self.series_, t)
