import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heom1f import bath, units

# Oracle values computed once with mpmath (25 digits) from the closed-form
# spectral density and frozen here.
J_AT_1GHZ = 1.2253700617586511e-7
S_AT_LOW_CUTOFF = 0.0065114747032242227
INT_S_POSITIVE = 1.55998284000751e-5
INT_S_REAL_LINE = 2.50311619035223e-5
SIGMA2_BELOW_CUTOFF = 6.58273523952e-8


@pytest.fixture(scope="module")
def model():
    return bath.BathModel.reference()


def _mp_model():
    mp.mp.dps = 25
    eta = mp.mpf("1e-7") / (2 * mp.pi) ** 2
    wq, whc, wlc = 2 * mp.pi * 5, 2 * mp.pi * 10, 2 * mp.pi * mp.mpf("1e-5")
    phi = wlc / 10
    beta = mp.mpf("6.62607015e-34") / (2 * mp.pi) / (mp.mpf("1.380649e-23") * mp.mpf("0.05")) * mp.mpf("1e9")

    def step(x):
        return 1 / (1 + mp.exp(-x / phi))

    def J(w):
        return mp.pi / 2 * eta * wq * (step(w - wlc) - step(-w - wlc)) / (1 + (w / whc) ** 2) ** 2

    return J, beta, wlc


def test_spectral_density_mpmath_oracle(model):
    J, beta, wlc = _mp_model()
    w = 2 * math.pi
    assert bath.spectral_density(w, model) == pytest.approx(float(J(mp.mpf(w))), rel=1e-12)
    assert bath.spectral_density(w, model) == pytest.approx(J_AT_1GHZ, rel=1e-12)


def test_psd_mpmath_oracle_at_low_cutoff(model):
    J, beta, wlc = _mp_model()
    expected = float(J(wlc) / (-mp.expm1(-beta * wlc)))
    assert bath.psd(model.omega_lc, model) == pytest.approx(expected, rel=1e-10)
    assert bath.psd(model.omega_lc, model) == pytest.approx(S_AT_LOW_CUTOFF, rel=1e-8)


def test_psd_detailed_balance(model):
    w = np.array([0.01, 0.3, 2.0, 40.0])
    ratio = bath.psd(w, model) / bath.psd(-w, model)
    assert np.allclose(ratio, np.exp(model.beta * w), rtol=1e-10)


@given(st.floats(min_value=1e-6, max_value=500.0))
@settings(max_examples=50, deadline=None)
def test_spectral_density_is_odd(w):
    m = bath.BathModel.reference()
    assert bath.spectral_density(-w, m) == pytest.approx(-bath.spectral_density(w, m), abs=1e-30)


def test_literal_window_differs_only_near_zero(model):
    lit = bath.BathModel.reference(window="literal")
    w = np.geomspace(10 * model.omega_lc, 5 * model.omega_hc, 50)
    assert np.allclose(bath.spectral_density(w, lit), bath.spectral_density(w, model), rtol=1e-4)


def test_band_variance_oracles(model):
    assert bath.band_variance(model, 0.0, math.inf) == pytest.approx(INT_S_POSITIVE, rel=1e-6)
    assert bath.total_power(model) == pytest.approx(INT_S_REAL_LINE, rel=1e-6)
    assert bath.band_variance(model, 0.0, model.omega_lc) == pytest.approx(SIGMA2_BELOW_CUTOFF, rel=1e-6)
    with pytest.raises(ValueError):
        bath.band_variance(model, 1.0, 0.5)


def test_band_variance_additive(model):
    a = bath.band_variance(model, 0.0, 1.0)
    b = bath.band_variance(model, 1.0, math.inf)
    assert a + b == pytest.approx(bath.band_variance(model, 0.0, math.inf), rel=1e-8)


def test_zero_coupling_gives_zero_power():
    m = bath.BathModel.reference(eta=0.0)
    assert bath.band_variance(m, 0.0, math.inf) == 0.0
    assert bath.t_phi_estimate(m) == math.inf
    assert bath.dephasing_integral(100.0, m) == 0.0


def test_model_validation():
    with pytest.raises(ValueError):
        bath.BathModel(eta=-1.0)
    with pytest.raises(ValueError):
        bath.BathModel(eta=1.0, omega_lc=100.0)
    with pytest.raises(ValueError):
        bath.BathModel(eta=1.0, window="box")


def test_correlation_function_at_zero_is_power_scale(model):
    c0 = bath.correlation_function(0.0, model)
    assert c0.real == pytest.approx(bath.power_scale(model), rel=1e-10)
    assert abs(c0.imag) < 1e-12 * c0.real


def test_correlation_function_hermitian(model):
    t = np.array([0.5, 3.0, 40.0])
    cp = bath.correlation_function(t, model)
    cm = bath.correlation_function(-t, model)
    assert np.allclose(cm, np.conj(cp), rtol=1e-9, atol=1e-16)


def test_dephasing_integral_short_time_limit(model):
    # Gamma(t) -> (2/pi) t^2 int J coth dw for small t (static limit)
    t = 1e-3
    expected = 2.0 / math.pi * t**2 * bath.total_power(model)
    assert bath.dephasing_integral(t, model) == pytest.approx(expected, rel=1e-3)


def test_dephasing_integral_monotone(model):
    g = bath.dephasing_integral(np.array([0.0, 50.0, 100.0, 200.0, 500.0]), model)
    assert g[0] == 0.0 and np.all(np.diff(g) > 0)
    # frozen values of the quadrature solution
    assert g[3] == pytest.approx(0.2216, rel=2e-3)
    assert g[4] == pytest.approx(1.1463, rel=2e-3)


def test_fit_correlation_recovers_known_series():
    # synthetic data with a closed form: two real-rate terms plus an oscillating pair
    t = bath.default_fit_grid(50.0)
    y = (3e-3 * np.exp(-0.05 * t) + 1e-3 * np.exp(-2.0 * t)
         + 1e-3 * np.exp(-0.5 * t) * (np.cos(0.3 * t) - 0.5j * np.sin(0.3 * t)))
    series = bath.fit_correlation(t, y, 50.0, tolerance=1e-3, k_max=30, rate_max=20.0)
    dense = np.linspace(0, 50, 1001)
    yd = (3e-3 * np.exp(-0.05 * dense) + 1e-3 * np.exp(-2.0 * dense)
          + 1e-3 * np.exp(-0.5 * dense) * (np.cos(0.3 * dense) - 0.5j * np.sin(0.3 * dense)))
    assert series.certified_error <= 1e-3
    assert np.max(np.abs(bath.reconstruct(series, dense) - yd)) / abs(yd[0]) < 2e-3
    assert np.all(series.rates.real > 0)


def test_reference_fit_certified(model):
    series = bath.fit_exponentials(model, horizon=132.0)
    t = np.linspace(0.0, 132.0, 397)
    ref = bath.correlation_function(t, model)
    err = np.max(np.abs(bath.reconstruct(series, t) - ref)) / abs(ref[0])
    assert series.certified_error <= 1e-3
    assert err <= 1.5e-3
    # determinism
    again = bath.fit_exponentials(model, horizon=132.0)
    assert np.array_equal(again.amplitudes, series.amplitudes)


def test_fit_error_reports_best_and_kmax(model):
    with pytest.raises(bath.FitError) as exc:
        bath.fit_exponentials(model, horizon=132.0, tolerance=1e-9, k_max=3)
    assert exc.value.k_max == 3 and exc.value.best_error > 1e-9


def test_series_static_term_and_scaling():
    s = bath.ExponentialSeries([1.0 + 0j], [2.0 + 0j])
    assert s.with_static(0.5).static_variance == 0.5
    assert np.allclose(bath.reconstruct(s.with_static(0.5), np.array([0.0])), 1.5)
    assert np.allclose(s.scaled(3.0).amplitudes, 3.0)
    with pytest.raises(ValueError):
        bath.ExponentialSeries([1.0], [0.0])
    with pytest.raises(ValueError):
        s.with_static(-1.0)


def test_series_dephasing_exponent_static_limit():
    s = bath.ExponentialSeries(static_variance=2e-6)
    t = np.array([10.0, 100.0])
    assert np.allclose(s.dephasing_exponent(t), 2 * 2e-6 * t**2, rtol=1e-12)


def test_exponential_fitter_estimator_shape(model):
    from sklearn.base import clone

    est = bath.ExponentialFitter(horizon=132.0)
    assert clone(est).get_params() == est.get_params()
    est.fit(model)
    t = np.linspace(0, 132, 11)
    assert np.allclose(est.predict(t), bath.reconstruct(est.series_, t))
    assert est.n_terms_ == len(est.series_) and est.error_ <= 1e-3


def test_units_constants_consistent():
    assert units.CPMG_FIRST == units.CPMG_GAP / 2
