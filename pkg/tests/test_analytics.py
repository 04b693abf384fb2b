import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heom1f import analytics, bath, control


@given(st.floats(1e-7, 1e-4))
@settings(max_examples=20, deadline=None)
def test_gauss_hermite_equals_closed_form(v):
    t = np.linspace(0, 300, 31)
    assert np.allclose(analytics.gauss_hermite_coherence(t, v), analytics.gaussian_static_coherence(t, v),
                       atol=1e-10)


def test_lindblad_coherence():
    assert analytics.lindblad_coherence(576.0, 576.0) == pytest.approx(0.5 / math.e)
    with pytest.raises(ValueError):
        analytics.lindblad_coherence(1.0, 0.0)


def test_analytic_coherence_rotating_frame():
    m = bath.BathModel.reference()
    c = analytics.analytic_coherence(np.array([0.0, 100.0]), m)
    assert c[0] == 0.5
    assert abs(c[1]) == pytest.approx(0.5 * math.exp(-bath.dephasing_integral(100.0, m)))


def test_reference_coefficients_round_trip():
    n = np.arange(1, 21, dtype=float)
    lin = analytics.fit_polynomial(n, 5.081e-5 * n + 1.306e-4, "linear")
    assert lin.coefficients == pytest.approx((5.081e-5, 1.306e-4), rel=1e-10)
    quad = analytics.fit_polynomial(n, 3.528e-6 * n**2, "quadratic")
    assert quad.coefficients[0] == pytest.approx(3.528e-6, rel=1e-10)
    assert quad.r2 == pytest.approx(1.0)


def test_fit_polynomial_guards():
    with pytest.raises(ValueError):
        analytics.fit_polynomial([1, 2, 3], [1, 2, 3])
    with pytest.raises(ValueError):
        analytics.fit_polynomial(np.ones(6), np.arange(6.0))
    with pytest.raises(ValueError):
        analytics.fit_polynomial(np.arange(6.0), np.arange(6.0), "cubic")


def _fake_trajectory(schedule, values):
    t = np.linspace(0, schedule.total_time, 4001)
    rhos = np.zeros((len(t), 2, 2), complex)
    rhos[:, 0, 0] = 0.5
    rhos[:, 1, 1] = 0.5
    rhos[:, 0, 1] = values(t)
    return SimpleNamespace(times=t, rhos=rhos)


def test_echo_peaks_windows():
    s = control.cpmg_schedule(3, "X", tau=15, delta_t=118)
    tr = _fake_trajectory(s, lambda t: 0.5 - 1e-6 * t)
    ref = _fake_trajectory(s, lambda t: 0.5 + 0 * t)
    e = analytics.echo_peaks(tr, s, ref)
    ends = [seg.end for seg in s.segments]
    assert np.allclose(e.peak_time, ends, atol=s.total_time / 4000)
    assert np.all(e.delta > 0)
    assert np.allclose(e.x, [1, 2, 3])
    et = analytics.echo_peaks(tr, s, None, abscissa="t")
    assert np.allclose(et.x, [seg.center for seg in s.segments]) and np.all(np.isnan(et.delta))
    assert len(e.odd()) == 2 and len(e.even()) == 1


def test_echo_peaks_requires_samples():
    s = control.cpmg_schedule(2, "X")
    tr = SimpleNamespace(times=np.array([0.0, s.total_time]), rhos=np.zeros((2, 2, 2), complex))
    with pytest.raises(ValueError):
        analytics.echo_peaks(tr, s)


def test_quadratic_onset_detects_shape():
    t = np.linspace(0, 33, 67)
    q = analytics.fit_quadratic_onset(t, 2e-6 * t**2)
    assert q.r2 == pytest.approx(1.0) and q.linear_fraction < 1e-8
    lin = analytics.fit_quadratic_onset(t, 1e-4 * t)
    assert lin.linear_fraction == pytest.approx(1.0)


def test_compare_decay_shapes():
    t = np.linspace(0, 33, 67)
    s = analytics.compare_decay_shapes(t, 0.2 * -np.expm1(-t / 300.0))
    assert s["exp_rss"] < s["quadratic_rss"]
    s = analytics.compare_decay_shapes(t, 3e-6 * t**2)
    assert s["quadratic_rss"] < 1e-20
