"""Fits, enhancement bookkeeping and estimators."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nvdnp.analysis import (
    DIAMOND_2UM, DIAMOND_100NM, WATER_REFERENCE, ProtocolTiming, SampleSpec, TimeSeries,
    absolute_polarization, diffusion_length, enhancement, enhancement_ratio_model,
    fit_rotation_response, fit_stretched_exp, gamma_ref, nn_distance, protocol_power,
    rotation_response, stretched_decay, stretched_saturation, thermal_polarization, tumbling,
)


def _sat(seed, noise=0.01, T=34.0, beta=0.85):
    t = np.linspace(0, 200, 60)
    rng = np.random.default_rng(seed)
    return TimeSeries(t, stretched_saturation(t, 1.0, T, beta) + noise * rng.standard_normal(len(t)))


# [DERIVED] forward-model round trip
def test_saturation_round_trip():
    r = fit_stretched_exp(_sat(0), "saturation")
    assert r.converged
    assert r["T"] == pytest.approx(34, rel=0.05)
    assert r["beta"] == pytest.approx(0.85, rel=0.1)


def test_decay_round_trip():
    t = np.linspace(0, 600, 40)
    y = stretched_decay(t, 2.0, 142, 1.0) + 0.01 * np.random.default_rng(1).standard_normal(40)
    r = fit_stretched_exp(TimeSeries(t, y), "decay")
    assert r["T"] == pytest.approx(142, rel=0.05)
    assert r["beta"] == pytest.approx(1.0, abs=0.05)


# [DERIVED] noiseless data are fitted exactly
@settings(max_examples=15, deadline=None)
@given(st.floats(5, 80), st.floats(0.4, 1.6), st.floats(0.1, 10))
def test_exact_recovery(T, beta, A):
    t = np.linspace(0, 6 * T, 50)
    r = fit_stretched_exp(TimeSeries(t, stretched_saturation(t, A, T, beta)))
    assert r["T"] == pytest.approx(T, rel=1e-5)
    assert r["beta"] == pytest.approx(beta, rel=1e-5)
    assert r["A"] == pytest.approx(A, rel=1e-5)


# [DERIVED] scale equivariance
@settings(max_examples=10, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_scale_equivariance(k):
    s = _sat(2)
    a = fit_stretched_exp(s)
    b = fit_stretched_exp(TimeSeries(s.t, k * s.y))
    assert b["A"] == pytest.approx(k * a["A"], rel=1e-6)
    assert b["T"] == pytest.approx(a["T"], rel=1e-6)
    assert b["beta"] == pytest.approx(a["beta"], rel=1e-6)


def test_fit_preconditions():
    with pytest.raises(ValueError):
        fit_stretched_exp(TimeSeries([0, 1, 2], [0, 1, 2]))
    with pytest.raises(ValueError):
        TimeSeries([0, 2, 1, 3], [0, 1, 2, 3])
    with pytest.raises(ValueError):
        fit_rotation_response(TimeSeries([1, 2, 3, 4, 5], [1, 2, 3, 4, 5]))


def test_rotation_round_trip():
    w = np.linspace(0, 60, 121)
    y = rotation_response(w, 1.0, 1.0, 4.9, 0.74) + 0.02 * np.random.default_rng(0).standard_normal(len(w))
    r = fit_rotation_response(TimeSeries(w, y))
    assert r.converged
    assert r["w0"] == pytest.approx(4.9, rel=0.1)
    assert r["beta"] == pytest.approx(0.74, rel=0.1)
    # [PAPER] w0 * T_pol with T_pol = 29 s -> 142 deg
    assert 4.9 * 29 == pytest.approx(142, abs=1)


# [TRIVIAL] flat data leave w0 unidentifiable and are flagged
def test_rotation_flat_flagged():
    w = np.linspace(0, 30, 31)
    y = 1.0 + 0.01 * np.random.default_rng(5).standard_normal(len(w))
    r = fit_rotation_response(TimeSeries(w, y))
    assert not r.converged
    assert "unidentifiable" in r.message


def test_time_series_csv_round_trip(tmp_path):
    s = _sat(3)
    p = tmp_path / "s.csv"
    s.to_csv(p)
    back = TimeSeries.from_csv(p)
    assert np.allclose(back.y, s.y, rtol=1e-8)


# [PAPER] Gamma_ref = 1/1652 for 12 mg against the water reference
def test_gamma_ref():
    g = gamma_ref(DIAMOND_2UM, WATER_REFERENCE)
    assert 1 / g == pytest.approx(1652, rel=5e-3)
    assert gamma_ref(DIAMOND_100NM, WATER_REFERENCE) == pytest.approx(g / 2)
    assert gamma_ref(WATER_REFERENCE, WATER_REFERENCE) == pytest.approx(1.0)


# [DERIVED] homogeneity: degree 1 in diamond mass, -1 in reference mass
@given(st.floats(0.1, 100), st.floats(0.1, 100))
def test_gamma_ref_homogeneity(m1, m2):
    d = SampleSpec(m1, 0.0107, 12.011, 10.705)
    r = SampleSpec(m2, 0.9998, 18.015, 42.576, 2)
    base = gamma_ref(DIAMOND_2UM, WATER_REFERENCE)
    assert gamma_ref(d, r) == pytest.approx(base * (m1 / 12) / (m2 / 40), rel=1e-12)


# [DERIVED] p_th = h gamma B / 2kT, checked against tanh form at high T
def test_thermal_polarization():
    p = thermal_polarization(1.004, 293.0)
    assert p == pytest.approx(8.80e-7, rel=1e-2)
    x = 6.62607015e-34 * 10.705e6 * 1.004 / (2 * 1.380649e-23 * 293)
    assert p == pytest.approx(math.tanh(x), rel=1e-9)


# [DERIVED] enhancement pipeline inverts the forward signal model
@given(st.floats(1e-6, 1e-2), st.floats(0.1, 10))
def test_absolute_polarization_round_trip(p, s_ref):
    g = gamma_ref(DIAMOND_2UM, WATER_REFERENCE)
    p_det = thermal_polarization(1.004, 293)
    s_hp = p / p_det * g * s_ref  # forward model
    assert absolute_polarization(s_hp, s_ref, g, p_det) == pytest.approx(p, rel=1e-10)


def test_enhancement_ratio_model():
    assert enhancement_ratio_model(0.024, 8.2, 0.032, 3.4) == pytest.approx(0.024 * 8.2 / (0.032 * 3.4))
    with pytest.raises(ValueError):
        enhancement(1.0, 0.0)


def test_estimators():
    assert diffusion_length(6.7e-15, 30) == pytest.approx(4.48, abs=0.01)
    assert nn_distance(8.2) == pytest.approx(4.9, rel=0.02)
    assert nn_distance(3.4) == pytest.approx(6.5, rel=0.02)
    tb = tumbling(80, 1.4, 293, math.radians(2.5), 1.5)
    assert tb.d_r == pytest.approx(0.22, rel=0.05)
    assert tb.residence == pytest.approx(4.3, rel=0.05)
    assert tb.cycles in (2, 3)


# [DERIVED] nn distance scales as conc^(-1/3)
@given(st.floats(0.1, 100))
def test_nn_scaling(c):
    assert nn_distance(8 * c) == pytest.approx(nn_distance(c) / 2, rel=1e-12)


def test_protocol_power():
    assert protocol_power(ProtocolTiming()) == pytest.approx(426.67, abs=0.01)
    assert protocol_power(ProtocolTiming(t_laser=1500.0)) == 1600.0
    assert protocol_power(ProtocolTiming(t_laser=0.0)) == 0.0
    with pytest.raises(ValueError):
        ProtocolTiming(t_laser=2000.0)
