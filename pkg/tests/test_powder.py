"""Powder averaging, spectra, bandwidth fraction and heating calculus."""

import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from nvdnp import powder
from nvdnp.powder import (
    FIT_2UM, NO_BROADENING, BroadeningModel, SpectrumRequest, bandwidth_fraction,
    frequency_distribution, heating_analysis, orientation_grid, perpendicular_carrier,
    simulate_spectrum, strain_nodes, synthetic_peak_fields, write_csv,
)
from nvdnp.spin import FieldVector, NvSystem, build_hamiltonian, diagonalize, resonance_fields, tilt_acceptance

SYS = NvSystem()
SMALL = dict(n_theta=40, n_phi=4, n_strain=3)


# [TRIVIAL] weights normalised; [DERIVED] <cos^2 theta> over the sphere is 1/3
def test_orientation_grid_moments():
    th, ph, w = orientation_grid(400, 6)
    assert w.sum() == pytest.approx(1.0)
    assert w @ np.cos(th) ** 2 == pytest.approx(1 / 3, abs=1e-5)


# [DERIVED] Gauss-Hermite nodes reproduce the Gaussian variance exactly
def test_strain_nodes_variance():
    x, w = strain_nodes(21.0, 7)
    sigma = 21.0 / (2 * np.sqrt(2 * np.log(2)))
    assert w.sum() == pytest.approx(1.0)
    assert w @ x == pytest.approx(0.0, abs=1e-12)
    assert w @ x**2 == pytest.approx(sigma**2, rel=1e-12)
    assert strain_nodes(0.0, 7)[0].tolist() == [0.0]


# [DERIVED] field roots against scalar brentq on the full 3x3 problem
def test_field_roots_match_brentq():
    ens = powder._ensemble(NO_BROADENING, 7, 1, 1)
    m, p, B = powder._field_roots(SYS, ens, 9600.0, 150.0, 500.0)
    for mi, pi_, Bi in zip(m, p, B):
        u = ens.directions[mi]
        theta = float(np.arccos(np.clip(u[2], -1, 1)))
        i, j = powder.PAIRS[pi_]

        def f(b):
            e = diagonalize(build_hamiltonian(SYS, FieldVector(b, theta))).energies
            return e[j] - e[i] - 9600.0

        ref = brentq(f, Bi - 0.01, Bi + 0.01, xtol=1e-9)
        assert Bi == pytest.approx(ref, abs=2e-4)


# [PAPER] perpendicular resonances appear as the two strongest maxima
def test_thermal_pake_peaks():
    req = SpectrumRequest()
    sp = simulate_spectrum(SYS, req, FIT_2UM)
    B12, B23 = resonance_fields(9600.0, 2869.0)
    lo, hi = sp.peak_positions(2)
    step = req.axis[1] - req.axis[0]
    assert abs(lo - B12) <= step
    assert abs(hi - B23) <= step
    assert np.all(sp.intensity[(req.axis > 280) & (req.axis < 400)] > 0)


# [DERIVED] intensity is affine in p_nv
@settings(max_examples=5, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_spectrum_affine_in_p_nv(p1, p2):
    def run(p):
        return simulate_spectrum(SYS, SpectrumRequest(p_nv=p, **SMALL), FIT_2UM).intensity

    s0, s1 = run(0.0), run(1.0)
    for p in (p1, p2):
        assert np.allclose(run(p), (1 - p) * s0 + p * s1, rtol=1e-10, atol=1e-14 * np.abs(s1).max())


# [PAPER] pumping leaves the low-field line absorptive, inverts the high-field
# one, and the single sign change sits near the g = 2 field
def test_pumped_spectrum_changes_sign():
    req = SpectrumRequest(p_nv=0.05, n_theta=90, n_phi=4, n_strain=3)
    sp = simulate_spectrum(SYS, req, FIT_2UM)
    B12, B23 = resonance_fields(9600.0, 2869.0)
    assert np.interp(B12, sp.axis, sp.intensity) > 0
    assert np.interp(B23, sp.axis, sp.intensity) < 0
    inner = (sp.axis > B12 + 5) & (sp.axis < B23 - 5)
    s = np.sign(sp.intensity[inner])
    flips = sp.axis[inner][1:][s[1:] != s[:-1]]
    assert len(flips) == 1
    assert flips[0] == pytest.approx(9600.0 / 28.032, rel=0.03)


# [DERIVED] bit-identical repeat runs; monte-carlo strain depends on the seed
def test_determinism_and_seed():
    req = SpectrumRequest(strain_sampling="monte-carlo", seed=4, **SMALL)
    a = simulate_spectrum(SYS, req, FIT_2UM).intensity
    b = simulate_spectrum(SYS, req, FIT_2UM).intensity
    assert np.array_equal(a, b)
    c = simulate_spectrum(SYS, SpectrumRequest(strain_sampling="monte-carlo", seed=5, **SMALL), FIT_2UM).intensity
    assert not np.array_equal(a, c)


# [DERIVED] area of a unit-area Lorentzian sum equals the amplitude sum
def test_accumulate_area():
    axis = np.linspace(-500, 500, 20001)
    out = powder._accumulate(axis, np.array([0.0, 10.0]), np.array([1.0, 2.0]), 0.5)
    assert np.trapezoid(out, axis) == pytest.approx(3.0, rel=1e-3)
    binned = powder._accumulate(axis, np.array([0.0]), np.array([1.0]), 0.0)
    assert np.trapezoid(binned, axis) == pytest.approx(1.0, rel=1e-6)


def test_field_mode_requires_mT_width():
    with pytest.raises(ValueError):
        simulate_spectrum(SYS, SpectrumRequest(**SMALL), BroadeningModel(0.4, 0.0, "MHz"))


def test_empty_window_has_no_resonances():
    sp = simulate_spectrum(SYS, SpectrumRequest(axis_min=5000, axis_max=5100, **SMALL), NO_BROADENING)
    assert sp.metadata["n_in_window"] == 0
    assert np.all(sp.intensity == 0)


# [DERIVED] frequency distribution support: s1-s2 at 90 deg is its upper edge for the low branch
def test_frequency_distribution_support():
    sp = frequency_distribution(SYS, 287.0, NO_BROADENING, n_theta=90, n_phi=1, n_strain=1)
    nu90 = diagonalize(build_hamiltonian(SYS, FieldVector(287.0))).transition(0, 1)
    assert sp.metadata["nu_min"] < nu90 < sp.metadata["nu_max"]


# [DERIVED] unbroadened fraction equals the solid angle sin(delta_M) within the tilt acceptance
def test_unbroadened_fraction_solid_angle():
    c = perpendicular_carrier(SYS, 287.0, 15.0)
    f = bandwidth_fraction(SYS, c, 287.0, 15.0, NO_BROADENING, n_theta=3000)
    assert f["s1s2"] == pytest.approx(np.sin(tilt_acceptance(15.0, 2869, 287.0)), abs=1e-3)


# [DERIVED] a vanishing Lorentzian recovers the sharp count
def test_fraction_narrow_limit():
    c = perpendicular_carrier(SYS, 287.0, 15.0)
    sharp = bandwidth_fraction(SYS, c, 287.0, 15.0, NO_BROADENING, n_theta=800)
    narrow = bandwidth_fraction(SYS, c, 287.0, 15.0, BroadeningModel(1e-6, 0.0, "MHz"), n_theta=800)
    assert narrow["s1s2"] == pytest.approx(sharp["s1s2"], abs=2e-3)


@given(st.floats(5, 40))
@settings(max_examples=10, deadline=None)
def test_fraction_monotone_in_window(width):
    c = 9600.0
    a = bandwidth_fraction(SYS, c, 287.0, width, NO_BROADENING, n_theta=600)
    b = bandwidth_fraction(SYS, c, 287.0, width * 1.5, NO_BROADENING, n_theta=600)
    assert b["s1s2"] >= a["s1s2"] - 1e-12


def test_fraction_rejects_bad_window():
    with pytest.raises(ValueError):
        bandwidth_fraction(SYS, 9600, 287, 0.0, NO_BROADENING)


# [DERIVED] heating round trip through the forward model
@given(st.floats(0.01, 0.3))
def test_heating_round_trip(rate):
    pts = synthetic_peak_fields([31, 100, 200, 300, 420], rate)
    res = heating_analysis(pts)
    assert res.rate == pytest.approx(rate, rel=1e-3)


def test_heating_degenerate_powers():
    with pytest.raises(ValueError):
        heating_analysis([(100, 286.7), (100, 286.8)])


# [TRIVIAL] CSV: header, RFC quoting, precision
def test_write_csv(tmp_path):
    p = tmp_path / "x.csv"
    write_csv(p, ["name", "v"], [["a,b", 1 / 3], ['q"t', 2.0]])
    rows = list(csv.reader(io.StringIO(p.read_text())))
    assert rows[0] == ["name", "v"]
    assert rows[1] == ["a,b", "0.333333333"]
    assert rows[2][0] == 'q"t'
    assert list(tmp_path.iterdir()) == [p]
