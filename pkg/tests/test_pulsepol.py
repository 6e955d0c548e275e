"""PulsePol sequences: pulse shapes, propagators and resonance structure."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from nvdnp import pulsepol as pp
from nvdnp.pulsepol import (
    PHI_OFFSET, PHI_STANDARD, PULSE_TABLE, RECTANGULAR, TWO_SIDEBAND, PulseShape,
    SequenceSpec, SequenceTimingError, SpinModel, block_unitary, build_block,
    final_polarizations, inversion_profile, list_transitions_n14, model_frame,
    propagate, pulse_propagators, resonance_tau, scan_detuning, scan_tau,
)

pulses = st.sampled_from(sorted(PULSE_TABLE))


# [PAPER] tau = n pi / omega_I with 13C at 287 mT: 0.7324 us for n = 4.5
def test_resonance_tau():
    f = pp.larmor_13c(287.0)
    assert f == pytest.approx(3.0723, abs=1e-4)
    assert resonance_tau(4.5, f) == pytest.approx(0.7324, abs=2e-4)
    assert 68 * resonance_tau(4.5, f) == pytest.approx(49.8, abs=0.1)
    with pytest.raises(ValueError):
        resonance_tau(0, f)


# [DERIVED] every tabulated composite pulse is a net pi rotation on resonance
@given(pulses)
def test_net_rotation_is_pi(name):
    assert PULSE_TABLE[name].net_rotation() == pytest.approx(1.0, abs=2e-3)


def test_pulse_accounting():
    assert RECTANGULAR.duration() == 1.0 and RECTANGULAR.on_time() == 1.0
    assert TWO_SIDEBAND.n_sidebands == 2
    assert TWO_SIDEBAND.duration() == pytest.approx(3.64)
    assert TWO_SIDEBAND.on_time() == pytest.approx(2.632)
    with pytest.raises(ValueError):
        PulseShape((0.5, 0.1))
    with pytest.raises(ValueError):
        PulseShape((-0.1,))


# [DERIVED] halves concatenate to the full pulse
@given(pulses)
def test_sections_halves(name):
    p = PULSE_TABLE[name]
    full = p.sections("full")
    left, right = p.sections("left"), p.sections("right")
    assert sum(d for d, _, _ in left + right) == pytest.approx(sum(d for d, _, _ in full))
    assert left[::-1] == right


# [DERIVED] closed-form SU(2) against scipy expm of the piecewise Hamiltonian
@settings(max_examples=25)
@given(pulses, st.floats(-30, 30), st.floats(1, 50))
def test_pulse_propagator_matches_expm(name, delta, omega1):
    p = PULSE_TABLE[name]
    sx = np.array([[0, 1], [1, 0]]) / 2
    sy = np.array([[0, -1j], [1j, 0]]) / 2
    sz = np.diag([0.5, -0.5])
    U = np.eye(2, dtype=complex)
    for d, ph, on in p.sections("full"):
        om = omega1 if on else 0.0
        H = 2 * np.pi * (delta * sz + om * (np.cos(ph) * sx + np.sin(ph) * sy))
        U = expm(-1j * H * d / (2 * omega1)) @ U
    got = pulse_propagators(p, omega1, [delta])[0]
    assert np.allclose(got, U, atol=1e-10)


# [DERIVED] Rabi formula for a rectangular pulse
@given(st.floats(-40, 40))
def test_rectangular_inversion_rabi_formula(delta):
    om = 10.0
    w = np.hypot(om, delta)
    flip = (om / w) ** 2 * np.sin(np.pi * w / (2 * om)) ** 2
    assert inversion_profile(RECTANGULAR, om, [delta])[0] == pytest.approx(1 - 2 * flip, abs=1e-12)


def test_block_spans_tau():
    for pulse in PULSE_TABLE.values():
        spec = SequenceSpec(pulse=pulse, omega1=30.0)
        assert sum(s.duration for s in build_block(spec)) == pytest.approx(spec.block_time)


def test_timing_error_names_durations():
    spec = SequenceSpec(pulse=TWO_SIDEBAND, omega1=10.5, n=3.5)
    with pytest.raises(SequenceTimingError, match="ns"):
        build_block(spec)


# [DERIVED] block unitaries are unitary for both models, any detuning and phase
@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["reduced", "full-n14"]), st.floats(-20, 20), st.floats(0, 2 * np.pi), pulses)
def test_block_unitarity(kind, delta, phi, name):
    spec = SequenceSpec(phi=phi, omega1=30.0, pulse=PULSE_TABLE[name])
    frame = model_frame(SpinModel(kind=kind), spec)
    U = block_unitary(frame, spec, delta)
    assert np.allclose(U.conj().T @ U, np.eye(U.shape[0]), atol=1e-10)


# [DERIVED] propagation keeps rho Hermitian, positive and of unit trace
@settings(max_examples=10, deadline=None)
@given(st.sampled_from(["reduced", "full-n14"]), st.floats(1.0, 6.0))
def test_trace_preservation(kind, n):
    spec = SequenceSpec(n=n, M=7, omega1=40.0)
    res = propagate(SpinModel(kind=kind), spec)
    rho = res.rho
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(rho, rho.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(rho).min() > -1e-12
    nv, nuc = final_polarizations(model_frame(SpinModel(kind=kind), spec), spec)
    assert nv == pytest.approx(res.final_nv, abs=1e-10)
    assert nuc == pytest.approx(res.final_nuclear, abs=1e-10)


# [DERIVED] without hyperfine coupling one block is a z rotation of the NV:
# (pi/2 pi pi/2) halves compose to pi rotations whose product is about z
@given(st.sampled_from([PHI_STANDARD, PHI_OFFSET]), st.floats(1.0, 8.0))
def test_uncoupled_nv_returns(phi, n):
    spec = SequenceSpec(phi=phi, n=n, M=5, omega1=50.0)
    res = propagate(SpinModel(a_zx=0.0), spec)
    assert np.allclose(res.nv_polarization, 1.0, atol=1e-9)
    assert np.allclose(res.nuclear_polarization, 0.0, atol=1e-9)


def test_initial_state_validation():
    spec = SequenceSpec(M=2, omega1=40.0)
    with pytest.raises(ValueError):
        propagate(SpinModel(), spec, rho0=np.eye(4))
    with pytest.raises(ValueError):
        propagate(SpinModel(), spec, rho0=np.diag([1.5, -0.5, 0, 0]))


# [PAPER] standard PulsePol transfers at odd n and not at even n
def test_standard_resonances_odd():
    spec = SequenceSpec(phi=PHI_STANDARD, M=20, omega1=50.0)
    frame = model_frame(SpinModel(), spec)
    nv = {n: final_polarizations(frame, spec.with_(n=n))[0] for n in (2.0, 3.0, 4.0, 5.0)}
    assert nv[3.0] < 0.5 and nv[5.0] < 0.5
    assert nv[2.0] > 0.9 and nv[4.0] > 0.9


# [PAPER] the phase-offset variant transfers at half-integers, strongest at 3.5 and 4.5
def test_offset_resonances_half_integer():
    spec = SequenceSpec(phi=PHI_OFFSET, M=20, omega1=50.0)
    frame = model_frame(SpinModel(), spec)
    nv = {n: final_polarizations(frame, spec.with_(n=n))[0] for n in (3.0, 3.5, 4.0, 4.5, 5.5)}
    assert nv[3.5] < 0.5 and nv[4.5] < 0.5
    assert nv[3.0] > 0.9 and nv[4.0] > 0.9
    assert min(nv[3.5], nv[4.5]) < nv[5.5]


# [DERIVED] threaded scans are bit-identical to serial ones
def test_scan_thread_determinism():
    spec = SequenceSpec(M=5, omega1=40.0)
    L = spec.larmor
    a = scan_tau(SpinModel(), spec, (resonance_tau(3, L), resonance_tau(5, L)), 24, threads=1)
    b = scan_tau(SpinModel(), spec, (resonance_tau(3, L), resonance_tau(5, L)), 24, threads=4)
    assert np.array_equal(a.nv_polarization, b.nv_polarization)
    d = scan_detuning(SpinModel(), spec, np.linspace(-20, 20, 9), threads=3)
    assert d.x.tolist() == np.linspace(-20, 20, 9).tolist()


def test_resonance_grouping():
    x = np.linspace(0, 10, 101)
    y = np.ones_like(x)
    y[[20, 22, 24]] = [0.5, 0.2, 0.6]  # one over-rotated resonance
    y[70] = 0.3
    r = pp.ScanResult(x, y, np.zeros_like(x))
    assert np.allclose(r.resonances(0.05, 1.0), [2.2, 7.0])


# [DERIVED] the width helper interpolates crossings linearly
def test_contiguous_width():
    x = np.linspace(-2, 2, 5)
    y = np.array([0.0, 1.0, 1.0, 1.0, 0.0])
    assert pp.contiguous_width(x, y, 0.5) == pytest.approx(3.0)
    assert pp.contiguous_width(x, -y, 0.5) == 0.0


# [DERIVED] 14N at 90 deg: three allowed lines conserving m_I plus weaker forbidden ones
def test_n14_transitions():
    tr = list_transitions_n14()
    allowed = [t for t in tr if t.allowed]
    assert len(allowed) == 3
    assert all(0.8 < t.dipole <= 1.0 + 1e-9 for t in allowed)
    # sum rule: the drive acts on the NV only, so squared dipoles add to dim(14N) = 3
    # up to the tiny admixture of the s3 manifold
    assert sum(t.dipole**2 for t in tr) == pytest.approx(3.0, abs=1e-5)
    # lines cluster within a few MHz of the bare s1-s2 transition
    nu = np.array([t.frequency for t in allowed])
    assert np.ptp(nu) < 5.0
    assert np.all(np.abs(nu - 9606.6) < 5.0)


def test_n14_frame_unitarity_and_populations():
    spec = SequenceSpec(M=3, omega1=10.5)
    frame = model_frame(SpinModel(kind="full-n14"), spec)
    assert np.trace(frame.rho0).real == pytest.approx(1.0)
    res = propagate(SpinModel(kind="full-n14"), spec)
    assert -1.0 <= res.final_nv <= 1.0
