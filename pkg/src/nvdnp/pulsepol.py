"""PulsePol-family sequences and their action on small NV-nuclear spin systems.

Frequencies are ordinary (MHz) at the interface and multiplied by 2 pi only
when building Hamiltonians; times are in microseconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constants import (
    B_POLARIZATION,
    D_NV,
    GAMMA_13C,
    GAMMA_14N,
    GAMMA_NV,
    N14_A_PAR,
    N14_A_PERP,
    N14_QUADRUPOLE,
)
from .spin import SX, SY, SZ, hamiltonian_batch

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class PulseShape:
    """Symmetric phase-alternating pi-pulse, durations in pi-pulse units.

    ``a_list`` is ``[a_n, ..., a_1, a_0]``; the pulse plays
    ``t_n .. t_1, 2 t_0, t_1 .. t_n``. Odd indices are free-evolution gaps,
    ``a_0`` is driven with the nominal phase and even indices alternate
    between inverted and nominal phase moving outwards.
    """

    a_list: tuple = (0.5,)
    name: str = ""

    def __post_init__(self):
        a = tuple(float(x) for x in self.a_list)
        object.__setattr__(self, "a_list", a)
        if len(a) % 2 != 1:
            raise ValueError("a_list needs an odd length [a_n, ..., a_0]")
        if any(x < 0 or not np.isfinite(x) for x in a):
            raise ValueError("pulse durations must be finite and >= 0")

    @property
    def kind(self) -> str:
        return "rectangular" if self.a_list == (0.5,) else "phase-alternating"

    @property
    def n_sidebands(self) -> int:
        return len(self.a_list) // 2

    @property
    def a(self) -> tuple:
        """Durations indexed from the centre: ``a[0] = a_0``."""
        return self.a_list[::-1]

    def sections(self, half: str = "full"):
        """``(duration, phase_offset, driven)`` tuples in pi-pulse units.

        ``half`` is "full", "left" (t_n .. t_0) or "right" (t_0 .. t_n).
        """
        a = self.a
        outer = []
        for i in range(len(a) - 1, 0, -1):
            if i % 2:
                outer.append((a[i], 0.0, False))
            else:
                outer.append((a[i], np.pi if (i // 2) % 2 else 0.0, True))
        centre = (a[0], 0.0, True)
        left = outer + [centre]
        right = [centre] + outer[::-1]
        if half == "left":
            return left
        if half == "right":
            return right
        return outer + [(2 * a[0], 0.0, True)] + outer[::-1]

    def duration(self) -> float:
        """Total length in pi-pulse units."""
        return 2 * sum(self.a_list)

    def on_time(self) -> float:
        a = self.a
        return 2 * sum(a[i] for i in range(0, len(a), 2))

    def net_rotation(self) -> float:
        """Rotation angle at zero detuning in units of pi (1 for a pi-pulse)."""
        a = self.a
        return 2 * sum(a[i] * (-1 if (i // 2) % 2 else 1) for i in range(0, len(a), 2))


RECTANGULAR = PulseShape((0.5,), "normal")
TWO_SIDEBAND = PulseShape((0.187, 0.251, 0.408, 0.253, 0.721), "2-sideband")
THREE_SIDEBAND = PulseShape((0.13, 0.231, 0.386, 0.261, 0.527, 0.236, 0.771), "3-sideband")
FOUR_SIDEBAND = PulseShape(
    (0.167, 0.32, 0.427, 0.348, 0.658, 0.263, 0.72, 0.292, 0.822), "4-sideband")
PULSE_TABLE = {p.name: p for p in (RECTANGULAR, TWO_SIDEBAND, THREE_SIDEBAND, FOUR_SIDEBAND)}

PHI_STANDARD = np.pi / 2
PHI_OFFSET = 3 * np.pi / 4


def resonance_tau(n: float, omega_i: float) -> float:
    """Block length (us) for resonance index ``n`` and nuclear Larmor frequency (MHz)."""
    if not n > 0 or not omega_i > 0:
        raise ValueError("n and omega_i must be positive")
    return n / (2 * omega_i)


def larmor_13c(B: float = B_POLARIZATION) -> float:
    """13C Larmor frequency (MHz) at field ``B`` in mT."""
    return GAMMA_13C * B * 1e-3


def block_phases(phi: float):
    """Phases of the six pulses in one block; phi = pi/2 gives X Y X Y -X Y."""
    return (0.0, np.pi / 2, 0.0, np.pi - phi, 1.5 * np.pi - phi, np.pi - phi)


@dataclass(frozen=True)
class SequenceSpec:
    phi: float = PHI_OFFSET
    n: float = 4.5
    M: int = 20
    omega1: float = 10.5
    detuning: float = 0.0
    pulse: PulseShape = RECTANGULAR
    larmor: float = field(default_factory=larmor_13c)
    tau: Optional[float] = None
    tau_srt: float = 1500.0

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be an integer >= 1, got {self.M}")
        if not self.omega1 > 0:
            raise ValueError("omega1 must be positive")
        if self.tau is None:
            resonance_tau(self.n, self.larmor)
        elif not self.tau > 0:
            raise ValueError("tau must be positive")

    @property
    def block_time(self) -> float:
        return self.tau if self.tau is not None else resonance_tau(self.n, self.larmor)

    @property
    def pi_time(self) -> float:
        """Rectangular pi-pulse length (us)."""
        return 1 / (2 * self.omega1)

    @property
    def pulse_time(self) -> float:
        return self.pulse.duration() * self.pi_time

    def with_(self, **kw) -> "SequenceSpec":
        from dataclasses import replace
        return replace(self, **kw)


@dataclass(frozen=True)
class Segment:
    duration: float  # us
    phase: float  # rad
    driven: bool


class SequenceTimingError(ValueError):
    pass


def build_block(spec: SequenceSpec):
    """Segments of one six-pulse block of length tau."""
    tau = spec.block_time
    tp = spec.pi_time
    gap = tau / 4 - spec.pulse_time
    if gap < -1e-12:
        raise SequenceTimingError(
            f"pi-pulse length {spec.pulse_time * 1e3:.2f} ns exceeds tau/4 = {tau / 4 * 1e3:.2f} ns")
    gap = max(gap, 0.0)
    p = block_phases(spec.phi)
    shape = spec.pulse

    def pulse(phase, half):
        return [Segment(d * tp, phase + off, on) for d, off, on in shape.sections(half) if d > 0]

    # Each half-block opens with the outward half (t_0 .. t_n) and closes with
    # the inward half (t_n .. t_0), so the two pi/2 pulses meeting at the
    # half-block boundary form one symmetric composite shape.
    segs = []
    for k in (0, 3):
        segs += pulse(p[k], "right")
        segs.append(Segment(gap, 0.0, False))
        segs += pulse(p[k + 1], "full")
        segs.append(Segment(gap, 0.0, False))
        segs += pulse(p[k + 2], "left")
    return [s for s in segs if s.duration > 0]


def build_sequence(spec: SequenceSpec):
    """Full segment list: the block repeated ``spec.M`` times."""
    return build_block(spec) * int(spec.M)


# -- spin models ---------------------------------------------------------------

_PX = np.array([[0, 1], [1, 0]], dtype=complex) / 2
_PY = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
_PZ = np.diag([0.5, -0.5]).astype(complex)
_I2 = np.eye(2)


@dataclass(frozen=True)
class N14Params:
    a_par: float = N14_A_PAR
    a_perp: float = N14_A_PERP
    quadrupole: float = N14_QUADRUPOLE
    gamma_n: float = GAMMA_14N  # MHz / T


@dataclass(frozen=True)
class SpinModel:
    """Reduced NV pseudo-spin x 13C model or S=1 NV x 14N model at 90 degrees.

    For the reduced model the pseudo-spin up state is the initially populated
    NV level; the nucleus starts fully mixed. ``omega_i`` defaults to the
    sequence's Larmor frequency.
    """

    kind: str = "reduced"
    a_zx: float = 0.08
    a_zy: float = 0.0
    a_zz: float = 0.0
    omega_i: Optional[float] = None
    n14: N14Params = N14Params()
    B: float = B_POLARIZATION
    D: float = D_NV
    gamma_bar: float = GAMMA_NV
    b1_direction: tuple = (0.0, 1.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("reduced", "full-n14"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.omega_i is not None and not self.omega_i > 0:
            raise ValueError("omega_i must be positive")


@dataclass
class _Frame:
    """Static part, drive operators and observables in a fixed basis (angular units)."""

    h0: np.ndarray  # excludes detuning
    hz: np.ndarray  # multiplies the detuning
    raise_op: np.ndarray  # e^{-i phi} coefficient of the drive
    p_init: np.ndarray
    nuclear: np.ndarray
    rho0: np.ndarray


def _reduced_frame(model: SpinModel, larmor: float) -> _Frame:
    wi = model.omega_i if model.omega_i is not None else larmor
    sx, sy, sz = (np.kron(a, _I2) for a in (_PX, _PY, _PZ))
    ix, iy, iz = (np.kron(_I2, a) for a in (_PX, _PY, _PZ))
    h0 = TWO_PI * (wi * iz + 2 * sz @ (model.a_zx * ix + model.a_zy * iy + model.a_zz * iz))
    up = np.kron(np.diag([1.0, 0.0]), _I2)
    return _Frame(h0=h0, hz=TWO_PI * sz, raise_op=TWO_PI * (sx + 1j * sy) / 2,
                  p_init=up, nuclear=2 * iz, rho0=up / 2)


def _n14_operators():
    r2 = 1 / np.sqrt(2)
    ix = r2 * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)
    iy = r2 * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex)
    iz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return ix, iy, iz


def n14_hamiltonian(B: float, model: SpinModel, theta: float = np.pi / 2) -> np.ndarray:
    """Static NV x 14N Hamiltonian (MHz), field ``B`` (mT) in the NV x-z plane."""
    p = model.n14
    nv = hamiltonian_batch(model.D, model.gamma_bar, B * np.array([np.sin(theta), 0.0, np.cos(theta)]))
    ix, iy, iz = _n14_operators()
    e3 = np.eye(3)
    hf = p.a_par * np.kron(SZ, iz) + p.a_perp * (np.kron(SX, ix) + np.kron(SY, iy))
    quad = p.quadrupole * np.kron(e3, iz @ iz - 2 / 3 * e3)
    zeeman_n = -p.gamma_n * B * 1e-3 * np.kron(e3, np.sin(theta) * ix + np.cos(theta) * iz)
    return np.kron(nv, e3) + hf + quad + zeeman_n


def _bare_transition(model: SpinModel, theta=np.pi / 2):
    nv = hamiltonian_batch(model.D, model.gamma_bar, model.B * np.array([np.sin(theta), 0.0, np.cos(theta)]))
    w, v = np.linalg.eigh(nv)
    b1 = np.asarray(model.b1_direction, dtype=float)
    op = b1[0] * SX + b1[1] * SY + b1[2] * SZ
    d = v[:, 0].conj() @ op @ v[:, 1]
    return w[1] - w[0], abs(d)


def _n14_frame(model: SpinModel, theta=np.pi / 2) -> _Frame:
    """Six lowest levels (s1 and s2 manifolds) in the frame rotating at the bare s1-s2 line."""
    w, v = np.linalg.eigh(n14_hamiltonian(model.B, model, theta))
    w, v = w[:6], v[:, :6]
    nu12, d12 = _bare_transition(model, theta)
    if d12 < 1e-12:
        raise ValueError("drive direction does not couple the bare s1-s2 transition")
    lower = np.diag([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    upper = np.eye(6) - lower
    e = w - np.where(np.arange(6) >= 3, nu12, 0.0)
    b1 = np.asarray(model.b1_direction, dtype=float)
    op = np.kron(b1[0] * SX + b1[1] * SY + b1[2] * SZ, np.eye(3))
    V = v.conj().T @ op @ v / d12
    ix, _, _ = _n14_operators()
    nuc = v.conj().T @ np.kron(np.eye(3), ix) @ v
    # Delta S_z with s1 as pseudo-spin up: the carrier moves up by Delta
    hz = TWO_PI * 0.5 * (lower - upper)
    return _Frame(h0=TWO_PI * np.diag(e).astype(complex), hz=hz,
                  raise_op=TWO_PI * 0.5 * (lower @ V @ upper),
                  p_init=lower.astype(complex), nuclear=nuc, rho0=lower.astype(complex) / 3)


def model_frame(model: SpinModel, spec: SequenceSpec) -> _Frame:
    if model.kind == "reduced":
        return _reduced_frame(model, spec.larmor)
    return _n14_frame(model)


@dataclass
class PropagationResult:
    nv_polarization: np.ndarray  # after each block
    nuclear_polarization: np.ndarray
    rho: np.ndarray

    @property
    def final_nv(self) -> float:
        return float(self.nv_polarization[-1])

    @property
    def final_nuclear(self) -> float:
        return float(self.nuclear_polarization[-1])


def _expm_herm(H, t):
    w, v = np.linalg.eigh(H)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def segment_hamiltonian(frame: _Frame, omega1: float, detuning: float, seg: Segment):
    H = frame.h0 + detuning * frame.hz
    if seg.driven:
        drive = omega1 * np.exp(-1j * seg.phase) * frame.raise_op
        H = H + drive + drive.conj().T
    return H


def block_unitary(frame: _Frame, spec: SequenceSpec, detuning: Optional[float] = None):
    det = spec.detuning if detuning is None else detuning
    cache = {}
    U = np.eye(frame.h0.shape[0], dtype=complex)
    for seg in build_block(spec):
        key = (seg.driven, round(seg.phase % TWO_PI, 12) if seg.driven else 0.0, seg.duration)
        if key not in cache:
            cache[key] = _expm_herm(segment_hamiltonian(frame, spec.omega1, det, seg), seg.duration)
        U = cache[key] @ U
    return U


def _check_rho(rho, dim):
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (dim, dim):
        raise ValueError(f"rho0 must be {dim}x{dim}")
    if not np.allclose(rho, rho.conj().T, atol=1e-10):
        raise ValueError("rho0 must be Hermitian")
    if abs(np.trace(rho).real - 1) > 1e-9:
        raise ValueError("rho0 must have unit trace")
    if np.linalg.eigvalsh(rho).min() < -1e-10:
        raise ValueError("rho0 must be positive semidefinite")
    return rho


def propagate(model: SpinModel, spec: SequenceSpec, rho0=None, frame: _Frame = None) -> PropagationResult:
    """Apply ``spec.M`` blocks and record polarizations after each block."""
    frame = model_frame(model, spec) if frame is None else frame
    rho = frame.rho0 if rho0 is None else _check_rho(rho0, frame.h0.shape[0])
    U = block_unitary(frame, spec)
    Ud = U.conj().T
    nv = np.empty(spec.M)
    nuc = np.empty(spec.M)
    for k in range(spec.M):
        rho = U @ rho @ Ud
        nv[k] = 2 * np.trace(rho @ frame.p_init).real - 1
        nuc[k] = np.trace(rho @ frame.nuclear).real
    return PropagationResult(nv, nuc, rho)


def final_polarizations(frame: _Frame, spec: SequenceSpec, detuning=None):
    """NV and nuclear polarization after M blocks, via a matrix power."""
    U = np.linalg.matrix_power(block_unitary(frame, spec, detuning), int(spec.M))
    rho = U @ frame.rho0 @ U.conj().T
    return 2 * np.trace(rho @ frame.p_init).real - 1, np.trace(rho @ frame.nuclear).real


@dataclass
class ScanResult:
    x: np.ndarray
    nv_polarization: np.ndarray
    nuclear_polarization: np.ndarray
    label: str = "x"

    def to_csv(self, path):
        from .powder import write_csv
        write_csv(path, ["x", "nv_polarization", "nuclear_polarization"],
                  np.column_stack([self.x, self.nv_polarization, self.nuclear_polarization]))

    def minima(self, depth: float = 0.0):
        """x positions of local minima of the NV polarization below ``1 - depth``."""
        y = self.nv_polarization
        idx = np.flatnonzero((y[1:-1] < y[:-2]) & (y[1:-1] <= y[2:]) & (y[1:-1] < 1 - depth)) + 1
        return self.x[idx]

    def resonances(self, depth: float = 0.05, separation: float = None):
        """Centres of dip clusters: the deepest sample of each group of minima.

        Strong resonances over-rotate into several fringes; minima closer than
        ``separation`` (default: 5% of the scan range) are merged.
        """
        xs = self.minima(depth)
        if len(xs) == 0:
            return xs
        sep = 0.05 * (self.x[-1] - self.x[0]) if separation is None else separation
        y = dict(zip(self.x, self.nv_polarization))
        groups = [[xs[0]]]
        for a in xs[1:]:
            if a - groups[-1][-1] <= sep:
                groups[-1].append(a)
            else:
                groups.append([a])
        return np.array([min(g, key=lambda a: y[a]) for g in groups])


def _parallel_map(fn, items, threads=None):
    from .parallel import parallel_map
    return parallel_map(fn, items, threads)


def scan_tau(model: SpinModel, spec: SequenceSpec, tau_range, n_points: int = 200,
             threads: Optional[int] = None) -> ScanResult:
    """NV and nuclear polarization after M blocks versus block length tau (us)."""
    lo, hi = tau_range
    if not 0 < lo < hi or n_points < 2:
        raise ValueError("need 0 < tau_min < tau_max and n_points >= 2")
    taus = np.linspace(lo, hi, n_points)
    frame = model_frame(model, spec)

    def run(t):
        return final_polarizations(frame, spec.with_(tau=float(t)))

    out = np.array(_parallel_map(run, taus, threads))
    return ScanResult(taus, out[:, 0], out[:, 1], "tau")


def scan_detuning(model: SpinModel, spec: SequenceSpec, deltas,
                  threads: Optional[int] = None) -> ScanResult:
    """Polarizations after M blocks versus carrier detuning (MHz)."""
    deltas = np.asarray(deltas, dtype=float)
    frame = model_frame(model, spec)
    build_block(spec)  # timing check before fanning out

    def run(d):
        return final_polarizations(frame, spec, float(d))

    out = np.array(_parallel_map(run, deltas, threads))
    return ScanResult(deltas, out[:, 0], out[:, 1], "detuning")


def pulse_propagators(pulse: PulseShape, omega1: float, deltas):
    """SU(2) propagators of one pulse for each detuning, shape (len(deltas), 2, 2).

    Pseudo-spin Hamiltonian per section: Delta S_z + Omega (cos p S_x + sin p S_y).
    """
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    U = np.broadcast_to(np.eye(2, dtype=complex), (len(deltas), 2, 2)).copy()
    tp = 1 / (2 * omega1)
    for dur, phase, on in pulse.sections("full"):
        if dur == 0:
            continue
        t = dur * tp
        om = omega1 if on else 0.0
        # exp(-i 2pi t (n . sigma) w / 2) with w = |(om cos, om sin, delta)|
        w = np.hypot(om, deltas)
        half = np.pi * w * t
        c = np.cos(half)
        s = np.sinc(w * t) * np.pi * t  # sin(half) / w, finite at w = 0
        nx, ny, nz = om * np.cos(phase), om * np.sin(phase), deltas
        step = np.empty_like(U)
        step[:, 0, 0] = c - 1j * s * nz
        step[:, 1, 1] = c + 1j * s * nz
        step[:, 0, 1] = -1j * s * (nx - 1j * ny)
        step[:, 1, 0] = -1j * s * (nx + 1j * ny)
        U = step @ U
    return U


def inversion_profile(pulse: PulseShape, omega1: float, deltas) -> np.ndarray:
    """<sigma_z> after one pulse starting from the up state, per detuning."""
    U = pulse_propagators(pulse, omega1, deltas)
    return np.abs(U[:, 0, 0]) ** 2 - np.abs(U[:, 1, 0]) ** 2


def contiguous_width(x, y, level) -> float:
    """Width of the interval around x=0 where ``y >= level``, crossings interpolated.

    ``x`` must be sorted and contain 0. Returns 0 if y(0) < level.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    i0 = int(np.argmin(np.abs(x)))
    if y[i0] < level:
        return 0.0

    def edge(step):
        i = i0
        while 0 <= i + step < len(x) and y[i + step] >= level:
            i += step
        j = i + step
        if not 0 <= j < len(x):
            return x[i]
        f = (y[i] - level) / (y[i] - y[j])
        return x[i] + f * (x[j] - x[i])

    return float(edge(1) - edge(-1))


def transfer_bandwidth(model: SpinModel, spec: SequenceSpec, threshold: float = 0.5,
                       span: float = 1.5, n_points: int = 121, threads=None) -> float:
    """Width (MHz) of the detuning band keeping |nuclear polarization| >= threshold x its Delta=0 value."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    deltas = np.linspace(-span * spec.omega1, span * spec.omega1, n_points)
    res = scan_detuning(model, spec, deltas, threads)
    y = np.abs(res.nuclear_polarization)
    i0 = int(np.argmin(np.abs(deltas)))
    if y[i0] == 0:
        return 0.0
    return contiguous_width(deltas, y, threshold * y[i0])


@dataclass(frozen=True)
class Transition:
    lower: int
    upper: int
    frequency: float
    dipole: float
    allowed: bool


def list_transitions_n14(B: float = B_POLARIZATION, D: float = D_NV, n14: N14Params = N14Params(),
                         theta: float = np.pi / 2, allowed_threshold: float = 0.5,
                         b1_direction=(0.0, 1.0, 0.0)):
    """Microwave transitions between the s1 and s2 manifolds of NV x 14N.

    Dipoles are relative to the bare NV s1-s2 matrix element of the drive;
    transitions at or above ``allowed_threshold`` are flagged allowed.
    """
    model = SpinModel(kind="full-n14", n14=n14, B=B, D=D, b1_direction=tuple(b1_direction))
    w, v = np.linalg.eigh(n14_hamiltonian(B, model, theta))
    _, d12 = _bare_transition(model, theta)
    b1 = np.asarray(b1_direction, dtype=float)
    op = np.kron(b1[0] * SX + b1[1] * SY + b1[2] * SZ, np.eye(3))
    V = v.conj().T @ op @ v / d12
    out = []
    for i in range(3):
        for j in range(3, 6):
            d = float(abs(V[i, j]))
            out.append(Transition(i, j, float(w[j] - w[i]), d, d >= allowed_threshold))
    return out
