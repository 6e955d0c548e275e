"""Orientation-averaged NV EPR spectra under thermal or optically pumped populations.

Powder averages run over a fixed (theta, phi, strain) grid flattened in that
order; every reduction walks the grid in the same order, so identical inputs
give bit-identical outputs. Lorentzian widths are full widths at half maximum.
"""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import asdict, dataclass, field

import numpy as np

from .constants import B_POLARIZATION, NU_XBAND
from .spin import (
    D_NV,
    SPIN_OPS,
    NvSystem,
    boltzmann,
    d_from_b12,
    hamiltonian_batch,
    resonance_fields,
    thermal_shift_rate,
)

PAIRS = ((0, 1), (1, 2), (0, 2))
FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))


@dataclass(frozen=True)
class BroadeningModel:
    """Lorentzian linewidth (FWHM) and Gaussian e_x distribution (MHz, FWHM).

    ``lw_unit`` is "mT" for a field-domain width, converted to frequency
    through the local slope of each line, or "MHz" for a width applied
    directly in the frequency domain (frequency-domain calculations only).
    """

    lorentz_lw: float = 0.4
    ex_fwhm: float = 21.0
    lw_unit: str = "mT"

    def __post_init__(self):
        if self.lorentz_lw < 0 or self.ex_fwhm < 0:
            raise ValueError("broadening widths must be >= 0")
        if self.lw_unit not in ("mT", "MHz"):
            raise ValueError(f"lw_unit must be 'mT' or 'MHz', got {self.lw_unit!r}")

    def frequency_width(self, slope):
        """Lorentzian FWHM in MHz for lines with field slope ``slope`` (MHz/mT)."""
        if self.lw_unit == "MHz":
            return np.full(np.shape(slope), self.lorentz_lw)
        return self.lorentz_lw * np.abs(slope)


NO_BROADENING = BroadeningModel(0.0, 0.0)
FIT_2UM = BroadeningModel(0.4, 21.0)
FIT_100NM = BroadeningModel(0.4, 27.0)
# fitted widths with the Lorentzian taken directly in the frequency domain
FIT_2UM_FREQ = BroadeningModel(0.4, 21.0, "MHz")


@dataclass(frozen=True)
class SpectrumRequest:
    mode: str = "field"
    axis_min: float = 250.0
    axis_max: float = 420.0
    n_points: int = 341
    nu: float = NU_XBAND
    field: float = B_POLARIZATION
    p_nv: float = 0.0
    temperature: float = 293.0
    n_theta: int = 180
    n_phi: int = 8
    n_strain: int = 7
    seed: int = 0
    strain_sampling: str = "quadrature"

    def __post_init__(self):
        if self.mode not in ("field", "frequency"):
            raise ValueError(f"mode must be 'field' or 'frequency', got {self.mode!r}")
        if not self.axis_min < self.axis_max:
            raise ValueError("axis_min must be below axis_max")
        if self.n_points < 2:
            raise ValueError("n_points must be >= 2")
        if min(self.n_theta, self.n_phi, self.n_strain) < 1:
            raise ValueError("grid sizes must be >= 1")
        if not 0.0 <= self.p_nv <= 1.0:
            raise ValueError("p_nv must lie in [0, 1]")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.strain_sampling not in ("quadrature", "monte-carlo"):
            raise ValueError(f"unknown strain sampling {self.strain_sampling!r}")

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(self.axis_min, self.axis_max, self.n_points)


@dataclass
class Spectrum:
    axis: np.ndarray
    intensity: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.axis) != len(self.intensity):
            raise ValueError("axis and intensity lengths differ")

    def to_csv(self, path) -> None:
        write_csv(path, ["axis", "intensity"], np.column_stack([self.axis, self.intensity]))

    def peak_positions(self, n: int = 2) -> np.ndarray:
        """Positions of the ``n`` highest local maxima, sorted along the axis."""
        y = self.intensity
        interior = np.flatnonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])) + 1
        top = interior[np.argsort(-y[interior], kind="stable")[:n]]
        return np.sort(self.axis[top])


def write_csv(path, header, rows, digits: int = 9) -> None:
    """Write rows atomically with ``digits`` significant digits."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v, digits) for v in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v, digits):
    if isinstance(v, str):
        return v
    return f"{float(v):.{digits}g}"


def orientation_grid(n_theta: int, n_phi: int):
    """Midpoint grid over theta in [0, pi/2] and phi in [0, 2pi).

    Returns ``(theta, phi, weight)`` arrays with weights proportional to
    sin(theta) and summing to one. The upper hemisphere suffices because the
    Hamiltonian spectrum is unchanged by theta -> pi - theta.
    """
    if n_theta < 1 or n_phi < 1:
        raise ValueError("grid sizes must be >= 1")
    theta = (np.arange(n_theta) + 0.5) * (np.pi / 2) / n_theta
    phi = np.arange(n_phi) * 2 * np.pi / n_phi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    w = np.sin(tt)
    w = w / w.sum()
    return tt.ravel(), pp.ravel(), w.ravel()


def strain_nodes(ex_fwhm: float, n_strain: int, seed: int = 0, sampling: str = "quadrature"):
    """Nodes and weights for averaging over a Gaussian e_x distribution."""
    if ex_fwhm == 0 or n_strain == 1:
        return np.zeros(1), np.ones(1)
    sigma = ex_fwhm * FWHM_TO_SIGMA
    if sampling == "monte-carlo":
        rng = np.random.default_rng(seed)
        return sigma * rng.standard_normal(n_strain), np.full(n_strain, 1.0 / n_strain)
    x, w = np.polynomial.hermite_e.hermegauss(n_strain)
    return sigma * x, w / w.sum()


@dataclass(frozen=True)
class _Ensemble:
    directions: np.ndarray  # (N, 3) unit vectors of B in the NV frame
    e_x: np.ndarray  # (N,)
    weight: np.ndarray  # (N,)


def _ensemble(br: BroadeningModel, n_theta, n_phi, n_strain, seed=0, sampling="quadrature"):
    theta, phi, w_o = orientation_grid(n_theta, n_phi)
    ex, w_s = strain_nodes(br.ex_fwhm, n_strain, seed, sampling)
    u = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1)
    n_o, n_s = len(theta), len(ex)
    return _Ensemble(
        directions=np.repeat(u, n_s, axis=0),
        e_x=np.tile(ex, n_o),
        weight=(w_o[:, None] * w_s[None, :]).ravel(),
    )


def _energies(sys: NvSystem, ens: _Ensemble, B, idx=None):
    """Ascending energies for ensemble members ``idx``.

    ``B`` is either one field per member (shape ``(R,)``) or a per-member
    grid (shape ``(R, G)``).
    """
    u = ens.directions if idx is None else ens.directions[idx]
    ex = (ens.e_x if idx is None else ens.e_x[idx]) + sys.e_x
    B = np.asarray(B, dtype=float)
    if B.ndim == 2:
        bvec = B[..., None] * u[:, None, :]
        ex = ex[:, None]
    else:
        bvec = B[:, None] * u
    return np.linalg.eigvalsh(hamiltonian_batch(sys.D, sys.gamma_bar, bvec, ex, sys.e_y))


def _transition_strengths(vecs, bhat):
    """Dipole |d_ij|^2 averaged over linear B1 directions normal to the static field.

    ``vecs`` has shape (R, 3, 3) with eigenvectors in columns.
    """
    d = np.einsum("rai,kab,rbj->rkij", vecs.conj(), SPIN_OPS, vecs)
    total = np.sum(np.abs(d) ** 2, axis=1)
    along = np.abs(np.einsum("rk,rkij->rij", bhat, d)) ** 2
    return 0.5 * (total - along)


def _lorentz(x, fwhm):
    hw = fwhm / 2
    return (hw / np.pi) / (x**2 + hw**2)


def _accumulate(axis, centers, amplitudes, fwhm, chunk=4096):
    """Sum of area-normalised Lorentzians (or binned deltas when fwhm == 0)."""
    out = np.zeros_like(axis)
    if len(centers) == 0:
        return out
    fwhm = np.broadcast_to(np.asarray(fwhm, dtype=float), centers.shape)
    step = axis[1] - axis[0]
    sharp = fwhm <= 0
    if np.any(sharp):
        k = np.rint((centers[sharp] - axis[0]) / step).astype(int)
        ok = (k >= 0) & (k < len(axis))
        np.add.at(out, k[ok], amplitudes[sharp][ok] / step)
    wide = np.flatnonzero(~sharp)
    for start in range(0, len(wide), chunk):
        sel = wide[start:start + chunk]
        out += amplitudes[sel] @ _lorentz(axis[None, :] - centers[sel, None], fwhm[sel, None])
    return out


def _population_difference(vals, vecs, pairs_i, pairs_j, p_nv, T):
    thermal = boltzmann(vals, T)
    pumped = np.abs(vecs[:, 1, :]) ** 2
    rho = (1 - p_nv) * thermal + p_nv * pumped
    r = np.arange(len(vals))
    return rho[r, pairs_i] - rho[r, pairs_j]


def _field_roots(sys, ens, nu, lo, hi, n_coarse=96, tol=1e-4):
    """Resonance fields of every transition inside [lo, hi].

    Returns member index, pair index and field of each root, in grid order.
    """
    grid = np.linspace(lo, hi, n_coarse)
    e = _energies(sys, ens, np.broadcast_to(grid, (len(ens.weight), n_coarse)))
    members, pairs, blo, bhi = [], [], [], []
    for p, (i, j) in enumerate(PAIRS):
        f = e[..., j] - e[..., i] - nu
        cross = np.signbit(f[:, :-1]) != np.signbit(f[:, 1:])
        m, k = np.nonzero(cross)
        members.append(m)
        pairs.append(np.full(len(m), p))
        blo.append(grid[k])
        bhi.append(grid[k + 1])
    m = np.concatenate(members)
    p = np.concatenate(pairs)
    a = np.concatenate(blo)
    b = np.concatenate(bhi)
    order = np.lexsort((p, m))
    m, p, a, b = m[order], p[order], a[order], b[order]
    pi = np.array([PAIRS[q][0] for q in p], dtype=int)
    pj = np.array([PAIRS[q][1] for q in p], dtype=int)
    r = np.arange(len(m))

    def g(B):
        ev = _energies(sys, ens, B, m)
        return ev[r, pj] - ev[r, pi] - nu

    fa = g(a)
    while len(m) and np.max(b - a) > tol:
        mid = 0.5 * (a + b)
        fm = g(mid)
        left = np.signbit(fm) == np.signbit(fa)
        a = np.where(left, mid, a)
        fa = np.where(left, fm, fa)
        b = np.where(left, b, mid)
    return m, p, 0.5 * (a + b)


def simulate_spectrum(sys: NvSystem, req: SpectrumRequest, br: BroadeningModel) -> Spectrum:
    """Powder EPR absorption spectrum (arbitrary units).

    Each resonance contributes weight * |d|^2 * (rho_lower - rho_upper) times a
    unit-area Lorentzian in the sweep variable. Populations mix thermal and
    pumped weights linearly in ``req.p_nv``.
    """
    ens = _ensemble(br, req.n_theta, req.n_phi, req.n_strain, req.seed, req.strain_sampling)
    axis = req.axis
    if req.mode == "field":
        if br.lw_unit != "mT":
            raise ValueError("field-swept spectra need a linewidth in mT")
        margin = 10 * br.lorentz_lw
        lo, hi = max(axis[0] - margin, 0.0), axis[-1] + margin
        m, p, B = _field_roots(sys, ens, req.nu, lo, hi)
        bvec = B[:, None] * ens.directions[m]
        vals, vecs = np.linalg.eigh(hamiltonian_batch(sys.D, sys.gamma_bar, bvec, ens.e_x[m] + sys.e_x, sys.e_y))
        bhat = ens.directions[m]
        width = np.full(len(m), br.lorentz_lw)
        centers = B
    else:
        B = req.field
        bvec = B * ens.directions
        vals, vecs = np.linalg.eigh(hamiltonian_batch(sys.D, sys.gamma_bar, bvec, ens.e_x + sys.e_x, sys.e_y))
        slopes = _field_slopes(sys, ens, B)
        n = len(ens.weight)
        m = np.repeat(np.arange(n), len(PAIRS))
        p = np.tile(np.arange(len(PAIRS)), n)
        pi = np.array([PAIRS[q][0] for q in p])
        pj = np.array([PAIRS[q][1] for q in p])
        centers = vals[m, pj] - vals[m, pi]
        width = br.frequency_width(slopes[m, p])
        vals, vecs, bhat = vals[m], vecs[m], ens.directions[m]
    pi = np.array([PAIRS[q][0] for q in p], dtype=int)
    pj = np.array([PAIRS[q][1] for q in p], dtype=int)
    r = np.arange(len(m))
    strength = _transition_strengths(vecs, bhat)[r, pi, pj] if len(m) else np.zeros(0)
    drho = _population_difference(vals, vecs, pi, pj, req.p_nv, req.temperature) if len(m) else np.zeros(0)
    amp = ens.weight[m] * strength * drho
    inside = (centers >= axis[0]) & (centers <= axis[-1])
    intensity = _accumulate(axis, centers, amp, width)
    meta = asdict(req)
    meta.update(broadening=asdict(br), system=asdict(sys),
                n_resonances=int(len(m)), n_in_window=int(inside.sum()),
                n_members=int(len(ens.weight)),
                n_skipped=int(len(ens.weight) * len(PAIRS) - len(m)))
    return Spectrum(axis, intensity, meta)


def _field_slopes(sys, ens, B, h=1e-3):
    """d(nu_ij)/dB for every ensemble member and pair, MHz per mT."""
    up = _energies(sys, ens, np.full(len(ens.weight), B + h))
    dn = _energies(sys, ens, np.full(len(ens.weight), max(B - h, 0.0)))
    span = (B + h) - max(B - h, 0.0)
    out = np.empty((len(ens.weight), len(PAIRS)))
    for q, (i, j) in enumerate(PAIRS):
        out[:, q] = ((up[:, j] - up[:, i]) - (dn[:, j] - dn[:, i])) / span
    return out


def _transition_table(sys, ens, B):
    vals, vecs = np.linalg.eigh(
        hamiltonian_batch(sys.D, sys.gamma_bar, B * ens.directions, ens.e_x + sys.e_x, sys.e_y))
    freqs = np.stack([vals[:, j] - vals[:, i] for i, j in PAIRS], axis=1)
    return vals, vecs, freqs


def frequency_distribution(sys: NvSystem, B: float, br: BroadeningModel,
                           axis_min: float = 0.0, axis_max: float = 12000.0,
                           n_points: int = 1201, n_theta: int = 180, n_phi: int = 8,
                           n_strain: int = 5) -> Spectrum:
    """Distribution of the two main transition frequencies at fixed field.

    Every orientation contributes unit weight to each of its two strongest
    transitions; the weakest (double-quantum-like) one is dropped. Dipole
    strengths and populations are not applied.
    """
    if B < 0:
        raise ValueError("B must be >= 0")
    ens = _ensemble(br, n_theta, n_phi, n_strain)
    vals, vecs, freqs = _transition_table(sys, ens, B)
    d = np.einsum("rai,kab,rbj->rkij", vecs.conj(), SPIN_OPS, vecs)
    total = np.sum(np.abs(d) ** 2, axis=1)
    strength = np.stack([total[:, i, j] for i, j in PAIRS], axis=1)
    weakest = np.argmin(strength, axis=1)
    keep = np.ones_like(freqs, dtype=bool)
    keep[np.arange(len(keep)), weakest] = False
    slopes = _field_slopes(sys, ens, B)
    member = np.repeat(np.arange(len(ens.weight))[:, None], len(PAIRS), axis=1)
    axis = np.linspace(axis_min, axis_max, n_points)
    intensity = _accumulate(axis, freqs[keep], ens.weight[member[keep]],
                            br.frequency_width(slopes[keep]))
    lo = np.where(keep, freqs, np.inf).min(axis=1)
    hi = np.where(keep, freqs, -np.inf).max(axis=1)
    meta = dict(field=B, broadening=asdict(br), system=asdict(sys),
                nu_min=float(lo.min()), nu_max=float(hi.max()))
    return Spectrum(axis, intensity, meta)


def bandwidth_fraction(sys: NvSystem, carrier_nu: float, B: float, delta_pol: float,
                       br: BroadeningModel, n_theta: int = 1500, n_phi: int = 24,
                       n_strain: int = 21) -> dict:
    """Powder fraction whose s1-s2 and s2-s3 lines fall within ``carrier +- delta_pol/2``.

    With Lorentzian broadening each orientation contributes the Lorentzian
    weight enclosed by the window.
    """
    if not delta_pol > 0:
        raise ValueError("delta_pol must be positive")
    if br.ex_fwhm == 0 and sys.e_x == 0 and sys.e_y == 0:
        n_phi = 1  # spectrum is independent of phi without strain
    ens = _ensemble(br, n_theta, n_phi, n_strain)
    _, _, freqs = _transition_table(sys, ens, B)
    lo, hi = carrier_nu - delta_pol / 2, carrier_nu + delta_pol / 2
    out = {}
    names = ("s1s2", "s2s3")
    if br.lorentz_lw > 0:
        slopes = _field_slopes(sys, ens, B) if br.lw_unit == "mT" else np.zeros_like(freqs)
    for q, name in enumerate(names):
        nu = freqs[:, q]
        if br.lorentz_lw > 0:
            hw = br.frequency_width(slopes[:, q]) / 2
            frac = (np.arctan((hi - nu) / hw) - np.arctan((lo - nu) / hw)) / np.pi
        else:
            frac = ((nu >= lo) & (nu <= hi)).astype(float)
        out[name] = float(ens.weight @ frac)
    return out


def perpendicular_carrier(sys: NvSystem, B: float, delta_pol: float) -> float:
    """Carrier whose window ends exactly on the 90 deg s1-s2 line."""
    u1 = (sys.D - np.sqrt(sys.D**2 + (2 * sys.gamma_bar * B) ** 2)) / 2
    return sys.D - u1 - delta_pol / 2


def best_carrier(sys: NvSystem, B: float, delta_pol: float, br: BroadeningModel,
                 span: float = 60.0, n: int = 61, **grid) -> tuple:
    """Carrier below the 90 deg line maximising the s1-s2 fraction.

    Scans ``n`` carriers over ``span`` MHz and returns ``(carrier, fractions)``.
    """
    top = perpendicular_carrier(sys, B, delta_pol) + delta_pol / 2
    carriers = np.linspace(top - span, top + span / 3, n)
    best = None
    for c in carriers:
        f = bandwidth_fraction(sys, c, B, delta_pol, br, **grid)
        if best is None or f["s1s2"] > best[1]["s1s2"]:
            best = (float(c), f)
    return best


@dataclass
class HeatingResult:
    powers: np.ndarray
    D: np.ndarray
    delta_T: np.ndarray
    rate: float  # K / mW
    offset: float  # K

    def delta_t_at(self, power: float) -> float:
        return self.rate * power


def heating_analysis(peak_fields, nu: float = NU_XBAND, gamma_bar: float = None,
                     reference: int = 0) -> HeatingResult:
    """Heating rate from low-field peak positions measured at several laser powers.

    ``peak_fields`` holds ``(power_mW, B_peak_mT)`` pairs. D is recovered per
    point by inverting the perpendicular resonance condition; temperature rises
    are taken relative to point ``reference``.
    """
    from .constants import GAMMA_NV
    gamma_bar = GAMMA_NV if gamma_bar is None else gamma_bar
    pts = np.asarray(peak_fields, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ValueError("need at least two (power, field) points")
    P, B = pts[:, 0], pts[:, 1]
    if np.ptp(P) == 0:
        raise ValueError("degenerate heating fit: all laser powers are identical")
    D = d_from_b12(B, nu, gamma_bar)
    dD_dT = thermal_shift_rate(nu, float(D[reference]), gamma_bar)[0]
    dT = (D - D[reference]) / dD_dT
    rate, offset = np.polyfit(P, dT, 1)
    return HeatingResult(P, D, dT, float(rate), float(offset))


def synthetic_peak_fields(powers, rate: float, D0: float = D_NV, nu: float = NU_XBAND,
                          gamma_bar: float = None):
    """Forward model: low-field peak positions for a linear heating rate (K/mW)."""
    from .constants import DD_DT, GAMMA_NV
    gamma_bar = GAMMA_NV if gamma_bar is None else gamma_bar
    out = []
    for P in powers:
        D = D0 + DD_DT * rate * P
        out.append((P, resonance_fields(nu, D, gamma_bar)[0]))
    return out
