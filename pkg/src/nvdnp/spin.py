"""NV ground-state spin Hamiltonian and its closed-form consequences.

All energies are ordinary frequencies in MHz and fields are in mT. Matrices
are written in the ``{|-1>, |0>, |+1>}`` basis. Eigenstate indices are
0-based, so ``s1, s2, s3`` of the usual notation are indices 0, 1, 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import D_NV, DD_DT, GAMMA_NV, H_OVER_K_MHZ, NU_XBAND

_R2 = 1.0 / np.sqrt(2.0)

SX = _R2 * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)
SY = _R2 * np.array([[0, 1j, 0], [-1j, 0, 1j], [0, -1j, 0]], dtype=complex)
SZ = np.diag([-1.0, 0.0, 1.0]).astype(complex)
SPIN_OPS = np.stack([SX, SY, SZ])
MS_VALUES = (-1, 0, 1)
KET_ZERO = np.array([0.0, 1.0, 0.0], dtype=complex)


@dataclass(frozen=True)
class NvSystem:
    """Static parameters of the NV spin Hamiltonian (MHz, MHz/mT)."""

    D: float = D_NV
    e_x: float = 0.0
    e_y: float = 0.0
    gamma_bar: float = GAMMA_NV

    def __post_init__(self):
        if not self.D > 0:
            raise ValueError(f"zero-field splitting must be positive, got D={self.D}")
        if not self.gamma_bar > 0:
            raise ValueError(f"gamma_bar must be positive, got {self.gamma_bar}")


@dataclass(frozen=True)
class FieldVector:
    """Magnetic field in the NV frame: magnitude (mT), polar and azimuthal angle."""

    B: float
    theta: float = np.pi / 2
    phi: float = 0.0

    def __post_init__(self):
        if self.B < 0:
            raise ValueError(f"field magnitude must be >= 0, got {self.B}")
        if not 0.0 <= self.theta <= np.pi:
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        if not 0.0 <= self.phi < 2 * np.pi:
            raise ValueError(f"phi must lie in [0, 2pi), got {self.phi}")

    @classmethod
    def tilted(cls, B: float, delta: float) -> "FieldVector":
        """Field at ``pi/2 + delta`` from the NV axis, in the xz plane."""
        return cls(B, np.pi / 2 + delta, 0.0)

    def cartesian(self) -> np.ndarray:
        st = np.sin(self.theta)
        return self.B * np.array([st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)])


@dataclass(frozen=True)
class EigenSolution:
    """Ascending energies (MHz) and eigenvectors stored as columns."""

    energies: np.ndarray
    states: np.ndarray

    def state(self, i: int) -> np.ndarray:
        return self.states[:, i]

    def transition(self, i: int, j: int) -> float:
        return float(abs(self.energies[j] - self.energies[i]))


@dataclass(frozen=True)
class MixingCoefficients:
    c: float
    c_prime: float


@dataclass(frozen=True)
class Populations:
    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
            raise ValueError(f"populations outside [0, 1]: {p}")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"populations do not sum to 1: {p.sum()}")

    def delta(self, i: int = 0, j: int = 1) -> float:
        return float(self.p[i] - self.p[j])


def build_hamiltonian(sys: NvSystem, field: FieldVector) -> np.ndarray:
    b = field.cartesian()
    return (
        sys.D * SZ @ SZ
        + sys.gamma_bar * (b[0] * SX + b[1] * SY + b[2] * SZ)
        + sys.e_x * (SY @ SY - SX @ SX)
        + sys.e_y * (SX @ SY + SY @ SX)
    )


def hamiltonian_batch(D, gamma_bar, bvec, e_x=0.0, e_y=0.0) -> np.ndarray:
    """Vectorised Hamiltonians for field vectors ``bvec[..., 3]`` (mT).

    ``e_x`` and ``e_y`` broadcast against the leading shape of ``bvec``.
    """
    bvec = np.asarray(bvec, dtype=float)
    ex = np.asarray(e_x, dtype=float)[..., None, None]
    ey = np.asarray(e_y, dtype=float)[..., None, None]
    zeeman = np.einsum("...k,kij->...ij", gamma_bar * bvec, SPIN_OPS)
    return (
        D * (SZ @ SZ)
        + zeeman
        + ex * (SY @ SY - SX @ SX)
        + ey * (SX @ SY + SY @ SX)
    )


def _fix_phase(vecs: np.ndarray) -> np.ndarray:
    # largest component made real and positive, per column
    idx = np.argmax(np.abs(vecs) > np.abs(vecs).max(axis=-2, keepdims=True) - 1e-9, axis=-2)
    pivot = np.take_along_axis(vecs, idx[..., None, :], axis=-2)
    return vecs * (np.abs(pivot) / pivot)


def diagonalize(H: np.ndarray, tol: float = 1e-12) -> EigenSolution:
    """Hermitian eigendecomposition with deterministic labelling.

    Degenerate levels are resolved towards the ``m_s`` basis states with the
    largest overlap, in the order ``-1, 0, +1``.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    scale = max(1.0, float(np.abs(H).max()))
    if np.abs(H - H.conj().T).max() > tol * scale:
        raise ValueError("matrix is not Hermitian")
    w, v = np.linalg.eigh(H)
    n = len(w)
    degen_tol = 1e-9 * scale
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and w[stop] - w[start] < degen_tol:
            stop += 1
        if stop - start > 1:
            v[:, start:stop] = _resolve_degenerate(v[:, start:stop])
        start = stop
    v = _fix_phase(v)
    return EigenSolution(energies=w, states=v)


def _resolve_degenerate(block: np.ndarray) -> np.ndarray:
    proj = block @ block.conj().T
    basis = []
    for k in np.argsort(-np.real(np.diag(proj)), kind="stable"):
        cand = proj[:, k].copy()
        for b in basis:
            cand -= (b.conj() @ cand) * b
        norm = np.linalg.norm(cand)
        if norm > 1e-8:
            basis.append(cand / norm)
        if len(basis) == block.shape[1]:
            break
    # order the resolved vectors by the m_s index they lean on
    basis.sort(key=lambda b: int(np.argmax(np.abs(b))))
    return np.stack(basis, axis=1)


def perp_energies_analytic(D: float, B: float, gamma_bar: float = GAMMA_NV):
    if B < 0:
        raise ValueError(f"B must be >= 0, got {B}")
    root = np.sqrt(D**2 + (2 * gamma_bar * B) ** 2)
    return (D - root) / 2, float(D), (D + root) / 2


def mixing_coefficients(D: float, B: float, gamma_bar: float = GAMMA_NV) -> MixingCoefficients:
    if not B > 0:
        raise ValueError("mixing coefficients are undefined at B = 0")
    gb = gamma_bar * B
    root = np.hypot(D / 2, gb)
    return MixingCoefficients(c=(D / 2 - root) / gb, c_prime=(D / 2 + root) / gb)


def perp_states_analytic(D: float, B: float, gamma_bar: float = GAMMA_NV) -> np.ndarray:
    """Closed-form eigenvectors at a perpendicular field, as columns."""
    m = mixing_coefficients(D, B, gamma_bar)
    sym = np.array([_R2, 0.0, _R2])
    s1 = (KET_ZERO.real + m.c * sym) / np.sqrt(1 + m.c**2)
    s2 = np.array([-_R2, 0.0, _R2])
    s3 = (KET_ZERO.real + m.c_prime * sym) / np.sqrt(1 + m.c_prime**2)
    return np.stack([s1, s2, s3], axis=1).astype(complex)


def resonance_fields(nu: float, D: float, gamma_bar: float = GAMMA_NV):
    """Perpendicular-orientation resonance fields (B12, B23) in mT at frequency nu."""
    if nu <= D:
        raise ValueError(f"no low-field perpendicular resonance for nu={nu} <= D={D}")
    return np.sqrt(nu * (nu - D)) / gamma_bar, np.sqrt(nu * (nu + D)) / gamma_bar


def db12_dD(nu: float, D: float, gamma_bar: float = GAMMA_NV) -> float:
    """Slope of the low-field perpendicular resonance with D, mT per MHz."""
    if nu <= D:
        raise ValueError(f"derivative undefined for nu={nu} <= D={D}")
    return -nu / (2 * gamma_bar * np.sqrt(nu**2 - D * nu))


def d_from_b12(B12: float, nu: float, gamma_bar: float = GAMMA_NV) -> float:
    """Invert the low-field resonance condition for D."""
    return nu - (gamma_bar * B12) ** 2 / nu


def thermal_shift_rate(nu: float = NU_XBAND, D: float = D_NV, gamma_bar: float = GAMMA_NV):
    """(dD/dT in MHz/K, dB12/dT in mT/K)."""
    return DD_DT, db12_dD(nu, D, gamma_bar) * DD_DT


def temperature_change(delta_b: float, nu: float = NU_XBAND, D: float = D_NV,
                       gamma_bar: float = GAMMA_NV) -> float:
    """Temperature rise (K) implied by a shift ``delta_b`` (mT) of the low-field peak."""
    return delta_b / thermal_shift_rate(nu, D, gamma_bar)[1]


def perturbed_energies(D: float, B: float, gamma_bar: float = GAMMA_NV, delta: float = 0.0):
    """Second-order energies for a field tilted by ``delta`` from perpendicular.

    Only meaningful for small tilts; ``|delta| > 0.2`` rad is rejected.
    """
    if abs(delta) > 0.2:
        raise ValueError(f"tilt {delta} rad is outside the perturbative range |delta| <= 0.2")
    u1, u2, u3 = perp_energies_analytic(D, B, gamma_bar)
    ratio = D / np.sqrt(D**2 + (2 * gamma_bar * B) ** 2)
    d2 = delta**2
    return (
        u1 + D / 2 * (1 - ratio) * d2,
        u2 - D * d2,
        u3 + D / 2 * (1 + ratio) * d2,
    )


def tilt_coefficient(D: float, B: float, gamma_bar: float = GAMMA_NV) -> float:
    """k in ``nu12(delta) = nu12(0) - k delta^2`` (MHz per rad^2)."""
    ratio = D / np.sqrt(D**2 + (2 * gamma_bar * B) ** 2)
    return D + D / 2 * (1 - ratio)


def tilt_acceptance(delta_pol: float, D: float, B: float, gamma_bar: float = GAMMA_NV) -> float:
    """Largest tilt (rad) whose s1-s2 line stays within ``delta_pol`` MHz of the 90 deg line."""
    if not delta_pol > 0:
        raise ValueError("delta_pol must be positive")
    return float(np.sqrt(delta_pol / tilt_coefficient(D, B, gamma_bar)))


def dipole_vector(sol: EigenSolution, i: int, j: int) -> np.ndarray:
    """Components <s_i|S_k|s_j> for k = x, y, z."""
    return np.einsum("a,kab,b->k", sol.state(i).conj(), SPIN_OPS, sol.state(j))


def transition_dipole(sol: EigenSolution, i: int, j: int, b1_direction) -> complex:
    if i == j:
        raise ValueError("transition dipole needs two distinct levels")
    n = np.asarray(b1_direction, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise ValueError(f"B1 direction must be a unit vector, got norm {np.linalg.norm(n)}")
    return complex(n @ dipole_vector(sol, i, j))


def rabi_ratio(c: float, phi):
    """Rabi frequency of s1-s2 at 90 deg, relative to the high-field limit.

    ``phi`` is the angle of the linearly polarised B1 in the plane normal to B,
    measured from the NV axis.
    """
    return np.sqrt(2 * (c**2 * np.cos(phi) ** 2 + np.sin(phi) ** 2) / (1 + c**2))


def boltzmann(energies, T: float) -> np.ndarray:
    if not T > 0:
        raise ValueError(f"temperature must be positive, got {T}")
    e = np.asarray(energies, dtype=float)
    x = -H_OVER_K_MHZ * (e - e.min(axis=-1, keepdims=True)) / T
    w = np.exp(x)
    return w / w.sum(axis=-1, keepdims=True)


def thermal_populations(sol: EigenSolution, T: float) -> Populations:
    return Populations(boltzmann(sol.energies, T))


def pumped_populations(p_nv: float, sol: EigenSolution, T: float) -> Populations:
    if not 0.0 <= p_nv <= 1.0:
        raise ValueError(f"p_nv must lie in [0, 1], got {p_nv}")
    zero_weight = np.abs(sol.states[1, :]) ** 2
    p = (1 - p_nv) * boltzmann(sol.energies, T) + p_nv * zero_weight
    return Populations(p)


def delta_rho_from_enhancement(eps_nv: float, sol: EigenSolution, T: float,
                               i: int = 0, j: int = 1) -> float:
    """Absolute population difference implied by an EPR signal enhancement."""
    if not eps_nv > 0:
        raise ValueError("enhancement must be positive")
    return eps_nv * thermal_populations(sol, T).delta(i, j)
