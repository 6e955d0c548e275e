"""Buildup/decay fits, enhancement bookkeeping and order-of-magnitude estimators."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

from .constants import BOLTZMANN, DIAMOND_ATOM_DENSITY, GAMMA_13C, GAMMA_1H, PLANCK
from .powder import write_csv

BETA_MAX = 2.0
BETA_MIN = 1e-3
BETA_STARTS = (0.5, 0.7, 1.0)


@dataclass
class TimeSeries:
    t: np.ndarray
    y: np.ndarray
    sigma: Optional[np.ndarray] = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.sigma is not None:
            self.sigma = np.asarray(self.sigma, dtype=float)
            if self.sigma.shape != self.t.shape or np.any(self.sigma <= 0):
                raise ValueError("sigma must match t and be positive")
        if self.t.ndim != 1 or self.t.shape != self.y.shape:
            raise ValueError("t and y must be 1-d arrays of equal length")
        if len(self.t) < 3:
            raise ValueError("need at least 3 points")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("t must be strictly increasing")
        if not (np.all(np.isfinite(self.t)) and np.all(np.isfinite(self.y))):
            raise ValueError("series contains non-finite values")

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
        head = [h.strip() for h in rows[0]]
        if head[:2] != ["t", "y"] or len(head) > 3 or (len(head) == 3 and head[2] != "sigma"):
            raise ValueError(f"expected header t,y[,sigma], got {','.join(head)}")
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        return cls(data[:, 0], data[:, 1], data[:, 2] if len(head) == 3 else None)

    def to_csv(self, path):
        cols = [self.t, self.y] + ([self.sigma] if self.sigma is not None else [])
        write_csv(path, ["t", "y", "sigma"][:len(cols)], np.column_stack(cols))


@dataclass
class FitResult:
    params: dict
    std_errors: dict
    residual_norm: float
    converged: bool
    model: str = ""
    message: str = ""

    def __getitem__(self, key):
        return self.params[key]

    def report(self) -> str:
        lines = [f"model: {self.model}", f"converged: {self.converged}"]
        for k, v in self.params.items():
            lines.append(f"{k} = {v:.6g} +- {self.std_errors.get(k, float('nan')):.3g}")
        lines.append(f"residual_norm = {self.residual_norm:.6g}")
        if self.message:
            lines.append(f"note: {self.message}")
        return "\n".join(lines)

    def to_csv(self, path):
        rows = [[k, v, self.std_errors.get(k, float("nan"))] for k, v in self.params.items()]
        write_csv(path, ["param", "value", "std_error"], rows)


# -- stretched exponentials ----------------------------------------------------

def _stretch(t, T, beta):
    """x = (t/T)^beta and e = exp(-x), with 0^beta = 0."""
    r = np.clip(t / T, 0.0, None)
    with np.errstate(divide="ignore"):
        x = np.where(r > 0, r ** beta, 0.0)
        logr = np.where(r > 0, np.log(np.where(r > 0, r, 1.0)), 0.0)
    return x, np.exp(-x), logr


def stretched_saturation(t, A, T, beta):
    return A * (1 - _stretch(np.asarray(t, float), T, beta)[1])


def stretched_decay(t, A, T, beta):
    return A * _stretch(np.asarray(t, float), T, beta)[1]


def rotation_response(w, s0, a, w0, beta):
    return s0 + a * (1 - _stretch(np.asarray(w, float), w0, beta)[1])


def _jac_core(t, T, beta):
    """Derivatives of e = exp(-(t/T)^beta) with respect to T and beta."""
    x, e, logr = _stretch(t, T, beta)
    de_dT = e * x * beta / T
    de_dbeta = -e * x * logr
    return e, de_dT, de_dbeta


def _half_time(t, y, frac):
    """First t where |y - y[0]| reaches ``frac`` of its range, a start value for T."""
    span = y - y[0]
    target = frac * span[np.argmax(np.abs(span))]
    idx = np.flatnonzero(np.abs(span) >= abs(target))
    return float(t[idx[0]]) if len(idx) and t[idx[0]] > 0 else float(np.median(t[t > 0]))


def _run_fit(fun, jac, starts, lower, upper, n_data):
    best = None
    for x0 in starts:
        x0 = np.clip(x0, lower + 1e-9, upper - 1e-9)
        try:
            res = least_squares(fun, x0, jac=jac, bounds=(lower, upper), method="trf",
                                x_scale="jac", max_nfev=2000, xtol=1e-12, ftol=1e-12, gtol=1e-12)
        except (ValueError, FloatingPointError, np.linalg.LinAlgError):
            continue
        if best is None or res.cost < best.cost - 1e-15 * max(1.0, best.cost):
            best = res
    if best is None:
        raise RuntimeError("all fit starts failed")
    J = best.jac
    dof = max(n_data - len(best.x), 1)
    s2 = 2 * best.cost / dof
    try:
        cov = np.linalg.inv(J.T @ J) * s2
        err = np.sqrt(np.clip(np.diag(cov), 0, None))
    except np.linalg.LinAlgError:
        err = np.full(len(best.x), np.inf)
    return best, err


def fit_stretched_exp(series: TimeSeries, mode: str = "saturation") -> FitResult:
    """Fit A(1 - exp(-(t/T)^b)) (saturation) or A exp(-(t/T)^b) (decay).

    Data are rescaled by their largest magnitude before fitting, so scaling
    y rescales A and leaves T and b unchanged.
    """
    if mode not in ("saturation", "decay"):
        raise ValueError("mode must be 'saturation' or 'decay'")
    if len(series.t) < 4:
        raise ValueError("need at least 4 points")
    t = series.t
    scale = float(np.max(np.abs(series.y))) or 1.0
    y = series.y / scale
    w = 1.0 / (series.sigma / scale) if series.sigma is not None else np.ones_like(t)

    def model(p):
        e, de_dT, de_db = _jac_core(t, p[1], p[2])
        if mode == "saturation":
            return p[0] * (1 - e), np.column_stack([1 - e, -p[0] * de_dT, -p[0] * de_db])
        return p[0] * e, np.column_stack([e, p[0] * de_dT, p[0] * de_db])

    def fun(p):
        return w * (model(p)[0] - y)

    def jac(p):
        return w[:, None] * model(p)[1]

    A0 = y[np.argmax(np.abs(y))]
    T0 = max(_half_time(t, y, 1 - 1 / math.e), 1e-12)
    lower = np.array([-np.inf, 1e-12 * max(t[-1], 1.0), BETA_MIN])
    upper = np.array([np.inf, np.inf, BETA_MAX])
    starts = [np.array([A0, T0, b]) for b in BETA_STARTS]
    res, err = _run_fit(fun, jac, starts, lower, upper, len(t))
    A, T, beta = res.x
    ok = bool(res.success and np.all(np.isfinite(res.x)) and np.all(np.isfinite(err)))
    msg = "" if ok else f"fit did not converge cleanly: {res.message}"
    return FitResult({"A": A * scale, "T": T, "beta": beta},
                     {"A": err[0] * scale, "T": err[1], "beta": err[2]},
                     float(np.linalg.norm(res.fun) * scale), ok, f"stretched-{mode}", msg)


def fit_rotation_response(series: TimeSeries) -> FitResult:
    """Fit s0 + a (1 - exp(-(w/w0)^b)) to signal versus rotation speed."""
    w_ax = series.t
    if len(w_ax) < 5:
        raise ValueError("need at least 5 points")
    if not np.any(w_ax == 0):
        raise ValueError("series must include the zero rotation speed")
    scale = float(np.max(np.abs(series.y))) or 1.0
    y = series.y / scale
    wt = 1.0 / (series.sigma / scale) if series.sigma is not None else np.ones_like(y)

    def fun(p):
        e = _stretch(w_ax, p[2], p[3])[1]
        return wt * (p[0] + p[1] * (1 - e) - y)

    def jac(p):
        e, de_dw0, de_db = _jac_core(w_ax, p[2], p[3])
        J = np.column_stack([np.ones_like(e), 1 - e, -p[1] * de_dw0, -p[1] * de_db])
        return wt[:, None] * J

    s0 = y[w_ax == 0][0]
    a0 = y[np.argmax(np.abs(y - s0))] - s0
    w0 = _half_time(w_ax, y, 1 - 1 / math.e)
    lower = np.array([-np.inf, -np.inf, 1e-12 * max(w_ax[-1], 1.0), BETA_MIN])
    upper = np.array([np.inf, np.inf, np.inf, BETA_MAX])
    starts = [np.array([s0, a0, max(w0, 1e-9), b]) for b in BETA_STARTS]
    res, err = _run_fit(fun, jac, starts, lower, upper, len(y))
    s0f, af, w0f, bf = res.x
    ok = bool(res.success and np.all(np.isfinite(res.x)) and np.all(np.isfinite(err)))
    msg = "" if ok else f"fit did not converge cleanly: {res.message}"
    # compare against a constant: a response no better than the mean leaves w0 undetermined
    rss = float(res.fun @ res.fun)
    resid0 = wt * (y - np.average(y, weights=wt**2))
    rss0 = float(resid0 @ resid0)
    dof = max(len(y) - 4, 1)
    f_stat = ((rss0 - rss) / 3) / (rss / dof) if rss > 0 else np.inf
    if abs(af) < 1e-9 or f_stat < 10 or not err[2] < abs(w0f):
        ok = False
        msg = "response amplitude indistinguishable from zero; w0 and beta are unidentifiable"
    return FitResult({"s0": s0f * scale, "a": af * scale, "w0": w0f, "beta": bf},
                     {"s0": err[0] * scale, "a": err[1] * scale, "w0": err[2], "beta": err[3]},
                     float(np.linalg.norm(res.fun) * scale), ok, "rotation-response", msg)


# -- enhancement bookkeeping -----------------------------------------------------

@dataclass(frozen=True)
class SampleSpec:
    mass: float  # mg
    isotope_abundance: float  # fraction
    molar_mass: float  # g / mol
    gamma: float  # MHz / T
    atoms_per_molecule: int = 1

    def __post_init__(self):
        for name in ("mass", "isotope_abundance", "molar_mass", "gamma", "atoms_per_molecule"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def spins(self) -> float:
        """Observed nuclei, in millimoles."""
        return self.mass / self.molar_mass * self.isotope_abundance * self.atoms_per_molecule


DIAMOND_2UM = SampleSpec(12.0, 0.0107, 12.011, GAMMA_13C)
DIAMOND_100NM = SampleSpec(6.0, 0.0107, 12.011, GAMMA_13C)
WATER_REFERENCE = SampleSpec(40.0, 0.9998, 18.015, GAMMA_1H, 2)


def gamma_ref(diamond: SampleSpec, reference: SampleSpec) -> float:
    """Ratio of thermal signals at equal field and temperature (signal ~ gamma^2 N)."""
    return (diamond.gamma * diamond.spins) / (reference.gamma * reference.spins)


def thermal_polarization(B: float, T: float, gamma: float = GAMMA_13C) -> float:
    """High-temperature nuclear spin-1/2 polarization h gamma B / (2 k T); B in tesla."""
    if B < 0 or not T > 0 or not gamma > 0:
        raise ValueError("need B >= 0, T > 0, gamma > 0")
    return PLANCK * gamma * 1e6 * B / (2 * BOLTZMANN * T)


def absolute_polarization(s_hp: float, s_ref: float, g_ref: float, p_thermal_detection: float) -> float:
    if not s_ref > 0:
        raise ValueError("reference signal must be positive")
    return p_thermal_detection * s_hp / (g_ref * s_ref)


def enhancement(p_abs: float, p_thermal: float) -> float:
    if not p_thermal > 0:
        raise ValueError("thermal polarization must be positive")
    return p_abs / p_thermal


def enhancement_ratio_model(drho1: float, conc1: float, drho2: float, conc2: float) -> float:
    """Expected enhancement ratio for enhancement ~ NV population difference x concentration."""
    if min(drho1, conc1, drho2, conc2) <= 0:
        raise ValueError("inputs must be positive")
    return (drho1 * conc1) / (drho2 * conc2)


# -- estimators --------------------------------------------------------------------

def diffusion_length(d_spin: float, t: float) -> float:
    """sqrt(D t) in nm for D in cm^2/s and t in s."""
    if d_spin < 0 or t < 0:
        raise ValueError("inputs must be >= 0")
    return math.sqrt(d_spin * t) * 1e7


def nn_distance(conc_ppm: float, lattice_density: float = DIAMOND_ATOM_DENSITY) -> float:
    """Typical nearest-neighbour distance 0.55 n^(-1/3) in nm."""
    if not conc_ppm > 0 or not lattice_density > 0:
        raise ValueError("inputs must be positive")
    n = conc_ppm * 1e-6 * lattice_density  # cm^-3
    return 0.55 * n ** (-1 / 3) * 1e7


@dataclass(frozen=True)
class Tumbling:
    d_r: float  # 1/s
    residence: float  # ms
    cycles: int


def tumbling(r: float, eta: float, T: float, angle_window: float, cycle_time: float) -> Tumbling:
    """Rotational diffusion of a sphere and the time to wander ``angle_window`` (rad).

    r in nm, eta in Pa s, T in K, cycle_time in ms.
    """
    if min(r, eta, T, angle_window, cycle_time) <= 0:
        raise ValueError("inputs must be positive")
    d_r = BOLTZMANN * T / (8 * math.pi * eta * (r * 1e-9) ** 3)
    residence = angle_window**2 / (2 * d_r) * 1e3
    return Tumbling(d_r, residence, int(math.floor(residence / cycle_time)))


@dataclass(frozen=True)
class ProtocolTiming:
    t_laser: float = 400.0  # us
    tau_srt: float = 1500.0  # us
    M: int = 68
    laser_power: float = 1600.0  # mW, peak

    def __post_init__(self):
        if self.t_laser < 0 or not self.tau_srt > 0:
            raise ValueError("need t_laser >= 0 and tau_srt > 0")
        if self.t_laser > self.tau_srt:
            raise ValueError("laser pulse longer than the repetition period")
        if self.M < 1:
            raise ValueError("M must be >= 1")


def protocol_power(pt: ProtocolTiming, peak_power: Optional[float] = None) -> float:
    """Average laser power (mW) over one repetition period."""
    p = pt.laser_power if peak_power is None else peak_power
    return p * pt.t_laser / pt.tau_srt
