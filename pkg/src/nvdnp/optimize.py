"""Search for phase-alternating composite pi-pulses with wide inversion bands."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .parallel import parallel_map
from .powder import write_csv
from .pulsepol import RECTANGULAR, PulseShape, contiguous_width, inversion_profile

A_MAX = 1.2


@dataclass(frozen=True)
class OptimizerConfig:
    n_sidebands: int = 2
    fidelity_threshold: float = 0.99
    delta_grid: Optional[tuple] = None  # MHz; default 81 points over +-1.5 omega1
    budget: int = 4000
    seed: int = 0
    restarts: int = 16
    threads: Optional[int] = None

    def __post_init__(self):
        if self.n_sidebands < 0:
            raise ValueError("n_sidebands must be >= 0")
        if not 0 < self.fidelity_threshold < 1:
            raise ValueError("fidelity_threshold must lie in (0, 1)")
        if self.budget < 1 or self.restarts < 1:
            raise ValueError("budget and restarts must be >= 1")
        if self.delta_grid is not None:
            g = np.asarray(self.delta_grid, dtype=float)
            if g.size == 0:
                raise ValueError("delta_grid must be nonempty")
            if not np.allclose(np.sort(g), -np.sort(g)[::-1]):
                raise ValueError("delta_grid must be symmetric about 0")

    def grid(self, omega1: float) -> np.ndarray:
        if self.delta_grid is None:
            return np.linspace(-1.5 * omega1, 1.5 * omega1, 81)
        return np.sort(np.asarray(self.delta_grid, dtype=float))


@dataclass
class CandidatePulse:
    a_list: tuple
    bandwidth: float  # MHz
    min_fidelity_in_band: float
    feasible: bool = True
    evaluations: int = 0
    history: list = field(default_factory=list, repr=False)

    @property
    def shape(self) -> PulseShape:
        return PulseShape(self.a_list)

    def to_csv(self, path):
        duration, power = accounting(self.a_list)
        n = len(self.a_list)
        header = [f"a_{n - 1 - i}" for i in range(n)] + ["bandwidth", "duration", "power"]
        write_csv(path, header, [list(self.a_list) + [self.bandwidth, duration, power]])


def accounting(a_list):
    """Total duration and driven time of a pulse, in rectangular pi-pulse units."""
    shape = PulseShape(tuple(a_list))
    return shape.duration(), shape.on_time()


def fidelity(a_list, omega1: float, deltas) -> np.ndarray:
    """Inversion fidelity (1 - <sigma_z>) / 2 per detuning."""
    return (1 - inversion_profile(PulseShape(tuple(a_list)), omega1, deltas)) / 2


def objective(a_list, omega1: float, threshold: float, delta_grid) -> float:
    """Width (MHz) of the band around zero detuning with fidelity >= threshold.

    The band edges are interpolated linearly between grid points, so the
    score varies continuously with the pulse parameters.
    """
    grid = np.sort(np.asarray(delta_grid, dtype=float))
    f = fidelity(a_list, omega1, grid)
    return contiguous_width(grid, f, threshold)


def band_min_fidelity(a_list, omega1, threshold, delta_grid) -> float:
    grid = np.sort(np.asarray(delta_grid, dtype=float))
    f = fidelity(a_list, omega1, grid)
    half = objective(a_list, omega1, threshold, grid) / 2
    inside = np.abs(grid) <= half
    return float(f[inside].min()) if inside.any() else float(f[np.argmin(np.abs(grid))])


def _reflect(x):
    """Fold unbounded coordinates into [0, A_MAX] (triangle wave)."""
    period = 2 * A_MAX
    y = np.mod(x, period)
    return np.where(y > A_MAX, period - y, y)


def _project_net_pi(a):
    """Adjust a_0 so the zero-detuning rotation is exactly pi when possible."""
    a = np.array(a, dtype=float)
    rev = a[::-1]
    others = sum(rev[i] * (-1 if (i // 2) % 2 else 1) for i in range(2, len(rev), 2))
    rev[0] = np.clip(0.5 - others, 0.0, A_MAX)
    return rev[::-1]


def _starts(cfg: OptimizerConfig):
    rng = np.random.default_rng(cfg.seed)
    n = 2 * cfg.n_sidebands + 1
    starts = []
    for k in range(cfg.restarts):
        if k == 0:
            a = np.zeros(n)
            a[-1] = 0.5
        else:
            a = rng.uniform(0.05, 0.8, size=n)
        starts.append(_project_net_pi(a))
    return starts


def _score(a, omega1, cfg, grid):
    """Objective to maximise; pulses failing at zero detuning score below zero."""
    f0 = fidelity(a, omega1, [0.0])[0]
    if f0 < cfg.fidelity_threshold:
        return f0 - cfg.fidelity_threshold
    return objective(a, omega1, cfg.fidelity_threshold, grid)


def _local_search(x0, omega1, cfg, grid, budget):
    evals = [0]
    best = [np.array(x0), _score(x0, omega1, cfg, grid)]

    def cost(x):
        a = _reflect(x)
        s = _score(a, omega1, cfg, grid)
        evals[0] += 1
        if s > best[1]:
            best[0], best[1] = a.copy(), s
        return -s

    start_score = best[1]
    simplex_step = 0.08
    n = len(x0)
    init = np.vstack([x0] + [x0 + simplex_step * np.eye(n)[i] for i in range(n)])
    minimize(cost, x0, method="Nelder-Mead",
             options=dict(maxfev=max(budget, n + 2), initial_simplex=init,
                          xatol=1e-5, fatol=1e-7, adaptive=n > 4))
    assert best[1] >= start_score
    return best[0], best[1], evals[0]


def optimize(cfg: OptimizerConfig, omega1: float = 10.5) -> CandidatePulse:
    """Best composite pulse over seeded Nelder-Mead restarts.

    Parameters are folded into the box [0, A_MAX] by reflection. The winner
    is the highest objective, ties broken by the lexicographically smallest
    ``a_list``, so results do not depend on thread scheduling.
    """
    if not omega1 > 0:
        raise ValueError("omega1 must be positive")
    grid = cfg.grid(omega1)
    starts = _starts(cfg)
    per_run = max(1, cfg.budget // len(starts))

    def run(x0):
        return _local_search(x0, omega1, cfg, grid, per_run)

    results = parallel_map(run, starts, cfg.threads)
    evaluations = sum(r[2] for r in results)
    ranked = sorted(results, key=lambda r: (-round(r[1], 12), tuple(np.round(r[0], 12))))
    a, score, _ = ranked[0]
    history = [float(r[1]) for r in results]
    if score <= 0:
        base = RECTANGULAR.a_list
        return CandidatePulse(base, objective(base, omega1, cfg.fidelity_threshold, grid),
                              band_min_fidelity(base, omega1, cfg.fidelity_threshold, grid),
                              feasible=False, evaluations=evaluations, history=history)
    a_list = tuple(float(x) for x in a)
    return CandidatePulse(a_list, float(score),
                          band_min_fidelity(a_list, omega1, cfg.fidelity_threshold, grid),
                          feasible=True, evaluations=evaluations, history=history)
