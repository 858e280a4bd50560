"""Classical amplitude noise on the drive and the noisy-Rabi benchmark clock."""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass

import numpy as np

from tcclock._io import write_csv
from tcclock.liouville import SpectralNESS, ness
from tcclock.spin import ClockParams, build_operators
from tcclock.ticks import PRESETS, CountingEnsemble, merit, optimal_threshold, sweep_thresholds
from tcclock.trajectory import TrajectoryRecord, run_trajectory

log = logging.getLogger(__name__)

LAMBDA_QUANTUM = 1e-3


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian drive amplitude, resampled every ``dt`` and truncated at zero."""

    mean: float
    variance: float
    dt: float | None = None

    def __post_init__(self):
        if not self.variance >= 0:
            raise ValueError("noise variance must be >= 0")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("noise resample interval must be > 0")
        if self.mean < 0:
            raise ValueError("mean drive amplitude must be >= 0")

    @classmethod
    def relative(cls, mean: float, sigma_rel: float, dt: float | None = None) -> "NoiseModel":
        return cls(mean, (sigma_rel * mean) ** 2, dt)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)

    @property
    def sigma_rel(self) -> float:
        return self.sigma / self.mean if self.mean else math.inf

    def interval(self, params: ClockParams) -> float:
        """Resample interval; defaults to an order below the fastest jump scale."""
        if self.dt is not None:
            return self.dt
        lam = max(self.mean, 1.0)
        return 1.0 / (10.0 * params.gamma0 * lam**2 * params.S)

    def sample(self, rng: np.random.Generator, size=None):
        """Draws truncated at zero; returns ``(values, n_truncated)``."""
        x = self.mean + self.sigma * rng.standard_normal(size)
        neg = x < 0
        return np.where(neg, 0.0, x), int(np.count_nonzero(neg))


class SteadyStateCache:
    """pi_lambda on a quantized lambda grid; read-mostly, one writer per key."""

    def __init__(self, params: ClockParams, quantum: float = LAMBDA_QUANTUM):
        self.params = params
        self.quantum = quantum
        self._store: dict[int, SpectralNESS] = {}
        self._lock = threading.Lock()

    def key(self, lam: float) -> int:
        return int(round(lam / self.quantum))

    def __len__(self):
        return len(self._store)

    def get(self, lam: float) -> SpectralNESS:
        k = self.key(lam)
        hit = self._store.get(k)
        if hit is not None:
            return hit
        with self._lock:
            if k not in self._store:
                ops = build_operators(self.params.replace(lam=k * self.quantum))
                self._store[k] = ness(ops)
            return self._store[k]


def noise_schedule(noise: NoiseModel, params: ClockParams, horizon: float, rng: np.random.Generator,
                   first: float | None = None):
    """Piecewise-constant displacement schedule ``(alphas, seg_dt, n_truncated)``."""
    dt = noise.interval(params)
    n = int(math.ceil(horizon / dt)) + 1
    lam, trunc = noise.sample(rng, n)
    if first is not None:
        lam[0] = first
    return lam * params.S, dt, trunc


def run_noisy_trajectory(params: ClockParams, noise: NoiseModel, horizon: float, rng: np.random.Generator,
                         cache: SteadyStateCache | None = None, ops=None) -> TrajectoryRecord:
    """One trajectory with a noisy drive.

    lambda_0 is drawn once to sample the initial state from pi_lambda_0, then the
    amplitude is redrawn every resample interval.  Noise draws use a child stream
    of ``rng``; with zero variance nothing is drawn and the run equals the
    noiseless engine event for event.
    """
    params = params.replace(lam=noise.mean)
    ops = build_operators(params) if ops is None else ops
    cache = SteadyStateCache(params) if cache is None else cache
    if noise.variance == 0:
        return run_trajectory(ops, cache.get(noise.mean), horizon, rng=rng)
    noise_rng = rng.spawn(1)[0]
    lam0, t0 = noise.sample(noise_rng)
    alphas, dt, trunc = noise_schedule(noise, params, horizon, noise_rng, first=float(lam0))
    if trunc + t0:
        log.info("noise: %d of %d amplitude draws truncated at 0", trunc + t0, len(alphas) + 1)
    rec = run_trajectory(ops, cache.get(float(lam0)), horizon, rng=rng, alphas=alphas, seg_dt=dt)
    rec.params = dict(rec.params, noise_variance=noise.variance, noise_dt=dt, lambda0=float(lam0))
    return rec


@dataclass(frozen=True)
class RabiBenchmark:
    R: float
    A: float

    @property
    def F(self) -> float:
        if math.isinf(self.A):
            return 0.0
        return 1.0 / (self.R * self.A)


def rabi_benchmark(noise: NoiseModel, gamma0: float) -> RabiBenchmark:
    """Merits of the noisy drive itself: R = gamma0 <lambda>/2pi, A = <lambda>^2/Var."""
    R = gamma0 * noise.mean / (2 * math.pi)
    A = math.inf if noise.variance == 0 else noise.mean**2 / noise.variance
    return RabiBenchmark(R, A)


@dataclass
class CrossoverRow:
    sigma_rel: float
    F: dict
    dF: dict
    R: dict
    M_star: dict
    F_rabi: float


@dataclass
class CrossoverResult:
    rows: list
    observables: tuple
    crossover: dict     # sigma_rel where F_clock first drops below F_R; None if open-ended

    def write(self, path):
        header = ["sigma_rel"] + [f"F_{o}" for o in self.observables] + ["F_rabi"] + [f"dF_{o}" for o in self.observables]
        body = ([r.sigma_rel] + [r.F[o] for o in self.observables] + [r.F_rabi] + [r.dF[o] for o in self.observables]
                for r in self.rows)
        return write_csv(path, header, body)


def crossover_point(sigmas, F_clock, F_rabi):
    """sigma/lambda where F_clock first drops below F_R.

    Interpolates ln(F_clock/F_R) linearly between the bracketing grid points;
    returns the first grid value if the clock already wins there, and None
    (open-ended) if it never does on the grid.
    """
    prev = None
    for s, fc, fr in zip(sigmas, F_clock, F_rabi):
        g = math.log(fc / fr) if fr > 0 and fc > 0 else math.inf
        if g < 0:
            if prev is None:
                return float(s)
            s0, g0 = prev
            return float(s0 + (s - s0) * g0 / (g0 - g))
        prev = (float(s), g)
    return None


def crossover_scan(params: ClockParams, sigma_grid, n_traj: int, horizon: float, m_grid,
                   observables=("emissions", "activity", "heat"), seed: int = 0, dt: float | None = None,
                   fixed_M: dict | None = None, run=None) -> CrossoverResult:
    """Clock Fano factor per observable against F_R over a grid of sigma/lambda.

    M* is picked on each noisy curve unless ``fixed_M`` pins it per observable;
    ``m_grid`` is one grid for all observables or a mapping name -> grid.
    ``run(noise, index)`` may replace the serial trajectory loop (e.g. a pool).
    """
    sigma_grid = np.asarray(sigma_grid, float)
    if np.any(np.diff(sigma_grid) < 0):
        raise ValueError("sigma grid must be sorted ascending")
    from tcclock.trajectory import trajectory_rng

    base = params
    cache = SteadyStateCache(base)
    ops = build_operators(base)
    rows = []
    for s in sigma_grid:
        noise = NoiseModel.relative(base.lam, float(s), dt)
        if run is None:
            recs = [run_noisy_trajectory(base, noise, horizon, trajectory_rng(seed, i), cache, ops) for i in range(n_traj)]
        else:
            recs = run(noise)
        F, dF, R, Ms = {}, {}, {}, {}
        for name in observables:
            obs = PRESETS[name]
            ens = CountingEnsemble(recs, obs)
            if fixed_M and name in fixed_M:
                M = int(fixed_M[name])
                m = merit(None, groups=ens.waits(M))
            else:
                grid = m_grid[name] if isinstance(m_grid, dict) else m_grid
                curve = sweep_thresholds(recs, obs, grid, ensemble=ens)
                M = optimal_threshold(curve).M
                m = curve.at(M)
            F[name], dF[name], R[name], Ms[name] = m.F, m.dF, m.R, M
        rows.append(CrossoverRow(float(s), F, dF, R, Ms, rabi_benchmark(noise, base.gamma0).F))
    cross = {o: crossover_point(sigma_grid, [r.F[o] for r in rows], [r.F_rabi for r in rows]) for o in observables}
    return CrossoverResult(rows, tuple(observables), cross)
