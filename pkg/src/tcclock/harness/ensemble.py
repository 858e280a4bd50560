"""Deterministic trajectory ensembles and the horizon policy.

Trajectory i always uses the stream derived from (master seed, i), and results
are returned in index order, so worker count never changes the output.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from tcclock.liouville import SpectralNESS, ness
from tcclock.noise import NoiseModel, SteadyStateCache, run_noisy_trajectory
from tcclock.spin import ClockParams, build_operators
from tcclock.ticks import CountingObservable
from tcclock.trajectory import expected_rates, run_trajectory, trajectory_rng

HORIZON_SAFETY = 1.2
PERIOD_GRID = (0.5, 1.5)

_worker = {}


class Clock:
    """Operators and steady state for one parameter set."""

    def __init__(self, params: ClockParams, state: SpectralNESS | None = None):
        self.params = params
        self.ops = build_operators(params)
        self.state = ness(self.ops) if state is None else state
        self.rate_minus, self.rate_plus = expected_rates(self.ops, self.state)

    def count_rate(self, obs: CountingObservable) -> float:
        return obs.rate(self.rate_minus, self.rate_plus)

    def period(self) -> float:
        """Time-crystal period 2pi/nu; inf at or below the transition."""
        p = self.params
        if p.lam <= 1:
            return math.inf
        return 2 * math.pi / (p.gamma0 * math.sqrt(p.lam**2 - 1))

    def counts_per_period(self, obs: CountingObservable) -> float:
        return self.count_rate(obs) * self.period()

    def m_grid(self, obs: CountingObservable, n: int = 61, span=PERIOD_GRID) -> np.ndarray:
        """Thresholds bracketing one period's worth of counts; log grid [1, 100] below the transition."""
        if self.params.lam <= 1.0:
            return np.unique(np.round(np.geomspace(1, 100, 40)).astype(int))
        c = self.counts_per_period(obs)
        return np.unique(np.maximum(np.round(np.linspace(span[0] * c, span[1] * c, n)), 1).astype(int))

    def horizon(self, obs: CountingObservable, M_max: int, min_ticks: int = 20) -> float:
        """Horizon giving on average ``min_ticks`` stationary waits at threshold ``M_max``."""
        rate = self.count_rate(obs)
        if not rate > 0:
            raise ValueError(f"observable {obs.name} has non-positive mean current {rate:.3g}")
        return HORIZON_SAFETY * (min_ticks + 1) * M_max / rate


def _init_worker(params_dict, rho, populations, vectors, residual, method):
    params = ClockParams.from_dict(params_dict)
    state = SpectralNESS(rho, populations, vectors, residual, method)
    _worker["clock"] = Clock(params, state)
    _worker["cache"] = SteadyStateCache(params)


def _run_one(args):
    index, seed, horizon, noise = args
    clock = _worker["clock"]
    rng = trajectory_rng(seed, index)
    if noise is not None and noise.variance > 0:
        rec = run_noisy_trajectory(clock.params, noise, horizon, rng, _worker["cache"], clock.ops)
    else:
        rec = run_trajectory(clock.ops, clock.state, horizon, rng=rng)
    rec.seed = (seed, index)
    return rec


def run_ensemble(clock: Clock, n: int, horizon: float, seed: int, workers: int = 1,
                 noise: NoiseModel | None = None, start: int = 0) -> list:
    """Trajectories ``start .. start+n-1`` in index order."""
    st = clock.state
    init = (clock.params.to_dict(), st.rho, st.populations, st.vectors, st.residual, st.method)
    jobs = [(i, seed, float(horizon), noise) for i in range(start, start + n)]
    workers = max(1, min(int(workers), n))
    if workers == 1:
        _init_worker(*init)
        return [_run_one(j) for j in jobs]
    chunk = max(1, n // (4 * workers))
    with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=init) as pool:
        return list(pool.map(_run_one, jobs, chunksize=chunk))
