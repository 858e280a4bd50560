"""Clock ticks as first-passage times of counting observables, and their figures of merit.

A tick fires the first time N(t) = a_- N_-(t) + a_+ N_+(t) reaches i*M.
Waiting times are pooled over trajectories after dropping each trajectory's
first interval [0, T_1], whose statistics differ from the stationary ones.
Standard errors are leave-one-trajectory-out jackknife estimates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.ndimage import median_filter
from scipy.signal import find_peaks

from tcclock._io import write_csv
from tcclock.trajectory import EMISSION

log = logging.getLogger(__name__)


class InsufficientStatistics(ValueError):
    """Raised when a figure of merit cannot be formed from the available ticks."""


@dataclass(frozen=True)
class CountingObservable:
    a_minus: int
    a_plus: int
    name: str = ""

    def __post_init__(self):
        if self.a_minus == 0 and self.a_plus == 0:
            raise ValueError("counting observable needs a nonzero weight")

    @property
    def unit_steps(self) -> bool:
        """True when every increment is -1, 0 or +1 so no level can be skipped."""
        return abs(self.a_minus) <= 1 and abs(self.a_plus) <= 1

    def weights(self, kinds: np.ndarray) -> np.ndarray:
        return np.where(kinds == EMISSION, self.a_minus, self.a_plus).astype(np.int64)

    def rate(self, rate_minus: float, rate_plus: float) -> float:
        """Mean drift of N given the detection rates."""
        return self.a_minus * rate_minus + self.a_plus * rate_plus


EMISSIONS = CountingObservable(1, 0, "emissions")
ACTIVITY = CountingObservable(1, 1, "activity")
HEAT = CountingObservable(1, -1, "heat")
PRESETS = {o.name: o for o in (EMISSIONS, ACTIVITY, HEAT)}


def observable(name: str) -> CountingObservable:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown observable {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass(frozen=True)
class StepPath:
    """Right-continuous integer path: N(t) = values[i] for times[i] <= t < times[i+1]."""

    times: np.ndarray
    values: np.ndarray
    horizon: float

    def __call__(self, t):
        idx = np.searchsorted(self.times, t, side="right") - 1
        vals = np.where(idx >= 0, self.values[np.maximum(idx, 0)], 0)
        return vals if np.ndim(t) else int(vals)

    @property
    def final(self) -> int:
        return int(self.values[-1]) if len(self.values) else 0

    @property
    def running_max(self) -> np.ndarray:
        return np.maximum.accumulate(self.values) if len(self.values) else self.values


def _events(record_or_events):
    if hasattr(record_or_events, "kinds"):
        return record_or_events.times, record_or_events.kinds, record_or_events.horizon
    times, kinds, horizon = record_or_events
    return np.asarray(times, float), np.asarray(kinds), float(horizon)


def accumulate(record, obs: CountingObservable) -> StepPath:
    """Counting path of ``obs`` along a record (or a ``(times, kinds, horizon)`` tuple)."""
    times, kinds, horizon = _events(record)
    values = np.cumsum(obs.weights(kinds))
    return StepPath(np.asarray(times, float), values, horizon)


@dataclass
class TickSeries:
    """Ticks of one trajectory: ``times[i]`` is the first time N reaches (i+1)*M."""

    threshold: int
    times: np.ndarray
    event_index: np.ndarray
    horizon: float
    ledgers: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    @property
    def empty(self) -> bool:
        return len(self.times) == 0

    @property
    def waits(self) -> np.ndarray:
        """Waiting times T_{i+1} - T_i; the interval [0, T_1] is excluded."""
        return np.diff(self.times)


def extract_ticks(path: StepPath, M: int, horizon: float | None = None) -> TickSeries:
    """First-passage ticks of ``path`` at levels M, 2M, ... up to ``horizon``.

    Uses the running maximum, so for unit-step observables the tick is the exact
    level hit; for larger weights it is the first time N >= i*M.
    """
    M = int(M)
    if M < 1:
        raise ValueError("threshold M must be >= 1")
    horizon = path.horizon if horizon is None else float(horizon)
    if len(path.values) == 0:
        return TickSeries(M, np.empty(0), np.empty(0, np.int64), horizon)
    rmax = path.running_max
    n_ticks = int(max(rmax[-1], 0) // M)
    levels = M * np.arange(1, n_ticks + 1)
    idx = np.searchsorted(rmax, levels, side="left")
    times = path.times[idx]
    keep = times <= horizon
    return TickSeries(M, times[keep], idx[keep].astype(np.int64), horizon)


@dataclass(frozen=True)
class MeritSummary:
    """Resolution R = 1/<T>, accuracy A = <T>^2/Var[T], Fano F = 1/(R A) = Var[T]/<T>."""

    R: float
    A: float
    F: float
    mean: float
    var: float
    n: int
    n_groups: int
    dR: float
    dA: float
    dF: float

    def row(self):
        return [self.R, self.A, self.F, self.dR, self.dA, self.dF]


def group_sums(groups: Sequence[np.ndarray]) -> np.ndarray:
    """Rows (count, sum, sum of squares) per group; shifted by a common origin later."""
    return np.array([[len(g), float(np.sum(g)), float(np.sum(np.square(g)))] for g in groups], dtype=float)


def _jackknife_se(values: np.ndarray) -> float:
    g = len(values)
    finite = values[np.isfinite(values)]
    if g < 2 or len(finite) < g:
        return math.nan if len(finite) < g else 0.0
    return float(np.sqrt((g - 1) / g * np.sum((values - values.mean()) ** 2)))


def merit(waits, groups: Sequence[np.ndarray] | None = None) -> MeritSummary:
    """Figures of merit of a waiting-time sample.

    ``waits`` is a flat sample, or pass ``groups`` (one array per trajectory) to
    pool them and get leave-one-trajectory-out jackknife errors.  With a flat
    sample each wait is its own jackknife group.
    """
    if groups is None:
        flat = np.asarray(waits, dtype=float)
        groups_ = None
    else:
        groups_ = [np.asarray(g, dtype=float) for g in groups if len(g)]
        flat = np.concatenate(groups_) if groups_ else np.empty(0)
    n = len(flat)
    if n < 2:
        raise InsufficientStatistics(f"need at least 2 waiting times, got {n}")
    mean = float(np.mean(flat))
    var = float(np.mean((flat - mean) ** 2))
    R = 1.0 / mean
    A = mean * mean / var if var > 0 else math.inf
    F = var / mean
    # jackknife on sums of the shifted sample keeps the variances well conditioned
    if groups_ is None or len(groups_) < 2:
        x = flat - mean
        sums = np.stack([np.ones(n), x, x * x], axis=1)
    else:
        sums = group_sums([g - mean for g in groups_])
    loo = sums.sum(axis=0)[None, :] - sums
    loo = loo[loo[:, 0] >= 2]
    c = loo[:, 1] / loo[:, 0]
    v = loo[:, 2] / loo[:, 0] - c * c
    m = c + mean
    with np.errstate(divide="ignore"):
        a = np.where(v > 0, m * m / np.where(v > 0, v, 1.0), np.inf)
    return MeritSummary(
        R=R, A=A, F=F, mean=mean, var=var, n=n, n_groups=len(sums),
        dR=_jackknife_se(1.0 / m), dA=_jackknife_se(a) if math.isfinite(A) else math.nan, dF=_jackknife_se(v / m),
    )


class CountingEnsemble:
    """Counting paths of many records for one observable, reused across thresholds."""

    def __init__(self, records, obs: CountingObservable):
        self.obs = obs
        self.records = list(records)
        self.paths = [accumulate(r, obs) for r in self.records]

    def ticks(self, M: int) -> list[TickSeries]:
        return [extract_ticks(p, M) for p in self.paths]

    def waits(self, M: int) -> list[np.ndarray]:
        return [t.waits for t in self.ticks(M)]

    def min_ticks(self, M: int) -> int:
        return min((len(t) for t in self.ticks(M)), default=0)


@dataclass
class TradeoffCurve:
    observable: str
    M: np.ndarray
    merits: list
    empty: list = field(default_factory=list)
    monotone_R: bool = True

    @property
    def R(self):
        return np.array([m.R for m in self.merits])

    @property
    def A(self):
        return np.array([m.A for m in self.merits])

    @property
    def F(self):
        return np.array([m.F for m in self.merits])

    @property
    def dA(self):
        return np.array([m.dA for m in self.merits])

    def rows(self):
        for M, m in zip(self.M, self.merits):
            yield [int(M), *m.row()]

    def write(self, path):
        return write_csv(path, ["M", "R", "A", "F", "dR", "dA", "dF"], self.rows())

    def at(self, M: int) -> MeritSummary:
        i = int(np.flatnonzero(self.M == M)[0])
        return self.merits[i]


def default_m_grid(S: float, lam: float, n: int = 40) -> np.ndarray:
    """40 log-spaced thresholds: [S/2, 40 S] above criticality, [1, 100] below."""
    lo, hi = (max(1.0, S / 2), 40 * S) if lam > 1 else (1.0, 100.0)
    return np.unique(np.round(np.geomspace(lo, hi, n)).astype(int))


def sweep_thresholds(records, obs: CountingObservable, m_grid, ensemble: CountingEnsemble | None = None) -> TradeoffCurve:
    """One MeritSummary per threshold; thresholds with < 2 waits are listed in ``empty``."""
    ens = ensemble if ensemble is not None else CountingEnsemble(records, obs)
    Ms, merits, empty = [], [], []
    for M in sorted({int(m) for m in m_grid}):
        try:
            merits.append(merit(None, groups=ens.waits(M)))
            Ms.append(M)
        except InsufficientStatistics:
            empty.append(M)
    curve = TradeoffCurve(obs.name, np.array(Ms, dtype=int), merits, empty)
    R = curve.R
    dR = np.array([m.dR for m in merits])
    if len(R) > 1:
        tol = 2 * np.sqrt(dR[1:] ** 2 + dR[:-1] ** 2)
        curve.monotone_R = bool(np.all(np.diff(R) < np.nan_to_num(tol)))
        if not curve.monotone_R:
            log.warning("resolution not monotone in M within error bars for %s", obs.name)
    return curve


@dataclass(frozen=True)
class OptimalThreshold:
    M: int
    index: int
    peak_found: bool
    peaks: tuple
    smoothed_A: np.ndarray


def optimal_threshold(curve: TradeoffCurve, window: int = 3, min_prominence_sigma: float = 2.0) -> OptimalThreshold:
    """Accuracy-peak threshold with the lowest Fano factor.

    Peaks are local maxima of the window-3 moving median of A(M) whose
    prominence exceeds ``min_prominence_sigma`` jackknife errors; without one,
    the global Fano minimizer is returned with ``peak_found=False``.
    """
    A = curve.A
    if len(A) < 3:
        raise InsufficientStatistics("need at least 3 thresholds to locate an accuracy peak")
    smooth = median_filter(A, size=window, mode="nearest")
    idx, props = find_peaks(smooth, prominence=0.0)
    dA = np.nan_to_num(curve.dA, nan=np.inf)
    keep = [i for i, p in zip(idx, props["prominences"]) if p > min_prominence_sigma * dA[i]]
    F = curve.F
    if keep:
        best = min(keep, key=lambda i: F[i])
        return OptimalThreshold(int(curve.M[best]), int(best), True, tuple(int(curve.M[i]) for i in keep), smooth)
    best = int(np.argmin(F))
    return OptimalThreshold(int(curve.M[best]), best, False, (), smooth)


def refine_grid(M_center: int, rel_width: float = 0.25, n: int = 41) -> np.ndarray:
    lo = max(1, int(math.floor(M_center * (1 - rel_width))))
    hi = max(lo + 2, int(math.ceil(M_center * (1 + rel_width))))
    return np.unique(np.round(np.linspace(lo, hi, n)).astype(int))


def poisson_benchmark(R, gamma0: float):
    """Accuracy of grouped Poisson events with rate gamma0 at resolution R: A = gamma0/R."""
    return gamma0 / np.asarray(R, dtype=float)


def count_spectrum(path: StepPath, omega, detrend: bool = False) -> np.ndarray:
    """|integral_0^tau N(t) exp(-i omega t) dt| of the step path on the grid ``omega``.

    Exact for the piecewise-constant path.  ``detrend`` subtracts the straight
    line N(tau) t/tau first, which removes the 1/omega^2 background.
    """
    omega = np.asarray(omega, dtype=float)
    tau = path.horizon
    t = path.times
    a = np.diff(np.concatenate([[0], path.values])).astype(float)
    out = np.empty(len(omega), dtype=complex)
    for i, w in enumerate(omega):
        if w == 0.0:
            out[i] = np.sum(a * (tau - t))
            if detrend:
                out[i] -= path.final * tau / 2
            continue
        e_tau = np.exp(-1j * w * tau)
        out[i] = np.sum(a * (np.exp(-1j * w * t) - e_tau)) / (1j * w)
        if detrend:
            rate = path.final / tau
            out[i] -= rate * (e_tau * (1 + 1j * w * tau) - 1) / (w * w)
    return np.abs(out)


@dataclass(frozen=True)
class SpectralPeak:
    omega: float
    magnitude: float
    ratio: float
    significant: bool


def dominant_peak(omega, magnitude, min_ratio: float = 5.0) -> SpectralPeak:
    """Largest interior local maximum of omega*|N(omega)| relative to its median.

    Multiplying by omega whitens the step-path transform (it is the transform of
    the increments), so a broadband floor is flat.
    """
    omega = np.asarray(omega, dtype=float)
    white = omega * np.asarray(magnitude, dtype=float)
    idx, _ = find_peaks(white)
    floor = float(np.median(white))
    if len(idx) == 0 or floor <= 0:
        return SpectralPeak(math.nan, math.nan, 0.0, False)
    i = idx[np.argmax(white[idx])]
    ratio = float(white[i] / floor)
    return SpectralPeak(float(omega[i]), float(magnitude[i]), ratio, ratio >= min_ratio)


def write_spectrum(path, omega, magnitude):
    return write_csv(path, ["omega", "magnitude"], zip(omega, magnitude))


def wtd_histogram(waits) -> tuple[np.ndarray, np.ndarray, dict]:
    """Waiting-time density with Freedman-Diaconis bins; returns (edges, density, meta)."""
    waits = np.asarray(waits, dtype=float)
    edges = np.histogram_bin_edges(waits, bins="fd")
    density, edges = np.histogram(waits, bins=edges, density=True)
    return edges, density, {"binning": "freedman-diaconis", "n_bins": len(density), "n": len(waits)}


def write_wtd(path, edges, density):
    return write_csv(path, ["bin_lo", "bin_hi", "density"], zip(edges[:-1], edges[1:], density))
