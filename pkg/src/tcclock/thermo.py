"""Trajectory thermodynamics at clock ticks.

Entropy production between ticks is the martingale form
S_tick = Delta S_psi + beta Q, with Delta S_psi = -ln<psi_2|pi|psi_2> + ln<psi_1|pi|psi_1>
and Q = omega_C (Delta N_- - Delta N_+).  Energetics use Delta E = W - Q,
i.e. W = Delta E + Q.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from tcclock._io import write_csv
from tcclock.liouville import SpectralNESS
from tcclock.ticks import CountingObservable, MeritSummary, TickSeries, accumulate, extract_ticks
from tcclock.trajectory import ABSORPTION, EMISSION, TrajectoryRecord

FIDELITY_FLOOR = 1e-300


class FidelityUnderflow(FloatingPointError):
    pass


def _log_fidelity(f: np.ndarray | float):
    f = np.asarray(f, dtype=float)
    if np.any(f < FIDELITY_FLOOR):
        raise FidelityUnderflow(f"<psi|pi|psi> = {float(np.min(f)):.3e} below {FIDELITY_FLOOR:g}")
    return np.log(f)


def fidelity(psi: np.ndarray, pi: SpectralNESS | np.ndarray) -> float:
    rho = pi.rho if isinstance(pi, SpectralNESS) else np.asarray(pi)
    return float(np.real(np.vdot(psi, rho @ psi)))


def delta_S_psi(psi1: np.ndarray, psi2: np.ndarray, pi: SpectralNESS | np.ndarray) -> float:
    """-ln<psi2|pi|psi2> + ln<psi1|pi|psi1>."""
    f1, f2 = fidelity(psi1, pi), fidelity(psi2, pi)
    return float(_log_fidelity(f1) - _log_fidelity(f2))


def _require_finite_beta(beta: float):
    if not math.isfinite(beta):
        raise ValueError("entropy production needs finite beta (zero temperature makes beta*Q undefined)")


def _cumulative_counts(record: TrajectoryRecord):
    em = np.cumsum(record.kinds == EMISSION)
    ab = np.cumsum(record.kinds == ABSORPTION)
    return em, ab


@dataclass
class ThermoLedger:
    """Per-tick ledger for consecutive tick pairs of one trajectory (arrays aligned by tick)."""

    dN_minus: np.ndarray
    dN_plus: np.ndarray
    fid_start: np.ndarray
    fid_end: np.ndarray
    E_start: np.ndarray
    E_end: np.ndarray
    beta: float
    omega_c: float = 1.0
    duration: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self):
        return len(self.dN_minus)

    @property
    def Q(self) -> np.ndarray:
        return self.omega_c * (self.dN_minus - self.dN_plus)

    @property
    def K(self) -> np.ndarray:
        return self.dN_minus + self.dN_plus

    @property
    def dS_psi(self) -> np.ndarray:
        return _log_fidelity(self.fid_start) - _log_fidelity(self.fid_end)

    @property
    def S_tick(self) -> np.ndarray:
        return self.dS_psi + self.beta * self.Q

    @property
    def dE(self) -> np.ndarray:
        return self.E_end - self.E_start

    @property
    def W(self) -> np.ndarray:
        return self.dE + self.Q

    def rows(self):
        for T, q, k, ds, s in zip(self.duration, self.Q, self.K, self.dS_psi, self.S_tick):
            yield [T, q, k, ds, s]

    @staticmethod
    def concat(ledgers: list["ThermoLedger"]) -> "ThermoLedger":
        cat = lambda name: np.concatenate([getattr(l, name) for l in ledgers]) if ledgers else np.empty(0)
        beta = ledgers[0].beta if ledgers else math.nan
        return ThermoLedger(cat("dN_minus"), cat("dN_plus"), cat("fid_start"), cat("fid_end"),
                            cat("E_start"), cat("E_end"), beta, duration=cat("duration"))


def _boundary(record: TrajectoryRecord, idx: np.ndarray, at_horizon: np.ndarray):
    """Fidelity and energy right after event ``idx`` (or at the horizon / start)."""
    fid = np.where(idx >= 0, record.fidelities[np.clip(idx, 0, None)] if len(record) else 0.0, record.initial_fidelity)
    en = np.where(idx >= 0, record.energies[np.clip(idx, 0, None)] if len(record) else 0.0, record.initial_energy)
    fid = np.where(at_horizon, record.final_fidelity, fid)
    en = np.where(at_horizon, record.final_energy, en)
    return fid, en


def tick_ledger(record: TrajectoryRecord, ticks: TickSeries, beta: float) -> ThermoLedger:
    """Ledger for the stationary tick pairs (T_i, T_{i+1}), i >= 1, matching ``ticks.waits``."""
    _require_finite_beta(beta)
    em, ab = _cumulative_counts(record)
    i1, i2 = ticks.event_index[:-1], ticks.event_index[1:]
    f1, e1 = _boundary(record, i1, np.zeros(len(i1), bool))
    f2, e2 = _boundary(record, i2, np.zeros(len(i2), bool))
    return ThermoLedger(
        dN_minus=(em[i2] - em[i1]).astype(float) if len(i1) else np.empty(0),
        dN_plus=(ab[i2] - ab[i1]).astype(float) if len(i1) else np.empty(0),
        fid_start=f1, fid_end=f2, E_start=e1, E_end=e2, beta=beta,
        duration=np.diff(ticks.times),
    )


def tick_entropy(record: TrajectoryRecord, ticks: TickSeries, beta: float) -> np.ndarray:
    """S_tick for every stationary tick pair of ``record``."""
    return tick_ledger(record, ticks, beta).S_tick


def heat_work(record: TrajectoryRecord, ticks: TickSeries, beta: float = 1.0):
    """(Q, Delta E, W) per tick pair; W = Delta E + Q."""
    led = tick_ledger(record, ticks, beta)
    return led.Q, led.dE, led.W


def segment_heat_work(n_minus: int, n_plus: int, psi1: np.ndarray, psi2: np.ndarray, energy_diag: np.ndarray,
                      omega_c: float = 1.0):
    """Energetics of an arbitrary segment from jump counts and boundary states."""
    Q = omega_c * (n_minus - n_plus)
    dE = float(np.sum(energy_diag * (np.abs(psi2) ** 2 - np.abs(psi1) ** 2)))
    return Q, dE, dE + Q


def uncertainty_entropy(psi_t: np.ndarray, pi: SpectralNESS, rng: np.random.Generator) -> float:
    """Virtual final projection onto the eigenbasis of pi: -ln pi_i + ln<psi|pi|psi>.

    The initial term is zero because trajectories start in eigenstates of pi.
    """
    amps = pi.vectors.conj().T @ psi_t
    p = np.abs(amps) ** 2
    p = p / p.sum()
    i = int(np.searchsorted(np.cumsum(p), rng.random() * 1.0, side="right"))
    i = min(i, len(p) - 1)
    return float(-np.log(pi.populations[i]) + np.log(fidelity(psi_t, pi)))


# -- stopping-time fluctuation theorems -------------------------------------------------


def first_tick_entropy(record: TrajectoryRecord, obs: CountingObservable, M: int, beta: float) -> float:
    """S_mar(min(T_1, tau)) from the start of the trajectory."""
    _require_finite_beta(beta)
    ticks = extract_ticks(accumulate(record, obs), M)
    em, ab = _cumulative_counts(record)
    if ticks.empty:
        f_end, q = record.final_fidelity, record.n_emissions - record.n_absorptions
    else:
        i = int(ticks.event_index[0])
        f_end, q = record.fidelities[i], int(em[i] - ab[i])
    return float(_log_fidelity(record.initial_fidelity) - _log_fidelity(f_end) + beta * q)


def capped_tick_entropies(record: TrajectoryRecord, obs: CountingObservable, M: int, beta: float) -> np.ndarray:
    """S_tick samples with horizon-capped stopping times T_i = min(first N = iM, tau).

    Pairs (T_i, T_{i+1}) for every observed tick i, the last pair closing at tau;
    a trajectory without ticks contributes one zero (T_1 = T_2 = tau).
    """
    _require_finite_beta(beta)
    ticks = extract_ticks(accumulate(record, obs), M)
    if ticks.empty:
        return np.zeros(1)
    em, ab = _cumulative_counts(record)
    idx = ticks.event_index
    lf = _log_fidelity(record.fidelities[idx])
    q = (em[idx] - ab[idx]).astype(float)
    lf_all = np.append(lf, _log_fidelity(record.final_fidelity))
    q_all = np.append(q, float(record.n_emissions - record.n_absorptions))
    return (lf_all[:-1] - lf_all[1:]) + beta * np.diff(q_all)


@dataclass(frozen=True)
class FTEstimate:
    """Estimate of <exp(-S)> with its standard error and running trace."""

    mean: float
    stderr: float
    n: int
    trace: np.ndarray

    @property
    def deviation(self) -> float:
        return abs(self.mean - 1.0)

    def to_json(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "n": self.n,
                "trace": [[int(i + 1), float(v)] for i, v in enumerate(self.trace)]}


def merge_moments(a: tuple, b: tuple) -> tuple:
    """Associative merge of (sum, sum of squares, count) triples."""
    return a[0] + b[0], a[1] + b[1], a[2] + b[2]


def ft_estimator(samples, groups=None, trace_points: int | None = None) -> FTEstimate:
    """<exp(-S)> over entropy samples.

    ``groups`` (one array of samples per trajectory) makes the running trace a
    function of trajectory count, as in convergence plots, and the error a
    per-trajectory one.
    """
    if groups is not None:
        groups = [np.asarray(g, float) for g in groups]
        sums = np.array([np.exp(-g).sum() for g in groups])
        counts = np.array([len(g) for g in groups], float)
        cum = np.cumsum(sums) / np.cumsum(counts)
        n = int(counts.sum())
        mean = float(cum[-1])
        G = len(groups)
        if G > 1:
            resid = sums - mean * counts
            stderr = float(np.sqrt(G / (G - 1) * np.sum(resid**2)) / counts.sum())
        else:
            stderr = math.nan
        trace = cum
    else:
        x = np.exp(-np.asarray(samples, float))
        n = len(x)
        mean = float(x.mean()) if n else math.nan
        stderr = float(x.std(ddof=1) / np.sqrt(n)) if n > 1 else math.nan
        trace = np.cumsum(x) / np.arange(1, n + 1)
    if trace_points and len(trace) > trace_points:
        keep = np.unique(np.round(np.geomspace(1, len(trace), trace_points)).astype(int)) - 1
        trace = trace[keep]
    return FTEstimate(mean, stderr, n, trace)


# -- uncertainty relations ------------------------------------------------------------------


def _mean_se(values_by_group):
    groups = [np.asarray(g, float) for g in values_by_group if len(g)]
    flat = np.concatenate(groups) if groups else np.empty(0)
    mean = float(flat.mean()) if len(flat) else math.nan
    G = len(groups)
    if G < 2:
        se = float(flat.std(ddof=1) / np.sqrt(len(flat))) if len(flat) > 1 else math.nan
        return mean, se
    sums = np.array([g.sum() for g in groups])
    counts = np.array([len(g) for g in groups], float)
    loo = (sums.sum() - sums) / (counts.sum() - counts)
    se = float(np.sqrt((G - 1) / G * np.sum((loo - loo.mean()) ** 2)))
    return mean, se


@dataclass(frozen=True)
class BoundReport:
    A: float
    dA: float
    S_tick: float
    dS_tick: float
    K_tick: float
    dK_tick: float
    tur_margin: float
    kur_margin: float

    @property
    def tur_bound(self) -> float:
        return self.S_tick / 2

    @property
    def tur_violated(self) -> bool:
        """A exceeds <S_tick>/2 by more than 2 combined standard errors."""
        return self.tur_margin > 2.0

    @property
    def kur_violated(self) -> bool:
        return self.kur_margin > 2.0

    def to_json(self) -> dict:
        d = {k: getattr(self, k) for k in ("A", "dA", "S_tick", "dS_tick", "K_tick", "dK_tick", "tur_margin", "kur_margin")}
        d.update(tur_bound=self.tur_bound, tur_violated=self.tur_violated, kur_violated=self.kur_violated)
        return d


def tur_kur_report(m: MeritSummary, ledgers: list[ThermoLedger]) -> BoundReport:
    """Compare A with <S_tick>/2 (TUR) and <K_tick> (KUR); margins in combined standard errors."""
    S, dS = _mean_se([l.S_tick for l in ledgers])
    Kt, dK = _mean_se([l.K for l in ledgers])
    dA = m.dA if math.isfinite(m.dA) else 0.0
    tur = (m.A - S / 2) / math.hypot(dA, dS / 2)
    kur = (m.A - Kt) / math.hypot(dA, dK)
    return BoundReport(m.A, m.dA, S, dS, Kt, dK, tur, kur)


def write_ledger(path, ledger: ThermoLedger):
    return write_csv(path, ["T", "Q", "K_tick", "dS_psi", "S_tick"], ledger.rows())


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
