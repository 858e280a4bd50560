"""One function per run mode; each writes its data files into ``out``."""

from __future__ import annotations

import logging
import math
from pathlib import Path

import numpy as np

from tcclock import thermo
from tcclock._io import write_csv
from tcclock.harness.config import RunConfig
from tcclock.harness.ensemble import Clock, run_ensemble
from tcclock.harness.fitting import FitError, fit_power_law, fit_resolution, fit_threshold_scaling, tc_frequency
from tcclock.noise import NoiseModel, crossover_scan, rabi_benchmark
from tcclock.ticks import (
    PRESETS,
    CountingEnsemble,
    InsufficientStatistics,
    accumulate,
    count_spectrum,
    default_m_grid,
    dominant_peak,
    optimal_threshold,
    sweep_thresholds,
    write_spectrum,
    write_wtd,
    wtd_histogram,
)

log = logging.getLogger(__name__)
OBSERVABLES = ("emissions", "activity", "heat")


def _grid(cfg: RunConfig, clock: Clock, obs) -> np.ndarray:
    if cfg.threshold is not None:
        return np.array([cfg.threshold])
    if cfg.m_grid is not None:
        return np.unique(np.asarray(cfg.m_grid, int))
    return default_m_grid(clock.params.S, clock.params.lam)


def _horizon(cfg: RunConfig, clock: Clock, obs, grid) -> float:
    return cfg.horizon if cfg.horizon is not None else clock.horizon(obs, int(max(grid)), cfg.horizon_min_ticks)


def _ensemble(cfg, clock, horizon, noise=None):
    return run_ensemble(clock, cfg.trajectories, horizon, cfg.seed, cfg.workers, noise=noise)


def _check_ticks(ens: CountingEnsemble, M: int, wanted: int):
    have = ens.min_ticks(M)
    if have < wanted:
        log.warning("threshold %d: shortest trajectory has %d ticks (< %d)", M, have, wanted)
    return have


def _best(curve, grid):
    """Optimal threshold; a single-point grid is its own optimum."""
    if len(curve.M) == 1:
        return int(curve.M[0]), False, ()
    if len(curve.M) < 3:
        raise InsufficientStatistics("too few usable thresholds to locate an optimum")
    o = optimal_threshold(curve)
    return o.M, o.peak_found, o.peaks


def _sweep(records, obs, grid):
    ens = CountingEnsemble(records, obs)
    curve = sweep_thresholds(records, obs, grid, ensemble=ens)
    if len(curve.M) == 0:
        raise InsufficientStatistics(f"no threshold in the grid produced two or more waits for {obs.name}")
    M, found, peaks = _best(curve, grid)
    return ens, curve, M, found, peaks


def _merit_dict(m) -> dict:
    return {"R": m.R, "A": m.A, "F": m.F, "dR": m.dR, "dA": m.dA, "dF": m.dF, "n_waits": m.n, "n_groups": m.n_groups}


def _counts_rows(path):
    yield [0.0, 0]
    for t, v in zip(path.times, path.values):
        yield [t, int(v)]
    yield [path.horizon, path.final]


def _omega_grid(clock: Clock, horizon: float, n: int) -> np.ndarray:
    w_tc = 2 * math.pi / clock.period() if math.isfinite(clock.period()) else clock.params.gamma0
    lo = max(2 * math.pi / horizon, w_tc / 20)
    return np.linspace(lo, 4 * w_tc, n)


def run_simulate(cfg: RunConfig, out: Path) -> dict:
    clock = Clock(cfg.params())
    obs = PRESETS[cfg.observable]
    grid = _grid(cfg, clock, obs)
    horizon = _horizon(cfg, clock, obs, grid)
    records = _ensemble(cfg, clock, horizon)
    tdir = out / "trajectories"
    tdir.mkdir(parents=True, exist_ok=True)
    for i, rec in enumerate(records):
        rec.write(tdir / f"traj_{i:05d}.csv", tdir / f"traj_{i:05d}.json")
    path = accumulate(records[0], obs)
    write_csv(out / "counts.csv", ["t", "N"], _counts_rows(path))
    omega = _omega_grid(clock, horizon, cfg.omega_points)
    mag = count_spectrum(path, omega, detrend=True)
    write_spectrum(out / "spectrum.csv", omega, mag)
    ens, curve, M, found, _ = _sweep(records, obs, grid)
    curve.write(out / "tradeoff.csv")
    peak = dominant_peak(omega, mag)
    return {"horizon": horizon, "n_events": [len(r) for r in records][:10], "M_star": M, "peak_found": found,
            "spectral_peak_omega": peak.omega, "spectral_peak_significant": peak.significant}


def run_sweep_threshold(cfg: RunConfig, out: Path) -> dict:
    clock = Clock(cfg.params())
    obs = PRESETS[cfg.observable]
    grid = _grid(cfg, clock, obs)
    horizon = _horizon(cfg, clock, obs, grid)
    records = _ensemble(cfg, clock, horizon)
    ens, curve, M, found, peaks = _sweep(records, obs, grid)
    _check_ticks(ens, int(max(curve.M)), cfg.horizon_min_ticks)
    curve.write(out / "tradeoff.csv")
    waits = np.concatenate(ens.waits(M))
    edges, dens, meta = wtd_histogram(waits)
    write_wtd(out / "wtd.csv", edges, dens)
    summary = {"horizon": horizon, "M_star": M, "peak_found": found, "peaks": list(peaks),
               "merit": _merit_dict(curve.at(M)), "wtd": meta}
    thermo.write_json(out / "optimal.json", summary)
    return summary


def _lambda_point(cfg, lam):
    clock = Clock(cfg.params(lam=lam))
    obs = PRESETS[cfg.observable]
    grid = _grid(cfg, clock, obs)
    horizon = _horizon(cfg, clock, obs, grid)
    records = _ensemble(cfg, clock, horizon)
    ens, curve, M, found, _ = _sweep(records, obs, grid)
    return clock, records, ens, curve, M, found


def run_sweep_lambda(cfg: RunConfig, out: Path) -> dict:
    rows, points = [], []
    for lam in cfg.lambdas:
        clock, records, ens, curve, M, found = _lambda_point(cfg, lam)
        curve.write(out / f"tradeoff_lambda_{lam:g}.csv")
        m = curve.at(M)
        nu = float(tc_frequency(lam, cfg.gamma0)) if lam > 1 else math.nan
        rows.append([lam, nu, M, int(found), m.R, m.A, m.F, m.dR, m.dA, m.dF])
        points.append((lam, M, found, m.R))
    write_csv(out / "lambda_sweep.csv", ["lambda", "nu", "M_star", "peak_found", "R", "A", "F", "dR", "dA", "dF"], rows)
    lams, Ms, founds, Rs = (np.array(x) for x in zip(*points))
    fits = {}
    try:
        fits["resolution"] = fit_resolution(lams, Rs, cfg.gamma0).to_dict()
    except FitError as exc:
        fits["resolution"] = {"error": str(exc)}
    try:
        fits["threshold"] = fit_threshold_scaling(lams, Ms, cfg.spin2 / 2, peak_found=founds).to_dict()
    except FitError as exc:
        fits["threshold"] = {"error": str(exc)}
    thermo.write_json(out / "fits.json", fits)
    return {"fits": fits}


def run_sweep_spin(cfg: RunConfig, out: Path) -> dict:
    if not math.isfinite(cfg.beta):
        raise ValueError("sweep-spin reports entropy production and needs finite beta")
    rows = []
    for s2 in cfg.spins:
        clock = Clock(cfg.params(spin2=s2))
        obs = PRESETS[cfg.observable]
        grid = _grid(cfg, clock, obs)
        horizon = _horizon(cfg, clock, obs, grid)
        records = _ensemble(cfg, clock, horizon)
        ens, curve, M, found, _ = _sweep(records, obs, grid)
        ledgers = [thermo.tick_ledger(r, t, cfg.beta) for r, t in zip(records, ens.ticks(M))]
        rep = thermo.tur_kur_report(curve.at(M), ledgers)
        m = curve.at(M)
        rows.append([s2, s2 / 2, M, int(found), m.R, m.A, m.F, m.dA, rep.S_tick, rep.dS_tick, rep.K_tick, rep.dK_tick])
    header = ["spin2", "S", "M_star", "peak_found", "R", "A", "F", "dA", "S_tick", "dS_tick", "K_tick", "dK_tick"]
    write_csv(out / "spin_sweep.csv", header, rows)
    arr = np.array(rows, float)
    fits = {}
    for name, col in (("accuracy", 5), ("entropy", 8)):
        try:
            fits[name] = fit_power_law(arr[:, 1], arr[:, col]).to_dict()
        except Exception as exc:  # noqa: BLE001 - reported in the output
            fits[name] = {"error": str(exc)}
    thermo.write_json(out / "fits.json", fits)
    return {"fits": fits}


def run_ft_check(cfg: RunConfig, out: Path) -> dict:
    clock = Clock(cfg.params())
    M = cfg.threshold or 5
    rate = min(clock.count_rate(PRESETS[o]) for o in OBSERVABLES)
    horizon = cfg.horizon if cfg.horizon is not None else 1.2 * (cfg.horizon_min_ticks + 1) * M / rate
    records = _ensemble(cfg, clock, horizon)
    result = {"threshold": M, "horizon": horizon, "beta": cfg.beta}
    for name in OBSERVABLES:
        obs = PRESETS[name]
        first = [thermo.first_tick_entropy(r, obs, M, cfg.beta) for r in records]
        pairs = [thermo.capped_tick_entropies(r, obs, M, cfg.beta) for r in records]
        est_first = thermo.ft_estimator(first, trace_points=200)
        est_tick = thermo.ft_estimator(None, groups=pairs, trace_points=200)
        result[name] = {"mar_first_tick": est_first.to_json(), "tick": est_tick.to_json()}
        ens = CountingEnsemble(records, obs)
        led = thermo.ThermoLedger.concat([thermo.tick_ledger(r, t, cfg.beta) for r, t in zip(records, ens.ticks(M))])
        thermo.write_ledger(out / f"ledger_{name}.csv", led)
    thermo.write_json(out / "ft.json", result)
    return {k: {"mar": v["mar_first_tick"]["mean"], "tick": v["tick"]["mean"]} for k, v in result.items()
            if isinstance(v, dict)}


def run_turkur(cfg: RunConfig, out: Path) -> dict:
    clock = Clock(cfg.params())
    grids = {o: _grid(cfg, clock, PRESETS[o]) for o in OBSERVABLES}
    horizon = cfg.horizon if cfg.horizon is not None else max(
        clock.horizon(PRESETS[o], int(max(g)), cfg.horizon_min_ticks) for o, g in grids.items())
    records = _ensemble(cfg, clock, horizon)
    report = {"horizon": horizon, "beta": cfg.beta}
    for name in OBSERVABLES:
        obs = PRESETS[name]
        ens, curve, M, found, _ = _sweep(records, obs, grids[name])
        ledgers = [thermo.tick_ledger(r, t, cfg.beta) for r, t in zip(records, ens.ticks(M))]
        rep = thermo.tur_kur_report(curve.at(M), ledgers)
        thermo.write_ledger(out / f"ledger_{name}.csv", thermo.ThermoLedger.concat(ledgers))
        curve.write(out / f"tradeoff_{name}.csv")
        report[name] = dict(rep.to_json(), M_star=M, peak_found=found)
    thermo.write_json(out / "turkur.json", report)
    return report


def run_noise(cfg: RunConfig, out: Path) -> dict:
    params = cfg.params()
    clock = Clock(params)
    grids = {o: _grid(cfg, clock, PRESETS[o]) for o in OBSERVABLES}
    horizon = cfg.horizon if cfg.horizon is not None else max(
        clock.horizon(PRESETS[o], int(max(g)), cfg.horizon_min_ticks) for o, g in grids.items())

    def run(noise):
        return run_ensemble(clock, cfg.trajectories, horizon, cfg.seed, cfg.workers, noise=noise)

    fixed = {o: cfg.threshold for o in OBSERVABLES} if cfg.threshold is not None else None
    res = crossover_scan(params, cfg.noise_sigma_rel, cfg.trajectories, horizon, grids, OBSERVABLES,
                         seed=cfg.seed, dt=cfg.noise_dt, fixed_M=fixed, run=run)
    res.write(out / "crossover.csv")
    dt = NoiseModel.relative(params.lam, 0.0, cfg.noise_dt).interval(params)
    summary = {
        "horizon": horizon, "noise_dt": dt, "crossover": res.crossover,
        "rows": [{"sigma_rel": r.sigma_rel, "F": r.F, "dF": r.dF, "R": r.R, "M_star": r.M_star, "F_rabi": r.F_rabi,
                  "R_rabi": rabi_benchmark(NoiseModel.relative(params.lam, r.sigma_rel), params.gamma0).R}
                 for r in res.rows],
    }
    thermo.write_json(out / "crossover.json", summary)
    return summary


def run_spectrum(cfg: RunConfig, out: Path) -> dict:
    clock = Clock(cfg.params())
    obs = PRESETS[cfg.observable]
    if cfg.horizon is not None:
        horizon = cfg.horizon
    elif math.isfinite(clock.period()):
        horizon = (cfg.horizon_min_ticks + 1) * clock.period()
    else:
        horizon = clock.horizon(obs, int(max(_grid(cfg, clock, obs))), cfg.horizon_min_ticks)
    records = _ensemble(cfg, clock, horizon)
    omega = _omega_grid(clock, horizon, cfg.omega_points)
    mags = np.array([count_spectrum(accumulate(r, obs), omega, detrend=True) for r in records])
    mag = mags.mean(axis=0)
    write_spectrum(out / "spectrum.csv", omega, mag)
    peak = dominant_peak(omega, mag)
    summary = {"horizon": horizon, "omega_peak": peak.omega, "ratio": peak.ratio, "significant": peak.significant,
               "omega_tc": 2 * math.pi / clock.period() if math.isfinite(clock.period()) else None}
    thermo.write_json(out / "peak.json", summary)
    return summary


RUNNERS = {
    "simulate": run_simulate,
    "sweep-threshold": run_sweep_threshold,
    "sweep-lambda": run_sweep_lambda,
    "sweep-spin": run_sweep_spin,
    "ft-check": run_ft_check,
    "turkur": run_turkur,
    "noise": run_noise,
    "spectrum": run_spectrum,
}
