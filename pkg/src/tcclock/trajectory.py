"""Quantum-jump unraveling of the clock dynamics under direct photodetection.

Between detections the unnormalized state follows the no-jump generator
G = -1/2 sum_k (gamma_k/S) L_k^dag L_k; a detection fires when its squared
norm falls to a pre-drawn uniform variate (waiting-time algorithm), and the
channel is picked with weights (gamma_k/S) |L_k psi|^2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from tcclock import _kernels as K
from tcclock._io import read_csv, write_csv
from tcclock.liouville import SpectralNESS, sample_initial
from tcclock.spin import CollectiveOps

EMISSION = 0
ABSORPTION = 1
KIND_LABELS = {EMISSION: "-", ABSORPTION: "+"}

UNIFORM_CHUNK = 8192


class TrajectoryError(RuntimeError):
    pass


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream for trajectory ``index``, independent of scheduling order."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


@dataclass(frozen=True)
class JumpEvent:
    t: float
    kind: int

    @property
    def label(self) -> str:
        return KIND_LABELS[self.kind]


@dataclass
class TrajectoryRecord:
    """Detection record of one trajectory plus the per-jump state functionals.

    ``fidelities[i]`` and ``energies[i]`` are <psi|pi|psi> and <psi|H_C|psi>
    right after jump ``i``; these are all the tick-boundary data the
    thermodynamic ledgers need, for any threshold.
    """

    seed: object
    n0: int
    horizon: float
    times: np.ndarray
    kinds: np.ndarray
    fidelities: np.ndarray
    energies: np.ndarray
    initial_state: np.ndarray
    final_state: np.ndarray
    initial_fidelity: float
    initial_energy: float
    final_fidelity: float
    final_energy: float
    snapshots: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def events(self) -> list[JumpEvent]:
        return [JumpEvent(float(t), int(k)) for t, k in zip(self.times, self.kinds)]

    @property
    def n_emissions(self) -> int:
        return int(np.count_nonzero(self.kinds == EMISSION))

    @property
    def n_absorptions(self) -> int:
        return int(np.count_nonzero(self.kinds == ABSORPTION))

    def write(self, csv_path, json_path=None) -> None:
        """One CSV of events (t, kind) and a JSON sidecar with seed/params/snapshot times."""
        csv_path = write_csv(csv_path, ["t", "kind"], ((t, KIND_LABELS[int(k)]) for t, k in zip(self.times, self.kinds)))
        if json_path is None:
            json_path = csv_path.with_suffix(".json")
        meta = {
            "seed": self.seed,
            "n0": self.n0,
            "horizon": self.horizon,
            "params": self.params,
            "snapshot_times": [float(t) for t, _ in self.snapshots],
            "n_events": len(self),
        }
        Path(json_path).write_text(json.dumps(meta, indent=2, default=str), encoding="utf-8")

    @classmethod
    def read_events(cls, csv_path) -> tuple[np.ndarray, np.ndarray]:
        inv = {v: k for k, v in KIND_LABELS.items()}
        rows = read_csv(csv_path)
        return np.array([float(r["t"]) for r in rows]), np.array([inv[r["kind"]] for r in rows], dtype=np.int8)


def expected_rates(ops: CollectiveOps, state: SpectralNESS) -> tuple[float, float]:
    """Stationary detection rates (emission, absorption) = (gamma_k/S) Tr[L_k^dag L_k pi]."""
    out = []
    for _, g, L in ops.jumps():
        out.append(float(g * np.real(np.trace(L.conj().T @ L @ state.rho))))
    return out[0], out[1]


class _Engine:
    """Mutable driver around the compiled segment loop."""

    def __init__(self, ops, state, rng, alphas=None, seg_dt=math.inf, capacity=1024, psi0=None, n0=-1):
        self.ops = ops
        self.rng = rng
        d = ops.dim
        c2 = ops.ladder**2
        self.cm2 = np.zeros(d)
        self.cp2 = np.zeros(d)
        self.cm2[1:] = c2
        self.cp2[:-1] = c2
        self.ladder = np.ascontiguousarray(ops.ladder, dtype=float)
        self.alphas = np.ascontiguousarray([ops.alpha] if alphas is None else alphas, dtype=float)
        self.seg_dt = float(seg_dt)
        self.pi = np.ascontiguousarray(state.rho, dtype=complex)
        self.energy = np.ascontiguousarray(ops.energy_diag(), dtype=float)
        if psi0 is None:
            n0, psi0 = sample_initial(state, rng)
        self.n0 = n0
        self.psi = np.array(psi0, dtype=complex)
        self.psi /= np.linalg.norm(self.psi)
        self.uniforms = 1.0 - rng.random(UNIFORM_CHUNK)
        self.status = np.array([0.0, self.uniforms[0], 1.0])
        cap = max(int(capacity), 16)
        self.t = np.empty(cap)
        self.k = np.empty(cap, np.int8)
        self.fid = np.empty(cap)
        self.en = np.empty(cap)
        self.n = 0
        self.dark = False

    @property
    def now(self) -> float:
        return float(self.status[0])

    def _grow(self):
        cap = 2 * len(self.t)
        for name in ("t", "k", "fid", "en"):
            old = getattr(self, name)
            new = np.empty(cap, old.dtype)
            new[: self.n] = old[: self.n]
            setattr(self, name, new)

    def _refill(self):
        upos = int(self.status[2])
        self.uniforms = np.concatenate([self.uniforms[upos:], 1.0 - self.rng.random(UNIFORM_CHUNK)])
        self.status[2] = 0.0

    def advance(self, t_stop: float, max_jumps: int | None = None) -> None:
        """Run until ``t_stop`` or until ``max_jumps`` further jumps have happened."""
        limit = None if max_jumps is None else self.n + max_jumps
        while True:
            if limit is not None and self.n >= limit:
                return
            end = len(self.t) if limit is None else min(len(self.t), limit)
            n, code = K.run_segment(
                self.psi, self.status, float(t_stop), self.uniforms, self.ladder, self.cm2, self.cp2,
                self.ops.rate_minus, self.ops.rate_plus, self.alphas, self.seg_dt, self.pi, self.energy,
                self.t[:end], self.k[:end], self.fid[:end], self.en[:end], self.n,
            )
            self.n = n
            if code == K.REACHED_STOP:
                return
            if code == K.NEED_UNIFORMS:
                self._refill()
            elif code == K.BUFFER_FULL:
                if limit is not None and self.n >= limit:
                    return
                self._grow()
            elif code == K.DARK:
                self.dark = True
                return
            elif code == K.NONFINITE:
                raise TrajectoryError(f"non-finite amplitudes at t={self.now:.6g}")
            else:
                raise TrajectoryError(f"step-size underflow locating a jump near t={self.now:.6g}")

    def normalized(self) -> np.ndarray:
        return self.psi / np.linalg.norm(self.psi)


def run_trajectory(
    ops: CollectiveOps,
    state: SpectralNESS,
    horizon: float,
    markers: Sequence[float] | Callable[[float, int, int], bool] | None = None,
    rng: np.random.Generator | None = None,
    *,
    seed=None,
    alphas: Iterable[float] | None = None,
    seg_dt: float = math.inf,
    psi0: np.ndarray | None = None,
) -> TrajectoryRecord:
    """Simulate one monitored trajectory on [0, horizon].

    ``markers`` is either a sequence of times at which to snapshot the
    normalized state, or a callback ``(t, kind, jump_count) -> bool`` asked
    after every jump (the callback path steps jump by jump and is slower).
    ``alphas``/``seg_dt`` give a piecewise-constant displacement schedule.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if state.dim != ops.dim:
        raise ValueError("steady state and operators have different dimensions")
    if rng is None:
        rng = np.random.default_rng(seed)
    r_minus, r_plus = expected_rates(ops, state)
    cap = int(1.3 * (r_minus + r_plus) * horizon) + 64
    eng = _Engine(ops, state, rng, alphas=alphas, seg_dt=seg_dt, capacity=cap, psi0=psi0)
    psi_init = eng.normalized()
    snapshots = []
    if callable(markers):
        while eng.now < horizon:
            before = eng.n
            eng.advance(horizon, max_jumps=1)
            if eng.n > before and markers(float(eng.t[before]), int(eng.k[before]), eng.n):
                snapshots.append((float(eng.t[before]), eng.normalized()))
    else:
        for tm in sorted(() if markers is None else markers):
            if tm > horizon:
                break
            eng.advance(tm)
            snapshots.append((float(tm), eng.normalized()))
        eng.advance(horizon)
    psi_final = eng.normalized()
    n = eng.n
    energy = ops.energy_diag()
    return TrajectoryRecord(
        seed=seed,
        n0=eng.n0,
        horizon=float(horizon),
        times=eng.t[:n].copy(),
        kinds=eng.k[:n].copy(),
        fidelities=eng.fid[:n].copy(),
        energies=eng.en[:n].copy(),
        initial_state=psi_init,
        final_state=psi_final,
        initial_fidelity=state.fidelity(psi_init),
        initial_energy=float(np.sum(energy * np.abs(psi_init) ** 2)),
        final_fidelity=state.fidelity(psi_final),
        final_energy=float(np.sum(energy * np.abs(psi_final) ** 2)),
        snapshots=snapshots,
        params=ops.params.to_dict(),
    )


def waiting_time_step(psi: np.ndarray, ops: CollectiveOps, rng: np.random.Generator, max_wait: float = math.inf,
                      state: SpectralNESS | None = None):
    """Draw the delay to the next detection from a normalized state.

    Returns ``(dt, kind, post_jump_state)``; ``kind`` is None and the state is
    the normalized no-jump tail when nothing happens within ``max_wait`` (an
    infinite wait from a dark state returns ``inf``).
    """
    psi = np.asarray(psi, dtype=complex)
    if abs(np.linalg.norm(psi) - 1.0) > 1e-8:
        raise ValueError("waiting_time_step expects a normalized state")
    if state is None:
        state = SpectralNESS(rho=np.eye(ops.dim) / ops.dim, populations=np.full(ops.dim, 1 / ops.dim),
                             vectors=np.eye(ops.dim), residual=0.0, method="placeholder")
    eng = _Engine(ops, state, rng, capacity=1, psi0=psi)
    eng.advance(max_wait, max_jumps=1)
    if eng.n == 0:
        return float(max_wait), None, eng.normalized()
    return float(eng.t[0]), int(eng.k[0]), eng.normalized()


def jump_channel_probabilities(psi: np.ndarray, ops: CollectiveOps) -> tuple[float, float]:
    """Probabilities of emission vs absorption for a detection from ``psi``."""
    w = [g * float(np.linalg.norm(L @ psi) ** 2) for _, g, L in ops.jumps()]
    tot = w[0] + w[1]
    return w[0] / tot, w[1] / tot
