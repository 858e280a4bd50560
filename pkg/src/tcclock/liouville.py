"""Unmonitored (Lindblad) dynamics: generator, steady state and initial-state sampling."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import splu

from tcclock._io import write_csv
from tcclock.spin import CollectiveOps

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
NEG_EIG_TOL = 1e-10


class SteadyStateError(RuntimeError):
    """Neither the null-vector solve nor long-time propagation reached tolerance."""


def lindblad_rhs(rho: np.ndarray, ops: CollectiveOps) -> np.ndarray:
    """Right-hand side of the master equation, sum_k (gamma_k/S) D[L_k] rho."""
    rho = np.asarray(rho)
    if rho.shape != (ops.dim, ops.dim):
        raise ValueError(f"density matrix shape {rho.shape} does not match dimension {ops.dim}")
    out = np.zeros_like(rho, dtype=complex)
    for _, g, L in ops.jumps():
        if g == 0.0:
            continue
        Ld = L.conj().T
        LdL = Ld @ L
        out += g * (L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL))
    return out


def superoperator(ops: CollectiveOps, alpha: float | None = None) -> sp.csc_matrix:
    """Sparse Liouvillian acting on column-stacked density matrices.

    Uses vec(A rho B) = (B^T kron A) vec(rho).
    """
    d = ops.dim
    eye = sp.identity(d, dtype=complex, format="csr")
    total = sp.csr_matrix((d * d, d * d), dtype=complex)
    a = ops.alpha if alpha is None else alpha
    a_eye = 1j * a * eye
    l_minus = sp.csr_matrix(ops.s_minus) + a_eye
    l_plus = sp.csr_matrix(ops.s_plus) - a_eye
    for g, L in ((ops.rate_minus, l_minus), (ops.rate_plus, l_plus)):
        if g == 0.0:
            continue
        Ld = L.conj().T
        LdL = Ld @ L
        total = total + g * (sp.kron(L.conj(), L) - 0.5 * sp.kron(eye, LdL) - 0.5 * sp.kron(LdL.T, eye))
    return total.tocsc()


def _vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def _unvec(v: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(v).reshape((d, d), order="F")


# entries this far below the largest one are round-off from the shifted solve
CHOP = np.finfo(float).eps ** 2


def _physical(rho: np.ndarray) -> np.ndarray:
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    rho.real[np.abs(rho.real) < CHOP * np.abs(rho).max()] = 0.0
    rho.imag[np.abs(rho.imag) < CHOP * np.abs(rho).max()] = 0.0
    return rho


def residual_norm(rho: np.ndarray, ops: CollectiveOps) -> float:
    return float(np.linalg.norm(lindblad_rhs(rho, ops)))


@dataclass(frozen=True)
class SpectralNESS:
    """Steady state with its eigen-decomposition, populations in descending order."""

    rho: np.ndarray
    populations: np.ndarray
    vectors: np.ndarray
    residual: float
    method: str

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def fidelity(self, psi: np.ndarray) -> float:
        """<psi|pi|psi> for a normalized state."""
        return float(np.real(np.vdot(psi, self.rho @ psi)))

    def write_spectrum(self, path):
        return write_csv(path, ["n", "pi_n"], enumerate(self.populations))


def _inverse_iteration(L: sp.csc_matrix, d: int, max_iter: int = 8) -> np.ndarray:
    scale = abs(L).max()
    shift = 1e-13 * scale
    lu = splu((L - shift * sp.identity(d * d, format="csc")).tocsc())
    x = _vec(np.eye(d) / d).astype(complex)
    for _ in range(max_iter):
        y = lu.solve(x)
        y /= np.linalg.norm(y)
        if np.linalg.norm(y - x) < 1e-14 or np.linalg.norm(y + x) < 1e-14:
            x = y
            break
        x = y
    return _unvec(x, d)


def propagate(rho0: np.ndarray, ops: CollectiveOps, times, method: str = "rk45", rtol: float = 1e-10, atol: float = 1e-13):
    """Integrate the master equation; returns density matrices at ``times``.

    ``method="rk45"`` is the adaptive 4(5) integrator, ``"expm"`` uses the
    dense superoperator exponential (small dimensions only).
    """
    d = ops.dim
    times = np.atleast_1d(np.asarray(times, dtype=float))
    L = superoperator(ops)
    v0 = _vec(np.asarray(rho0, dtype=complex))
    if method == "expm":
        Ld = L.toarray()
        out, t_prev, v = [], 0.0, v0
        for t in times:
            v = la.expm(Ld * (t - t_prev)) @ v
            t_prev = t
            out.append(_unvec(v, d).copy())
        return out
    if method != "rk45":
        raise ValueError(f"unknown method {method!r}")
    sol = solve_ivp(lambda _, y: L @ y, (0.0, float(times[-1])), v0, method="RK45",
                    t_eval=times, rtol=rtol, atol=atol)
    if not sol.success:
        raise SteadyStateError(f"propagation failed: {sol.message}")
    return [_unvec(sol.y[:, i], d).copy() for i in range(len(times))]


def _propagate_to_steady(ops: CollectiveOps, tol: float) -> np.ndarray:
    d = ops.dim
    rho = np.eye(d, dtype=complex) / d
    t_chunk = 1e3 / ops.params.gamma0
    for _ in range(20):
        rho = _physical(propagate(rho, ops, [t_chunk])[0])
        if residual_norm(rho, ops) <= tol:
            break
    return rho


def ness(ops: CollectiveOps, tol: float = RESIDUAL_TOL) -> SpectralNESS:
    """Nonequilibrium steady state via shifted inverse iteration, propagation as fallback."""
    d = ops.dim
    L = superoperator(ops)
    method = "inverse-iteration"
    rho = _physical(_inverse_iteration(L, d))
    res = residual_norm(rho, ops)
    if not np.isfinite(res) or res > tol:
        log.warning("null-vector solve residual %.3e above %.1e; propagating", res, tol)
        method = "propagation"
        rho = _propagate_to_steady(ops, tol)
        res = residual_norm(rho, ops)
        if res > tol:
            raise SteadyStateError(f"steady state not converged: residual {res:.3e} > {tol:.1e}")
    w, v = la.eigh(rho)
    if w.min() < -NEG_EIG_TOL:
        raise SteadyStateError(f"steady state has eigenvalue {w.min():.3e} below -{NEG_EIG_TOL:g}")
    order = np.argsort(w)[::-1]
    w = np.clip(w[order], 0.0, None)
    v = v[:, order]
    w = w / w.sum()
    for arr in (rho, w, v):
        arr.setflags(write=False)
    return SpectralNESS(rho=rho, populations=w, vectors=v, residual=res, method=method)


def sample_initial(state: SpectralNESS, rng: np.random.Generator) -> tuple[int, np.ndarray]:
    """Draw an eigenvector of pi with probability equal to its eigenvalue."""
    cdf = np.cumsum(state.populations)
    n = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    n = min(n, len(cdf) - 1)
    return n, state.vectors[:, n].astype(complex)


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Half the trace norm of a - b (Hermitian inputs)."""
    return 0.5 * float(np.abs(la.eigvalsh(a - b)).sum())
