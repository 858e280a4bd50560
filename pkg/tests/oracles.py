"""Independent reference implementations used by the tests.

Nothing here imports the package internals: operators are rebuilt from the
angular-momentum formulas, the generator is assembled by brute force on the
matrix-unit basis, and tick/merit statistics are computed with plain loops.
"""

import math

import numpy as np
import scipy.linalg as la


def spin_matrices(S: float):
    """(J+, J-, Jz) in the ascending-m basis from <m+1|J+|m> = sqrt((S-m)(S+m+1))."""
    d = int(round(2 * S)) + 1
    m = -S + np.arange(d)
    jp = np.zeros((d, d), complex)
    for j in range(d - 1):
        jp[j + 1, j] = math.sqrt((S - m[j]) * (S + m[j] + 1))
    return jp, jp.conj().T, np.diag(m).astype(complex)


def jump_ops(S: float, lam: float, gamma0: float, beta: float):
    """[(rate/S, L)] for emission and absorption, rates from the Bose factor."""
    jp, jm, _ = spin_matrices(S)
    d = jp.shape[0]
    a = lam * S
    nbar = 0.0 if math.isinf(beta) else 1.0 / (math.exp(beta) - 1.0)
    Lm = jm + 1j * a * np.eye(d)
    Lp = jp - 1j * a * np.eye(d)
    return [(gamma0 * (nbar + 1) / S, Lm), (gamma0 * nbar / S, Lp)]


def lindblad(rho, jumps):
    out = np.zeros_like(rho, dtype=complex)
    for g, L in jumps:
        LdL = L.conj().T @ L
        out += g * (L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL))
    return out


def liouvillian(jumps, d):
    """Matrix of rho -> L[rho] on row-major flattened rho, built column by column."""
    Lsup = np.zeros((d * d, d * d), complex)
    for k in range(d * d):
        E = np.zeros(d * d, complex)
        E[k] = 1.0
        Lsup[:, k] = lindblad(E.reshape(d, d), jumps).ravel()
    return Lsup


def steady_state(jumps, d):
    ns = la.null_space(liouvillian(jumps, d), rcond=1e-12)
    rho = ns[:, 0].reshape(d, d)
    rho = rho / np.trace(rho)
    return 0.5 * (rho + rho.conj().T)


def evolve(rho0, jumps, t):
    d = rho0.shape[0]
    return (la.expm(liouvillian(jumps, d) * t) @ rho0.ravel()).reshape(d, d)


def first_passage(times, increments, M, horizon=np.inf):
    """Loop over events: tick whenever the running count first reaches the next level."""
    ticks, level, n = [], M, 0
    for t, a in zip(times, increments):
        if t > horizon:
            break
        n += a
        while n >= level:
            ticks.append(t)
            level += M
    return np.array(ticks)


def pooled_merit(wait_groups):
    w = np.concatenate([np.asarray(g, float) for g in wait_groups])
    mean = w.mean()
    var = w.var()
    return 1 / mean, mean**2 / var, var / mean


def poisson_stream(rate, n, rng):
    return np.cumsum(rng.exponential(1 / rate, n))
