"""Collective spin algebra on the Dicke manifold and the reservoir rate structure.

Basis ordering is ascending magnetization: index ``j`` holds ``|S, m = -S + j>``.
Frequencies are in units of the spin splitting (omega_C = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ClockParams:
    """Physical configuration of the clock.

    ``spin2`` is twice the total spin so half-integer spins stay integral.
    ``beta = math.inf`` is the explicit zero-temperature flag.
    """

    spin2: int
    lam: float
    gamma0: float = 1e-3
    beta: float = 2.0
    omega_c: float = 1.0

    def __post_init__(self):
        if int(self.spin2) != self.spin2 or self.spin2 < 1:
            raise ValueError(f"spin2 must be an integer >= 1, got {self.spin2!r}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam!r}")
        if not self.gamma0 > 0 or not math.isfinite(self.gamma0):
            raise ValueError(f"gamma0 must be positive and finite, got {self.gamma0!r}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0 (math.inf for zero temperature), got {self.beta!r}")
        if self.omega_c != 1.0:
            raise ValueError("omega_c is fixed to 1; rescale gamma0 and beta instead")
        object.__setattr__(self, "spin2", int(self.spin2))

    @property
    def S(self) -> float:
        return self.spin2 / 2

    @property
    def dim(self) -> int:
        return self.spin2 + 1

    @property
    def alpha(self) -> float:
        """Coherent displacement, alpha = lambda * S."""
        return self.lam * self.S

    @property
    def zero_temperature(self) -> bool:
        return math.isinf(self.beta)

    def replace(self, **changes) -> "ClockParams":
        kw = dict(spin2=self.spin2, lam=self.lam, gamma0=self.gamma0, beta=self.beta)
        kw.update(changes)
        return ClockParams(**kw)

    def to_dict(self) -> dict:
        return {
            "spin2": self.spin2,
            "lam": self.lam,
            "gamma0": self.gamma0,
            "beta": None if self.zero_temperature else self.beta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClockParams":
        beta = d.get("beta", 2.0)
        return cls(
            spin2=int(d["spin2"]),
            lam=float(d["lam"]),
            gamma0=float(d.get("gamma0", 1e-3)),
            beta=math.inf if beta is None else float(beta),
        )


def mean_occupation(beta: float) -> float:
    """Bose occupation of the resonant bath mode, 1/(exp(beta) - 1)."""
    if math.isinf(beta):
        return 0.0
    return 1.0 / math.expm1(beta)


def thermal_rates(params: ClockParams) -> tuple[float, float]:
    """Return ``(gamma_plus, gamma_minus)``: absorption and emission rates."""
    nbar = mean_occupation(params.beta)
    return params.gamma0 * nbar, params.gamma0 * (nbar + 1.0)


def ladder_coefficients(spin2: int) -> np.ndarray:
    """sqrt(S(S+1) - m(m+1)) for m = -S .. S-1, i.e. <m+1|S+|m>."""
    S = spin2 / 2
    m = np.arange(spin2) - S
    return np.sqrt(S * (S + 1) - m * (m + 1))


@dataclass(frozen=True)
class CollectiveOps:
    """Dense collective operators plus the bidiagonal data kernels use.

    ``ladder[j] = <j+1|S+|j>``.  Jump operators are ``L_- = S_- + i alpha``
    and ``L_+ = S_+ - i alpha``; the Lindblad rates carry an extra 1/S.
    """

    params: ClockParams
    ladder: np.ndarray
    mvals: np.ndarray
    s_plus: np.ndarray
    s_minus: np.ndarray
    s_z: np.ndarray
    l_minus: np.ndarray
    l_plus: np.ndarray
    gamma_plus: float
    gamma_minus: float
    nbar: float
    alpha: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.params.dim

    @property
    def S(self) -> float:
        return self.params.S

    @property
    def rate_minus(self) -> float:
        """Emission prefactor gamma_-/S."""
        return self.gamma_minus / self.S

    @property
    def rate_plus(self) -> float:
        """Absorption prefactor gamma_+/S."""
        return self.gamma_plus / self.S

    def jumps(self):
        """Yield (kind, rate prefactor, jump operator); kind 0 = emission, 1 = absorption."""
        yield 0, self.rate_minus, self.l_minus
        yield 1, self.rate_plus, self.l_plus

    def energy_diag(self) -> np.ndarray:
        """Diagonal of H_C = omega_C (S_z + S) in the Dicke basis."""
        return self.params.omega_c * (self.mvals + self.S)

    def generator_diagonals(self, alpha: float | None = None):
        """Tridiagonal no-jump generator -1/2 sum_k (gamma_k/S) L_k^dag L_k.

        Returns ``(lower, diag, upper)``.  ``alpha`` overrides the displacement
        (used by time-dependent drives).
        """
        a = self.alpha if alpha is None else alpha
        gm, gp = self.rate_minus, self.rate_plus
        c = self.ladder
        cp2 = np.zeros(self.dim)
        cm2 = np.zeros(self.dim)
        cp2[:-1] = c**2  # <m|S-S+|m>
        cm2[1:] = c**2  # <m|S+S-|m>
        diag = -0.5 * (gm * cm2 + gp * cp2 + (gm + gp) * a * a) + 0j
        # -1/2 * i a (gm+gp) (S+ - S-): S+ on the sub-diagonal, S- on the super-diagonal
        off = 0.5 * a * (gm + gp) * c
        lower = -1j * off
        upper = 1j * off
        return lower, diag, upper

    def effective_generator(self, alpha: float | None = None) -> np.ndarray:
        lower, diag, upper = self.generator_diagonals(alpha)
        return np.diag(diag) + np.diag(lower, -1) + np.diag(upper, 1)


def build_operators(params: ClockParams) -> CollectiveOps:
    if params.spin2 < 1:
        raise ValueError("need 2S >= 1")
    d = params.dim
    c = ladder_coefficients(params.spin2)
    sp = np.diag(c, -1).astype(complex)
    sm = sp.T.copy()
    mvals = np.arange(d) - params.S
    sz = np.diag(mvals).astype(complex)
    a = params.alpha
    eye = np.eye(d)
    l_minus = sm + 1j * a * eye
    l_plus = sp - 1j * a * eye
    gp, gm = thermal_rates(params)
    for arr in (c, mvals, sp, sm, sz, l_minus, l_plus):
        arr.setflags(write=False)
    return CollectiveOps(
        params=params,
        ladder=c,
        mvals=mvals,
        s_plus=sp,
        s_minus=sm,
        s_z=sz,
        l_minus=l_minus,
        l_plus=l_plus,
        gamma_plus=gp,
        gamma_minus=gm,
        nbar=mean_occupation(params.beta),
        alpha=a,
    )
