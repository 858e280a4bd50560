"""Least-squares fits for the resolution, threshold and scaling laws."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r2: float
    model: str
    n: int = 0

    def predict(self, x):
        x = np.asarray(x, float)
        if self.model == "log-log":
            return np.exp(self.intercept) * x**self.slope
        return self.slope * x + self.intercept

    def to_dict(self) -> dict:
        return {"m": self.slope, "b": self.intercept, "r2": self.r2, "model": self.model, "n": self.n}


class FitError(ValueError):
    pass


def _linear(x, y, model: str, min_points: int = 3) -> FitResult:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.shape != y.shape:
        raise FitError("x and y differ in length")
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    if len(x) < min_points:
        raise FitError(f"need at least {min_points} finite points, got {len(x)}")
    res = stats.linregress(x, y)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - res.slope * x - res.intercept) ** 2))
    r2 = 1.0 if ss_tot == 0 else min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    return FitResult(float(res.slope), float(res.intercept), r2, model, len(x))


def tc_frequency(lam, gamma0: float):
    """nu(lambda) = gamma0 sqrt(lambda^2 - 1) / 2pi; nan below the transition."""
    lam = np.asarray(lam, float)
    with np.errstate(invalid="ignore"):
        return gamma0 * np.sqrt(lam**2 - 1.0) / (2 * math.pi)


def fit_linear(x, y) -> FitResult:
    return _linear(x, y, "linear", min_points=2)


def fit_resolution(lams, R, gamma0: float, lam_min: float = 1.1) -> FitResult:
    """R = a_R nu(lambda) + b_R over points with lambda >= ``lam_min``."""
    lams = np.asarray(lams, float)
    keep = lams >= lam_min
    return _linear(tc_frequency(lams[keep], gamma0), np.asarray(R, float)[keep], "resolution-vs-nu")


def fit_power_law(x, y) -> FitResult:
    """Linear fit of ln y against ln x."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise FitError("power-law fit needs positive data")
    return _linear(np.log(x), np.log(y), "log-log")


def fit_threshold_scaling(lams, M_star, S: float, lam_min: float = 1.3, peak_found=None) -> FitResult:
    """M*/S = a_M lambda + b_M over points with lambda >= ``lam_min`` and a genuine peak."""
    lams = np.asarray(lams, float)
    M_star = np.asarray(M_star, float)
    keep = lams >= lam_min
    if peak_found is not None:
        pf = np.asarray(peak_found, bool)
        if np.any(keep & ~pf):
            raise FitError("threshold fit includes points without an accuracy peak (sub-critical data?)")
    return _linear(lams[keep], M_star[keep] / S, "linear")
