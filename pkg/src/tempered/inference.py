"""Fisher information, asymptotic confidence intervals and coverage.

Restricted to the TSS family: its series density is the only one stable
enough for the nested differentiation/quadrature (the FFT densities of the
two-sided families make the same computation numerically unreliable).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from .core import Family, ParamVector, UnsupportedFamilyError
from .density import EvaluationError, family_grid, logpdf_tss

__all__ = ["FisherInfo", "ConfidenceInterval", "fisher_information",
           "asymptotic_ci", "coverage"]


@dataclass(frozen=True)
class FisherInfo:
    matrix: np.ndarray
    condition_number: float


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: np.ndarray
    upper: np.ndarray
    level: float

    def contains(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        return (v >= self.lower) & (v <= self.upper)


def _score(theta: ParamVector, y: float, rel_step: float) -> np.ndarray:
    v = np.asarray(theta.values)
    out = np.empty(v.size)
    for i in range(v.size):
        h = rel_step * max(abs(v[i]), 1e-8)
        up = v.copy()
        dn = v.copy()
        up[i] += h
        dn[i] -= h
        out[i] = (logpdf_tss(theta.replace(up), y)
                  - logpdf_tss(theta.replace(dn), y)) / (2.0 * h)
    return out


def fisher_information(theta: ParamVector, rel_step: float = 1e-5,
                       q_hi: float = 0.99999) -> FisherInfo:
    """I(theta) = integral of score outer products against the density,
    by adaptive quadrature over (0, q_hi-quantile) split at the mode."""
    if theta.family is not Family.TSS:
        raise UnsupportedFamilyError("Fisher information is implemented for TSS only")
    grid = family_grid(theta)
    mode = float(grid.x[int(np.argmax(grid.values))])
    hi = float(grid.quantile(q_hi))

    def integrand(y: float) -> np.ndarray:
        f = np.exp(logpdf_tss(theta, y))
        if not np.isfinite(f) or f < 1e-280:
            return np.zeros((theta.dim, theta.dim))
        s = _score(theta, y, rel_step)
        return np.outer(s, s) * f

    total = np.zeros((theta.dim, theta.dim))
    err_total = 0.0
    for a, b in ((0.0, mode), (mode, hi)):
        val, err = integrate.quad_vec(integrand, a, b, epsabs=1e-9, epsrel=1e-6)
        total += val
        err_total += float(err)
    if not np.all(np.isfinite(total)) or err_total > 1e-3 * max(np.abs(total).max(), 1.0):
        raise EvaluationError(
            f"Fisher quadrature did not converge (error estimate {err_total:.2e})")
    total = 0.5 * (total + total.T)
    return FisherInfo(matrix=total,
                      condition_number=float(np.linalg.cond(total)))


def asymptotic_ci(theta_hat: ParamVector, info: FisherInfo, n: int,
                  level: float = 0.95) -> ConfidenceInterval:
    """Componentwise theta_k +/- z * sqrt((I^-1)_kk / n)."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    try:
        inv = np.linalg.inv(info.matrix)
    except np.linalg.LinAlgError as exc:
        raise EvaluationError(f"singular Fisher information: {exc}") from exc
    var = np.diag(inv)
    if np.any(var <= 0.0):
        raise EvaluationError("non-positive asymptotic variance")
    z = stats.norm.ppf(0.5 * (1.0 + level))
    hw = z * np.sqrt(var / n)
    v = theta_hat.as_array()
    return ConfidenceInterval(lower=v - hw, upper=v + hw, level=level)


def coverage(intervals, theta0: ParamVector, level: float | None = None) -> np.ndarray:
    """Fraction of intervals containing theta0, per component."""
    v0 = theta0.as_array()
    hits = np.zeros(v0.size)
    count = 0
    for ci in intervals:
        if ci is None:
            continue
        if level is not None and abs(ci.level - level) > 1e-12:
            continue
        hits += ci.contains(v0)
        count += 1
    if count == 0:
        return np.full(v0.size, np.nan)
    return hits / count
