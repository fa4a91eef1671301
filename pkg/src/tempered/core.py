"""Parameter families, characteristic functions, cumulant generating functions
and cumulants for the four tempered stable families.

Families
--------
TSS      tempered stable subordinator, theta = (alpha, delta, lam), alpha in (0,1)
TSPRIME  centered, totally positively skewed tempered stable, theta = (alpha, delta, lam),
         alpha in (0,2)
CTS      classical (two-sided) tempered stable,
         theta = (alpha, delta_p, delta_m, lam_p, lam_m, mu), alpha in (0,2)
NTS      normal tempered stable mixture Z = sqrt(Y) B + beta Y + mu with Y ~ TSS,
         theta = (alpha, beta, delta, lam, mu), alpha in (0,1)

All characteristic-function powers use the principal branch of the complex
logarithm; the base always has a strictly positive real part, so the branch
cut is never crossed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import special

__all__ = [
    "Family",
    "ParamError",
    "UnsupportedFamilyError",
    "DomainError",
    "ParamVector",
    "ParamBounds",
    "Sample",
    "char_fn",
    "cgf",
    "cumulant",
    "cumulants",
]


class ParamError(ValueError):
    """Parameter vector outside the admissible domain."""


class UnsupportedFamilyError(ParamError):
    """Operation not defined for the given family."""


class DomainError(ValueError):
    """Function argument outside its domain."""


class Family(str, enum.Enum):
    TSS = "TSS"
    TSPRIME = "TSprime"
    CTS = "CTS"
    NTS = "NTS"

    @classmethod
    def parse(cls, name: "Family | str") -> "Family":
        if isinstance(name, Family):
            return name
        key = str(name).strip().lower().replace("'", "prime").replace("_", "")
        table = {"tss": cls.TSS, "tsprime": cls.TSPRIME, "cts": cls.CTS, "nts": cls.NTS}
        if key not in table:
            raise ParamError(f"unknown family {name!r}")
        return table[key]


PARAM_NAMES = {
    Family.TSS: ("alpha", "delta", "lambda"),
    Family.TSPRIME: ("alpha", "delta", "lambda"),
    Family.CTS: ("alpha", "delta_p", "delta_m", "lambda_p", "lambda_m", "mu"),
    Family.NTS: ("alpha", "beta", "delta", "lambda", "mu"),
}

DIM = {Family.TSS: 3, Family.TSPRIME: 3, Family.CTS: 6, Family.NTS: 5}

# upper limit of the stability index per family
_ALPHA_SUP = {Family.TSS: 1.0, Family.TSPRIME: 2.0, Family.CTS: 2.0, Family.NTS: 1.0}


@dataclass(frozen=True)
class ParamVector:
    """Tagged parameter vector theta for one of the four families."""

    family: Family
    values: tuple

    def __post_init__(self):
        family = Family.parse(self.family)
        object.__setattr__(self, "family", family)
        vals = tuple(float(v) for v in np.asarray(self.values, dtype=float).ravel())
        object.__setattr__(self, "values", vals)
        self._validate()

    def _validate(self) -> None:
        fam, v = self.family, self.values
        if len(v) != DIM[fam]:
            raise ParamError(f"{fam.value} needs {DIM[fam]} parameters, got {len(v)}")
        if not all(np.isfinite(v)):
            raise ParamError(f"non-finite parameter in {v}")
        alpha = v[0]
        if not 0.0 < alpha < _ALPHA_SUP[fam]:
            raise ParamError(
                f"{fam.value}: alpha={alpha} outside (0, {_ALPHA_SUP[fam]})")
        if fam is Family.NTS:
            scales = (v[2], v[3])
        elif fam is Family.CTS:
            scales = v[1:5]
        else:
            scales = v[1:3]
        if any(s <= 0.0 for s in scales):
            raise ParamError(f"{fam.value}: scale/tempering parameters must be > 0, got {v}")

    # named constructors
    @classmethod
    def tss(cls, alpha, delta, lam) -> "ParamVector":
        return cls(Family.TSS, (alpha, delta, lam))

    @classmethod
    def ts_prime(cls, alpha, delta, lam) -> "ParamVector":
        return cls(Family.TSPRIME, (alpha, delta, lam))

    @classmethod
    def cts(cls, alpha, delta_p, delta_m, lam_p, lam_m, mu) -> "ParamVector":
        return cls(Family.CTS, (alpha, delta_p, delta_m, lam_p, lam_m, mu))

    @classmethod
    def nts(cls, alpha, beta, delta, lam, mu) -> "ParamVector":
        return cls(Family.NTS, (alpha, beta, delta, lam, mu))

    @property
    def dim(self) -> int:
        return DIM[self.family]

    @property
    def names(self) -> tuple:
        return PARAM_NAMES[self.family]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.values))

    def replace(self, values: Iterable[float]) -> "ParamVector":
        return ParamVector(self.family, tuple(values))

    @property
    def location(self) -> float:
        """Location parameter mu (0 for families without one)."""
        if self.family is Family.CTS:
            return self.values[5]
        if self.family is Family.NTS:
            return self.values[4]
        return 0.0

    def centered(self) -> "ParamVector":
        """Same parameters with the location mu set to zero."""
        if self.family is Family.CTS:
            return self.replace(self.values[:5] + (0.0,))
        if self.family is Family.NTS:
            return self.replace(self.values[:4] + (0.0,))
        return self

    def __str__(self) -> str:
        inner = ", ".join(f"{n}={v:g}" for n, v in self.as_dict().items())
        return f"{self.family.value}({inner})"


@dataclass(frozen=True)
class ParamBounds:
    """Box bounds for a parameter vector.

    ``eps`` keeps the stability index and the positive scale parameters away
    from their open-interval endpoints; ``cap`` is the common upper bound M
    (may be infinite, which works well in practice).
    """

    family: Family
    lower: tuple
    upper: tuple
    eps: float = 1e-6
    cap: float = np.inf

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(lo) != DIM[self.family] or len(hi) != DIM[self.family]:
            raise ParamError("bound dimension does not match family")
        if self.eps <= 0:
            raise ParamError("eps must be > 0")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ParamError("need lower < upper componentwise")

    @classmethod
    def default(cls, family: Family | str, eps: float = 1e-6,
                cap: float = np.inf) -> "ParamBounds":
        family = Family.parse(family)
        a_hi = _ALPHA_SUP[family] - eps
        free = (-cap if np.isfinite(cap) else -np.inf,
                cap if np.isfinite(cap) else np.inf)
        pos = (eps, cap)
        spec = {
            Family.TSS: [(eps, a_hi), pos, pos],
            Family.TSPRIME: [(eps, a_hi), pos, pos],
            Family.CTS: [(eps, a_hi), pos, pos, pos, pos, free],
            Family.NTS: [(eps, a_hi), free, pos, pos, free],
        }[family]
        lo, hi = zip(*spec)
        return cls(family, lo, hi, eps=eps, cap=cap)

    def as_scipy(self) -> list:
        return [(lo if np.isfinite(lo) else None, hi if np.isfinite(hi) else None)
                for lo, hi in zip(self.lower, self.upper)]

    def clip(self, values: Sequence[float]) -> np.ndarray:
        return np.clip(np.asarray(values, dtype=float), self.lower, self.upper)

    def contains(self, values: Sequence[float]) -> bool:
        v = np.asarray(values, dtype=float)
        return bool(np.all(v >= self.lower) and np.all(v <= self.upper))

    def boundary_hit(self, values: Sequence[float], tol: float = 1e-6) -> bool:
        v = np.asarray(values, dtype=float)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        near_lo = np.isfinite(lo) & (np.abs(v - lo) <= tol)
        near_hi = np.isfinite(hi) & (np.abs(v - hi) <= tol)
        return bool(np.any(near_lo | near_hi))


@dataclass
class Sample:
    """Ordered real observations plus provenance (seed or source file)."""

    values: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()

    def __len__(self) -> int:
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        arr = self.values
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        return arr


def as_sample_array(sample) -> np.ndarray:
    """Accept a Sample or any array-like and return a 1-D float array."""
    if isinstance(sample, Sample):
        return sample.values
    return np.asarray(sample, dtype=float).ravel()


def _gamma(x: float) -> float:
    # scipy's gamma uses the reflection formula for negative non-integer
    # arguments, which is what Gamma(-alpha) needs here
    return float(special.gamma(x))


def _cpow(base: np.ndarray, expo: float) -> np.ndarray:
    """Principal-branch complex power exp(expo * Log(base))."""
    return np.exp(expo * np.log(base.astype(complex)))


# window around alpha = 1 routed to the log-form CTS branch (Gamma(-1) pole)
_ALPHA1_TOL = 1e-8


def char_fn(theta: ParamVector, t) -> complex | np.ndarray:
    """Characteristic function phi_theta(t); vectorized in t."""
    t_arr = np.asarray(t, dtype=float)
    fam, v = theta.family, theta.values
    it = 1j * t_arr
    if fam is Family.TSS:
        alpha, delta, lam = v
        out = np.exp(delta * _gamma(-alpha) * (_cpow(lam - it, alpha) - lam ** alpha))
    elif fam is Family.TSPRIME:
        alpha, delta, lam = v
        if abs(alpha - 1.0) < _ALPHA1_TOL:
            raise UnsupportedFamilyError("TS' characteristic function needs alpha != 1")
        out = np.exp(delta * _gamma(-alpha)
                     * (_cpow(lam - it, alpha) - lam ** alpha
                        + it * alpha * lam ** (alpha - 1.0)))
    elif fam is Family.CTS:
        alpha, dp, dm, lp, lm, mu = v
        if abs(alpha - 1.0) < _ALPHA1_TOL:
            expo = (it * mu
                    + dp * ((lp - it) * np.log(1.0 - it / lp) + it)
                    + dm * ((lm + it) * np.log(1.0 + it / lm) - it))
        else:
            g = _gamma(-alpha)
            expo = (it * mu
                    + dp * g * (_cpow(lp - it, alpha) - lp ** alpha
                                + it * alpha * lp ** (alpha - 1.0))
                    + dm * g * (_cpow(lm + it, alpha) - lm ** alpha
                                - it * alpha * lm ** (alpha - 1.0)))
        out = np.exp(expo)
    elif fam is Family.NTS:
        alpha, beta, delta, lam, mu = v
        base = lam - it * beta + t_arr ** 2 / 2.0
        out = np.exp(it * mu
                     + delta * _gamma(-alpha) * (_cpow(base, alpha) - lam ** alpha))
    else:  # pragma: no cover
        raise UnsupportedFamilyError(str(fam))
    if np.isscalar(t) or t_arr.ndim == 0:
        return complex(out)
    return out


def cgf(theta: ParamVector, t) -> float | np.ndarray:
    """Cumulant generating function psi_theta(t) on its real domain.

    Defined for TSS (t <= lambda), TS' (t <= lambda) and CTS
    (-lambda_- <= t <= lambda_+). The NTS family is not supported.
    """
    t_arr = np.asarray(t, dtype=float)
    fam, v = theta.family, theta.values
    if fam is Family.NTS:
        raise UnsupportedFamilyError("no cumulant generating function for NTS")
    if fam in (Family.TSS, Family.TSPRIME):
        alpha, delta, lam = v
        if np.any(t_arr > lam):
            raise DomainError(f"cgf domain is t <= lambda = {lam}")
        if abs(alpha - 1.0) < _ALPHA1_TOL and fam is Family.TSPRIME:
            raise UnsupportedFamilyError("TS' cgf needs alpha != 1")
        core = delta * _gamma(-alpha) * ((lam - t_arr) ** alpha - lam ** alpha)
        if fam is Family.TSPRIME:
            core = core + delta * _gamma(-alpha) * t_arr * alpha * lam ** (alpha - 1.0)
        out = core
    else:  # CTS
        alpha, dp, dm, lp, lm, mu = v
        if np.any(t_arr > lp) or np.any(t_arr < -lm):
            raise DomainError(f"cgf domain is [-lambda_-, lambda_+] = [{-lm}, {lp}]")
        if abs(alpha - 1.0) < _ALPHA1_TOL:
            raise DomainError("CTS cgf at alpha = 1 not implemented")
        g = _gamma(-alpha)
        out = (t_arr * mu
               + dp * g * ((lp - t_arr) ** alpha - lp ** alpha
                           + t_arr * alpha * lp ** (alpha - 1.0))
               + dm * g * ((lm + t_arr) ** alpha - lm ** alpha
                           - t_arr * alpha * lm ** (alpha - 1.0)))
    if np.isscalar(t) or t_arr.ndim == 0:
        return float(out)
    return out


def cumulant(theta: ParamVector, m: int) -> float:
    """m-th cumulant kappa_m; closed form for TSS and CTS only."""
    if m < 1 or int(m) != m:
        raise DomainError("cumulant order m must be a positive integer")
    m = int(m)
    fam, v = theta.family, theta.values
    if fam is Family.TSS:
        alpha, delta, lam = v
        return _gamma(m - alpha) * delta / lam ** (m - alpha)
    if fam is Family.CTS:
        alpha, dp, dm, lp, lm, mu = v
        if m == 1:
            return mu
        g = _gamma(m - alpha)
        return g * dp / lp ** (m - alpha) + (-1.0) ** m * g * dm / lm ** (m - alpha)
    raise UnsupportedFamilyError(
        f"cumulants in closed form exist for TSS and CTS only, not {fam.value}")


def cumulants(theta: ParamVector, m_max: int) -> np.ndarray:
    """Cumulants kappa_1 .. kappa_m_max as an array."""
    return np.array([cumulant(theta, m) for m in range(1, m_max + 1)])
