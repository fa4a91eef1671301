"""Random variate generation for the four families with reproducible,
counter-based seeding (Philox streams; identical seed implies an identical
sample, independent of process layout)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .core import DomainError, Family, ParamVector, Sample, UnsupportedFamilyError
from .density import stable_scale_from_levy, ts_prime_shift

__all__ = [
    "SamplerStats",
    "make_rng",
    "spawn_seed",
    "sample_stable_subordinator",
    "sample_skewed_stable",
    "sample_tss",
    "sample_ts_prime",
    "sample_cts",
    "sample_nts",
]


@dataclass
class SamplerStats:
    """Proposal bookkeeping of an acceptance-rejection run."""

    proposals: int = 0
    acceptances: int = 0

    @property
    def acceptance_rate(self) -> float:
        if self.proposals == 0:
            return 0.0
        return self.acceptances / self.proposals


def make_rng(seed) -> np.random.Generator:
    """Philox generator from an integer seed / SeedSequence; passthrough for
    an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def spawn_seed(base_seed: int, index: int) -> np.random.SeedSequence:
    """Deterministic per-replication stream key, independent of scheduling."""
    return np.random.SeedSequence((int(base_seed), int(index)))


def _std_skewed_stable(alpha: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Chambers-Mallows-Weron draws of the totally positively skewed stable
    law S(alpha, beta=1, scale=1, location=0) in the 1-parametrization."""
    if abs(alpha - 1.0) < 1e-8:
        raise DomainError("stable generation needs alpha != 1")
    u = rng.uniform(-np.pi / 2.0, np.pi / 2.0, size=n)
    w = rng.standard_exponential(size=n)
    zeta = np.tan(np.pi * alpha / 2.0)
    b = np.arctan(zeta) / alpha
    s = (1.0 + zeta * zeta) ** (1.0 / (2.0 * alpha))
    au = alpha * (u + b)
    return (s * np.sin(au) / np.cos(u) ** (1.0 / alpha)
            * (np.cos(u - au) / w) ** ((1.0 - alpha) / alpha))


def sample_skewed_stable(alpha: float, delta: float, n: int, seed) -> np.ndarray:
    """n draws of S(alpha, delta): the stable law with Levy measure
    delta r^(-1-alpha) on (0, inf); one-sided for alpha < 1, two-sided and
    totally positively skewed for alpha in (1, 2)."""
    if not (0.0 < alpha < 2.0):
        raise DomainError("alpha must be in (0, 2)")
    if delta <= 0.0:
        raise DomainError("delta must be > 0")
    rng = make_rng(seed)
    sigma = stable_scale_from_levy(alpha, delta)
    return sigma * _std_skewed_stable(alpha, n, rng)


def sample_stable_subordinator(alpha: float, delta: float, n: int, seed) -> Sample:
    """n i.i.d. draws of the stable subordinator S(alpha, delta), alpha in (0,1)."""
    if not (0.0 < alpha < 1.0):
        raise DomainError("subordinator needs alpha in (0, 1)")
    vals = sample_skewed_stable(alpha, delta, n, seed)
    return Sample(vals, {"kind": "simulated", "law": "stable_subordinator",
                         "alpha": alpha, "delta": delta, "seed": repr(seed)})


def _rejection_loop(propose, log_accept, n: int, rng: np.random.Generator):
    """Vectorized acceptance-rejection: accept proposal v iff U <= exp(log_accept(v)),
    with log-acceptance > 0 treated as always-accept."""
    out = np.empty(n)
    got = 0
    stats = SamplerStats()
    chunk = max(4096, n)
    while got < n:
        v = propose(chunk, rng)
        u = rng.uniform(size=chunk)
        keep = np.log(u) <= log_accept(v)
        k = v[keep]
        stats.proposals += chunk
        stats.acceptances += k.size
        take = min(k.size, n - got)
        out[got:got + take] = k[:take]
        got += take
        rate = max(stats.acceptances / stats.proposals, 1e-4)
        chunk = int(min(max(4096, 1.2 * (n - got) / rate), 4_000_000))
    # proposals generated after the quota was filled are still counted; the
    # unused acceptances keep the rate estimate unbiased
    return out, stats


def sample_tss(theta: ParamVector, n: int, seed) -> tuple[Sample, SamplerStats]:
    """Exact TSS draws: propose V ~ S(alpha, delta), accept iff U <= exp(-lambda V)."""
    if theta.family is not Family.TSS:
        raise UnsupportedFamilyError("sample_tss expects a TSS parameter vector")
    alpha, delta, lam = theta.values
    rng = make_rng(seed)
    sigma = stable_scale_from_levy(alpha, delta)
    propose = lambda m, g: sigma * _std_skewed_stable(alpha, m, g)
    vals, stats = _rejection_loop(propose, lambda v: -lam * v, n, rng)
    return Sample(vals, {"kind": "simulated", "family": "TSS",
                         "theta": theta.values, "seed": repr(seed)}), stats


def sample_ts_prime(theta: ParamVector, c: float, n: int,
                    seed) -> tuple[Sample, SamplerStats]:
    """Approximate TS' draws via the shifted-rejection scheme: fix c > 0,
    propose V ~ S(alpha, delta), accept iff U <= exp(-lambda (V + c)) (ratios
    above one always accept), return V minus the centering shift.

    The always-accept region V < -c (possible only for alpha > 1) is what
    makes the sampler approximate; larger c shrinks the error and the
    acceptance rate together.
    """
    if theta.family is not Family.TSPRIME:
        raise UnsupportedFamilyError("sample_ts_prime expects a TS' parameter vector")
    if c <= 0.0:
        raise DomainError("cutoff c must be > 0")
    alpha, delta, lam = theta.values
    rng = make_rng(seed)
    sigma = stable_scale_from_levy(alpha, delta)
    shift = ts_prime_shift(alpha, delta, lam)
    # propose already in target coordinates: the acceptance exponential then
    # tilts the stable factor exactly and the always-accept cap only touches
    # the thin left tail of the target law
    propose = lambda m, g: sigma * _std_skewed_stable(alpha, m, g) - shift
    vals, stats = _rejection_loop(propose, lambda v: -lam * (v + c), n, rng)
    return Sample(vals, {"kind": "simulated", "family": "TSprime",
                         "theta": theta.values, "c": c,
                         "seed": repr(seed)}), stats


def sample_cts(theta: ParamVector, n: int, seed, c: float = 2.0) -> Sample:
    """CTS draws from the difference of two independent TS' components:
    X = Y+ - Y- + mu."""
    if theta.family is not Family.CTS:
        raise UnsupportedFamilyError("sample_cts expects a CTS parameter vector")
    alpha, dp, dm, lp, lm, mu = theta.values
    rng = make_rng(seed)
    rng_p, rng_m = rng.spawn(2)
    yp, _ = sample_ts_prime(ParamVector.ts_prime(alpha, dp, lp), c, n, rng_p)
    ym, _ = sample_ts_prime(ParamVector.ts_prime(alpha, dm, lm), c, n, rng_m)
    vals = yp.values - ym.values + mu
    return Sample(vals, {"kind": "simulated", "family": "CTS",
                         "theta": theta.values, "c": c, "seed": repr(seed)})


def sample_nts(theta: ParamVector, n: int, seed) -> Sample:
    """NTS draws by subordination: Z = sqrt(Y) B + beta Y + mu with exact
    TSS draws Y and independent standard normal B."""
    if theta.family is not Family.NTS:
        raise UnsupportedFamilyError("sample_nts expects an NTS parameter vector")
    alpha, beta, delta, lam, mu = theta.values
    rng = make_rng(seed)
    rng_y, rng_b = rng.spawn(2)
    y, _ = sample_tss(ParamVector.tss(alpha, delta, lam), n, rng_y)
    b = make_rng(rng_b).standard_normal(n)
    vals = np.sqrt(y.values) * b + beta * y.values + mu
    return Sample(vals, {"kind": "simulated", "family": "NTS",
                         "theta": theta.values, "seed": repr(seed)})
