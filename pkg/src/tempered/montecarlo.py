"""Monte Carlo harness: simulate, fit each configured estimator per
replication, and aggregate bias / RMSE / MAD / coverage / runtime.

Replication r always draws from the stream keyed by (base seed, r), so a run
is bitwise deterministic no matter how the replications are distributed over
workers. Failed fits are recorded and excluded from the aggregates.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import DIM, Family, ParamBounds, ParamVector
from .estimate import EstimationResult, fit
from .inference import asymptotic_ci, coverage, fisher_information
from .simulate import sample_cts, sample_nts, sample_tss, sample_ts_prime, spawn_seed

__all__ = ["MCConfig", "MCReport", "MethodStats", "run_mc", "report_to_table"]

_GREEK = {"alpha": "α", "beta": "β", "delta": "δ",
          "delta_p": "δ+", "delta_m": "δ−",
          "lambda": "λ", "lambda_p": "λ+", "lambda_m": "λ−",
          "mu": "μ"}


@dataclass(frozen=True)
class MCConfig:
    family: str
    theta0: tuple
    n_obs: int
    replications: int
    methods: tuple = ("mle",)
    seed: int = 0
    parallelism: int = 1
    gamma: float = 0.01
    gmm_R: int | None = None
    gmc_p: int | None = None
    ts_prime_c: float = 2.0
    eps: float = 1e-6
    compute_ci: bool = False
    ci_level: float = 0.95

    def __post_init__(self):
        object.__setattr__(self, "theta0", tuple(float(v) for v in self.theta0))
        object.__setattr__(self, "methods", tuple(str(m).lower() for m in self.methods))
        fam = Family.parse(self.family)
        object.__setattr__(self, "family", fam.value)
        if self.replications < 1:
            raise ValueError("need at least one replication")
        if self.n_obs < DIM[fam]:
            raise ValueError("n_obs must be at least the parameter dimension")

    @property
    def theta(self) -> ParamVector:
        return ParamVector(self.family, self.theta0)

    @classmethod
    def from_dict(cls, d: dict) -> "MCConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})

    @classmethod
    def from_json(cls, text: str) -> "MCConfig":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MethodStats:
    """Aggregates for one estimator: per-parameter bias, RMSE, MAD and CI
    coverage, plus mean runtime, boundary rate and failure count."""

    method: str
    bias: np.ndarray
    rmse: np.ndarray
    mad: np.ndarray
    coverage: np.ndarray | None
    mean_runtime_seconds: float
    boundary_rate: float
    n_used: int
    failures: int
    estimates: np.ndarray = field(repr=False, default=None)


@dataclass
class MCReport:
    family: str
    theta0: tuple
    param_names: tuple
    n_obs: int
    replications: int
    stats: dict  # method -> MethodStats

    def method(self, name: str) -> MethodStats:
        return self.stats[name.lower()]


def _simulate(cfg: MCConfig, rep: int):
    seed = spawn_seed(cfg.seed, rep)
    theta = cfg.theta
    fam = theta.family
    if fam is Family.TSS:
        return sample_tss(theta, cfg.n_obs, seed)[0]
    if fam is Family.CTS:
        return sample_cts(theta, cfg.n_obs, seed, c=cfg.ts_prime_c)
    if fam is Family.NTS:
        return sample_nts(theta, cfg.n_obs, seed)
    return sample_ts_prime(theta, cfg.ts_prime_c, cfg.n_obs, seed)[0]


def _fit_kwargs(cfg: MCConfig, method: str) -> dict:
    if method == "gmm":
        return {"R": cfg.gmm_R} if cfg.gmm_R else {}
    if method == "cgmm":
        return {"gamma": cfg.gamma}
    if method == "gmc":
        return {"p": cfg.gmc_p} if cfg.gmc_p else {}
    return {}


def _run_replication(cfg: MCConfig, rep: int) -> dict:
    sample = _simulate(cfg, rep)
    bounds = ParamBounds.default(cfg.family, eps=cfg.eps)
    out = {}
    for method in cfg.methods:
        try:
            res: EstimationResult = fit(sample, cfg.family, method, bounds,
                                        **_fit_kwargs(cfg, method))
            ci = None
            if cfg.compute_ci and Family.parse(cfg.family) is Family.TSS:
                info = fisher_information(res.theta_hat)
                ci = asymptotic_ci(res.theta_hat, info, cfg.n_obs, cfg.ci_level)
            out[method] = {
                "ok": True,
                "values": tuple(res.theta_hat.values),
                "runtime": res.runtime_seconds,
                "boundary": res.boundary_hit,
                "converged": res.converged,
                "ci": None if ci is None else (tuple(ci.lower), tuple(ci.upper)),
            }
        except Exception as exc:  # noqa: BLE001 - a failed fit must not kill the run
            out[method] = {"ok": False, "error": f"{type(exc).__name__}: {exc}"}
    return out


def run_mc(cfg: MCConfig) -> MCReport:
    """Run the full replication loop, optionally across a process pool."""
    reps = range(cfg.replications)
    if cfg.parallelism > 1:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            results = list(pool.map(_run_replication, [cfg] * cfg.replications,
                                    reps, chunksize=4))
    else:
        results = [_run_replication(cfg, r) for r in reps]

    theta0 = np.asarray(cfg.theta0)
    names = cfg.theta.names
    stats: dict[str, MethodStats] = {}
    from .inference import ConfidenceInterval  # local to keep pickling light

    for method in cfg.methods:
        rows = [r[method] for r in results]
        ok = [r for r in rows if r["ok"]]
        failures = len(rows) - len(ok)
        if not ok:
            stats[method] = MethodStats(method, np.full_like(theta0, np.nan),
                                        np.full_like(theta0, np.nan),
                                        np.full_like(theta0, np.nan), None,
                                        float("nan"), float("nan"), 0, failures)
            continue
        est = np.array([r["values"] for r in ok])
        err = est - theta0[None, :]
        cis = [ConfidenceInterval(np.asarray(r["ci"][0]), np.asarray(r["ci"][1]),
                                  cfg.ci_level)
               for r in ok if r.get("ci") is not None]
        cov = coverage(cis, cfg.theta) if cis else None
        stats[method] = MethodStats(
            method=method,
            bias=err.mean(axis=0),
            rmse=np.sqrt((err ** 2).mean(axis=0)),
            mad=np.median(np.abs(err), axis=0),
            coverage=cov,
            mean_runtime_seconds=float(np.mean([r["runtime"] for r in ok])),
            boundary_rate=float(np.mean([r["boundary"] for r in ok])),
            n_used=len(ok),
            failures=failures,
            estimates=est,
        )
    return MCReport(family=cfg.family, theta0=cfg.theta0, param_names=names,
                    n_obs=cfg.n_obs, replications=cfg.replications, stats=stats)


def report_to_table(report: MCReport, fmt: str = "csv") -> str:
    """Render an MCReport as CSV (long form) or an aligned text table whose
    columns follow the bias (RMSE) [MAD] layout of the study tables."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["method", "n", "parameter", "bias", "rmse", "mad",
                         "coverage", "mean_runtime_seconds", "boundary_rate",
                         "failures"])
        for method, st in report.stats.items():
            for i, name in enumerate(report.param_names):
                cov = "" if st.coverage is None else f"{st.coverage[i]:.6g}"
                writer.writerow([method, report.n_obs, name,
                                 f"{st.bias[i]:.6g}", f"{st.rmse[i]:.6g}",
                                 f"{st.mad[i]:.6g}", cov,
                                 f"{st.mean_runtime_seconds:.6g}",
                                 f"{st.boundary_rate:.6g}", st.failures])
        return buf.getvalue()
    if fmt != "text":
        raise ValueError("fmt must be 'csv' or 'text'")
    cols = [_GREEK.get(n, n) for n in report.param_names]
    header = ["method", "n"] + cols + ["time"]
    lines = []
    for method, st in report.stats.items():
        cells = [f"{st.bias[i]:.3g} ({st.rmse[i]:.3g}) [{st.mad[i]:.3g}]"
                 for i in range(len(report.param_names))]
        lines.append([method, str(report.n_obs)] + cells
                     + [f"{st.mean_runtime_seconds:.3g}"])
    widths = [max(len(h), *(len(row[i]) for row in lines)) if lines else len(h)
              for i, h in enumerate(header)]
    out = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    for row in lines:
        out.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(out) + "\n"
