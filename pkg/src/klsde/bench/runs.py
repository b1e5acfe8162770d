"""Benchmark runs behind the CLI subcommands; each writes one CSV plus a metadata sidecar."""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path

import numpy as np

from ..baselines import SteppingPlan, bem_second_moment, em_second_moment, step_paths
from ..errors import ConfigError, KlsdeError, NumericalError
from ..klprocess import BasisKind
from ..moments import (exact_mean, exact_second_moment, lyapunov_second_moment, moment_report,
                       second_moment_normal)
from ..montecarlo import BatchSampler, kl_sampler, mc_second_moment, stepping_sampler
from ..sampler import SdeProblem, prepare
from .config import KL_METHODS, STEP_METHODS, ExperimentConfig
from .problems import BenchProblem, build_problem

__all__ = [
    "ConvergenceRow",
    "Reference",
    "CONVERGENCE_HEADER",
    "reference_second_moment",
    "make_sampler",
    "run_convergence",
    "run_trajectory",
    "run_endpoint_gallery",
    "run_sample",
    "run_moments",
    "write_csv",
]

CONVERGENCE_HEADER = ("method", "m", "samples", "estimate", "reference", "weak_error",
                      "std_error", "wall_time_s", "seed")
GUARD_RTOL = 1e-6
NA = "NA"


@dataclass(frozen=True)
class ConvergenceRow:
    method: str
    m: int
    samples: int
    estimate: float
    reference: float
    weak_error: float
    std_error: float
    wall_time_s: float
    seed: int
    strong_error: float | None = None

    def csv_fields(self) -> tuple:
        return tuple(getattr(self, k) for k in CONVERGENCE_HEADER)


@dataclass(frozen=True)
class Reference:
    value: float
    method: str
    error_bound: float
    terms: int
    lyapunov: float | None


def _fmt(v) -> str:
    if v is None:
        return NA
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return NA if math.isnan(v) else "%.17g" % v
    return str(v)


def write_csv(path, header, rows) -> Path:
    """Write ``rows`` with 17 significant digits per float and ``NA`` for missing values."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _write_meta(out: Path, cfg: ExperimentConfig, bp: BenchProblem, command: str, extra: dict):
    try:
        version = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        version = "unknown"
    items = {"command": command, "problem_kind": bp.kind, "package_version": version}
    items.update({f"param_{k}": v for k, v in sorted(bp.params.items())})
    if bp.kind == "turbulent_diffusion":
        # no horizon is prescribed for this experiment; flag the default
        items["t_end_assumed"] = "t_end" not in cfg.params
    items.update(seed=cfg.seed, samples=cfg.samples, timing=cfg.timing)
    items.update(extra)
    write_csv(Path(str(out) + ".meta.csv"), ("key", "value"), items.items())


def _load(cfg: ExperimentConfig) -> BenchProblem:
    return build_problem(cfg.problem_kind, dict(cfg.params), cfg.base_dir)


def reference_second_moment(bp: BenchProblem, rel_tol: float = 1e-10) -> Reference:
    """High-accuracy ``E |X_t|^2`` with a Lyapunov cross-check.

    Uses the eigenvalue series when ``L`` is normal and ``B = c I``, the
    general series otherwise. For turbulent diffusion the Lyapunov value must
    agree to ``1e-6`` relative before any sampling starts.
    """
    prob = bp.problem
    if prob.is_normal() and prob.scalar_noise() is not None:
        res, label = second_moment_normal(prob, rel_tol), "normal_eigen_series"
    else:
        res, label = exact_second_moment(prob, rel_tol), "series"
    lyap = None
    if prob.basis.kind is BasisKind.WIENER and (bp.kind == "turbulent_diffusion" or prob.n <= 64):
        lyap = lyapunov_second_moment(prob)
        gap = abs(res.value - lyap) / abs(res.value)
        if bp.kind == "turbulent_diffusion" and gap > GUARD_RTOL:
            raise NumericalError(
                f"reference mismatch: series {res.value!r} vs Lyapunov {lyap!r} (rel {gap:.2e})")
    return Reference(res.value, label, res.tail_bound, res.terms, lyap)


def _lcm(values) -> int:
    return math.lcm(*values) if values else 1


def make_sampler(prob: SdeProblem, method: str, m: int, seed: int, substeps: int = 1) -> BatchSampler:
    """Batch sampler for ``method`` with ``m`` expansion terms or time steps."""
    if method in KL_METHODS:
        plan = prepare(prob, m, KL_METHODS[method])
        return kl_sampler(plan, seed, fastpath=(method == "kl_normal"))
    if method in STEP_METHODS:
        return stepping_sampler(SteppingPlan(prob, m, STEP_METHODS[method], substeps), seed)
    raise ConfigError(f"unknown method {method!r}")


def run_convergence(cfg: ExperimentConfig) -> list[ConvergenceRow]:
    """Monte Carlo ``E |X^m|^2`` per (method, m) against the reference; writes ``cfg.out`` if set.

    With ``cfg.couple`` the stepping schemes of one method share a Brownian
    path across the m-grid (increments summed from the finest common grid);
    expansion methods are always coupled through their shared coefficients.
    """
    bp = _load(cfg)
    ref = reference_second_moment(bp, cfg.rel_tol)
    rows = []
    for method in cfg.methods:
        grid = cfg.grid(method)
        fine = _lcm(grid) if (cfg.couple and method in STEP_METHODS) else None
        for m in grid:
            t0 = time.perf_counter()
            sampler = make_sampler(bp.problem, method, m, cfg.seed, fine // m if fine else 1)
            est = mc_second_moment(sampler, cfg.samples, workers=cfg.workers)
            wall = time.perf_counter() - t0
            rows.append(ConvergenceRow(
                method=method, m=m, samples=cfg.samples, estimate=est.mean, reference=ref.value,
                weak_error=abs(est.mean - ref.value), std_error=est.std_error,
                wall_time_s=wall if cfg.timing else math.nan, seed=cfg.seed))
    if cfg.out:
        write_csv(cfg.out, CONVERGENCE_HEADER, (r.csv_fields() for r in rows))
        _write_meta(Path(cfg.out), cfg, bp, "converge", {
            "reference": ref.value, "reference_method": ref.method,
            "reference_error_bound": ref.error_bound, "reference_terms": ref.terms,
            "lyapunov_reference": ref.lyapunov, "coupled_steps": cfg.couple})
    return rows


def run_trajectory(cfg: ExperimentConfig) -> np.ndarray:
    """One seeded stepping path; rows ``t, component_1, ..., component_n``."""
    bp = _load(cfg)
    plan = SteppingPlan(bp.problem, cfg.trajectory_steps, STEP_METHODS[cfg.trajectory_scheme])
    path = step_paths(plan, cfg.seed, 0, 1, trajectory=True)[0]
    table = np.column_stack([plan.times(), path])
    if cfg.out:
        header = ["t"] + [f"component_{i + 1}" for i in range(bp.problem.n)]
        write_csv(cfg.out, header, table.tolist())
        _write_meta(Path(cfg.out), cfg, bp, "trajectory",
                    {"scheme": cfg.trajectory_scheme, "steps": cfg.trajectory_steps})
    return table


def run_endpoint_gallery(cfg: ExperimentConfig) -> np.ndarray:
    """Exact mean and ``cfg.realizations`` seeded expansion samples at ``t_end``.

    Rows are state components (grid points for the heat problem); columns
    ``x, mean, realization_1, ...``.
    """
    bp = _load(cfg)
    prob = bp.problem
    cols = [bp.coords, exact_mean(prob)]
    if cfg.realizations:
        plan = prepare(prob, cfg.gallery_m, KL_METHODS[cfg.gallery_method])
        draws = kl_sampler(plan, cfg.seed, fastpath=(cfg.gallery_method == "kl_normal"))(0, cfg.realizations)
        cols.extend(draws)
    table = np.column_stack(cols)
    if cfg.out:
        header = ["x", "mean"] + [f"realization_{j + 1}" for j in range(cfg.realizations)]
        write_csv(cfg.out, header, table.tolist())
        _write_meta(Path(cfg.out), cfg, bp, "gallery",
                    {"method": cfg.gallery_method, "m": cfg.gallery_m})
    return table


def run_sample(cfg: ExperimentConfig) -> np.ndarray:
    """``cfg.samples`` endpoint samples of the first method at the first m of its grid."""
    bp = _load(cfg)
    method = cfg.methods[0]
    m = cfg.grid(method)[0]
    sampler = make_sampler(bp.problem, method, m, cfg.seed)
    chunk = 4096
    x = np.concatenate([sampler(s, min(chunk, cfg.samples - s)) for s in range(0, cfg.samples, chunk)])
    if cfg.out:
        header = ["sample"] + [f"component_{i + 1}" for i in range(bp.problem.n)]
        rows = ([j] + list(row) for j, row in enumerate(x))
        write_csv(cfg.out, header, rows)
        _write_meta(Path(cfg.out), cfg, bp, "sample", {"method": method, "m": m})
    return x


MOMENTS_HEADER = ("m", "second_moment_exact", "second_moment_truncated", "weak_error_exact",
                  "weak_error_bound", "em_second_moment", "bem_second_moment")


def run_moments(cfg: ExperimentConfig) -> list[tuple]:
    """Deterministic moment table over the union of the configured m-grids."""
    bp = _load(cfg)
    prob = bp.problem
    rep = moment_report(prob, cfg.rel_tol)
    ms = sorted({m for method in cfg.methods for m in cfg.grid(method)})
    rows = []
    for m in ms:
        try:
            bound = rep.weak_error_bound(m)
        except KlsdeError:
            bound = None
        rows.append((m, rep.second_moment_exact, rep.second_moment_truncated(m),
                     rep.weak_error_exact(m), bound, em_second_moment(prob, m),
                     bem_second_moment(prob, m)))
    if cfg.out:
        write_csv(cfg.out, MOMENTS_HEADER, rows)
        lyap = lyapunov_second_moment(prob) if prob.basis.kind is BasisKind.WIENER else None
        _write_meta(Path(cfg.out), cfg, bp, "moments", {
            "terms_used": rep.terms_used, "error_bound": rep.tail_bound,
            "certified": rep.certified, "lyapunov_reference": lyap})
    return rows
