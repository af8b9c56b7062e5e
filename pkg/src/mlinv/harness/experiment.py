"""Sweep orchestration: problem generation, replicates, records, CSV."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import descent, eki, langevin, schedule
from ..errors import ConfigError, DivergedError
from ..forward import (
    InverseProblemSpec,
    PointObservation,
    SineFemModel,
    equispaced_points,
)
from .config import ExperimentConfig, ProblemConfig

__all__ = [
    "ExperimentRecord",
    "CSV_FIELDS",
    "build_model",
    "generate_problem",
    "SweepContext",
    "run_sweep",
    "records_to_csv",
    "write_csv",
    "read_records_csv",
]

CSV_FIELDS = (
    "method",
    "algorithm",
    "epsilon",
    "K",
    "schedule_cost",
    "work_units",
    "error_mean",
    "error_stderr",
    "replicates",
    "failures",
    "seed",
)

_KINDS = ("single-level", "multilevel")


@dataclass(frozen=True)
class ExperimentRecord:
    """One aggregated sweep point: a (method, schedule kind, tolerance) cell."""

    method: str
    algorithm: str
    epsilon: float
    K: int
    schedule_cost: float
    work_units: float
    error_mean: float
    error_stderr: float
    replicates: int
    failures: int
    seed: int


def build_model(problem_cfg: ProblemConfig) -> SineFemModel:
    return SineFemModel(
        problem_cfg.n_x, PointObservation(equispaced_points(problem_cfg.n_y))
    )


def generate_problem(problem_cfg: ProblemConfig, model=None) -> InverseProblemSpec:
    """Draw a truth from the prior and synthesize data at the reference level.

    The prior covariance is ``C0 = diag(i ** (-2 * prior_exponent))``.  With
    a positive noise scale the data is ``y = F_ref(truth) + Gamma^{1/2} eta``
    with ``Gamma = noise_scale**2 * I``; the noise-free mode (explicit flag
    or ``noise_scale == 0``, the latter with unit weighting) keeps the exact
    forward image.
    """
    problem_cfg.validate()
    if model is None:
        model = build_model(problem_cfg)
    if model.n_x != problem_cfg.n_x or model.n_y != problem_cfg.n_y:
        raise ConfigError(
            f"model dimensions ({model.n_x}, {model.n_y}) do not match "
            f"({problem_cfg.n_x}, {problem_cfg.n_y})",
            "problem.n_x",
        )
    gamma_scale = problem_cfg.noise_scale
    noise_free = problem_cfg.noise_free or gamma_scale == 0.0
    gamma_diag = np.full(problem_cfg.n_y, gamma_scale**2 if gamma_scale > 0 else 1.0)
    modes = np.arange(1, problem_cfg.n_x + 1, dtype=float)
    c0_diag = modes ** (-2.0 * problem_cfg.prior_exponent)
    rng = np.random.default_rng(np.random.SeedSequence(problem_cfg.truth_seed))
    truth = rng.standard_normal(problem_cfg.n_x) * np.sqrt(c0_diag)
    y = model.evaluate(truth, problem_cfg.reference_level)
    if not noise_free:
        y = y + rng.standard_normal(problem_cfg.n_y) * np.sqrt(gamma_diag)
    return InverseProblemSpec(
        y=y,
        gamma=gamma_diag,
        c0=c0_diag,
        lam=problem_cfg.regularization,
        truth=truth,
    )


def _replicate_rng(base_seed: int, kind_index: int, eps_index: int, replicate: int):
    """Independent counter-based stream for one replicate cell."""
    seq = np.random.SeedSequence(
        entropy=base_seed, spawn_key=(kind_index, eps_index, replicate)
    )
    return np.random.Generator(np.random.Philox(seq))


class SweepContext:
    """Shared state of a sweep: model, problem, references, method constants."""

    def __init__(self, config: ExperimentConfig):
        config.validate()
        self.config = config
        self.model = build_model(config.problem)
        self.problem = generate_problem(config.problem, self.model)
        self.ref_level = config.problem.reference_level
        method = config.method
        self.conv_model = schedule.ConvergenceModel(
            method.c, method.alpha, method.e0, method.bias_constant
        )
        if method.method == "teki":
            self.x_star = eki.tikhonov_solution(self.model, self.problem, self.ref_level)
        elif method.method == "ils":
            # The sampler targets the posterior with unit regularization
            # weight; its mean is the matching Tikhonov solution.
            self.x_star = eki.tikhonov_solution(
                self.model, self.problem, self.ref_level, lam=1.0
            )
            self.posterior = langevin.TikhonovPosterior(self.model, self.problem)
        elif method.method == "gd":
            self.x_star = eki.tikhonov_solution(self.model, self.problem, self.ref_level)
            mu, big_l = descent.quadratic_constants(
                self.model, self.problem, self.ref_level
            )
            self.descent_spec = descent.SmoothConvexSpec(mu, big_l)
        else:  # pragma: no cover - validated earlier
            raise ConfigError(f"unknown method {method.method!r}", "method.method")

    def schedule_for(self, kind: str, epsilon: float) -> schedule.LevelSchedule:
        if kind == "single-level":
            sched = schedule.single_level_schedule(self.conv_model, epsilon)
        else:
            sched = schedule.multilevel_schedule(self.conv_model, epsilon)
        if self.config.method.rounding != "identity":
            sched = sched.rounded(self.config.method.rounding)
        return sched

    def work_units(self, sched) -> float:
        method = self.config.method
        cost = schedule.total_cost(sched)
        if method.method == "gd":
            return cost
        n_inner = int(round(method.tau_interval / method.step_size))
        return method.ensemble_size * n_inner * cost

    def run_replicate(self, kind: str, epsilon: float, rng) -> float:
        """Run one replicate and return its error against the reference."""
        method = self.config.method
        sched = self.schedule_for(kind, epsilon)
        if method.method == "teki":
            run = eki.run_ml_eki(
                self.model,
                self.problem,
                sched,
                ensemble_size=method.ensemble_size,
                tau_interval=method.tau_interval,
                step_size=method.step_size,
                rng=rng,
                variant="teki",
                integrator=method.integrator,
                inflation=method.inflation,
                inflation_kind=method.inflation_kind,
            )
            return eki.teki_error(
                run.means[-1], self.model, self.problem, self.ref_level, self.x_star
            )
        if method.method == "ils":
            run = langevin.run_ml_ils(
                self.posterior,
                sched,
                ensemble_size=method.ensemble_size,
                tau_interval=method.tau_interval,
                step_size=method.step_size,
                rng=rng,
                keep_history=False,
            )
            return langevin.posterior_mean_error(run.means[-1], self.x_star)
        # gd: deterministic multilevel gradient descent from the origin,
        # error measured as the L2 norm of the associated field.
        oracle = lambda x, level: self.model.gradient(x, level, self.problem)
        run = descent.run_multilevel_descent(
            "gd", sched, oracle, self.descent_spec, np.zeros(self.model.n_x)
        )
        return float(np.linalg.norm(run.final_x - self.x_star) / math.pi)


def run_sweep(config: ExperimentConfig, workers: int | None = None):
    """Run all (schedule kind, tolerance, replicate) cells of a sweep.

    Replicates execute concurrently up to the worker count; each owns a
    counter-based random stream derived from the base seed and its cell
    indices, so results do not depend on scheduling order.  Returns the
    list of aggregated records sorted by (kind, tolerance).
    """
    context = SweepContext(config)
    sweep = config.sweep
    if workers is None:
        workers = sweep.workers
    cells = [
        (kind_i, kind, eps_i, float(eps), rep)
        for kind_i, kind in enumerate(_KINDS)
        for eps_i, eps in enumerate(sweep.epsilons)
        for rep in range(sweep.replicates)
    ]

    def run_cell(cell):
        kind_i, kind, eps_i, eps, rep = cell
        rng = _replicate_rng(sweep.base_seed, kind_i, eps_i, rep)
        try:
            return cell, context.run_replicate(kind, eps, rng), None
        except DivergedError as exc:
            return cell, None, exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_cell, cells))
    else:
        outcomes = [run_cell(cell) for cell in cells]

    by_cell = {cell: (result, error) for cell, result, error in outcomes}
    records = []
    for kind_i, kind in enumerate(_KINDS):
        for eps_i, eps in enumerate(sweep.epsilons):
            eps = float(eps)
            errors = []
            failures = 0
            for rep in range(sweep.replicates):
                result, failed = by_cell[(kind_i, kind, eps_i, eps, rep)]
                if failed is not None:
                    failures += 1
                    continue
                errors.append(result)
            n = len(errors)
            mean = float(np.mean(errors)) if n else float("nan")
            stderr = float(np.std(errors, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
            sched = context.schedule_for(kind, eps)
            records.append(
                ExperimentRecord(
                    method=config.method.method,
                    algorithm=kind,
                    epsilon=eps,
                    K=len(sched),
                    schedule_cost=schedule.total_cost(sched),
                    work_units=context.work_units(sched),
                    error_mean=mean,
                    error_stderr=stderr,
                    replicates=n,
                    failures=failures,
                    seed=sweep.base_seed,
                )
            )
    return records


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def records_to_csv(records) -> str:
    """Serialize records deterministically (shortest round-trip floats)."""
    lines = [",".join(CSV_FIELDS)]
    for rec in records:
        lines.append(
            ",".join(_format_value(getattr(rec, name)) for name in CSV_FIELDS)
        )
    return "\n".join(lines) + "\n"


def write_csv(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(records_to_csv(records))


def read_records_csv(path):
    """Parse a sweep CSV back into records."""
    with open(path, "r", encoding="utf-8") as handle:
        lines = [line.strip() for line in handle if line.strip()]
    if not lines or lines[0].split(",") != list(CSV_FIELDS):
        raise ConfigError(f"{path} is not a sweep CSV")
    records = []
    for line in lines[1:]:
        parts = line.split(",")
        records.append(
            ExperimentRecord(
                method=parts[0],
                algorithm=parts[1],
                epsilon=float(parts[2]),
                K=int(parts[3]),
                schedule_cost=float(parts[4]),
                work_units=float(parts[5]),
                error_mean=float(parts[6]),
                error_stderr=float(parts[7]),
                replicates=int(parts[8]),
                failures=int(parts[9]),
                seed=int(parts[10]),
            )
        )
    return records
