"""Command line interface.

Subcommands
-----------
schedule       print single-level and multilevel schedules for a tolerance grid
forward-check  report the forward-map convergence rate on the first mode
descent        one multilevel gradient-descent run on the PDE test problem
eki            one (T)EKI run at a given tolerance
ils            one interacting-Langevin run at a given tolerance
sweep          full cost-versus-error experiment, CSV and SVG artifacts
plot           render an existing sweep CSV to SVG

Exit codes: 0 success, 1 configuration error, 2 divergence in a single run.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .. import descent, eki, langevin, schedule
from ..errors import ConfigError, DivergedError
from .config import ExperimentConfig, load_config
from .experiment import SweepContext, read_records_csv, run_sweep, write_csv
from .plot import emit_plot
from .presets import preset, preset_names


def _add_common(parser):
    parser.add_argument("--config", type=Path, help="JSON configuration file")
    parser.add_argument(
        "--preset",
        choices=preset_names(),
        help="named built-in configuration (ignored when --config is given)",
    )
    parser.add_argument("--seed", type=int, help="override the base seed")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--workers", type=int, help="concurrent replicate workers")


def _resolve_config(args, default_preset: str) -> ExperimentConfig:
    if args.config is not None:
        config = load_config(args.config)
    else:
        config = preset(args.preset or default_preset)
    if args.seed is not None:
        config.sweep.base_seed = args.seed
    if args.workers is not None:
        config.sweep.workers = args.workers
    if args.out is not None:
        config.output.directory = str(args.out)
    return config.validate()


def _cmd_schedule(args) -> int:
    model = schedule.ConvergenceModel(args.c, args.alpha, args.e0, args.bias)
    print("kind,epsilon,K,cost,levels")
    for eps in args.epsilons:
        for maker in (schedule.single_level_schedule, schedule.multilevel_schedule):
            sched = maker(model, eps)
            if args.rounding != "identity":
                sched = sched.rounded(args.rounding)
            levels = " ".join(f"{l:.4g}" for l in sched.levels)
            print(
                f"{sched.kind},{eps:g},{len(sched)},"
                f"{schedule.total_cost(sched):.6g},{levels}"
            )
    return 0


def _cmd_forward_check(args) -> int:
    from ..forward import SineFemModel

    model = SineFemModel(1)
    x = np.array([1.0])
    reference = model.evaluate(x, args.reference)
    levels = [2.0**k for k in range(4, args.max_exponent + 1)]
    gaps = []
    print("level,error")
    for level in levels:
        gap = float(np.linalg.norm(model.evaluate(x, level) - reference))
        gaps.append(gap)
        print(f"{level:g},{gap:.6e}")
    rate = -np.polyfit(np.log(levels), np.log(gaps), 1)[0]
    print(f"fitted rate: {rate:.3f}")
    return 0


def _cmd_descent(args) -> int:
    config = _resolve_config(args, "gd-desk")
    config.method.method = "gd"
    context = SweepContext(config)
    sched = context.schedule_for("multilevel", args.epsilon)
    oracle = lambda x, level: context.model.gradient(x, level, context.problem)
    run = descent.run_multilevel_descent(
        "gd",
        sched,
        oracle,
        context.descent_spec,
        np.zeros(context.model.n_x),
        reference=context.x_star,
    )
    print("iteration,level,cost,error")
    for k, state in enumerate(run.states):
        level = sched.levels[k - 1] if k else float("nan")
        print(f"{k},{level:.6g},{state.cost:.6g},{run.errors[k]:.6e}")
    print(f"final error {run.errors[-1]:.6e} at cost {run.cost:.6g}")
    return 0


def _cmd_particle(args, method: str) -> int:
    config = _resolve_config(args, f"{method}-desk")
    config.method.method = method
    context = SweepContext(config)
    sched = context.schedule_for(args.kind, args.epsilon)
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence(config.sweep.base_seed))
    )
    m = config.method
    if method == "teki":
        run = eki.run_ml_eki(
            context.model, context.problem, sched,
            ensemble_size=m.ensemble_size, tau_interval=m.tau_interval,
            step_size=m.step_size, rng=rng, variant="teki",
            integrator=m.integrator, inflation=m.inflation,
            inflation_kind=m.inflation_kind,
        )
        errors = [
            eki.teki_error(mean, context.model, context.problem,
                           context.ref_level, context.x_star)
            for mean in run.means
        ]
    else:
        run = langevin.run_ml_ils(
            context.posterior, sched,
            ensemble_size=m.ensemble_size, tau_interval=m.tau_interval,
            step_size=m.step_size, rng=rng, keep_history=False,
        )
        errors = [
            langevin.posterior_mean_error(mean, context.x_star)
            for mean in run.means
        ]
    print("outer_iteration,level,error")
    for j, err in enumerate(errors):
        level = sched.levels[j - 1] if j else float("nan")
        print(f"{j},{level:.6g},{err:.6e}")
    print(
        f"final error {errors[-1]:.6e}, schedule cost {run.schedule_cost:.6g}, "
        f"work units {run.work_units:.6g}"
    )
    return 0


def _cmd_sweep(args) -> int:
    config = _resolve_config(args, "teki-desk")
    records = run_sweep(config)
    out_dir = Path(config.output.directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / config.output.csv_name
    write_csv(records, csv_path)
    print(f"wrote {csv_path}")
    if config.output.plot_name:
        svg_path = out_dir / config.output.plot_name
        if emit_plot(records, svg_path):
            print(f"wrote {svg_path}")
    return 0


def _cmd_plot(args) -> int:
    records = read_records_csv(args.csv)
    if emit_plot(records, args.out_file) is None:
        return 1
    print(f"wrote {args.out_file}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlinv",
        description="multilevel optimization and sampling for PDE inverse problems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schedule", help="print accuracy-level schedules")
    p.add_argument("--c", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--e0", type=float, default=1.0)
    p.add_argument("--bias", type=float, default=1.0)
    p.add_argument(
        "--epsilons",
        type=lambda s: [float(tok) for tok in s.split(",")],
        default=[2.0**-k for k in range(2, 8)],
        help="comma-separated tolerance grid",
    )
    p.add_argument("--rounding", choices=("identity", "next_power_of_two"),
                   default="identity")
    p.set_defaults(func=_cmd_schedule)

    p = sub.add_parser("forward-check", help="forward-map convergence report")
    p.add_argument("--reference", type=float, default=2.0**14)
    p.add_argument("--max-exponent", type=int, default=12)
    p.set_defaults(func=_cmd_forward_check)

    p = sub.add_parser("descent", help="single multilevel gradient-descent run")
    _add_common(p)
    p.add_argument("--epsilon", type=float, default=2.0**-6)
    p.set_defaults(func=_cmd_descent)

    p = sub.add_parser("eki", help="single Tikhonov EKI run")
    _add_common(p)
    p.add_argument("--epsilon", type=float, default=2.0**-4)
    p.add_argument("--kind", choices=("single-level", "multilevel"),
                   default="multilevel")
    p.set_defaults(func=lambda a: _cmd_particle(a, "teki"))

    p = sub.add_parser("ils", help="single interacting-Langevin run")
    _add_common(p)
    p.add_argument("--epsilon", type=float, default=2.0**-4)
    p.add_argument("--kind", choices=("single-level", "multilevel"),
                   default="multilevel")
    p.set_defaults(func=lambda a: _cmd_particle(a, "ils"))

    p = sub.add_parser("sweep", help="full cost-versus-error experiment")
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("plot", help="render a sweep CSV to SVG")
    p.add_argument("--csv", type=Path, required=True)
    p.add_argument("--out-file", type=Path, required=True)
    p.set_defaults(func=_cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except DivergedError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
