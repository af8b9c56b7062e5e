"""Multilevel optimization and sampling for PDE-based inverse problems.

The package provides optimal accuracy-level schedules for iterative
solvers whose per-step error decays with a tunable accuracy level, a
linear-FEM forward model for a 1D elliptic test problem, multilevel
(stochastic, accelerated) gradient descent, multilevel ensemble Kalman
inversion with optional Tikhonov embedding, a multilevel interacting
Langevin sampler, and an experiment harness reproducing cost-versus-error
curves.
"""

from . import descent, eki, forward, harness, langevin, schedule
from .errors import ConfigError, DivergedError
from .schedule import (
    ConvergenceModel,
    LevelSchedule,
    bound_error,
    multilevel_schedule,
    round_to_admissible,
    single_level_schedule,
    total_cost,
)

__version__ = "0.1.0"

__all__ = [
    "descent",
    "eki",
    "forward",
    "harness",
    "langevin",
    "schedule",
    "ConfigError",
    "DivergedError",
    "ConvergenceModel",
    "LevelSchedule",
    "bound_error",
    "multilevel_schedule",
    "round_to_admissible",
    "single_level_schedule",
    "total_cost",
]
