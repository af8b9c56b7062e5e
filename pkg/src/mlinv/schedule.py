"""Accuracy-level schedules for iterative solvers with leveled updates.

An iteration whose error obeys the geometric recursion

    e_{k+1} <= c * e_k + b * l_k**(-alpha)

can be driven below a tolerance ``eps`` by choosing the number of steps K
and the per-step accuracy levels ``l_0 .. l_{K-1}``.  Two choices are
provided: a constant (single-level) choice and a geometrically growing
(multilevel) choice that minimizes the total cost ``sum(l_j)`` subject to
the bias budget.  Both split the budget evenly: the contraction term
``c**K * e0`` and the accumulated bias each get ``eps / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ConvergenceModel",
    "LevelSchedule",
    "iterations_required",
    "single_level_schedule",
    "multilevel_schedule",
    "single_level_cost",
    "multilevel_cost",
    "bound_error",
    "total_cost",
    "round_to_admissible",
]

_INT_SNAP = 1e-9


@dataclass(frozen=True)
class ConvergenceModel:
    """Constants of the error recursion e_{k+1} <= c e_k + b l^(-alpha).

    Parameters
    ----------
    c : float
        Contraction factor per iteration, in (0, 1).
    alpha : float
        Accuracy exponent of the leveled update, > 0.
    e0 : float
        Error of the initial iterate, > 0.
    bias_constant : float
        Constant b >= 1 multiplying the level bias.  A value above one is
        absorbed by rescaling every level by ``b**(1/alpha)``, which leaves
        the recursion with an effective constant of one.
    """

    c: float
    alpha: float
    e0: float
    bias_constant: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.c < 1.0:
            raise ValueError(f"contraction factor must lie in (0, 1), got {self.c}")
        if not self.alpha > 0.0:
            raise ValueError(f"accuracy exponent must be positive, got {self.alpha}")
        if not self.e0 > 0.0:
            raise ValueError(f"initial error must be positive, got {self.e0}")
        if not self.bias_constant >= 1.0:
            raise ValueError(
                f"bias constant must be >= 1, got {self.bias_constant}"
            )

    @property
    def level_scale(self) -> float:
        """Factor ``b**(1/alpha)`` applied to every level."""
        return self.bias_constant ** (1.0 / self.alpha)


@dataclass(frozen=True)
class LevelSchedule:
    """An ordered assignment of accuracy levels to iterations."""

    levels: tuple[float, ...]
    epsilon: float
    kind: str = field(default="multilevel")

    def __post_init__(self):
        if self.kind not in ("single-level", "multilevel"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        for l in self.levels:
            if not (math.isfinite(l) and l > 0.0):
                raise ValueError(f"levels must be positive and finite, got {l}")

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def iterations(self) -> int:
        return len(self.levels)

    def rounded(self, policy: str = "identity") -> "LevelSchedule":
        """Return a copy with levels rounded to admissible values."""
        return LevelSchedule(
            tuple(round_to_admissible(list(self.levels), policy)),
            self.epsilon,
            self.kind,
        )


def iterations_required(model: ConvergenceModel, epsilon: float) -> int:
    """Smallest K with c**K * e0 <= eps/2; zero when eps >= 2*e0."""
    if not (math.isfinite(epsilon) and epsilon > 0.0):
        raise ValueError(f"tolerance must be positive, got {epsilon}")
    ratio = epsilon / (2.0 * model.e0)
    if ratio >= 1.0:
        return 0
    t = math.log(ratio) / math.log(model.c)
    # Snap near-integer ratios so exact powers of c do not round up.
    nearest = round(t)
    if abs(t - nearest) < _INT_SNAP:
        return max(int(nearest), 0)
    return max(int(math.ceil(t)), 0)


def single_level_schedule(model: ConvergenceModel, epsilon: float) -> LevelSchedule:
    """Constant-level schedule meeting the tolerance at minimal level.

    All K iterations run at the level that makes the accumulated bias
    ``l**(-alpha) * (1 - c**K) / (1 - c)`` equal to ``eps / 2`` exactly,
    where K is the minimal iteration count.  The total cost grows like
    ``log(1/eps) * eps**(-1/alpha)``.
    """
    k = iterations_required(model, epsilon)
    if k == 0:
        return LevelSchedule((), epsilon, "single-level")
    c, alpha = model.c, model.alpha
    geometric = (1.0 - c**k) / (1.0 - c)
    level = (2.0 * geometric / epsilon) ** (1.0 / alpha) * model.level_scale
    return LevelSchedule((level,) * k, epsilon, "single-level")


def multilevel_schedule(model: ConvergenceModel, epsilon: float) -> LevelSchedule:
    """Cost-minimal geometric schedule meeting the tolerance.

    Lagrange conditions for minimizing ``sum(l_j)`` under the bias budget
    ``sum_j c**(K-1-j) l_j**(-alpha) = eps/2`` give levels proportional to
    ``c**((K-1-j)/(1+alpha))``: early iterations run cheap, the final ones
    accurate.  The total cost grows like ``eps**(-1/alpha)``, a log factor
    cheaper than the single-level choice.
    """
    k = iterations_required(model, epsilon)
    if k == 0:
        return LevelSchedule((), epsilon, "multilevel")
    c, alpha = model.c, model.alpha
    delta = c ** (1.0 / (1.0 + alpha))
    bracket = (1.0 - delta**k) / (1.0 - delta)
    base = (epsilon / 2.0) ** (-1.0 / alpha) * bracket ** (1.0 / alpha)
    base *= model.level_scale
    exponents = np.arange(k - 1, -1, -1, dtype=float)
    levels = base * delta**exponents
    return LevelSchedule(tuple(levels.tolist()), epsilon, "multilevel")


def single_level_cost(model: ConvergenceModel, epsilon: float) -> float:
    """Closed-form total cost of the single-level schedule."""
    k = iterations_required(model, epsilon)
    if k == 0:
        return 0.0
    c, alpha = model.c, model.alpha
    geometric = (1.0 - c**k) / (1.0 - c)
    return k * (2.0 * geometric / epsilon) ** (1.0 / alpha) * model.level_scale


def multilevel_cost(model: ConvergenceModel, epsilon: float) -> float:
    """Closed-form total cost of the multilevel schedule."""
    k = iterations_required(model, epsilon)
    if k == 0:
        return 0.0
    c, alpha = model.c, model.alpha
    delta = c ** (1.0 / (1.0 + alpha))
    bracket = (1.0 - delta**k) / (1.0 - delta)
    cost = (epsilon / 2.0) ** (-1.0 / alpha) * bracket ** ((1.0 + alpha) / alpha)
    return cost * model.level_scale


def bound_error(model: ConvergenceModel, levels) -> float:
    """Worst-case error after running the recursion with the given levels.

    Returns ``c**K e0 + b * sum_j c**(K-1-j) l_j**(-alpha)``.
    """
    levels = [float(l) for l in levels]
    for l in levels:
        if not (math.isfinite(l) and l > 0.0):
            raise ValueError(f"levels must be positive and finite, got {l}")
    k = len(levels)
    total = model.c**k * model.e0
    for j, l in enumerate(levels):
        total += model.bias_constant * model.c ** (k - 1 - j) * l ** (-model.alpha)
    return total


def total_cost(schedule) -> float:
    """Sum of the levels of a schedule (or a bare level sequence).

    Summation is sequential in index order so that incremental cost
    accounting in the solvers reproduces this value exactly.
    """
    levels = schedule.levels if isinstance(schedule, LevelSchedule) else schedule
    cost = 0.0
    for l in levels:
        cost += float(l)
    return cost


def _next_power_of_two(level: float) -> float:
    if not (math.isfinite(level) and level > 0.0):
        raise ValueError(f"levels must be positive and finite, got {level}")
    mantissa, exponent = math.frexp(level)  # level = mantissa * 2**exponent
    if mantissa <= 0.5 * (1.0 + 1e-12):  # exact powers of two map to themselves
        exponent -= 1
    # Admissible levels start at one (a mesh has at least one cell).
    return float(2.0 ** max(exponent, 0))


def round_to_admissible(levels, policy: str = "identity"):
    """Round each level up to the nearest admissible value.

    ``identity`` returns the input unchanged; ``next_power_of_two`` maps
    each level to ``2**ceil(log2(l))``.  Rounding never decreases a level,
    so an error bound met by the raw schedule still holds afterwards.
    """
    if policy == "identity":
        return [float(l) for l in levels]
    if policy == "next_power_of_two":
        return [_next_power_of_two(l) for l in levels]
    raise ValueError(f"unknown rounding policy {policy!r}")
