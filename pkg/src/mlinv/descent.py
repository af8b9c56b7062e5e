"""Leveled gradient descent, its accelerated and stochastic variants.

Oracles are callables ``g(x, level)`` (deterministic) or ``g(x, level,
rng)`` (stochastic) returning an approximate gradient whose error decays
like ``level**(-alpha)``.  Steppers are pure: each returns a new state and
adds the consumed level to the running cost, so the reported cost of a run
equals the total cost of its schedule exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergedError
from .forward import InverseProblemSpec, LeveledForwardMap
from .schedule import LevelSchedule

__all__ = [
    "SmoothConvexSpec",
    "DescentState",
    "AcceleratedState",
    "DescentRun",
    "gd_step",
    "sgd_step",
    "agd_step",
    "asgd_step",
    "run_multilevel_descent",
    "sharpness_lower_bound",
    "biased_quadratic_oracle",
    "drive_biased_recursion",
    "monte_carlo_batch_oracle",
    "quadratic_constants",
    "gradient_bias_constant",
]


@dataclass(frozen=True)
class SmoothConvexSpec:
    """Strong convexity and smoothness constants of the objective.

    ``eta`` is the plain gradient-descent step size and must lie in
    (0, 1/L]; it defaults to 1/L.  The accelerated updates always step with
    1/L and momentum ``tau_momentum = sqrt(mu / L)``.
    """

    mu: float
    L: float
    eta: float | None = None

    def __post_init__(self):
        if not 0.0 < self.mu <= self.L:
            raise ValueError(f"need 0 < mu <= L, got mu={self.mu}, L={self.L}")
        if self.eta is None:
            object.__setattr__(self, "eta", 1.0 / self.L)
        if not 0.0 < self.eta <= 1.0 / self.L + 1e-12:
            raise ValueError(f"step size must lie in (0, 1/L], got {self.eta}")

    @property
    def tau_momentum(self) -> float:
        return math.sqrt(self.mu / self.L)


@dataclass(frozen=True)
class DescentState:
    """Iterate, iteration counter and accumulated cost of plain descent."""

    x: np.ndarray
    iteration: int = 0
    cost: float = 0.0

    @property
    def iterate(self) -> np.ndarray:
        return self.x


@dataclass(frozen=True)
class AcceleratedState:
    """Three-sequence state (x, y, z) of the accelerated updates."""

    y: np.ndarray
    z: np.ndarray
    x: np.ndarray | None = None
    iteration: int = 0
    cost: float = 0.0

    @property
    def iterate(self) -> np.ndarray:
        return self.y


def _as_vector(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


def _guard_finite(value: np.ndarray, state, what: str):
    if not np.all(np.isfinite(value)):
        raise DivergedError(
            f"{what} became non-finite at iteration {state.iteration}",
            iteration=state.iteration,
            state=state,
        )
    return value


def gd_step(state: DescentState, oracle, level, spec: SmoothConvexSpec) -> DescentState:
    """One gradient step ``x <- x - eta * g_l(x)``; cost grows by the level."""
    g = _guard_finite(np.asarray(oracle(state.x, level), dtype=float), state, "gradient")
    x_next = _guard_finite(state.x - spec.eta * g, state, "iterate")
    return DescentState(x_next, state.iteration + 1, state.cost + float(level))


def sgd_step(state, oracle, level, spec, rng) -> DescentState:
    """Stochastic gradient step; the oracle draws from ``rng``."""
    g = _guard_finite(
        np.asarray(oracle(state.x, level, rng), dtype=float), state, "gradient"
    )
    x_next = _guard_finite(state.x - spec.eta * g, state, "iterate")
    return DescentState(x_next, state.iteration + 1, state.cost + float(level))


def _accelerated_update(state, g, x_k, spec, level):
    tau = spec.tau_momentum
    y_next = _guard_finite(x_k - g / spec.L, state, "iterate")
    z_next = _guard_finite(
        state.z + tau * (x_k - state.z) - (tau / spec.mu) * g, state, "iterate"
    )
    return AcceleratedState(
        y=y_next,
        z=z_next,
        x=x_k,
        iteration=state.iteration + 1,
        cost=state.cost + float(level),
    )


def agd_step(state: AcceleratedState, oracle, level, spec) -> AcceleratedState:
    """One accelerated step with momentum coupling.

    The coupling point is ``x = (tau z + y) / (1 + tau)``; both sequences
    advance with the same gradient ``g_l(x)``.
    """
    tau = spec.tau_momentum
    x_k = (tau * state.z + state.y) / (1.0 + tau)
    g = _guard_finite(np.asarray(oracle(x_k, level), dtype=float), state, "gradient")
    return _accelerated_update(state, g, x_k, spec, level)


def asgd_step(state, oracle, level, spec, rng) -> AcceleratedState:
    """Accelerated step with a stochastic gradient."""
    tau = spec.tau_momentum
    x_k = (tau * state.z + state.y) / (1.0 + tau)
    g = _guard_finite(
        np.asarray(oracle(x_k, level, rng), dtype=float), state, "gradient"
    )
    return _accelerated_update(state, g, x_k, spec, level)


_STEPPERS = {
    "gd": (gd_step, False, False),
    "sgd": (sgd_step, True, False),
    "agd": (agd_step, False, True),
    "asgd": (asgd_step, True, True),
}


@dataclass
class DescentRun:
    """Trajectory, cost ledger and optional error history of one run."""

    states: list
    schedule: LevelSchedule
    errors: np.ndarray | None = None

    @property
    def final(self):
        return self.states[-1]

    @property
    def final_x(self) -> np.ndarray:
        return self.final.iterate

    @property
    def cost(self) -> float:
        return self.final.cost


def run_multilevel_descent(
    algorithm: str,
    sched: LevelSchedule,
    oracle,
    spec: SmoothConvexSpec,
    x0,
    rng=None,
    reference=None,
) -> DescentRun:
    """Drive a stepper through a level schedule.

    Parameters
    ----------
    algorithm : {"gd", "sgd", "agd", "asgd"}
    sched : LevelSchedule
        Iteration j runs at level ``sched.levels[j]``.
    oracle : callable
        Gradient oracle matching the algorithm (stochastic ones take rng).
    x0 : array
        Starting point.  Accelerated methods start with y = z = x0.
    reference : array, optional
        When given, the distance of each iterate to it is recorded.
    """
    try:
        stepper, stochastic, accelerated = _STEPPERS[algorithm]
    except KeyError:
        raise ValueError(f"unknown descent algorithm {algorithm!r}") from None
    if stochastic and rng is None:
        raise ValueError(f"{algorithm} needs a randomness stream")
    x0 = _as_vector(x0)
    state = (
        AcceleratedState(y=x0.copy(), z=x0.copy())
        if accelerated
        else DescentState(x0.copy())
    )
    states = [state]
    errors = [] if reference is not None else None
    if errors is not None:
        errors.append(float(np.linalg.norm(state.iterate - reference)))
    for level in sched.levels:
        args = (state, oracle, level, spec) + ((rng,) if stochastic else ())
        state = stepper(*args)
        states.append(state)
        if errors is not None:
            errors.append(float(np.linalg.norm(state.iterate - reference)))
    return DescentRun(
        states=states,
        schedule=sched,
        errors=None if errors is None else np.asarray(errors),
    )


def sharpness_lower_bound(eta: float, alpha: float, epsilon: float) -> float:
    """Minimal total level budget forced by the biased quadratic recursion.

    Any level sequence driving ``x_{k+1} = (1 - eta) x_k + eta l_k**(-alpha)``
    from a nonnegative start below ``epsilon`` costs at least
    ``eta**(1/alpha) * epsilon**(-1/alpha)``.
    """
    if not 0.0 < eta < 1.0:
        raise ValueError(f"step size must lie in (0, 1), got {eta}")
    if not alpha > 0.0:
        raise ValueError(f"accuracy exponent must be positive, got {alpha}")
    if not epsilon > 0.0:
        raise ValueError(f"tolerance must be positive, got {epsilon}")
    return eta ** (1.0 / alpha) * epsilon ** (-1.0 / alpha)


def biased_quadratic_oracle(alpha: float):
    """Oracle ``g_l(x) = x - l**(-alpha)`` for the 1D quadratic x**2 / 2.

    Its bias is exactly ``l**(-alpha)``, which makes gradient descent
    realize the error recursion with equality; used to check that the
    schedule costs cannot be improved.
    """

    def oracle(x, level):
        return np.asarray(x, dtype=float) - float(level) ** (-alpha)

    return oracle


def drive_biased_recursion(x0: float, eta: float, alpha: float, levels) -> float:
    """Closed-form iteration ``x <- (1 - eta) x + eta l**(-alpha)``."""
    x = float(x0)
    for level in levels:
        x = (1.0 - eta) * x + eta * float(level) ** (-alpha)
    return x


def monte_carlo_batch_oracle(sample_gradient):
    """Stochastic oracle averaging ``ceil(level)`` draws of a sampled gradient.

    ``sample_gradient(x, rng)`` returns one unbiased draw; the level plays
    the role of the batch size, so the mean error decays like the inverse
    square root of the level.
    """

    def oracle(x, level, rng):
        batch = max(int(math.ceil(level)), 1)
        acc = np.zeros_like(np.asarray(x, dtype=float))
        for _ in range(batch):
            acc = acc + np.asarray(sample_gradient(x, rng), dtype=float)
        return acc / batch

    return oracle


def quadratic_constants(
    model: LeveledForwardMap, problem: InverseProblemSpec, level
) -> tuple[float, float]:
    """Extreme eigenvalues (mu, L) of the level-``l`` Tikhonov Hessian.

    For a linear forward matrix A the Hessian is
    ``A^T Gamma^{-1} A + lam C0^{-1}``, independent of x.
    """
    a = model.evaluate(np.eye(model.n_x), level).T  # (n_y, n_x)
    hessian = a.T @ problem.gamma.inv @ a + problem.lam * problem.c0.inv
    eigvals = np.linalg.eigvalsh((hessian + hessian.T) / 2.0)
    return float(eigvals[0]), float(eigvals[-1])


def gradient_bias_constant(
    model, problem, reference_level, alpha, probes, levels=(1, 2, 4, 8, 16)
) -> float:
    """Empirical constant C with ``||g_ref - g_l|| <= C l**(-alpha)``.

    Measured over the given probe points and coarse levels; the decay rate
    of the FEM gradient is at least ``alpha``, so the coarse levels give
    the binding constant.
    """
    worst = 0.0
    for x in probes:
        g_ref = model.gradient(x, reference_level, problem)
        for level in levels:
            gap = np.linalg.norm(model.gradient(x, level, problem) - g_ref)
            worst = max(worst, float(gap) * float(level) ** alpha)
    return worst
