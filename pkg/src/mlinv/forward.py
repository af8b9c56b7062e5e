"""Leveled forward maps and the 1D elliptic PDE test problem.

The concrete model solves ``-u'' + u = f`` on (0, 1) with homogeneous
Dirichlet conditions by linear finite elements on a uniform mesh.  The
right-hand side is parametrized by sine coefficients,

    f(x, s) = sum_i x_i * sqrt(2)/pi * sin(i pi s),

an orthogonal frame in which ``||f||_{L2}^2 = ||x||^2 / pi**2``.  The
accuracy level ``l`` selects the mesh: ``2**ceil(log2(l))`` elements, so
evaluation cost scales linearly with the level.
"""

from __future__ import annotations

import math
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solveh_banded

__all__ = [
    "SpdMatrix",
    "InverseProblemSpec",
    "LeveledForwardMap",
    "PointObservation",
    "KernelObservation",
    "SineFemModel",
    "ZeroForwardMap",
    "MatrixForwardMap",
    "equispaced_points",
    "field_l2_norm",
    "sine_field_values",
]

SINE_SCALE = math.sqrt(2.0) / math.pi


def equispaced_points(n_y: int) -> np.ndarray:
    """Observation points s_i = i / (n_y + 1), i = 1 .. n_y."""
    return np.arange(1, n_y + 1, dtype=float) / (n_y + 1)


def sine_field_values(x, s) -> np.ndarray:
    """Evaluate the sine-frame field with coefficients ``x`` at points ``s``."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    modes = np.arange(1, x.shape[-1] + 1, dtype=float)
    return SINE_SCALE * np.sin(np.pi * np.outer(s, modes)) @ x


def field_l2_norm(x) -> float:
    """L2(0,1) norm of the field with sine coefficients ``x``."""
    return float(np.linalg.norm(np.asarray(x, dtype=float)) / math.pi)


def _validate_spd(dense: np.ndarray, name: str) -> None:
    if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {dense.shape}")
    scale = max(1.0, float(np.abs(dense).max()))
    if np.abs(dense - dense.T).max() > 1e-10 * scale:
        raise ValueError(f"{name} must be symmetric")


@dataclass(frozen=True)
class SpdMatrix:
    """A symmetric positive definite matrix with cached factor actions."""

    dense: np.ndarray
    inv: np.ndarray
    sqrt: np.ndarray
    inv_sqrt: np.ndarray

    @classmethod
    def from_matrix(cls, matrix, name: str = "matrix") -> "SpdMatrix":
        dense = np.atleast_2d(np.asarray(matrix, dtype=float))
        _validate_spd(dense, name)
        eigval, eigvec = np.linalg.eigh((dense + dense.T) / 2.0)
        if eigval.min() <= 0.0:
            raise ValueError(
                f"{name} must be positive definite "
                f"(smallest eigenvalue {eigval.min():.3e})"
            )
        inv = (eigvec / eigval) @ eigvec.T
        sqrt = (eigvec * np.sqrt(eigval)) @ eigvec.T
        inv_sqrt = (eigvec / np.sqrt(eigval)) @ eigvec.T
        return cls(dense=dense, inv=inv, sqrt=sqrt, inv_sqrt=inv_sqrt)

    @classmethod
    def from_diagonal(cls, diagonal, name: str = "matrix") -> "SpdMatrix":
        d = np.asarray(diagonal, dtype=float).ravel()
        if np.any(d <= 0.0):
            raise ValueError(f"{name} diagonal must be positive")
        return cls(
            dense=np.diag(d),
            inv=np.diag(1.0 / d),
            sqrt=np.diag(np.sqrt(d)),
            inv_sqrt=np.diag(1.0 / np.sqrt(d)),
        )

    @property
    def dim(self) -> int:
        return self.dense.shape[0]


def _as_spd(value, name: str) -> SpdMatrix:
    if isinstance(value, SpdMatrix):
        return value
    arr = np.asarray(value, dtype=float)
    if arr.ndim <= 1:
        return SpdMatrix.from_diagonal(np.atleast_1d(arr), name)
    return SpdMatrix.from_matrix(arr, name)


class InverseProblemSpec:
    """Data, covariances and regularization weight of an inverse problem.

    Parameters
    ----------
    y : array
        Observation vector.
    gamma : array or SpdMatrix
        Noise covariance (1-D input is taken as a diagonal).
    c0 : array or SpdMatrix
        Prior covariance (1-D input is taken as a diagonal).
    lam : float
        Regularization weight, >= 0.  Particle methods that embed the
        regularizer require it to be strictly positive.
    truth : array, optional
        Ground-truth parameter used to synthesize the data.
    """

    def __init__(self, y, gamma, c0, lam, truth=None):
        self.y = np.asarray(y, dtype=float).ravel()
        self.gamma = _as_spd(gamma, "noise covariance")
        self.c0 = _as_spd(c0, "prior covariance")
        if not (math.isfinite(lam) and lam >= 0.0):
            raise ValueError(f"regularization weight must be >= 0, got {lam}")
        self.lam = float(lam)
        self.truth = None if truth is None else np.asarray(truth, dtype=float).ravel()
        if self.gamma.dim != self.y.size:
            raise ValueError(
                f"noise covariance is {self.gamma.dim}x{self.gamma.dim} "
                f"but the observation has {self.y.size} entries"
            )
        if self.truth is not None and self.c0.dim != self.truth.size:
            raise ValueError(
                f"prior covariance is {self.c0.dim}x{self.c0.dim} "
                f"but the truth has {self.truth.size} entries"
            )

    @property
    def n_y(self) -> int:
        return self.y.size

    @property
    def n_x(self) -> int:
        return self.c0.dim


class LeveledForwardMap(ABC):
    """A forward map with a one-parameter family of approximations.

    ``evaluate(x, level)`` applies the level-``l`` approximation,
    ``adjoint_apply(w, level)`` the transpose of its Jacobian (exact for
    linear maps), and ``cost_of(level)`` returns the accounting cost of a
    single evaluation, equal to the level by convention.  Both apply
    methods accept batched input with the vector axis last.
    """

    n_x: int
    n_y: int
    linear: bool = True

    @abstractmethod
    def evaluate(self, x, level) -> np.ndarray:
        """Apply the level-``l`` forward map to ``x`` (shape ``(..., n_x)``)."""

    @abstractmethod
    def adjoint_apply(self, w, level) -> np.ndarray:
        """Apply the transposed level-``l`` Jacobian to ``w`` (``(..., n_y)``)."""

    def cost_of(self, level) -> float:
        return float(level)

    def gradient(self, x, level, problem: InverseProblemSpec) -> np.ndarray:
        """Gradient of the level-``l`` Tikhonov objective at ``x``.

        The objective is ``0.5 * ||Gamma^{-1/2} (F_l(x) - y)||^2
        + lam/2 * ||C0^{-1/2} x||^2``; for linear maps the returned vector
        is its exact gradient.
        """
        x = np.asarray(x, dtype=float)
        residual = self.evaluate(x, level) - problem.y
        grad = self.adjoint_apply(residual @ problem.gamma.inv, level)
        if problem.lam != 0.0:
            grad = grad + problem.lam * (x @ problem.c0.inv)
        return grad


def _check_finite(x: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{what} must be finite")


def _check_level(level) -> float:
    level = float(level)
    if not (math.isfinite(level) and level > 0.0):
        raise ValueError(f"accuracy level must be positive, got {level}")
    return level


@dataclass(frozen=True)
class PointObservation:
    """Observe the solution at fixed points by linear interpolation."""

    points: np.ndarray

    def matrix(self, nodes: np.ndarray) -> np.ndarray:
        pts = np.asarray(self.points, dtype=float)
        if np.any(pts < 0.0) or np.any(pts > 1.0):
            raise ValueError("observation points must lie in [0, 1]")
        n = nodes.size - 1
        idx = np.minimum((pts * n).astype(int), n - 1)
        w = pts * n - idx
        op = np.zeros((pts.size, nodes.size))
        rows = np.arange(pts.size)
        op[rows, idx] = 1.0 - w
        op[rows, idx + 1] = w
        return op

    @property
    def n_y(self) -> int:
        return np.asarray(self.points).size


@dataclass(frozen=True)
class KernelObservation:
    """Observe L2 inner products against kernels given by sine coefficients.

    ``coefficients[j]`` holds the sine-frame coefficients of the j-th
    kernel; the integrals against a piecewise linear solution are computed
    exactly from the analytic sine loads.
    """

    coefficients: np.ndarray

    def matrix(self, nodes: np.ndarray) -> np.ndarray:
        coeff = np.atleast_2d(np.asarray(self.coefficients, dtype=float))
        loads = _sine_load_matrix(nodes, coeff.shape[1])  # (n_nodes, modes)
        return coeff @ loads.T

    @property
    def n_y(self) -> int:
        return np.atleast_2d(np.asarray(self.coefficients)).shape[0]


def _sine_load_matrix(nodes: np.ndarray, n_modes: int) -> np.ndarray:
    """Exact integrals of the sine frame against the nodal hat functions.

    Entry (i, k) is the integral of ``sqrt(2)/pi sin((k+1) pi s)`` against
    the full hat centered at node i.  Boundary nodes carry half hats, but
    the observation is only applied to functions vanishing there, so the
    full-hat formula (which is zero at s = 0 and s = 1) is adequate.
    """
    h = nodes[1] - nodes[0]
    modes = np.arange(1, n_modes + 1, dtype=float)
    omega = np.pi * modes
    # int hat_i(s) sin(w s) ds = 2 (1 - cos(w h)) sin(w s_i) / (w^2 h)
    weight = 2.0 * (1.0 - np.cos(omega * h)) / (omega**2 * h)
    return SINE_SCALE * np.sin(np.outer(nodes, omega)) * weight


class SineFemModel(LeveledForwardMap):
    """Linear-FEM forward map for ``-u'' + u = f`` with sine-frame inputs.

    Parameters
    ----------
    n_x : int
        Number of sine modes parametrizing the right-hand side.
    observation : PointObservation or KernelObservation, optional
        Defaults to point evaluation at 15 equispaced interior points.

    The level-``l`` system matrix is assembled once per mesh and cached;
    assembly is guarded by a lock so concurrent readers are safe.
    """

    def __init__(self, n_x: int, observation=None):
        if n_x < 1:
            raise ValueError("need at least one sine mode")
        self.n_x = int(n_x)
        self.observation = (
            observation
            if observation is not None
            else PointObservation(equispaced_points(15))
        )
        self.n_y = self.observation.n_y
        self.linear = True
        self._matrices: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    @staticmethod
    def mesh_exponent(level) -> int:
        """Dyadic refinement count: the mesh has ``2**ceil(log2(l))`` cells.

        Levels in (0, 1] fall back to the coarsest (single-element) mesh,
        on which the map is identically zero; raw cost-optimal schedules
        may request such levels at their first iterations.
        """
        level = _check_level(level)
        mantissa, exponent = math.frexp(level)
        if mantissa <= 0.5 * (1.0 + 1e-12):
            exponent -= 1
        return max(exponent, 0)

    def nodes(self, level) -> np.ndarray:
        n = 2 ** self.mesh_exponent(level)
        return np.linspace(0.0, 1.0, n + 1)

    def _banded_system(self, n: int) -> np.ndarray:
        h = 1.0 / n
        m = n - 1
        ab = np.zeros((2, m))
        ab[1] = 2.0 / h + 2.0 * h / 3.0
        ab[0, 1:] = -1.0 / h + h / 6.0
        return ab

    @staticmethod
    def _solve_banded(ab: np.ndarray, loads: np.ndarray) -> np.ndarray:
        if ab.shape[1] == 1:  # single interior node; scipy rejects this size
            return loads / ab[1, 0]
        return solveh_banded(ab, loads)

    def solve_pde(self, rhs, level, rhs_kind: str = "sine") -> np.ndarray:
        """Solve ``-u'' + u = f`` on the level mesh; returns all nodal values.

        ``rhs_kind`` selects how ``rhs`` is interpreted: ``"sine"`` takes
        sine-frame coefficients with exactly integrated loads, ``"nodal"``
        takes values of f at the mesh nodes with a consistent mass-matrix
        load.  The banded Cholesky solve is linear in the mesh size.
        """
        rhs = np.asarray(rhs, dtype=float)
        _check_finite(rhs, "right-hand side")
        n = 2 ** self.mesh_exponent(level)
        nodes = np.linspace(0.0, 1.0, n + 1)
        if n < 2:
            return np.zeros(n + 1)
        if rhs_kind == "sine":
            loads = _interior_sine_loads(nodes, rhs.size) @ rhs
        elif rhs_kind == "nodal":
            if rhs.size != n + 1:
                raise ValueError(
                    f"nodal right-hand side needs {n + 1} values, got {rhs.size}"
                )
            h = 1.0 / n
            loads = h / 6.0 * (rhs[:-2] + 4.0 * rhs[1:-1] + rhs[2:])
        else:
            raise ValueError(f"unknown rhs kind {rhs_kind!r}")
        interior = self._solve_banded(self._banded_system(n), loads)
        solution = np.zeros(n + 1)
        solution[1:-1] = interior
        return solution

    def matrix(self, level) -> np.ndarray:
        """The dense level-``l`` map from sine coefficients to observations."""
        tau = self.mesh_exponent(level)
        cached = self._matrices.get(tau)
        if cached is not None:
            return cached
        with self._lock:
            cached = self._matrices.get(tau)
            if cached is not None:
                return cached
            n = 2**tau
            nodes = np.linspace(0.0, 1.0, n + 1)
            obs = self.observation.matrix(nodes)  # (n_y, n+1)
            if n < 2:
                assembled = np.zeros((self.n_y, self.n_x))
            else:
                loads = _interior_sine_loads(nodes, self.n_x)  # (n-1, n_x)
                interior = self._solve_banded(self._banded_system(n), loads)
                solutions = np.zeros((n + 1, self.n_x))
                solutions[1:-1] = interior
                assembled = obs @ solutions
            self._matrices[tau] = assembled
            return assembled

    def evaluate(self, x, level) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        _check_finite(x, "parameter vector")
        return x @ self.matrix(level).T

    def adjoint_apply(self, w, level) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        _check_finite(w, "adjoint input")
        return w @ self.matrix(level)


def _interior_sine_loads(nodes: np.ndarray, n_modes: int) -> np.ndarray:
    """Sine loads restricted to interior hat functions, shape (n-1, modes)."""
    h = nodes[1] - nodes[0]
    modes = np.arange(1, n_modes + 1, dtype=float)
    omega = np.pi * modes
    weight = 2.0 * (1.0 - np.cos(omega * h)) / (omega**2 * h)
    return SINE_SCALE * np.sin(np.outer(nodes[1:-1], omega)) * weight


class ZeroForwardMap(LeveledForwardMap):
    """The zero map at every level; useful for regularizer-only targets."""

    def __init__(self, n_x: int, n_y: int = 1):
        self.n_x = int(n_x)
        self.n_y = int(n_y)
        self.linear = True

    def evaluate(self, x, level) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        _check_finite(x, "parameter vector")
        return np.zeros(x.shape[:-1] + (self.n_y,))

    def adjoint_apply(self, w, level) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        return np.zeros(w.shape[:-1] + (self.n_x,))


class MatrixForwardMap(LeveledForwardMap):
    """A fixed linear map, identical at every level."""

    def __init__(self, matrix):
        self._matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.n_y, self.n_x = self._matrix.shape
        self.linear = True

    def evaluate(self, x, level) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        _check_finite(x, "parameter vector")
        return x @ self._matrix.T

    def adjoint_apply(self, w, level) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        return w @ self._matrix
