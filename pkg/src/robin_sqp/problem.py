"""Continuous problem data and its space-time discretization.

Array layout used throughout the package, with ``N`` time steps, ``n``
mesh nodes and ``nb`` boundary nodes:

* state-like fields ``y``, ``zeta``: shape ``(N+1, n)``; row ``k`` is the
  value at ``t_k`` (row 0 is the initial value).
* adjoint-like fields ``phi``, ``eta``: shape ``(N+1, n)``; row ``k < N`` is
  the implicit-Euler adjoint on the interval ``(t_k, t_{k+1}]`` and row ``N``
  is the terminal value ``dl/dy(y(T))``.  Hence ``phi[k] ~ phi(t_k)``.
* controls ``u``, ``v``: shape ``(N, nb)``; row ``k-1`` holds the nodal
  boundary values on ``(t_{k-1}, t_k]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import Polynomial

from .fem import FemMatrices, assemble
from .mesh import Mesh, build_uniform_mesh
from .timegrid import TimeGrid

SpaceFn = Callable[[np.ndarray], np.ndarray]
SpaceTimeFn = Callable[[np.ndarray, float], np.ndarray]

ROBIN_RULES = ("lumped", "exact")
TARGET_RULES = ("right", "gauss")


def example_initial_state(x: np.ndarray) -> np.ndarray:
    return np.prod(8.0 * x * (1.0 - x), axis=1)


def example_target(x: np.ndarray, t: float) -> np.ndarray:
    return example_initial_state(x) * np.cos(np.pi * t)


def unit_boundary_datum(x: np.ndarray, t: float) -> np.ndarray:
    return np.ones(x.shape[0])


def zero_target(x: np.ndarray, t: float) -> np.ndarray:
    return np.zeros(x.shape[0])


@dataclass(frozen=True)
class ProblemSpec:
    """Data of the bilinear Robin boundary control problem.

    The state solves ``y_t - div(Lambda grad y) + a(y) = 0`` with
    ``Lambda grad y . n + u y = g`` on the boundary.  The objective is
    ``int_Q L + int_Omega l(y(T)) + kappa/2 int_Sigma u^2`` with
    ``L = tracking_weight/2 (y - y_d)^2`` and
    ``l = terminal_weight/2 (y - y_Omega)^2``.

    ``nonlinearity`` holds the polynomial coefficients of ``a`` in
    ascending degree; the default is ``y^3 - y``.
    """

    dim: int = 2
    T: float = 4.0
    kappa: float = 0.3
    alpha: float = 0.1
    beta: float = 100.0
    nonlinearity: tuple = (0.0, -1.0, 0.0, 1.0)
    y0: SpaceFn = example_initial_state
    g: SpaceTimeFn = unit_boundary_datum
    target: SpaceTimeFn = example_target
    tracking_weight: float = 1.0
    terminal_target: Optional[SpaceFn] = None
    terminal_weight: float = 0.0
    diffusion: Optional[np.ndarray] = field(default=None, compare=False)
    robin: str = "lumped"
    target_rule: str = "right"

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if not self.T > 0:
            raise ValueError("T > 0 required")
        # kappa = 0 is allowed for objective evaluation only; the optimization
        # layers check kappa > 0 themselves.
        if not self.kappa >= 0:
            raise ValueError("kappa >= 0 required")
        if not (0 <= self.alpha < self.beta < np.inf):
            raise ValueError("0 <= alpha < beta < inf required")
        if self.robin not in ROBIN_RULES:
            raise ValueError(f"robin must be one of {ROBIN_RULES}")
        if self.target_rule not in TARGET_RULES:
            raise ValueError(f"target_rule must be one of {TARGET_RULES}")
        if self.tracking_weight < 0 or self.terminal_weight < 0:
            raise ValueError("objective weights must be nonnegative")

    @property
    def a(self) -> Polynomial:
        return Polynomial(self.nonlinearity)

    def with_(self, **changes) -> "ProblemSpec":
        return replace(self, **changes)


def example_problem(dim: int = 2, **changes) -> ProblemSpec:
    """The numerical example: a = y^3 - y, y_d = y0 cos(pi t), g = 1, T = 4."""
    return ProblemSpec(dim=dim, **changes)


class Discretization:
    """A :class:`ProblemSpec` on a uniform mesh and time grid.

    Precomputes every data-dependent vector the solvers need, so that all
    solves are pure functions of (discretization, iterate).
    """

    def __init__(self, spec: ProblemSpec, mesh: Mesh, timegrid: TimeGrid, fem: FemMatrices | None = None,
                 linear_solver: str = "auto"):
        if linear_solver not in ("auto", "direct", "iterative"):
            raise ValueError("linear_solver must be 'auto', 'direct' or 'iterative'")
        if mesh.dim != spec.dim:
            raise ValueError("mesh dimension does not match problem")
        if not np.isclose(timegrid.T, spec.T):
            raise ValueError("time grid horizon does not match problem")
        self.spec = spec
        self.mesh = mesh
        self.timegrid = timegrid
        self.linear_solver = linear_solver
        self.fem = fem if fem is not None else assemble(mesh)

        x = mesh.nodes
        xb = x[mesh.boundary_nodes]
        t = timegrid.points
        N = timegrid.steps
        tau = timegrid.tau
        M = self.fem.mass

        self.initial_state = np.asarray(spec.y0(x), dtype=float)
        self.loads = np.array([self.fem.boundary_load(spec.g(xb, t[k])) for k in range(1, N + 1)])

        # Time quadrature of the tracking term on each (t_{k-1}, t_k].
        if spec.target_rule == "right":
            nodes_q, weights_q = np.array([1.0]), np.array([1.0])
        else:
            gx, gw = np.polynomial.legendre.leggauss(3)
            nodes_q, weights_q = 0.5 * (gx + 1.0), 0.5 * gw
        target_mean = np.zeros((N, mesh.n_nodes))
        target_energy = np.zeros(N)
        for k in range(1, N + 1):
            for s, wq in zip(nodes_q, weights_q):
                yd = np.asarray(spec.target(x, t[k - 1] + s * tau), dtype=float)
                target_mean[k - 1] += wq * yd
                target_energy[k - 1] += wq * (yd @ (M @ yd))
        self.target_mean = target_mean
        self.target_energy = target_energy

        if spec.terminal_target is not None:
            self.terminal_target = np.asarray(spec.terminal_target(x), dtype=float)
        else:
            self.terminal_target = np.zeros(mesh.n_nodes)

        poly = spec.a
        self._a = poly
        self._da = poly.deriv(1)
        self._dda = poly.deriv(2)

    @classmethod
    def at_level(cls, spec: ProblemSpec, level: int, linear_solver: str = "auto") -> "Discretization":
        """Mesh size ``2**-level`` and time step ``T * 2**-level``."""
        return cls(spec, build_uniform_mesh(spec.dim, level, spec.diffusion), TimeGrid.for_level(spec.T, level),
                   linear_solver=linear_solver)

    @property
    def level(self) -> int:
        return self.mesh.level

    @property
    def N(self) -> int:
        return self.timegrid.steps

    @property
    def tau(self) -> float:
        return self.timegrid.tau

    @property
    def state_shape(self) -> tuple:
        return (self.N + 1, self.mesh.n_nodes)

    @property
    def control_shape(self) -> tuple:
        return (self.N, self.mesh.n_boundary)

    # nonlinearity, evaluated nodally
    def a(self, y):
        return self._a(y)

    def da(self, y):
        return self._da(y)

    def dda(self, y):
        return self._dda(y)

    # Robin coupling
    def robin_matrix(self, c: np.ndarray) -> sp.csr_matrix:
        """Matrix of ``int_Gamma c y psi_i`` as a function of y."""
        if self.spec.robin == "lumped":
            return self.fem.lumped_boundary_matrix(c)
        return self.fem.boundary_matrix(c)

    def robin_apply(self, c: np.ndarray, y: np.ndarray) -> np.ndarray:
        """``robin_matrix(c) @ y`` without forming the matrix."""
        bn = self.mesh.boundary_nodes
        out = np.zeros(self.mesh.n_nodes)
        if self.spec.robin == "lumped":
            out[bn] = self.fem.boundary_lumped * c * y[bn]
        else:
            out[bn] = self.fem.boundary_trilinear(c, y[bn])
        return out

    def boundary_product(self, y: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Riesz representative of ``c -> p . robin_matrix(c) y`` in the lumped boundary inner product.

        With lumped coupling this is the nodal product ``y p`` on the boundary.
        """
        bn = self.mesh.boundary_nodes
        if self.spec.robin == "lumped":
            return y[bn] * p[bn]
        return self.fem.boundary_trilinear(y[bn], p[bn]) / self.fem.boundary_lumped

    def switching(self, y: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """``y phi`` on Sigma per interval, shape (N, nb): state at t_k, adjoint on the interval."""
        return np.array([self.boundary_product(y[k], phi[k - 1]) for k in range(1, self.N + 1)])

    # control space
    def control_weights(self) -> np.ndarray:
        """Diagonal of the lumped L2(Sigma) inner product, shape (N, nb)."""
        return self.tau * np.broadcast_to(self.fem.boundary_lumped, self.control_shape)

    def control_inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.sum(self.control_weights() * a * b))

    def constant_control(self, value: float) -> np.ndarray:
        return np.full(self.control_shape, float(value))

    def objective(self, y: np.ndarray, u: np.ndarray) -> float:
        """Discrete objective of a (not necessarily feasible) pair (y, u)."""
        spec = self.spec
        M = self.fem.mass
        tau = self.tau
        track = 0.0
        if spec.tracking_weight:
            for k in range(1, self.N + 1):
                yk = y[k]
                track += tau * (0.5 * yk @ (M @ yk) - yk @ (M @ self.target_mean[k - 1]) + 0.5 * self.target_energy[k - 1])
            track *= spec.tracking_weight
        term = 0.0
        if spec.terminal_weight:
            e = y[self.N] - self.terminal_target
            term = 0.5 * spec.terminal_weight * (e @ (M @ e))
        reg = 0.5 * spec.kappa * self.control_inner(u, u)
        return float(track + term + reg)


def discretize(spec: ProblemSpec, level: int) -> Discretization:
    return Discretization.at_level(spec, level)


@dataclass
class Iterate:
    """SQP triple (y, phi, u) on one discretization level."""

    y: np.ndarray
    phi: np.ndarray
    u: np.ndarray
    objective: float = float("nan")
    level: int = -1
    iterations: int = 0

    def copy(self) -> "Iterate":
        return Iterate(self.y.copy(), self.phi.copy(), self.u.copy(), self.objective, self.level, self.iterations)
