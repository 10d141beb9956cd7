"""Implicit-Euler solvers for the state, adjoint and linearized equations.

The fully discrete state scheme is, for k = 1..N,

    (M/tau)(y^k - y^{k-1}) + K y^k + M_L a(y^k) + R(u^k) y^k = b_Gamma(g(t_k)),

with ``y^0`` the nodal interpolant of ``y0``.  Adjoints and linearizations
are exact derivatives of this scheme, so gradients and Hessian products are
consistent with the discrete objective to rounding error.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import NewtonDivergence
from .linsolve import base_operator, base_preconditioner, pcg_solve, shifted_operator, use_direct
from .problem import Discretization, Iterate

NEWTON_TOL = 1e-12
NEWTON_MAX_ITERS = 30
MAX_HALVINGS = 10


def _max(x) -> float:
    return float(np.max(np.abs(x))) if np.size(x) else 0.0


class StepMatrices:
    """Per-step matrices ``M/tau + K + M_L a'(y^k) + R(u^k)`` at one linearization point.

    Built once per linearization point and shared by every linearized solve
    at that point (both sweeps, all Hessian products).  The matrices are
    symmetric, so the same factorization serves forward and backward sweeps.
    Large problems keep only the diagonal shifts and solve iteratively.
    """

    def __init__(self, disc: Discretization, y: np.ndarray, u: np.ndarray):
        self.disc = disc
        fem = disc.fem
        self.direct = use_direct(disc)
        base = base_operator(disc)
        self._lu = []
        self._ops = []
        lumped = disc.spec.robin == "lumped"
        bn = disc.mesh.boundary_nodes
        for k in range(1, disc.N + 1):
            shift = fem.lumped_mass * disc.da(y[k])
            if self.direct:
                A = base + sp.diags(shift) + disc.robin_matrix(u[k - 1])
                self._lu.append(splu(sp.csc_matrix(A)))
            elif lumped:
                shift[bn] += fem.boundary_lumped * u[k - 1]
                self._ops.append(shifted_operator(base, shift, None))
            else:
                self._ops.append(shifted_operator(base, shift, disc.robin_matrix(u[k - 1])))
        self._prec = None if self.direct else base_preconditioner(disc)
        self.solves = 0

    def solve(self, k: int, rhs: np.ndarray) -> np.ndarray:
        """Solve with the matrix of time step ``k`` (1-based)."""
        self.solves += 1
        if self.direct:
            return self._lu[k - 1].solve(rhs)
        return pcg_solve(self._ops[k - 1], rhs, self._prec)


def _check_state(disc: Discretization, arr: np.ndarray, name: str) -> None:
    if arr.shape != disc.state_shape:
        raise ValueError(f"{name} has shape {arr.shape}, expected {disc.state_shape}")


def _check_control(disc: Discretization, arr: np.ndarray, name: str) -> None:
    if arr.shape != disc.control_shape:
        raise ValueError(f"{name} has shape {arr.shape}, expected {disc.control_shape}")


def solve_state(disc: Discretization, u: np.ndarray, tol: float = NEWTON_TOL,
                max_iters: int = NEWTON_MAX_ITERS) -> np.ndarray:
    """Solve the nonlinear state scheme for control ``u`` by Newton per time step."""
    u = np.asarray(u, dtype=float)
    _check_control(disc, u, "control")
    fem = disc.fem
    tau = disc.tau
    Mt = fem.mass / tau
    base = (Mt + fem.stiffness).tocsr()
    ML = fem.lumped_mass

    direct = use_direct(disc)
    prec = None if direct else base_preconditioner(disc)

    y = np.empty(disc.state_shape)
    y[0] = disc.initial_state
    for k in range(1, disc.N + 1):
        R = disc.robin_matrix(u[k - 1])
        lin = (base + R).tocsr()
        rhs = Mt @ y[k - 1] + disc.loads[k - 1]

        def residual(z):
            return lin @ z + ML * disc.a(z) - rhs

        yk = y[k - 1].copy()
        F = residual(yk)
        res = _max(F)
        it = 0
        while res > tol:
            if it == max_iters:
                raise NewtonDivergence(k, res, it)
            J = lin + sp.diags(ML * disc.da(yk))
            dy = splu(sp.csc_matrix(J)).solve(-F) if direct else pcg_solve(J.tocsr(), -F, prec)
            step = 1.0
            trial = yk + dy
            Ft = residual(trial)
            halvings = 0
            while _max(Ft) > res and halvings < MAX_HALVINGS:
                step *= 0.5
                halvings += 1
                trial = yk + step * dy
                Ft = residual(trial)
            yk, F = trial, Ft
            new_res = _max(F)
            it += 1
            if not np.isfinite(new_res):
                raise NewtonDivergence(k, new_res, it)
            res = new_res
        y[k] = yk
    return y


def state_residual(disc: Discretization, y: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Residual of the state scheme; row 0 is ``y^0 - y0``, row k the k-th step equation."""
    fem = disc.fem
    Mt = fem.mass / disc.tau
    r = np.empty(disc.state_shape)
    r[0] = y[0] - disc.initial_state
    for k in range(1, disc.N + 1):
        r[k] = (Mt @ (y[k] - y[k - 1]) + fem.stiffness @ y[k] + fem.lumped_mass * disc.a(y[k])
                + disc.robin_apply(u[k - 1], y[k]) - disc.loads[k - 1])
    return r


def _terminal_adjoint(disc: Discretization, yN: np.ndarray) -> np.ndarray:
    return disc.spec.terminal_weight * (yN - disc.terminal_target)


def _tracking_source(disc: Discretization, y: np.ndarray, k: int) -> np.ndarray:
    w = disc.spec.tracking_weight
    if not w:
        return np.zeros(disc.mesh.n_nodes)
    return w * (disc.fem.mass @ (y[k] - disc.target_mean[k - 1]))


def solve_adjoint(disc: Discretization, y: np.ndarray, u: np.ndarray,
                  steps: StepMatrices | None = None) -> np.ndarray:
    """Backward sweep for the discrete adjoint at (y, u).

    ``phi[N]`` is the terminal value and ``phi[k-1]`` solves
    ``A_k phi[k-1] = (M/tau) phi[k] + M dL/dy(y^k)``.
    """
    _check_state(disc, y, "state")
    _check_control(disc, u, "control")
    steps = steps or StepMatrices(disc, y, u)
    Mt = disc.fem.mass / disc.tau
    phi = np.empty(disc.state_shape)
    phi[disc.N] = _terminal_adjoint(disc, y[disc.N])
    for k in range(disc.N, 0, -1):
        phi[k - 1] = steps.solve(k, Mt @ phi[k] + _tracking_source(disc, y, k))
    return phi


def adjoint_residual(disc: Discretization, y: np.ndarray, phi: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Residual of the adjoint scheme at an arbitrary triple; row N is the terminal condition."""
    fem = disc.fem
    Mt = fem.mass / disc.tau
    r = np.empty(disc.state_shape)
    for k in range(1, disc.N + 1):
        p = phi[k - 1]
        r[k - 1] = (Mt @ (p - phi[k]) + fem.stiffness @ p + fem.lumped_mass * disc.da(y[k]) * p
                    + disc.robin_apply(u[k - 1], p) - _tracking_source(disc, y, k))
    r[disc.N] = phi[disc.N] - _terminal_adjoint(disc, y[disc.N])
    return r


def solve_linearized_state(disc: Discretization, w: Iterate, v: np.ndarray | None,
                           include_residual: bool, steps: StepMatrices | None = None,
                           state_res: np.ndarray | None = None) -> np.ndarray:
    """Forward linearized sweep around (y_n, u_n).

    Returns ``z_{w,v}`` (``include_residual=False``), the residual-driven
    correction ``zeta_0`` (``v=None``, ``include_residual=True``) or their
    sum.
    """
    _check_state(disc, w.y, "iterate state")
    _check_control(disc, w.u, "iterate control")
    if v is not None:
        _check_control(disc, v, "direction")
    steps = steps or StepMatrices(disc, w.y, w.u)
    Mt = disc.fem.mass / disc.tau
    if include_residual and state_res is None:
        state_res = state_residual(disc, w.y, w.u)

    z = np.zeros(disc.state_shape)
    if include_residual:
        z[0] = -state_res[0]
    for k in range(1, disc.N + 1):
        rhs = Mt @ z[k - 1]
        if v is not None:
            rhs -= disc.robin_apply(v[k - 1], w.y[k])
        if include_residual:
            rhs -= state_res[k]
        z[k] = steps.solve(k, rhs)
    return z


def solve_linearized_adjoint(disc: Discretization, w: Iterate, v: np.ndarray | None,
                             zeta: np.ndarray, include_residual: bool,
                             steps: StepMatrices | None = None,
                             adjoint_res: np.ndarray | None = None) -> np.ndarray:
    """Backward linearized sweep around (y_n, phi_n, u_n) driven by ``zeta`` and ``v``."""
    _check_state(disc, w.phi, "iterate adjoint")
    _check_state(disc, zeta, "zeta")
    if v is not None:
        _check_control(disc, v, "direction")
    steps = steps or StepMatrices(disc, w.y, w.u)
    fem = disc.fem
    Mt = fem.mass / disc.tau
    wL = disc.spec.tracking_weight
    if include_residual and adjoint_res is None:
        adjoint_res = adjoint_residual(disc, w.y, w.phi, w.u)

    N = disc.N
    eta = np.empty(disc.state_shape)
    eta[N] = disc.spec.terminal_weight * zeta[N]
    if include_residual:
        eta[N] -= adjoint_res[N]
    for k in range(N, 0, -1):
        p = w.phi[k - 1]
        rhs = Mt @ eta[k] - fem.lumped_mass * disc.dda(w.y[k]) * p * zeta[k]
        if wL:
            rhs += wL * (fem.mass @ zeta[k])
        if v is not None:
            rhs -= disc.robin_apply(v[k - 1], p)
        if include_residual:
            rhs -= adjoint_res[k - 1]
        eta[k - 1] = steps.solve(k, rhs)
    return eta
