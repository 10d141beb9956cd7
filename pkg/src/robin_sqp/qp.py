"""Linear-quadratic subproblem of one Lagrange-Newton step.

The subproblem in the control increment ``v`` is

    min  1/2 <H v, v> + <q, v>   subject to  alpha - u_n <= v <= beta - u_n,

where ``<., .>`` is the lumped L2(Sigma) product and ``H`` is the Riesz
representative of the Lagrangian Hessian along linearized state/adjoint
directions.  ``H`` is only available through products, each costing one
forward and one backward linearized sweep.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import MaxOuterExceeded, SecondOrderFailure
from .pde import (
    StepMatrices,
    adjoint_residual,
    solve_linearized_adjoint,
    solve_linearized_state,
    state_residual,
)
from .problem import Discretization, Iterate

log = logging.getLogger(__name__)


class LagrangianHessian:
    """Matrix-free Hessian products at a fixed iterate ``w``."""

    def __init__(self, disc: Discretization, w: Iterate, steps: StepMatrices | None = None):
        self.disc = disc
        self.w = w
        self.steps = steps or StepMatrices(disc, w.y, w.u)
        self.applications = 0

    def directions(self, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Homogeneous linearized state and adjoint responses to ``v``."""
        z = solve_linearized_state(self.disc, self.w, v, False, self.steps)
        eta = solve_linearized_adjoint(self.disc, self.w, v, z, False, self.steps)
        return z, eta

    def apply(self, v: np.ndarray) -> np.ndarray:
        self.applications += 1
        z, eta = self.directions(v)
        disc, w = self.disc, self.w
        return disc.spec.kappa * v - disc.switching(w.y, eta) - disc.switching(z, w.phi)

    __call__ = apply


def hessian_apply(disc: Discretization, w: Iterate, v: np.ndarray) -> np.ndarray:
    """``kappa v - y_n eta_{w,v} - z_{w,v} phi_n`` on Sigma."""
    return LagrangianHessian(disc, w).apply(v)


@dataclass
class QpProblem:
    disc: Discretization
    w: Iterate
    hessian: LagrangianHessian
    q: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    zeta0: np.ndarray
    eta0: np.ndarray

    def __post_init__(self):
        if np.any(self.lower > self.upper):
            raise ValueError("QP bounds violate lower <= upper")

    @property
    def weights(self) -> np.ndarray:
        return self.disc.control_weights()

    def value(self, v: np.ndarray, Hv: np.ndarray | None = None) -> float:
        if Hv is None:
            Hv = self.hessian(v)
        return 0.5 * self.disc.control_inner(Hv, v) + self.disc.control_inner(self.q, v)


@dataclass
class QpSolution:
    v: np.ndarray
    active_lower: np.ndarray
    active_upper: np.ndarray
    multiplier: np.ndarray
    outer_iters: int
    inner_iters: int
    kkt_residual: float
    Hv: np.ndarray = field(repr=False, default=None)


def assemble_qp(disc: Discretization, w: Iterate) -> QpProblem:
    """Residual-driven corrections and linear term of the Newton subproblem at ``w``."""
    spec = disc.spec
    steps = StepMatrices(disc, w.y, w.u)
    zeta0 = solve_linearized_state(disc, w, None, True, steps, state_residual(disc, w.y, w.u))
    eta0 = solve_linearized_adjoint(disc, w, None, zeta0, True, steps,
                                    adjoint_residual(disc, w.y, w.phi, w.u))
    q = (spec.kappa * w.u - disc.switching(w.y, w.phi)
         - disc.switching(w.y, eta0) - disc.switching(zeta0, w.phi))
    return QpProblem(
        disc=disc,
        w=w,
        hessian=LagrangianHessian(disc, w, steps),
        q=q,
        lower=spec.alpha - w.u,
        upper=spec.beta - w.u,
        zeta0=zeta0,
        eta0=eta0,
    )


def kkt_residual(qp: QpProblem, v: np.ndarray, grad: np.ndarray) -> float:
    """``||v - clamp(v - grad/kappa)||_inf`` with ``grad = H v + q``."""
    kappa = qp.disc.spec.kappa
    return float(np.max(np.abs(v - np.clip(v - grad / kappa, qp.lower, qp.upper))))


def _cg(H, rhs, mask, weights, target, max_iters):
    """Conjugate gradients for ``(H x)|mask = rhs|mask`` with x supported on ``mask``.

    Uses the weighted inner product in which H is self-adjoint.  Returns the
    solution, ``H x`` on the full index set, and the iteration count.
    """
    x = np.zeros_like(rhs)
    Hx = np.zeros_like(rhs)
    r = np.where(mask, rhs, 0.0)
    if np.max(np.abs(r)) <= target:
        return x, Hx, 0
    p = r.copy()
    rr = np.sum(weights * r * r)
    for it in range(1, max_iters + 1):
        Hp = H(p)
        curv = np.sum(weights * p * Hp)
        if curv <= 0:
            raise SecondOrderFailure(curv / max(np.sum(weights * p * p), 1e-300))
        a = rr / curv
        x += a * p
        Hx += a * Hp
        r -= a * np.where(mask, Hp, 0.0)
        if np.max(np.abs(r)) <= target:
            return x, Hx, it
        rr_new = np.sum(weights * r * r)
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x, Hx, max_iters


def solve_qp(qp: QpProblem, tol: float | None = None, max_outer: int = 50,
             cg_rtol: float = 1e-12, cg_max_iters: int = 1000) -> QpSolution:
    """Primal-dual active-set method with matrix-free CG on the inactive set.

    The active sets are predicted from ``v - (H v + q)/kappa`` against the
    bounds (strict inequalities, so ties go inactive).  The method stops
    once the sets repeat and the projected KKT residual is below ``tol``.
    """
    kappa = qp.disc.spec.kappa
    if kappa <= 0:
        raise ValueError("QP solver needs kappa > 0")
    q = qp.q
    scale = max(1.0, float(np.max(np.abs(q))))
    if tol is None:
        tol = 1e-12 * scale
    # The KKT residual on the inactive set is |H v + q| / kappa.
    cg_target = min(cg_rtol * scale, 0.5 * kappa * tol)
    W = qp.weights
    H = qp.hessian

    v = np.clip(-q / kappa, qp.lower, qp.upper)
    Hv = H(v)
    grad = Hv + q
    prev = None
    inner = 0
    for outer in range(1, max_outer + 1):
        trial = v - grad / kappa
        act_lo = trial < qp.lower
        act_up = trial > qp.upper
        res = kkt_residual(qp, v, grad)
        log.debug("pdas %d |A-|=%d |A+|=%d kkt=%.3e", outer, act_lo.sum(), act_up.sum(), res)
        if prev is not None and np.array_equal(act_lo, prev[0]) and np.array_equal(act_up, prev[1]) and res <= tol:
            break
        inactive = ~(act_lo | act_up)
        new_v = np.where(act_lo, qp.lower, np.where(act_up, qp.upper, v))
        if not np.array_equal(new_v, v):
            v = new_v
            Hv = H(v)
            grad = Hv + q
        dx, Hdx, its = _cg(H, -grad, inactive, W, cg_target, cg_max_iters)
        inner += its
        v = v + dx
        Hv = Hv + Hdx
        grad = Hv + q
        prev = (act_lo, act_up)
    else:
        raise MaxOuterExceeded(max_outer, kkt_residual(qp, v, grad))

    multiplier = np.where(act_lo | act_up, -grad, 0.0)
    return QpSolution(
        v=np.clip(v, qp.lower, qp.upper),
        active_lower=act_lo,
        active_upper=act_up,
        multiplier=multiplier,
        outer_iters=outer,
        inner_iters=inner,
        kkt_residual=res,
        Hv=Hv,
    )
