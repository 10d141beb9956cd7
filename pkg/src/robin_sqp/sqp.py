"""Lagrange-Newton SQP iteration and coarse-to-fine continuation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NoConvergence, SolverError
from .problem import Discretization, Iterate, ProblemSpec
from .qp import QpSolution, assemble_qp, solve_qp
from .reduced import projected_gradient_init
from .transfer import prolong_control, prolong_state

log = logging.getLogger(__name__)

DEFAULT_RHO = 5e-13
DEFAULT_MAX_ITERS = 30


@dataclass(frozen=True)
class ConvergenceRecord:
    n: int
    objective: float
    delta_u: Optional[float] = None
    delta_y: Optional[float] = None
    delta_phi: Optional[float] = None

    @property
    def delta_sum(self) -> float:
        if self.delta_u is None:
            return math.inf
        return self.delta_u + self.delta_y + self.delta_phi


def relative_increment(new: np.ndarray, old: np.ndarray) -> float:
    """``||new - old||_inf / max(1, ||new||_inf)``."""
    return float(np.max(np.abs(new - old)) / max(1.0, np.max(np.abs(new))))


def objectives_equal(a: float, b: float) -> bool:
    """Equality up to a few units in the last place of max(1, |a|)."""
    return abs(a - b) <= 4.0 * math.ulp(max(1.0, abs(a)))


def sqp_step(disc: Discretization, w: Iterate, step: float = 1.0,
             qp_tol: float | None = None) -> tuple[Iterate, QpSolution]:
    """One Newton step: solve the subproblem at ``w`` and update all three variables.

    ``step`` scales the full direction; the method itself uses 1.
    """
    qp = assemble_qp(disc, w)
    sol = solve_qp(qp, tol=qp_tol)
    z, eta = qp.hessian.directions(sol.v)
    y = w.y + step * (z + qp.zeta0)
    phi = w.phi + step * (eta + qp.eta0)
    u = w.u + step * sol.v
    return Iterate(y, phi, u, disc.objective(y, u), disc.level), sol


@dataclass
class SqpResult:
    iterate: Iterate
    history: list
    qp_solutions: list = field(default_factory=list, repr=False)

    @property
    def iterations(self) -> int:
        return self.history[-1].n


def run_sqp(disc: Discretization, w0: Iterate, rho: float = DEFAULT_RHO,
            max_iters: int = DEFAULT_MAX_ITERS, step: float = 1.0) -> SqpResult:
    """Iterate :func:`sqp_step` until the relative increments sum below ``rho``
    or two consecutive objective values coincide to machine precision."""
    w = w0.copy()
    w.objective = disc.objective(w.y, w.u)
    w.level = disc.level
    history = [ConvergenceRecord(0, w.objective)]
    sols = []
    for n in range(1, max_iters + 1):
        w_new, sol = sqp_step(disc, w, step)
        rec = ConvergenceRecord(
            n,
            w_new.objective,
            relative_increment(w_new.u, w.u),
            relative_increment(w_new.y, w.y),
            relative_increment(w_new.phi, w.phi),
        )
        history.append(rec)
        sols.append(sol)
        log.info("level %d sqp %d J=%.16e du=%.1e dy=%.1e dphi=%.1e (pdas %d, cg %d)", disc.level, n,
                 rec.objective, rec.delta_u, rec.delta_y, rec.delta_phi, sol.outer_iters, sol.inner_iters)
        done = rec.delta_sum < rho or objectives_equal(w_new.objective, w.objective)
        w = w_new
        if done:
            return SqpResult(w, history, sols)
    raise NoConvergence(max_iters, history)


def initial_iterate(disc: Discretization, pg_tol: float = 1e-6, pg_max_iters: int = 2000) -> Iterate:
    """Feasible warm start on the coarsest level from u = (alpha + beta)/2."""
    spec = disc.spec
    u0 = disc.constant_control(0.5 * (spec.alpha + spec.beta))
    return projected_gradient_init(disc, u0, max_iters=pg_max_iters, tol=pg_tol)


def prolong_iterate(w: Iterate, coarse: Discretization, fine: Discretization) -> Iterate:
    args = (coarse.mesh, fine.mesh, coarse.timegrid, fine.timegrid)
    y = prolong_state(w.y, *args)
    phi = prolong_state(w.phi, *args)
    u = np.clip(prolong_control(w.u, *args), fine.spec.alpha, fine.spec.beta)
    return Iterate(y, phi, u, fine.objective(y, u), fine.level)


@dataclass
class ContinuationResult:
    iterate: Iterate
    discretization: Discretization
    histories: dict
    results: dict = field(default_factory=dict, repr=False)


def run_continuation(spec: ProblemSpec, level_min: int, level_max: int, rho: float = DEFAULT_RHO,
                     max_iters: int = DEFAULT_MAX_ITERS, pg_tol: float = 1e-6) -> ContinuationResult:
    """Solve on level ``level_min`` from a projected-gradient warm start, then
    prolong each solution triple as the initial iterate of the next level."""
    if level_min < 2:
        raise ValueError("level_min >= 2 required")
    if level_max < level_min:
        raise ValueError("level_min <= level_max required")
    histories = {}
    results = {}
    disc = None
    w = None
    for level in range(level_min, level_max + 1):
        fine = Discretization.at_level(spec, level)
        try:
            w0 = initial_iterate(fine, pg_tol) if disc is None else prolong_iterate(w, disc, fine)
            res = run_sqp(fine, w0, rho=rho, max_iters=max_iters)
        except SolverError as exc:
            exc.level = level
            exc.args = (f"level {level}: {exc}",) + exc.args[1:]
            raise
        histories[level] = res.history
        results[level] = res
        w, disc = res.iterate, fine
    return ContinuationResult(w, disc, histories, results)
