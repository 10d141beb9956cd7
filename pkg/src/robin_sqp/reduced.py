"""Reduced objective, gradient, projection and the projected-gradient warm start."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import MaxItersExceeded
from .pde import StepMatrices, solve_adjoint, solve_state
from .problem import Discretization, Iterate

log = logging.getLogger(__name__)


@dataclass
class ReducedEvaluation:
    objective: float
    gradient: np.ndarray
    state: np.ndarray
    adjoint: np.ndarray


def evaluate(disc: Discretization, u: np.ndarray, with_gradient: bool = True) -> ReducedEvaluation:
    """Objective J(u) and its gradient ``kappa u - y phi`` in the lumped L2(Sigma) product."""
    u = np.asarray(u, dtype=float)
    y = solve_state(disc, u)
    J = disc.objective(y, u)
    if not with_gradient:
        return ReducedEvaluation(J, None, y, None)
    phi = solve_adjoint(disc, y, u, StepMatrices(disc, y, u))
    grad = disc.spec.kappa * u - disc.switching(y, phi)
    return ReducedEvaluation(J, grad, y, phi)


def project(raw: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    return np.clip(raw, alpha, beta)


def fixed_point_residual(disc: Discretization, u: np.ndarray, gradient: np.ndarray) -> float:
    """``||u - P(u - gradient)||_inf``; zero exactly at first-order points."""
    spec = disc.spec
    return float(np.max(np.abs(u - project(u - gradient, spec.alpha, spec.beta))))


def projected_gradient_init(disc: Discretization, u_start: np.ndarray, max_iters: int = 500,
                            tol: float = 1e-6, step0: float = 1.0, shrink: float = 0.5,
                            slope: float = 1e-4, max_backtracks: int = 40, callback=None) -> Iterate:
    """Projected gradient with Armijo backtracking on the true objective.

    Stops when the fixed-point residual is below ``tol``; returns the
    feasible triple ``(y_u, phi_u, u)`` with ``iterations`` set.
    ``callback(iteration, objective, residual)`` is called once per iterate.
    """
    spec = disc.spec
    if spec.kappa <= 0:
        raise ValueError("projected gradient needs kappa > 0")
    u = project(np.asarray(u_start, dtype=float), spec.alpha, spec.beta)
    ev = evaluate(disc, u)
    for it in range(max_iters + 1):
        res = fixed_point_residual(disc, u, ev.gradient)
        log.debug("pg iter %d J=%.16e res=%.3e", it, ev.objective, res)
        if callback is not None:
            callback(it, ev.objective, res)
        if res <= tol:
            return Iterate(ev.state, ev.adjoint, u, ev.objective, disc.level, it)
        if it == max_iters:
            break
        s = step0
        for _ in range(max_backtracks):
            trial = project(u - s * ev.gradient, spec.alpha, spec.beta)
            t_ev = evaluate(disc, trial, with_gradient=False)
            decrease = disc.control_inner(ev.gradient, trial - u)
            if t_ev.objective <= ev.objective + slope * decrease:
                break
            s *= shrink
        else:
            raise MaxItersExceeded(it, res, Iterate(ev.state, ev.adjoint, u, ev.objective, disc.level, it))
        u = trial
        ev = evaluate(disc, u)
    raise MaxItersExceeded(max_iters, res, Iterate(ev.state, ev.adjoint, u, ev.objective, disc.level, max_iters))
