"""Numerical checks of gradient, Hessian symmetry, projection and complementarity."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .problem import Discretization, Iterate
from .qp import LagrangianHessian
from .reduced import evaluate, project

FD_STEPS = (1e-3, 1e-4, 1e-5, 1e-6, 1e-7)
DEFAULT_SEED = 20240611


def _relative_error(approx: float, exact: float) -> float:
    den = max(abs(exact), abs(approx))
    if den == 0.0:
        return 0.0
    return abs(approx - exact) / den


def fd_error_curve(disc: Discretization, u: np.ndarray, v: np.ndarray, steps=FD_STEPS,
                   gradient: np.ndarray | None = None) -> list[float]:
    """Relative error of central differences of J against ``<J'(u), v>`` per step."""
    if gradient is None:
        gradient = evaluate(disc, u).gradient
    exact = disc.control_inner(gradient, v)
    errs = []
    for h in steps:
        jp = evaluate(disc, u + h * v, with_gradient=False).objective
        jm = evaluate(disc, u - h * v, with_gradient=False).objective
        errs.append(_relative_error((jp - jm) / (2 * h), exact))
    return errs


def gradient_check(disc: Discretization, u: np.ndarray, n_directions: int = 5,
                   seed: int = DEFAULT_SEED, steps=FD_STEPS) -> float:
    """Worst (over random directions) of the best (over FD steps) relative error."""
    rng = np.random.default_rng(seed)
    grad = evaluate(disc, u).gradient
    worst = 0.0
    for _ in range(n_directions):
        v = rng.standard_normal(disc.control_shape)
        worst = max(worst, min(fd_error_curve(disc, u, v, steps, grad)))
    return worst


def symmetry_check(disc: Discretization, w: Iterate, n_pairs: int = 5, seed: int = DEFAULT_SEED,
                   pairs=None) -> float:
    """max |<H v1, v2> - <H v2, v1>| / (1 + |<H v1, v2>|) over direction pairs."""
    H = LagrangianHessian(disc, w)
    if pairs is None:
        rng = np.random.default_rng(seed)
        pairs = [(rng.standard_normal(disc.control_shape), rng.standard_normal(disc.control_shape))
                 for _ in range(n_pairs)]
    worst = 0.0
    for v1, v2 in pairs:
        a = disc.control_inner(H(v1), v2)
        b = disc.control_inner(H(v2), v1)
        worst = max(worst, abs(a - b) / (1.0 + abs(a)))
    return worst


def switching_function(disc: Discretization, w: Iterate) -> np.ndarray:
    """``kappa u - y phi`` on Sigma, shape (N, nb)."""
    return disc.spec.kappa * w.u - disc.switching(w.y, w.phi)


def projection_residual(disc: Discretization, w: Iterate) -> float:
    """``||u - clamp(y phi / kappa, [alpha, beta])||_inf`` nodally."""
    spec = disc.spec
    target = project(disc.switching(w.y, w.phi) / spec.kappa, spec.alpha, spec.beta)
    return float(np.max(np.abs(w.u - target)))


def default_audit_tau(disc: Discretization) -> float:
    spec = disc.spec
    return 1e-3 * spec.kappa * (spec.beta - spec.alpha)


@dataclass
class ComplementarityAudit:
    margin: float
    degenerate_fraction: float
    tau_plus: int
    tau_minus: int
    active: int
    total: int


def complementarity_audit(disc: Discretization, w: Iterate, tau: float | None = None,
                          bound_tol: float = 1e-10) -> ComplementarityAudit:
    """Strict-complementarity proxies at a converged iterate.

    ``margin`` is ``min |d|`` over nodes where u sits at a bound (``inf`` if
    no bound is active), ``degenerate_fraction`` the share of nodes with u
    at a bound and ``|d| <= tau``; ``tau_plus``/``tau_minus`` count
    ``d > tau`` and ``d < -tau``.
    """
    spec = disc.spec
    if tau is None:
        tau = default_audit_tau(disc)
    d = switching_function(disc, w)
    scale = bound_tol * max(1.0, spec.beta)
    at_bound = (np.abs(w.u - spec.alpha) <= scale) | (np.abs(w.u - spec.beta) <= scale)
    margin = float(np.min(np.abs(d[at_bound]))) if at_bound.any() else math.inf
    degenerate = at_bound & (np.abs(d) <= tau)
    return ComplementarityAudit(
        margin=margin,
        degenerate_fraction=float(degenerate.sum()) / d.size,
        tau_plus=int((d > tau).sum()),
        tau_minus=int((d < -tau).sum()),
        active=int(at_bound.sum()),
        total=int(d.size),
    )


def convergence_slope(history, key: str = "delta_u", window: int = 3) -> float:
    """Least-squares slope of ``log delta_{n+1}`` against ``log delta_n``.

    Uses the last ``window`` increments recorded before the stopping
    iteration (the final record is excluded).  Quadratic convergence shows
    as a slope near 2.
    """
    deltas = [getattr(r, key) for r in history[1:-1]]
    deltas = deltas[-window:]
    if len(deltas) < 2:
        raise ValueError("need at least two pre-stop increments to fit a slope")
    logs = np.log(np.maximum(np.array(deltas, dtype=float), np.finfo(float).tiny))
    x, y = logs[:-1], logs[1:]
    if len(x) == 1:
        return float(y[0] / x[0]) if x[0] != 0 else math.nan
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class DiagnosticsReport:
    gradient_fd_error: float
    hessian_asymmetry: float
    projection_residual: float
    strict_complementarity_margin: float
    degenerate_fraction: float
    tau_plus: int
    tau_minus: int
    convergence_slope: float

    def to_text(self) -> str:
        lines = []
        for key, value in asdict(self).items():
            if isinstance(value, float):
                lines.append(f"{key} = {value:.6e}")
            else:
                lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"
