"""Linear solves with the per-step matrices ``M/tau + K + diag(d) + R``.

Small problems factor every step matrix once with a sparse LU.  Once the
number of space-time unknowns exceeds ``DIRECT_DOF_LIMIT`` one factor per
step no longer fits in memory (about 30 GB for 257 x 66049 unknowns), so the
solves switch to conjugate gradients preconditioned by a single algebraic
multigrid hierarchy of ``M/tau + K`` shared by all steps.  The step
matrices differ from that operator only by diagonal and boundary terms, so
the preconditioner stays spectrally equivalent.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from .errors import LinearSolverFailure

DIRECT_DOF_LIMIT = 1_000_000
PCG_RTOL = 1e-14
PCG_ACCEPT = 1e-11
PCG_MAX_ITERS = 1000
SOLVERS = ("auto", "direct", "iterative")


def use_direct(disc) -> bool:
    mode = disc.linear_solver
    if mode == "auto":
        return disc.mesh.n_nodes * disc.N <= DIRECT_DOF_LIMIT
    return mode == "direct"


def base_operator(disc) -> sp.csr_matrix:
    fem = disc.fem
    return (fem.mass / disc.tau + fem.stiffness).tocsr()


def base_preconditioner(disc):
    """AMG V-cycle for ``M/tau + K``, built once per discretization."""
    cached = getattr(disc, "_amg_preconditioner", None)
    if cached is not None:
        return cached
    try:
        import pyamg
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise ImportError("iterative step solves need pyamg (pip install pyamg)") from exc
    ml = pyamg.smoothed_aggregation_solver(base_operator(disc), symmetry="symmetric")
    prec = ml.aspreconditioner(cycle="V")
    disc._amg_preconditioner = prec
    return prec


def pcg_solve(A, rhs: np.ndarray, preconditioner) -> np.ndarray:
    """Preconditioned CG to ``PCG_RTOL``; accepts ``PCG_ACCEPT`` if stagnating."""
    norm = float(np.linalg.norm(rhs))
    if norm == 0.0:
        return np.zeros_like(rhs)
    x, info = cg(A, rhs, rtol=PCG_RTOL, atol=0.0, maxiter=PCG_MAX_ITERS, M=preconditioner)
    if info != 0:
        res = float(np.linalg.norm(rhs - A @ x)) / norm
        if not res <= PCG_ACCEPT:
            raise LinearSolverFailure(res)
    return x


def shifted_operator(base: sp.csr_matrix, diag: np.ndarray, extra: sp.spmatrix | None) -> LinearOperator:
    """``base + diag(diag) (+ extra)`` without forming the sum."""
    n = base.shape[0]

    def mv(x):
        x = np.ravel(x)
        out = base @ x + diag * x
        if extra is not None:
            out += extra @ x
        return out

    return LinearOperator((n, n), matvec=mv, dtype=float)
