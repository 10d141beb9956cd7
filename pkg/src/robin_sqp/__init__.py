"""Lagrange-Newton SQP for bilinear Robin boundary control of semilinear parabolic equations."""

from .errors import (
    LinearSolverFailure,
    MaxItersExceeded,
    MaxOuterExceeded,
    NewtonDivergence,
    NoConvergence,
    SecondOrderFailure,
    SolverError,
)
from .fem import FemMatrices, assemble
from .mesh import Mesh, build_uniform_mesh
from .pde import (
    solve_adjoint,
    solve_linearized_adjoint,
    solve_linearized_state,
    solve_state,
)
from .problem import Discretization, Iterate, ProblemSpec, discretize, example_problem
from .qp import assemble_qp, hessian_apply, solve_qp
from .reduced import evaluate, project, projected_gradient_init
from .sqp import ConvergenceRecord, run_continuation, run_sqp, sqp_step
from .timegrid import TimeGrid
from .transfer import prolong_control, prolong_nodal, prolong_state

__version__ = "0.1.0"
