"""Exception types raised by the solvers."""


class SolverError(RuntimeError):
    """Base class for numerical failures."""


class NewtonDivergence(SolverError):
    """Per-step Newton iteration of the state equation did not converge."""

    def __init__(self, step: int, residual: float, iterations: int):
        self.step = step
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"state Newton failed at time step {step}: residual {residual:.3e} "
            f"after {iterations} iterations (time step or level too coarse for the nonlinearity?)"
        )


class LinearSolverFailure(SolverError):
    """Preconditioned CG did not reach the required accuracy."""

    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"step solve stalled at relative residual {residual:.3e}")


class MaxItersExceeded(SolverError):
    def __init__(self, iterations: int, residual: float, result=None):
        self.iterations = iterations
        self.residual = residual
        self.result = result
        super().__init__(f"no convergence in {iterations} iterations, last residual {residual:.3e}")


class MaxOuterExceeded(SolverError):
    """Active-set iteration did not settle."""

    def __init__(self, iterations: int, kkt_residual: float):
        self.iterations = iterations
        self.kkt_residual = kkt_residual
        super().__init__(f"active sets still changing after {iterations} iterations, KKT residual {kkt_residual:.3e}")


class SecondOrderFailure(SolverError):
    """Conjugate gradients met non-positive curvature of the reduced Hessian."""

    def __init__(self, curvature: float):
        self.curvature = curvature
        super().__init__(f"non-positive curvature {curvature:.3e} in QP Hessian")


class NoConvergence(SolverError):
    def __init__(self, iterations: int, history):
        self.iterations = iterations
        self.history = history
        super().__init__(f"SQP did not meet the stopping rule in {iterations} iterations")
