import numpy as np
import pytest

from conftest import feasible_iterate
from dense_oracle import DenseOracle, projected_gradient_qp
from robin_sqp import (
    Discretization,
    Iterate,
    MaxOuterExceeded,
    SecondOrderFailure,
    assemble_qp,
    hessian_apply,
    example_problem,
    solve_qp,
)
from robin_sqp.qp import LagrangianHessian, QpProblem, kkt_residual


def perturbed_iterate(disc, seed):
    """A feasible iterate with noise added to y, phi and u (no longer feasible)."""
    rng = np.random.default_rng(seed)
    w = feasible_iterate(disc, rng.uniform(0.2, 3.0, disc.control_shape))
    return Iterate(w.y + 0.05 * rng.standard_normal(w.y.shape),
                   w.phi + 0.05 * rng.standard_normal(w.phi.shape),
                   w.u, level=disc.level)


def custom_qp(disc, w, q, lower, upper, hessian=None):
    zeros = np.zeros(disc.state_shape)
    return QpProblem(disc, w, hessian or LagrangianHessian(disc, w), q, lower, upper, zeros, zeros)


class TestHessian:
    def test_zero_direction(self, disc2):
        w = feasible_iterate(disc2, disc2.constant_control(0.6))
        assert not hessian_apply(disc2, w, np.zeros(disc2.control_shape)).any()

    def test_decoupled_iterate_is_regularization(self, disc2):
        zeros = np.zeros(disc2.state_shape)
        w = Iterate(zeros, zeros.copy(), disc2.constant_control(1.0))
        v = np.random.default_rng(1).standard_normal(disc2.control_shape)
        assert np.array_equal(hessian_apply(disc2, w, v), 0.3 * v)

    def test_matches_dense_oracle(self, disc2):
        w = perturbed_iterate(disc2, 3)
        H, *_ = DenseOracle(2).reduced_qp(w.y, w.phi, w.u)
        v = np.random.default_rng(9).standard_normal(disc2.control_shape)
        assert np.max(np.abs(hessian_apply(disc2, w, v).ravel() - H @ v.ravel())) < 1e-11

    def test_counts_applications(self, disc2):
        w = feasible_iterate(disc2, disc2.constant_control(0.6))
        H = LagrangianHessian(disc2, w)
        H(np.ones(disc2.control_shape))
        H(np.ones(disc2.control_shape))
        assert H.applications == 2

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_self_adjoint_in_weighted_product(self, disc2, seed):
        w = perturbed_iterate(disc2, seed)
        rng = np.random.default_rng(100 + seed)
        v1, v2 = rng.standard_normal((2,) + disc2.control_shape)
        H = LagrangianHessian(disc2, w)
        a = disc2.control_inner(H(v1), v2)
        b = disc2.control_inner(H(v2), v1)
        assert abs(a - b) <= 1e-10 * (1 + abs(a))


class TestAssembly:
    def test_feasible_iterate(self, disc2):
        w = feasible_iterate(disc2, disc2.constant_control(0.6))
        qp = assemble_qp(disc2, w)
        assert np.max(np.abs(qp.zeta0)) < 1e-11
        assert np.max(np.abs(qp.eta0)) < 1e-11
        grad = 0.3 * w.u - disc2.switching(w.y, w.phi)
        assert np.max(np.abs(qp.q - grad)) < 1e-11

    def test_bounds_are_shifted_box(self, disc2):
        w = feasible_iterate(disc2, disc2.constant_control(0.6))
        qp = assemble_qp(disc2, w)
        assert np.allclose(qp.lower, 0.1 - 0.6) and np.allclose(qp.upper, 100.0 - 0.6)

    @pytest.mark.parametrize("seed", [0, 1])
    def test_matches_dense_block_elimination(self, disc2, seed):
        w = perturbed_iterate(disc2, seed)
        _, q, zeta0, eta0 = DenseOracle(2).reduced_qp(w.y, w.phi, w.u)
        qp = assemble_qp(disc2, w)
        assert np.max(np.abs(qp.q.ravel() - q)) < 1e-11
        assert np.max(np.abs(qp.zeta0 - zeta0)) < 1e-11
        assert np.max(np.abs(qp.eta0 - eta0)) < 1e-11


class TestSolver:
    @pytest.fixture(scope="class")
    @staticmethod
    def setup():
        disc = Discretization.at_level(example_problem(2), 2)
        return disc, perturbed_iterate(disc, 2)

    def test_zero_linear_term(self, setup):
        disc, w = setup
        one = np.ones(disc.control_shape)
        sol = solve_qp(custom_qp(disc, w, np.zeros(disc.control_shape), -one, one))
        assert np.max(np.abs(sol.v)) == 0.0

    def test_decoupled_closed_form(self, disc2):
        zeros = np.zeros(disc2.state_shape)
        w = Iterate(zeros, zeros.copy(), disc2.constant_control(1.0))
        q = np.random.default_rng(4).standard_normal(disc2.control_shape)
        lo, hi = -np.ones_like(q), 2 * np.ones_like(q)
        sol = solve_qp(custom_qp(disc2, w, q, lo, hi))
        assert np.max(np.abs(sol.v - np.clip(-q / 0.3, lo, hi))) < 1e-13

    def test_agrees_with_projected_gradient_oracle(self, setup):
        disc, w = setup
        qp = assemble_qp(disc, w)
        H, *_ = DenseOracle(2).reduced_qp(w.y, w.phi, w.u)
        ref = projected_gradient_qp(H, qp.q.ravel(), qp.lower.ravel(), qp.upper.ravel(),
                                    qp.weights.ravel())
        sol = solve_qp(qp)
        assert np.max(np.abs(sol.v.ravel() - ref)) < 1e-8
        assert sol.kkt_residual <= 1e-11

    def test_complementarity_signs(self, setup):
        disc, w = setup
        sol = solve_qp(assemble_qp(disc, w))
        qp = assemble_qp(disc, w)
        grad = sol.Hv + qp.q
        assert np.all(grad[sol.active_lower] >= -1e-10)
        assert np.all(grad[sol.active_upper] <= 1e-10)
        free = ~(sol.active_lower | sol.active_upper)
        assert np.max(np.abs(grad[free])) < 1e-10
        assert kkt_residual(qp, sol.v, grad) <= 1e-11

    def test_solution_at_kkt_point_is_zero(self, continuation_2d):
        res = continuation_2d.results[2]
        disc = Discretization.at_level(example_problem(2), 2)
        sol = solve_qp(assemble_qp(disc, res.iterate))
        assert np.max(np.abs(sol.v)) < 1e-10

    def test_negative_curvature_detected(self, setup):
        disc, w = setup
        q = np.ones(disc.control_shape)
        qp = custom_qp(disc, w, q, -1e3 * q, 1e3 * q, hessian=lambda v: -v)
        with pytest.raises(SecondOrderFailure):
            solve_qp(qp)

    def test_outer_iteration_cap(self, setup):
        disc, w = setup
        with pytest.raises(MaxOuterExceeded):
            solve_qp(assemble_qp(disc, w), max_outer=1)

    def test_requires_positive_kappa(self):
        disc = Discretization.at_level(example_problem(2, kappa=0.0), 2)
        zeros = np.zeros(disc.state_shape)
        w = Iterate(zeros, zeros.copy(), disc.constant_control(1.0))
        q = np.ones(disc.control_shape)
        with pytest.raises(ValueError):
            solve_qp(custom_qp(disc, w, q, -q, q))

    def test_rejects_crossed_bounds(self, disc2):
        zeros = np.zeros(disc2.state_shape)
        w = Iterate(zeros, zeros.copy(), disc2.constant_control(1.0))
        q = np.ones(disc2.control_shape)
        with pytest.raises(ValueError):
            custom_qp(disc2, w, q, q, -q)
