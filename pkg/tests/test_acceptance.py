"""Acceptance criteria, one PASS/FAIL line per criterion.

The lines are printed as each test runs (visible with ``-s``) and repeated
in the terminal summary.  Criterion 9 needs ``ROBIN_SQP_STRETCH=1``.
"""

import csv
import os
import time

import numpy as np
import pytest

from conftest import feasible_iterate
from dense_oracle import DenseOracle, projected_gradient_qp
from robin_sqp import (
    Discretization,
    Iterate,
    assemble,
    assemble_qp,
    build_uniform_mesh,
    example_problem,
    run_continuation,
    run_sqp,
    solve_qp,
)
from robin_sqp.config import emit_history
from robin_sqp.diagnostics import convergence_slope, gradient_check, projection_residual, symmetry_check

SEED = 20240611
RESULTS = []

# Pinned tolerances.
ASSEMBLY_MASS_TOL = 1e-13
ASSEMBLY_BOUNDARY_TOL = 1e-12
ASSEMBLY_STIFFNESS_TOL = 1e-12
GRADIENT_TOL = 1e-6
SYMMETRY_TOL = 1e-10
QP_ORACLE_TOL = 1e-8
QP_KKT_TOL = 1e-11
QP_ORACLE_STEPS = 100_000
FIXED_POINT_TOL = 1e-12
MAX_SQP_ITERS = 8
MIN_SLOPE = 1.7
RHO = 5e-13
OBJECTIVE_3D_FINE = 13.4411
OBJECTIVE_3D_RTOL = 0.05
PROJECTION_TOL = 1e-10
STRETCH_2D = 8.0208203720220830
STRETCH_3D = 13.441100623224251
STRETCH_RTOL = 5e-3


def check(number, text, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {text} ({detail})"
    RESULTS.append(line)
    print(line)
    assert ok, line


def write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def run_criteria(outdir):
    """Compute everything criteria 2-8 need and write it as CSV under ``outdir``."""
    out = {}
    spec = example_problem(2)

    t = time.perf_counter()
    d3 = Discretization.at_level(spec, 3)
    out["gradient"] = gradient_check(d3, d3.constant_control(0.6), n_directions=5, seed=SEED)
    out["gradient_time"] = time.perf_counter() - t
    write_rows(outdir / "c2.csv", [["gradient_fd_error"], [repr(out["gradient"])]])

    t = time.perf_counter()
    d2 = Discretization.at_level(spec, 2)
    w2 = feasible_iterate(d2, d2.constant_control(0.6))
    out["symmetry"] = symmetry_check(d2, w2, n_pairs=5, seed=SEED)
    out["symmetry_time"] = time.perf_counter() - t
    write_rows(outdir / "c3.csv", [["hessian_asymmetry"], [repr(out["symmetry"])]])

    t = time.perf_counter()
    rng = np.random.default_rng(SEED)
    u = rng.uniform(spec.alpha, 3.0, d2.control_shape)
    wf = feasible_iterate(d2, u)
    w = Iterate(wf.y + 0.05 * rng.standard_normal(wf.y.shape),
                wf.phi + 0.05 * rng.standard_normal(wf.phi.shape), u, level=2)
    qp = assemble_qp(d2, w)
    sol = solve_qp(qp)
    H, *_ = DenseOracle(2).reduced_qp(w.y, w.phi, w.u)
    ref = projected_gradient_qp(H, qp.q.ravel(), qp.lower.ravel(), qp.upper.ravel(),
                                qp.weights.ravel(), iters=QP_ORACLE_STEPS)
    out["qp_diff"] = float(np.max(np.abs(sol.v.ravel() - ref)))
    out["qp_kkt"] = sol.kkt_residual
    out["qp_time"] = time.perf_counter() - t
    write_rows(outdir / "c4.csv", [["max_difference", "kkt_residual"], [repr(out["qp_diff"]), repr(out["qp_kkt"])]])

    t = time.perf_counter()
    cont2 = run_continuation(spec, 2, 4, rho=RHO)
    out["cont2_time"] = time.perf_counter() - t
    out["cont2"] = cont2
    for level, hist in cont2.histories.items():
        emit_history(hist, outdir / f"c6_level{level}.csv")

    restart = run_sqp(cont2.discretization, cont2.iterate, rho=RHO)
    out["restart"] = restart
    emit_history(restart.history, outdir / "c5.csv")

    t = time.perf_counter()
    cont3 = run_continuation(example_problem(3), 2, 3, rho=RHO)
    out["cont3_time"] = time.perf_counter() - t
    out["cont3"] = cont3
    for level, hist in cont3.histories.items():
        emit_history(hist, outdir / f"c7_level{level}.csv")
    return out


@pytest.fixture(scope="module")
def first_run(tmp_path_factory):
    outdir = tmp_path_factory.mktemp("acceptance_a")
    return outdir, run_criteria(outdir)


def test_criterion_01_assembly_invariants():
    t = time.perf_counter()
    worst = [0.0, 0.0, 0.0]
    for dim, levels in ((2, range(1, 6)), (3, range(1, 4))):
        for level in levels:
            mesh = build_uniform_mesh(dim, level)
            fem = assemble(mesh)
            one = np.ones(mesh.n_nodes)
            worst[0] = max(worst[0], abs(one @ fem.mass @ one - 1.0))
            worst[1] = max(worst[1], abs(one @ fem.boundary_mass @ one - 2 * dim))
            worst[2] = max(worst[2], float(np.max(np.abs(fem.stiffness @ one))))
    elapsed = time.perf_counter() - t
    ok = (worst[0] <= ASSEMBLY_MASS_TOL and worst[1] <= ASSEMBLY_BOUNDARY_TOL
          and worst[2] <= ASSEMBLY_STIFFNESS_TOL and elapsed < 5.0)
    check(1, "assembly invariants", ok,
          f"mass {worst[0]:.1e}, boundary {worst[1]:.1e}, K1 {worst[2]:.1e}, {elapsed:.2f} s")


def test_criterion_02_gradient(first_run):
    _, r = first_run
    ok = r["gradient"] <= GRADIENT_TOL and r["gradient_time"] < 60
    check(2, "gradient check d=2 i=3 u=0.6", ok, f"{r['gradient']:.2e} <= {GRADIENT_TOL:.0e}, {r['gradient_time']:.2f} s")


def test_criterion_03_symmetry(first_run):
    _, r = first_run
    ok = r["symmetry"] <= SYMMETRY_TOL and r["symmetry_time"] < 60
    check(3, "Hessian symmetry d=2 i=2", ok, f"{r['symmetry']:.2e} <= {SYMMETRY_TOL:.0e}, {r['symmetry_time']:.2f} s")


def test_criterion_04_qp_oracle(first_run):
    _, r = first_run
    ok = r["qp_diff"] <= QP_ORACLE_TOL and r["qp_kkt"] <= QP_KKT_TOL and r["qp_time"] < 600
    check(4, "PDAS vs projected-gradient oracle", ok,
          f"diff {r['qp_diff']:.2e}, KKT {r['qp_kkt']:.2e}, {r['qp_time']:.2f} s")


def test_criterion_05_fixed_point(first_run):
    _, r = first_run
    hist = r["restart"].history
    ok = hist[-1].n == 1 and hist[-1].delta_sum <= FIXED_POINT_TOL
    check(5, "SQP restart from converged output", ok, f"n = {hist[-1].n}, delta sum {hist[-1].delta_sum:.1e}")


def test_criterion_06_quadratic_convergence(first_run):
    _, r = first_run
    hist = r["cont2"].histories[4]
    iters = hist[-1].n
    slope = convergence_slope(hist, window=3)
    ok = (iters <= MAX_SQP_ITERS and hist[-1].delta_sum < RHO and slope >= MIN_SLOPE
          and r["cont2_time"] < 900)
    deltas = " -> ".join(f"{rec.delta_u:.1e}" for rec in hist[1:])
    check(6, "d=2 continuation 2->4", ok,
          f"{iters} iterations, slope {slope:.2f}, delta_u {deltas}, {r['cont2_time']:.1f} s")


def test_criterion_07_three_dimensional_smoke(first_run):
    _, r = first_run
    J = r["cont3"].histories[3][-1].objective
    rel = abs(J - OBJECTIVE_3D_FINE) / OBJECTIVE_3D_FINE
    ok = rel <= OBJECTIVE_3D_RTOL and r["cont3_time"] < 900
    check(7, "d=3 continuation 2->3", ok, f"J = {J:.10f}, relative gap {rel:.2%}, {r['cont3_time']:.1f} s")


def test_criterion_08_projection_formula(first_run):
    _, r = first_run
    res2 = projection_residual(r["cont2"].discretization, r["cont2"].iterate)
    res3 = projection_residual(r["cont3"].discretization, r["cont3"].iterate)
    ok = max(res2, res3) <= PROJECTION_TOL
    check(8, "projection fixed point", ok, f"d=2 i=4 {res2:.1e}, d=3 i=3 {res3:.1e}")


STRETCH = os.environ.get("ROBIN_SQP_STRETCH") == "1"


@pytest.mark.stretch
@pytest.mark.parametrize("dim,level,expected", [(2, 8, STRETCH_2D), (3, 5, STRETCH_3D)])
def test_criterion_09_fine_level_objective(dim, level, expected):
    if not STRETCH:
        RESULTS.append(f"[SKIP] criterion 9: d={dim} i={level} fine-level run (set ROBIN_SQP_STRETCH=1)")
        pytest.skip("stretch run; set ROBIN_SQP_STRETCH=1")
    t = time.perf_counter()
    res = run_continuation(example_problem(dim), 2, level, rho=RHO)
    J = res.histories[level][-1].objective
    rel = abs(J - expected) / expected
    check(9, f"d={dim} i={level} fine-level objective", rel <= STRETCH_RTOL,
          f"J = {J:.16f} vs {expected:.16f}, relative gap {rel:.1e}, {time.perf_counter() - t:.0f} s")


def test_criterion_10_determinism(first_run, tmp_path):
    first_dir, _ = first_run
    run_criteria(tmp_path)
    names = sorted(p.name for p in first_dir.glob("*.csv"))
    same = [(first_dir / n).read_bytes() == (tmp_path / n).read_bytes() for n in names]
    ok = len(names) >= 8 and all(same)
    check(10, "byte-identical CSV across two runs", ok, f"{sum(same)}/{len(names)} files identical")
