"""Interior-point cone solver: hand-worked programs, random suites, certificates."""

import numpy as np
import pytest
import scipy.sparse as sp

from scvx.conic import Cone, ConicProgram, dump_program, residuals, solve
from scvx.errors import DimensionError


def make_program(c, A, b, cones):
    return ConicProgram(
        c=np.asarray(c, dtype=float),
        A=sp.csc_matrix(np.atleast_2d(np.asarray(A, dtype=float))),
        b=np.asarray(b, dtype=float),
        cones=tuple(cones),
    )


def random_feasible_program(rng):
    """Feasible and bounded by construction: interior primal and dual points."""
    n = int(rng.integers(2, 12))
    cones = []
    n_eq = int(rng.integers(0, min(3, n)))
    if n_eq:
        cones.append(Cone("zero", n_eq))
    cones.append(Cone("nonneg", int(rng.integers(1, 8))))
    for _ in range(int(rng.integers(0, 3))):
        cones.append(Cone("soc", int(rng.integers(2, 6))))
    m = sum(k.dim for k in cones)
    A = rng.standard_normal((m, n))

    def interior(allow_free):
        v = np.empty(m)
        pos = 0
        for k in cones:
            if k.kind == "zero":
                v[pos : pos + k.dim] = rng.standard_normal(k.dim) if allow_free else 0.0
            elif k.kind == "nonneg":
                v[pos : pos + k.dim] = rng.uniform(0.1, 2.0, k.dim)
            else:
                tail = rng.standard_normal(k.dim - 1)
                v[pos] = np.linalg.norm(tail) + rng.uniform(0.1, 2.0)
                v[pos + 1 : pos + k.dim] = tail
            pos += k.dim
        return v

    b = A @ rng.standard_normal(n) + interior(allow_free=False)
    c = -(A.T @ interior(allow_free=True))
    return make_program(c, A, b, cones)


# ---------------------------------------------------------------------------
# hand-worked programs


def test_active_bound():
    # minimize x subject to x >= 1
    prog = make_program([1.0], [[-1.0]], [-1.0], [Cone("nonneg", 1)])
    sol = solve(prog, tol=1e-9)
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(1.0, abs=1e-8)


def test_norm_epigraph():
    # minimize t subject to (t, 3, 4) in soc3; optimum t = 5
    prog = make_program([1.0], [[-1.0], [0.0], [0.0]], [0.0, 3.0, 4.0], [Cone("soc", 3)])
    sol = solve(prog, tol=1e-9)
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(5.0, abs=1e-8)


def test_equality_with_orthant_duals():
    # minimize x1+x2 subject to x1+x2 = 1, x >= 0; value 1, equality dual -1
    prog = make_program(
        [1.0, 1.0],
        [[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
        [1.0, 0.0, 0.0],
        [Cone("zero", 1), Cone("nonneg", 2)],
    )
    sol = solve(prog, tol=1e-9)
    assert sol.status == "optimal"
    assert sol.x.sum() == pytest.approx(1.0, abs=1e-8)
    assert np.all(sol.x >= -1e-9)
    assert sol.z_dual[0] == pytest.approx(-1.0, abs=1e-8)


# ---------------------------------------------------------------------------
# residual recomputation


def test_residuals_small_at_optimum():
    prog = make_program([1.0], [[-1.0], [0.0], [0.0]], [0.0, 3.0, 4.0], [Cone("soc", 3)])
    sol = solve(prog, tol=1e-9)
    pres, dres, gap = residuals(prog, sol)
    assert max(pres, dres, gap) <= 1e-9


def test_residuals_grow_under_perturbation():
    prog = make_program([1.0], [[-1.0], [0.0], [0.0]], [0.0, 3.0, 4.0], [Cone("soc", 3)])
    sol = solve(prog, tol=1e-9)
    pres0, _, _ = residuals(prog, sol)
    import dataclasses

    bumped = dataclasses.replace(sol, x=sol.x + 1e-2)
    pres1, _, _ = residuals(prog, bumped)
    assert pres1 > pres0 + 1e-3


# ---------------------------------------------------------------------------
# random feasible suite


def test_random_feasible_socps_solve_tightly():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(200):
        prog = random_feasible_program(rng)
        sol = solve(prog, tol=1e-9, max_iter=100)
        assert sol.status == "optimal"
        pres, dres, gap = residuals(prog, sol)
        worst = max(worst, pres, dres, gap)
    assert worst <= 1e-8


def test_duality_sandwich(rng):
    for _ in range(25):
        prog = random_feasible_program(rng)
        sol = solve(prog, tol=1e-9)
        assert sol.status == "optimal"
        pobj = float(prog.c @ sol.x)
        assert pobj >= -float(prog.b @ sol.z_dual) - 2e-9 * (1.0 + abs(pobj))


def test_cost_scaling_leaves_argmin():
    # distance-to-halfspace programs have a unique minimizer, so the argmin
    # must be invariant under positive cost scaling
    rng = np.random.default_rng(7)
    for _ in range(10):
        k = int(rng.integers(2, 5))
        z0 = rng.standard_normal(k)
        a = rng.standard_normal(k)
        bval = float(a @ z0) + rng.uniform(0.5, 2.0)  # a.w >= bval, violated at z0
        # columns (w, t): minimize t s.t. (t, w - z0) in soc, a.w - bval >= 0
        A = np.zeros((k + 2, k + 1))
        b = np.zeros(k + 2)
        A[0, k] = -1.0
        A[1 : k + 1, :k] = -np.eye(k)
        b[1 : k + 1] = -z0
        A[k + 1, :k] = -a
        b[k + 1] = -bval
        prog = make_program(
            np.eye(k + 1)[k], A, b, [Cone("soc", k + 1), Cone("nonneg", 1)]
        )
        sol1 = solve(prog, tol=1e-9)
        scaled = ConicProgram(c=4.0 * prog.c, A=prog.A, b=prog.b, cones=prog.cones)
        sol2 = solve(scaled, tol=1e-9)
        assert sol1.status == sol2.status == "optimal"
        expect = z0 + a * (bval - a @ z0) / (a @ a)
        np.testing.assert_allclose(sol1.x[:k], expect, atol=1e-7)
        np.testing.assert_allclose(sol1.x[:k], sol2.x[:k], atol=1e-7)


def test_bitwise_deterministic_resolve():
    rng = np.random.default_rng(3)
    prog = random_feasible_program(rng)
    sol1 = solve(prog, tol=1e-9)
    sol2 = solve(prog, tol=1e-9)
    assert sol1.iterations == sol2.iterations
    assert np.array_equal(sol1.x, sol2.x)
    assert np.array_equal(sol1.s, sol2.s)
    assert np.array_equal(sol1.z_dual, sol2.z_dual)


# ---------------------------------------------------------------------------
# certificates and edge cases


def test_primal_infeasible_certificate():
    # x >= 1 and -x >= 0 cannot hold together
    prog = make_program([0.0], [[-1.0], [1.0]], [-1.0, 0.0], [Cone("nonneg", 2)])
    sol = solve(prog, tol=1e-9)
    assert sol.status == "primal-infeasible"


def test_dual_infeasible_certificate():
    # minimize -x subject to x >= 0 is unbounded below
    prog = make_program([-1.0], [[-1.0]], [0.0], [Cone("nonneg", 1)])
    sol = solve(prog, tol=1e-9)
    assert sol.status == "dual-infeasible"


def test_program_validation():
    with pytest.raises(DimensionError):
        make_program([1.0], [[-1.0]], [0.0], [Cone("nonneg", 2)])
    with pytest.raises(DimensionError):
        make_program([1.0], [[-1.0]], [0.0], [Cone("bogus", 1)])
    with pytest.raises(DimensionError):
        make_program([1.0, 2.0], [[-1.0]], [0.0], [Cone("nonneg", 1)])


def test_tiny_dimensions():
    # soc of dimension 1 degenerates to the nonneg orthant
    prog = make_program([1.0], [[-1.0]], [-2.0], [Cone("soc", 1)])
    sol = solve(prog, tol=1e-9)
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(2.0, abs=1e-8)


def test_dump_program_text(tmp_path):
    prog = make_program(
        [1.0, 1.0],
        [[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
        [1.0, 0.0, 0.0],
        [Cone("zero", 1), Cone("nonneg", 2)],
    )
    path = tmp_path / "prog.txt"
    dump_program(prog, path)
    text = path.read_text()
    assert "zero 1" in text
    assert "nonneg 2" in text
    # every structural nonzero appears as a triplet line
    coo = prog.A.tocoo()
    for r, cc, v in zip(coo.row, coo.col, coo.data):
        assert f"{r} {cc}" in text
