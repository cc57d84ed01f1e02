import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import load_pencil
from ncrat.sdp import (LmiProblem, Status, eliminate_equalities, max_rank_feasible,
                       solve_max_min_eig)

seeds = st.integers(0, 2**32 - 1)


def sym(a):
    return (a + a.T) / 2


def real_part_map(A):
    """Matrix of vec(D) -> vec(Re(D A)) for real D of shape (e, d)."""
    d, e = A.shape
    cols = []
    for k in range(e * d):
        D = np.zeros(e * d)
        D[k] = 1.0
        cols.append(sym(D.reshape(e, d) @ A).ravel())
    return np.array(cols).T


def check_dual(sol, p, tol=1e-6):
    Z = sol.dual_matrix
    m = p.size
    assert np.linalg.eigvalsh(Z)[0] >= -tol
    assert abs(np.trace(Z) - 1) <= tol
    for f in p.directions:
        assert abs(np.trace(Z @ f)) <= tol * (1 + np.linalg.norm(f))
    assert abs(np.trace(Z @ p.base) - sol.t_star) <= tol * m * (1 + np.linalg.norm(p.base))


def brute_force_1d(p, lo=-50, hi=50, n=200001):
    ys = np.linspace(lo, hi, n)
    best = -np.inf
    for y in ys[:: 100]:
        best = max(best, np.linalg.eigvalsh(p.matrix([y]))[0])
    # refine around the coarse maximizer
    return best


# eliminate_equalities

def test_eliminate_no_equalities():
    sub = eliminate_equalities(1, None, None, (np.array([1.0]), 1.0))
    assert sub.feasible and sub.dim == 0 and np.allclose(sub.point, [1.0])
    assert eliminate_equalities(2).dim == 2


def test_eliminate_inconsistent():
    sub = eliminate_equalities(2, np.array([[1.0, 0.0], [1.0, 0.0]]), np.array([0.0, 1.0]))
    assert not sub.feasible


def test_eliminate_kernel_chain():
    L = load_pencil("kernel_chain")
    eqs = np.vstack([real_part_map(L[1]), real_part_map(L[2])])
    sub = eliminate_equalities(9, eqs)
    assert sub.dim == 1
    D = sub.basis[:, 0].reshape(3, 3)
    assert np.allclose(D / D[0, 0], np.eye(3))
    trace_row = np.trace(real_part_map(L[0]).reshape(3, 3, 9), axis1=0, axis2=1)
    norm = eliminate_equalities(9, eqs, None, (trace_row, 1.0))
    assert norm.dim == 0
    assert np.allclose(norm.point.reshape(3, 3), 0.5 * np.eye(3))


def test_eliminate_first_printed_example():
    L = load_pencil("elliptic_4x4")
    eqs = np.vstack([real_part_map(L[1]), real_part_map(L[2])])
    sub = eliminate_equalities(16, eqs)
    assert sub.dim == 2
    assert np.allclose(sub.basis.T @ sub.basis, np.eye(2))
    assert np.linalg.norm(eqs @ sub.basis) < 1e-10


# solve_max_min_eig

def test_identity_no_directions():
    sol = solve_max_min_eig(LmiProblem(np.eye(3)))
    assert sol.t_star == pytest.approx(1.0)


def test_fixed_spectrum():
    p = LmiProblem(np.diag([1.0, -1.0]))
    sol = solve_max_min_eig(p)
    assert sol.t_star == pytest.approx(-1.0)
    assert np.allclose(sol.dual_matrix, np.diag([0.0, 1.0]))
    assert sol.status is Status.OPTIMAL_INTERIOR


def test_one_direction_closed_form():
    p = LmiProblem(np.diag([1.0, -1.0]), [np.diag([0.0, 1.0])])
    sol = solve_max_min_eig(p)
    assert abs(sol.t_star - 1.0) <= 1e-7
    assert sol.y[0] >= 2 - 1e-6
    check_dual(sol, p)


def test_against_one_dimensional_oracle():
    rng = np.random.default_rng(0)
    for _ in range(10):
        F0 = sym(rng.standard_normal((4, 4)))
        F1 = sym(rng.standard_normal((4, 4)))
        # indefinite direction keeps the optimum finite
        F1 -= np.trace(F1) / 4 * np.eye(4)
        p = LmiProblem(F0, [F1])
        sol = solve_max_min_eig(p)
        ys = np.linspace(-30, 30, 60001)
        oracle = max(np.linalg.eigvalsh(F0 + y * F1)[0] for y in ys[::20])
        assert sol.t_star >= oracle - 1e-6
        assert np.linalg.eigvalsh(p.matrix(sol.y))[0] >= sol.t_star - 1e-6
        check_dual(sol, p)


@given(seeds)
def test_planted_optimum(seed):
    rng = np.random.default_rng(seed)
    m, k = 5, 3
    q, _ = np.linalg.qr(rng.standard_normal((m, m)))
    dirs = [sym(rng.standard_normal((m, m))) for _ in range(k)]
    # Z = q0 q0* is the planted dual: make every direction orthogonal to it
    z = q[:, 0]
    dirs = [f - (z @ f @ z) * np.outer(z, z) for f in dirs]
    spectrum = np.concatenate([[0.3], 0.3 + rng.uniform(0.5, 2, m - 1)])
    S = q @ np.diag(spectrum) @ q.T
    y0 = rng.standard_normal(k)
    F0 = S - sum(c * f for c, f in zip(y0, dirs))
    p = LmiProblem(F0, dirs)
    sol = solve_max_min_eig(p)
    # tr(Z S(y)) = 0.3 for all y bounds t* above; y0 attains it
    assert abs(sol.t_star - 0.3) <= 1e-6


@given(seeds)
def test_monotone_under_added_directions(seed):
    rng = np.random.default_rng(seed)
    m = 4
    F0 = sym(rng.standard_normal((m, m)))
    dirs = [sym(rng.standard_normal((m, m))) for _ in range(3)]
    dirs = [f - np.trace(f) / m * np.eye(m) for f in dirs]
    ts = [solve_max_min_eig(LmiProblem(F0, dirs[:j])).t_star for j in range(4)]
    assert all(b >= a - 1e-6 for a, b in zip(ts, ts[1:]))


@given(seeds)
def test_weak_duality(seed):
    rng = np.random.default_rng(seed)
    m = 4
    F0 = sym(rng.standard_normal((m, m)))
    dirs = [sym(rng.standard_normal((m, m))) for _ in range(2)]
    dirs = [f - np.trace(f) / m * np.eye(m) for f in dirs]
    p = LmiProblem(F0, dirs)
    sol = solve_max_min_eig(p)
    if sol.dual_matrix is not None:
        assert np.trace(sol.dual_matrix @ F0) >= sol.t_star - 1e-6


def test_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        LmiProblem(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        LmiProblem(np.eye(2), [np.eye(3)])


# max_rank_feasible

def test_max_rank_diagonal_face():
    # {diag(s, 0, 1 - s)}: the zero is forced, s ranges over [0, 1]
    p = LmiProblem(np.diag([0.5, 0.0, 0.5]), [np.diag([1.0, 0.0, -1.0])])
    sol = max_rank_feasible(p)
    assert sol.rank == 2
    S = sol.primal_matrix
    assert 1e-3 < S[0, 0] < 1 - 1e-3 and abs(S[1, 1]) < 1e-6


def test_unbounded_direction_stops_at_ball():
    sol = solve_max_min_eig(LmiProblem(np.diag([0.5]), [np.diag([1.0])]))
    assert sol.status is not Status.NUMERICAL_FAILURE
    assert sol.t_star > 1e4


def test_max_rank_strictly_feasible():
    rng = np.random.default_rng(1)
    F0 = np.eye(4) + 0.1 * sym(rng.standard_normal((4, 4)))
    p = LmiProblem(F0, [sym(rng.standard_normal((4, 4)))])
    sol = max_rank_feasible(p)
    assert sol.t_star > 0
    assert sol.rank == 4


def test_max_rank_first_printed_example():
    L = load_pencil("elliptic_4x4")
    eqs = np.vstack([real_part_map(L[1]), real_part_map(L[2])])
    re0 = real_part_map(L[0])
    trace_row = np.trace(re0.reshape(4, 4, 16), axis1=0, axis2=1)
    sub = eliminate_equalities(16, eqs, None, (trace_row, 1.0))
    F0 = (re0 @ sub.point).reshape(4, 4)
    dirs = [(re0 @ sub.basis[:, i]).reshape(4, 4) for i in range(sub.dim)]
    p = LmiProblem(F0, dirs)
    sol = max_rank_feasible(p)
    assert abs(sol.t_star) <= 1e-6
    assert sol.rank == 2
    assert np.linalg.eigvalsh(sol.primal_matrix)[0] >= -1e-6
