import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import load_pencil
from ncrat.ncexpr import MatrixPoint, random_selfadjoint_point
from ncrat.pencil import (LinearPencil, default_sample_sizes, full_rank_sample,
                          jointly_nilpotent, pencil_from_text)

seeds = st.integers(0, 2**32 - 1)

D_HALF_RANK = np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 1, 0], [0, -1, 0, 1]], dtype=float)


def random_pencil(rng, g=2, d=3, e=3, cplx=False):
    c = rng.standard_normal((g + 1, d, e))
    if cplx:
        c = c + 1j * rng.standard_normal((g + 1, d, e))
    return LinearPencil(c)


def shuffle(d, n, m):
    # permutation P with P (A (x) I_{n+m}) P* = (A (x) I_n) (+) (A (x) I_m) blockwise
    idx = [a * (n + m) + i for a in range(d) for i in range(n)]
    idx += [a * (n + m) + n + i for a in range(d) for i in range(m)]
    return np.eye(d * (n + m))[idx]


def test_eval_at_zero():
    L = load_pencil("kernel_chain")
    assert np.array_equal(L.eval(MatrixPoint.zeros(2, 3)), np.kron(L[0], np.eye(3)))


def test_eval_scalar_point():
    L = load_pencil("kernel_chain")
    expect = np.array([[1, 1, 0], [-1, 1, 1], [0, -1, 0]], dtype=float)
    assert np.array_equal(L.eval(MatrixPoint.scalar([1.0, 0.0])), expect)


def test_eval_arity_mismatch():
    L = load_pencil("kernel_chain")
    with pytest.raises(ValueError):
        L.eval(MatrixPoint.zeros(1, 2))


@given(seeds)
def test_eval_direct_sum_shuffle(seed):
    rng = np.random.default_rng(seed)
    L = random_pencil(rng, d=2, e=3)
    X = random_selfadjoint_point(2, 2, seed=seed)
    Y = random_selfadjoint_point(2, 3, seed=seed + 1)
    XY = MatrixPoint(tuple(np.block([[a, np.zeros((2, 3))], [np.zeros((3, 2)), b]])
                           for a, b in zip(X.mats, Y.mats)), selfadjoint=True)
    Pl, Pr = shuffle(2, 2, 3), shuffle(3, 2, 3)
    lhs = Pl @ L.eval(XY) @ Pr.T
    lx, ly = L.eval(X), L.eval(Y)
    rhs = np.block([[lx, np.zeros((lx.shape[0], ly.shape[1]))],
                    [np.zeros((ly.shape[0], lx.shape[1])), ly]])
    assert np.allclose(lhs, rhs, atol=1e-12)


@given(seeds)
def test_eval_is_linear_in_coefficients(seed):
    rng = np.random.default_rng(seed)
    L1, L2 = random_pencil(rng), random_pencil(rng)
    X = random_selfadjoint_point(2, 2, seed=seed)
    S = LinearPencil(L1.coeffs + 2.0 * L2.coeffs)
    assert np.allclose(S.eval(X), L1.eval(X) + 2.0 * L2.eval(X))


def test_real_compress_identity():
    L = load_pencil("kernel_chain")
    parts = L.real_compress(np.eye(3))
    assert np.allclose(parts[0], np.diag([1.0, 1.0, 0.0]))
    assert np.allclose(parts[1], 0) and np.allclose(parts[2], 0)


def test_real_compress_elliptic_4x4():
    L = load_pencil("elliptic_4x4")
    parts = L.real_compress(D_HALF_RANK)
    assert np.allclose(parts[0], np.diag([0.0, 0.0, 1.0, 1.0]))
    assert np.allclose(parts[1], 0) and np.allclose(parts[2], 0)


def test_real_compress_zero_and_size_check():
    L = load_pencil("kernel_chain")
    assert all(np.allclose(p, 0) for p in L.real_compress(np.zeros((3, 3))))
    with pytest.raises(ValueError):
        L.real_compress(np.zeros((2, 3)))


@given(seeds)
def test_real_compress_matches_evaluation(seed):
    rng = np.random.default_rng(seed)
    L = random_pencil(rng, d=3, e=2, cplx=True)
    D = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    X = random_selfadjoint_point(2, 3, "C", seed=seed)
    M = np.kron(D, np.eye(3)) @ L.eval(X)
    lhs = (M + M.conj().T) / 2
    parts = L.real_compress(D)
    rhs = np.kron(parts[0], np.eye(3)) + sum(np.kron(p, x) for p, x in zip(parts[1:], X.mats))
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_restrict_elliptic_4x4():
    L = load_pencil("elliptic_4x4")
    V = np.eye(4)[:, :2]
    Lp = L.restrict(V)
    assert Lp.shape == (4, 2)
    assert np.allclose(Lp[0], [[1, 0], [0, 1], [0, 0], [0, 0]])
    assert np.allclose(Lp[1], [[0, 0], [0, 0], [0, -1], [-1, 0]])
    assert np.allclose(Lp[2], 0)


def test_restrict_kernel_chain_column():
    L = load_pencil("kernel_chain")
    Lp = L.restrict(np.eye(3)[:, 2:])
    # column (x1 - 1, 1, 0)^T
    assert np.allclose(Lp[0][:, 0], [-1, 1, 0])
    assert np.allclose(Lp[1][:, 0], [1, 0, 0])
    assert np.allclose(Lp[2][:, 0], [0, 0, 0])


def test_restrict_identity_and_rank_check():
    L = load_pencil("kernel_chain")
    assert np.array_equal(L.restrict(np.eye(3)).coeffs, L.coeffs)
    with pytest.raises(ValueError):
        L.restrict(np.ones((3, 2)))


@given(seeds)
def test_restrict_commutes_with_eval(seed):
    rng = np.random.default_rng(seed)
    L = random_pencil(rng, d=4, e=3)
    V = rng.standard_normal((3, 2))
    X = random_selfadjoint_point(2, 3, seed=seed)
    assert np.allclose(L.restrict(V).eval(X), L.eval(X) @ np.kron(V, np.eye(3)), atol=1e-12)


@given(seeds)
def test_adjoint(seed):
    rng = np.random.default_rng(seed)
    L = random_pencil(rng, d=2, e=3, cplx=True)
    assert np.array_equal(L.adjoint().adjoint().coeffs, L.coeffs)
    assert L.adjoint().shape == (3, 2)
    X = random_selfadjoint_point(2, 2, "C", seed=seed)
    assert np.allclose(L.adjoint().eval(X), L.eval(X).conj().T)


def test_adjoint_real_transposes():
    L = load_pencil("kernel_chain")
    assert np.array_equal(L.adjoint().coeffs, np.transpose(L.coeffs, (0, 2, 1)))


def test_json_roundtrip():
    for name in ("kernel_chain", "singular_complex"):
        L = load_pencil(name)
        assert np.array_equal(LinearPencil.from_json(L.to_json()).coeffs, L.coeffs)
    bad = load_pencil("kernel_chain").to_json()
    bad["g"] = 5
    with pytest.raises(ValueError):
        LinearPencil.from_json(bad)


def test_full_rank_sample_identity():
    L = load_pencil("identity")
    res = full_rank_sample(L, sizes=[1, 2, 3], trials=10)
    assert res.min_sigma == pytest.approx(1.0)


def test_full_rank_sample_variable():
    L = LinearPencil.from_coefficients([[[0.0]], [[1.0]]])
    assert L.eval(MatrixPoint.zeros(1, 1))[0, 0] == 0
    res = full_rank_sample(L, sizes=[1, 2], trials=200)
    assert res.min_sigma < 0.05


def test_full_rank_sample_stably_3x3():
    L = load_pencil("stably_3x3")
    res = full_rank_sample(L, sizes=range(1, 7), trials=200 // 6 + 1, seed=3)
    assert res.samples >= 200
    assert res.min_sigma > 0.1


def test_full_rank_sample_deterministic():
    L = load_pencil("elliptic_4x4")
    a = full_rank_sample(L, sizes=[1, 2], trials=5, seed=9)
    b = full_rank_sample(L, sizes=[1, 2], trials=5, seed=9)
    assert a.min_sigma == b.min_sigma


def test_default_sample_sizes():
    assert default_sample_sizes(load_pencil("identity")) == [1, 2]
    assert default_sample_sizes(load_pencil("elliptic_4x4")) == list(range(1, 13))


def test_jointly_nilpotent_examples():
    upper = LinearPencil.from_coefficients([np.eye(2), [[0.0, 1.0], [0.0, 0.0]]])
    assert jointly_nilpotent(upper)
    assert not jointly_nilpotent(LinearPencil.from_coefficients([[[1.0]], [[-1.0]]]))
    with pytest.raises(np.linalg.LinAlgError):
        jointly_nilpotent(LinearPencil.from_coefficients([[[0.0]], [[1.0]]]))


def test_jointly_nilpotent_conjugated_family():
    rng = np.random.default_rng(4)
    for _ in range(10):
        S = rng.standard_normal((4, 4)) + 4 * np.eye(4)
        A0 = rng.standard_normal((4, 4)) + 4 * np.eye(4)
        Ns = [S @ np.triu(rng.standard_normal((4, 4)), 1) @ np.linalg.inv(S) for _ in range(2)]
        # oracle: every word of length 4 vanishes
        for a in Ns:
            for b in Ns:
                for c in Ns:
                    for d in Ns:
                        assert np.abs(a @ b @ c @ d).max() < 1e-8
        L = LinearPencil(np.array([A0] + [A0 @ n for n in Ns]))
        assert jointly_nilpotent(L)
        res = full_rank_sample(L, sizes=[1, 2, 3], trials=20, selfadjoint=False)
        assert res.min_sigma > 1e-6


def test_pencil_from_text():
    L = pencil_from_text([["1", "-x2"], ["x2", "1 - x1"]], g=2)
    assert np.allclose(L[0], np.eye(2))
    assert np.allclose(L[1], [[0, 0], [0, -1]])
    assert np.allclose(L[2], [[0, -1], [1, 0]])
    with pytest.raises(ValueError):
        pencil_from_text([["x1*x1"]], g=1)
