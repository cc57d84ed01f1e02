import copy

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import load_pencil
from ncrat.ellipticity import (ChainStep, EllipticityCertificate, Verdict, classify,
                               epsilon_bound, singular_witness, verify_certificate)
from ncrat.linalg import min_singular_value
from ncrat.ncexpr import MatrixPoint
from ncrat.pencil import LinearPencil, full_rank_sample

seeds = st.integers(0, 2**32 - 1)

D_HALF_RANK = np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 1, 0], [0, -1, 0, 1]], dtype=float)


def random_pencil(rng, kind=None):
    """Pencils of three flavours: generic, stably elliptic by construction
    (D^{-1}(P + skew)), and with a singular positive part."""
    g = int(rng.integers(1, 4))
    d = int(rng.integers(1, 6))
    e = int(rng.integers(1, 6))
    kind = int(rng.integers(0, 3)) if kind is None else kind
    cplx = rng.random() < 0.3

    def rnd(*s):
        a = rng.standard_normal(s)
        return a + 1j * rng.standard_normal(s) if cplx else a

    if kind == 0:
        return LinearPencil(rnd(g + 1, d, e))
    D = rnd(d, d)
    B = rnd(d, d)
    P = B @ B.conj().T
    if kind == 2:
        U = rnd(d, int(rng.integers(0, d)))
        P = U @ U.conj().T

    def skew():
        s = rnd(d, d)
        return s - s.conj().T

    Dinv = np.linalg.inv(D)
    return LinearPencil(np.array([Dinv @ (P + skew())] + [Dinv @ skew() for _ in range(g)]))


def test_kernel_chain_elliptic():
    L = load_pencil("kernel_chain")
    cert = classify(L)
    assert cert.verdict is Verdict.ELLIPTIC
    assert len(cert.chain) == 2
    assert cert.chain[0].V.shape == (3, 1)
    assert np.allclose(np.abs(cert.chain[0].V[:, 0]), [0, 0, 1], atol=1e-6)
    assert verify_certificate(L, cert)[0]


def test_elliptic_4x4_not_stably():
    L = load_pencil("elliptic_4x4")
    cert = classify(L)
    assert cert.verdict is Verdict.ELLIPTIC
    eigs = cert.chain[0].eigs
    assert int(np.sum(eigs > 1e-6 * eigs.max())) == 2
    assert verify_certificate(L, cert)[0]


def test_stably_3x3():
    L = load_pencil("stably_3x3")
    cert = classify(L)
    assert cert.verdict is Verdict.STABLY_ELLIPTIC
    assert cert.epsilon > 0
    assert verify_certificate(L, cert)[0]


def test_singular_complex_not_elliptic():
    L = load_pencil("singular_complex")
    cert = classify(L)
    assert cert.verdict is Verdict.NOT_ELLIPTIC
    assert cert.witness is not None
    assert verify_certificate(L, cert)[0]


def test_known_singular_pair():
    L = load_pencil("singular_complex")
    X1 = np.array([[0, 1 + 1j], [1 - 1j, 0]])
    X2 = np.array([[0, 0.5j], [-0.5j, 0]])
    X = MatrixPoint((X1, X2), "C", True)
    assert min_singular_value(L.eval(X)) < 1e-12


def test_handmade_certificate_verifies():
    L = load_pencil("elliptic_4x4")
    H = L.real_compress(D_HALF_RANK)[0]
    V = np.eye(4)[:, :2]
    Lp = L.restrict(V)
    Dp = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]])
    cert = EllipticityCertificate(Verdict.ELLIPTIC, [
        ChainStep(D_HALF_RANK, np.linalg.eigvalsh(H), V),
        ChainStep(Dp, np.linalg.eigvalsh(Lp.real_compress(Dp)[0]), np.zeros((2, 0))),
    ])
    ok, why = verify_certificate(L, cert)
    assert ok, why


def test_identity_single_step():
    L = load_pencil("identity")
    cert = EllipticityCertificate(Verdict.STABLY_ELLIPTIC,
                                  [ChainStep(np.eye(L.d), np.ones(L.d), np.zeros((L.d, 0)))],
                                  epsilon=1.0)
    assert verify_certificate(L, cert)[0]
    assert classify(L).verdict is Verdict.STABLY_ELLIPTIC


def test_tampered_certificates_fail():
    for name in ("kernel_chain", "elliptic_4x4", "stably_3x3"):
        L = load_pencil(name)
        cert = classify(L)
        bad = copy.deepcopy(cert)
        bad.chain[0].D = np.zeros_like(bad.chain[0].D)
        assert not verify_certificate(L, bad)[0]
        bad = copy.deepcopy(cert)
        bad.chain[-1].D = -bad.chain[-1].D
        assert not verify_certificate(L, bad)[0]
    L = load_pencil("singular_complex")
    cert = classify(L)
    cert.witness = MatrixPoint.zeros(2, 2, "C")
    assert not verify_certificate(L, cert)[0]


def test_zero_and_variable_pencils():
    zero = load_pencil("zero")
    cert = classify(zero)
    assert cert.verdict is Verdict.NOT_ELLIPTIC
    x1 = LinearPencil.from_coefficients([[[0.0]], [[1.0]]])
    cert = classify(x1)
    assert cert.verdict is Verdict.NOT_ELLIPTIC
    w = singular_witness(x1)
    assert w is not None and np.allclose(w[0], 0)


def test_witness_for_appended_zero_column():
    rng = np.random.default_rng(8)
    for _ in range(5):
        A = rng.standard_normal((3, 4, 2))
        A = np.concatenate([A, np.zeros((3, 4, 1))], axis=2)
        A[0, :, 2] = 0
        A[1, :, 2] = rng.standard_normal(4)
        L = LinearPencil(A)
        cert = classify(L)
        assert cert.verdict is Verdict.NOT_ELLIPTIC
        assert verify_certificate(L, cert)[0]


def test_epsilon_identity():
    assert epsilon_bound(np.eye(1), load_pencil("identity")) == pytest.approx(1.0)


def test_epsilon_preconditions():
    L = load_pencil("kernel_chain")
    with pytest.raises(ValueError):
        epsilon_bound(np.eye(3), L)
    with pytest.raises(ValueError):
        epsilon_bound(np.zeros((3, 3)), load_pencil("stably_3x3"))


def test_epsilon_against_sampling():
    rng = np.random.default_rng(2)
    for _ in range(5):
        S = rng.standard_normal((3, 3, 3))
        skews = [s - s.T for s in S]
        L = LinearPencil(np.array([2 * np.eye(3) + skews[0], skews[1], skews[2]]))
        eps = epsilon_bound(0.5 * np.eye(3), L)
        res = full_rank_sample(L, sizes=[1, 2, 3], trials=30)
        assert res.min_sigma ** 2 >= eps - 1e-9


def test_epsilon_stably_3x3():
    L = load_pencil("stably_3x3")
    cert = classify(L)
    res = full_rank_sample(L, sizes=range(1, 7), trials=34, seed=1)
    assert res.samples >= 200
    assert res.min_sigma ** 2 >= cert.epsilon - 1e-7


def test_certificate_json_roundtrip():
    for name in ("kernel_chain", "singular_complex"):
        L = load_pencil(name)
        cert = classify(L)
        back = EllipticityCertificate.from_json(cert.to_json())
        assert back.verdict is cert.verdict
        assert verify_certificate(L, back)[0]


def test_wide_pencil_transposes():
    L = load_pencil("kernel_chain").restrict(np.eye(3)[:, :2]).adjoint()
    cert = classify(L)
    assert cert.transposed
    assert verify_certificate(L, cert)[0]


@settings(max_examples=40)
@given(seeds)
def test_random_pencils_sound(seed):
    rng = np.random.default_rng(seed)
    L = random_pencil(rng)
    cert = classify(L)
    if cert.verdict is Verdict.INCONCLUSIVE:
        return
    ok, why = verify_certificate(L, cert)
    assert ok, why
    assert len(cert.chain) <= max(L.d, L.e)
    for a, b in zip(cert.chain, cert.chain[1:]):
        assert b.V.shape[1] < a.V.shape[1] or a.V.shape[1] == 0
    res = full_rank_sample(L, sizes=[1, 2, 3], trials=8, seed=seed)
    if cert.verdict is Verdict.STABLY_ELLIPTIC:
        assert res.min_sigma ** 2 >= cert.epsilon - 1e-7
    if cert.verdict in (Verdict.STABLY_ELLIPTIC, Verdict.ELLIPTIC):
        assert res.min_relative_sigma > 1e-8


@settings(max_examples=25)
@given(seeds)
def test_verdict_invariant_under_adjoint(seed):
    rng = np.random.default_rng(seed)
    L = random_pencil(rng, kind=int(rng.integers(0, 3)))
    a, b = classify(L).verdict, classify(L.adjoint()).verdict
    if Verdict.INCONCLUSIVE in (a, b):
        return
    elliptic = {Verdict.STABLY_ELLIPTIC, Verdict.ELLIPTIC}
    assert (a in elliptic) == (b in elliptic)


@settings(max_examples=25)
@given(seeds)
def test_verdict_invariant_under_left_multiplication(seed):
    rng = np.random.default_rng(seed)
    L = random_pencil(rng)
    q, _ = np.linalg.qr(rng.standard_normal((L.d, L.d)))
    M = q @ np.diag(rng.uniform(0.5, 2.0, L.d))
    a, b = classify(L).verdict, classify(L.left_multiply(M)).verdict
    if Verdict.INCONCLUSIVE in (a, b):
        return
    elliptic = {Verdict.STABLY_ELLIPTIC, Verdict.ELLIPTIC}
    assert (a in elliptic) == (b in elliptic)
