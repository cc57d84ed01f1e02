import numpy as np
import pytest

from ncrat.ellipticity import Verdict, classify
from ncrat.ncexpr import (Const, MatrixPoint, Var, eval_mp, eval_strict, kappa, parse,
                          random_selfadjoint_point, tau, try_eval)
from ncrat.positivity import (EquivalencePlan, NotRegular, Positivity, SohsCertificate,
                              basis_of_Vk, chip_set, equivalence_plan, is_positively_elliptic,
                              mp_counterexample, mp_value_min_eig,
                              positively_elliptic_realization, residual_stats,
                              sohs_decompose, strictly_positive, verify_sohs)
from ncrat.realization import original_pencil

POSITIVE = "x2*x2 - x2*x1*inv(1+x1*x1)*x1*x2"


@pytest.fixture(scope="module")
def positive_cert():
    e = parse(POSITIVE)
    cert = sohs_decompose(e)
    assert cert is not None
    return e, cert


def test_chip_set_drops_constants():
    chips = chip_set(parse("inv(2 + x1)*x2"))
    assert all(not isinstance(q, Const) for q in chips)
    assert chips[0] in (Var(1), Var(2))
    assert [tau(q) for q in chips] == sorted(tau(q) for q in chips)


def test_basis_of_variable():
    B = basis_of_Vk(Var(1), 1)
    assert B.dim == 2
    assert B.elements[0] == Const(1.0) and B.elements[1] == Var(1)


def test_basis_collapses_equal_functions():
    e = parse("inv(x1)*x1 - 1")
    B = basis_of_Vk(e, 1)
    raw = 1 + len(chip_set(e))
    assert B.dim < raw
    assert B.sigma_ratio >= 1e-8


def test_basis_dimension_nondecreasing():
    e = parse("inv(1 + x1*x1)*x2")
    dims = [basis_of_Vk(e, k).dim for k in range(4)]
    assert dims == sorted(dims)
    B = basis_of_Vk(e, 3)
    assert B.level_dims == sorted(B.level_dims)


def test_basis_cap_sets_truncated_flag():
    B = basis_of_Vk(parse("x1*x2 + x2*x1"), 6, max_dim=10)
    assert B.dim == 10 and B.truncated


def test_equivalence_plan():
    p = equivalence_plan(Var(1))
    assert p.kappa == 2 and p.t == 1
    assert p.size_bound == p.kappa * (1 + 3 * p.dim_v ** 2)
    assert p.size_bound >= max(p.actual_sizes)
    r = parse("1 + x1*x1")
    assert equivalence_plan(parse("inv(1 + x1*x1)")).size_bound > equivalence_plan(r).size_bound
    assert EquivalencePlan.from_json(p.to_json()) == p


def test_kappa_counts():
    assert kappa(Var(1)) == 2
    assert kappa(parse("inv(1 + x1)")) == 1 + 2 + 1


def test_square_of_variable():
    e = parse("x1*x1")
    cert = sohs_decompose(e)
    assert cert is not None
    assert len(cert.squares) == 1
    X = random_selfadjoint_point(1, 3, seed=0)
    s = eval_strict(cert.squares[0], X)
    assert np.allclose(s.conj().T @ s, X[0] @ X[0], atol=1e-8)
    assert verify_sohs(e, cert)[0]


def test_negative_constant_has_no_certificate():
    e = Const(-1.0)
    for k in (1, 2, 3):
        assert sohs_decompose(e, k=k, escalate=False) is None


def test_positive_fixture_identity():
    # r = t*t + (x1 t)*(x1 t) with t = (1 + x1^2)^{-1} x2
    e = parse(POSITIVE)
    t = parse("inv(1+x1*x1)*x2")
    u = parse("x1*inv(1+x1*x1)*x2")
    for seed in range(20):
        X = random_selfadjoint_point(2, 1 + seed % 5, seed=seed)
        a, b = eval_strict(t, X), eval_strict(u, X)
        assert np.allclose(eval_strict(e, X), a.T @ a + b.T @ b, atol=1e-10)


def test_positive_fixture_certificate(positive_cert):
    e, cert = positive_cert
    assert len(cert.squares) <= len(cert.basis)
    assert np.linalg.eigvalsh(cert.G)[0] >= -1e-7 * max(1, np.linalg.norm(cert.G, 2))
    ok, why = verify_sohs(e, cert, seed=123)
    assert ok, why
    stats = residual_stats(e, cert.squares, 2, seed=99)
    assert stats["max"] <= 1e-6
    assert stats["points"] == 240


def test_certificate_json_roundtrip(positive_cert):
    e, cert = positive_cert
    back = SohsCertificate.from_json(cert.to_json())
    assert back.k == cert.k and len(back.squares) == len(cert.squares)
    assert verify_sohs(e, back)[0]


def test_tampered_certificate_rejected(positive_cert):
    e, cert = positive_cert
    bad = SohsCertificate.from_json(cert.to_json())
    bad.squares = bad.squares[1:]
    assert not verify_sohs(e, bad)[0]
    bad = SohsCertificate.from_json(cert.to_json())
    bad.G = -np.asarray(bad.G) - np.eye(len(bad.basis))
    assert not verify_sohs(e, bad)[0]


def test_positively_elliptic_realization_of_square():
    cert = sohs_decompose(parse("x1*x1"))
    R = positively_elliptic_realization(cert)
    assert R.size == 4
    assert is_positively_elliptic(R.pencil)
    assert classify(original_pencil(R)).verdict in (Verdict.ELLIPTIC, Verdict.STABLY_ELLIPTIC)
    X = random_selfadjoint_point(1, 3, seed=2)
    assert np.allclose(R(X), X[0] @ X[0], atol=1e-8)


def test_positively_elliptic_realization_of_one():
    cert = sohs_decompose(Const(1.0), g=1)
    assert cert is not None
    R = positively_elliptic_realization(cert)
    assert R.size == 2
    assert is_positively_elliptic(R.pencil)


def test_positively_elliptic_realization_of_fixture(positive_cert):
    e, cert = positive_cert
    R = positively_elliptic_realization(cert)
    assert is_positively_elliptic(R.pencil)
    checked = 0
    for seed in range(40):
        X = random_selfadjoint_point(2, 1 + seed % 4, seed=seed)
        v = try_eval(e, X)
        if v is None:
            continue
        assert np.linalg.norm(R(X) - v) <= 1e-6 * (1 + np.linalg.norm(v))
        checked += 1
    assert checked >= 20


def test_mp_counterexample_negative_constant():
    X = mp_counterexample(Const(-1.0), g=1)
    assert X is not None
    assert np.allclose(eval_mp(Const(-1.0), X), -np.eye(X.n))


def test_mp_counterexample_variable():
    e = Var(1)
    assert sohs_decompose(e) is None
    X = mp_counterexample(e)
    assert X is not None
    assert np.linalg.eigvalsh(X[0])[0] <= -np.sqrt(1e-7)
    assert mp_value_min_eig(e, X) <= -np.sqrt(1e-7)


def test_zero_function_mp_value():
    # the zero function is trivially a sum of squares, yet its MP value at 0 is -1
    e = parse("inv(x1)*x1 - 1")
    cert = sohs_decompose(e)
    assert cert is not None
    assert eval_mp(e, MatrixPoint.zeros(1, 1))[0, 0] == pytest.approx(-1.0)


def test_strictly_positive_examples():
    assert strictly_positive(parse("0.5 + x1*x1")).verdict is Positivity.STRICTLY_POSITIVE
    rep = strictly_positive(parse("x1*x1"))
    assert rep.verdict is Positivity.NOT_STRICTLY_POSITIVE
    rep = strictly_positive(parse("inv(0.5 + x1*x1 + x2*x2 + x1*x1*x2*x2)"))
    assert rep.verdict is Positivity.STRICTLY_POSITIVE
    assert strictly_positive(parse("1 + x1")).verdict is Positivity.NOT_STRICTLY_POSITIVE


def test_strictly_positive_spectral_oracle():
    # the inverse of 1/2 + X^2 exists with norm at most 2 everywhere
    e = parse("inv(0.5 + x1*x1)")
    for seed in range(20):
        X = random_selfadjoint_point(1, 4, seed=seed)
        assert np.linalg.norm(eval_strict(e, X), 2) <= 2 + 1e-12


def test_strictly_positive_rejects_irregular():
    with pytest.raises(NotRegular):
        strictly_positive(parse("inv(x1)"))
