"""Linear matrix pencils A_0 + sum_j A_j x_j."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jsonio
from .linalg import (Field, adjoint, field_of, min_singular_value, range_basis,
                     real_part)
from .ncexpr import MatrixPoint, random_selfadjoint_point


@dataclass(frozen=True, eq=False)
class LinearPencil:
    """Coefficients stacked as an array of shape (g+1, d, e)."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.ndim != 3 or c.shape[0] < 1:
            raise ValueError("coefficients must have shape (g+1, d, e)")
        dtype = np.complex128 if np.iscomplexobj(c) else np.float64
        object.__setattr__(self, "coeffs", np.array(c, dtype=dtype))

    @classmethod
    def from_coefficients(cls, coeffs, field: Field | str | None = None) -> "LinearPencil":
        arr = np.array([np.atleast_2d(np.asarray(a)) for a in coeffs])
        if field is not None:
            arr = arr.astype(Field.parse(field).dtype)
        return cls(arr)

    @property
    def field(self) -> Field:
        return field_of(self.coeffs)

    @property
    def g(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def d(self) -> int:
        return self.coeffs.shape[1]

    @property
    def e(self) -> int:
        return self.coeffs.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.coeffs.shape[1:]

    def __getitem__(self, j) -> np.ndarray:
        return self.coeffs[j]

    def __repr__(self):
        return f"LinearPencil(g={self.g}, {self.d}x{self.e}, field={self.field.value})"

    def __call__(self, X) -> np.ndarray:
        return self.eval(X)

    def eval(self, X) -> np.ndarray:
        """A_0 (x) I + sum_j A_j (x) X_j."""
        mats = X.mats if isinstance(X, MatrixPoint) else tuple(np.atleast_2d(m) for m in X)
        if len(mats) != self.g:
            raise ValueError(f"pencil in {self.g} variables evaluated at a {len(mats)}-tuple")
        n = mats[0].shape[0] if mats else 1
        out = np.kron(self.coeffs[0], np.eye(n))
        for a, x in zip(self.coeffs[1:], mats):
            out = out + np.kron(a, x)
        return out

    def shifted(self, center) -> "LinearPencil":
        """The pencil x -> L(x - center) (center real)."""
        c = self.coeffs.copy()
        for j, lam in enumerate(center, start=1):
            c[0] = c[0] - lam * c[j]
        return LinearPencil(c)

    def real_compress(self, D) -> list[np.ndarray]:
        """[Re(D A_0), ..., Re(D A_g)]."""
        D = np.asarray(D)
        if D.shape != (self.e, self.d):
            raise ValueError(f"D must be {self.e}x{self.d}, got {D.shape}")
        return [real_part(D @ a) for a in self.coeffs]

    def restrict(self, V, rtol: float = 1e-10) -> "LinearPencil":
        """The pencil L V (coefficients A_j V)."""
        V = np.atleast_2d(np.asarray(V))
        if V.shape[0] != self.e:
            raise ValueError("V must have e rows")
        if V.shape[1] and range_basis(V, rtol).shape[1] < V.shape[1]:
            raise ValueError("restriction matrix is rank deficient")
        return LinearPencil(np.einsum("jab,bc->jac", self.coeffs, V))

    def left_multiply(self, M) -> "LinearPencil":
        return LinearPencil(np.einsum("ab,jbc->jac", np.asarray(M), self.coeffs))

    def adjoint(self) -> "LinearPencil":
        return LinearPencil(np.conj(np.transpose(self.coeffs, (0, 2, 1))))

    def as_field(self, field: Field | str) -> "LinearPencil":
        field = Field.parse(field)
        if field is self.field:
            return self
        if field is Field.REAL:
            if np.abs(self.coeffs.imag).max(initial=0.0) > 0:
                raise ValueError("pencil has complex coefficients")
            return LinearPencil(self.coeffs.real)
        return LinearPencil(self.coeffs.astype(np.complex128))

    def to_json(self) -> dict:
        return {
            "field": self.field.value,
            "g": self.g,
            "d": self.d,
            "e": self.e,
            "coeffs": [jsonio.encode_matrix(a, self.field) for a in self.coeffs],
        }

    @classmethod
    def from_json(cls, data: dict) -> "LinearPencil":
        field = Field.parse(data.get("field", "R"))
        d, e = int(data["d"]), int(data["e"])
        mats = [jsonio.decode_matrix(m, field, (d, e)) for m in data["coeffs"]]
        if "g" in data and len(mats) != int(data["g"]) + 1:
            raise ValueError("coefficient count does not match g")
        for m in mats:
            if m.shape != (d, e):
                raise ValueError(f"coefficient of shape {m.shape}, expected {(d, e)}")
        return cls(np.array(mats, dtype=field.dtype))


@dataclass
class FullRankSample:
    min_sigma: float
    min_relative_sigma: float
    worst_point: MatrixPoint | None
    samples: int


def default_sample_sizes(L: LinearPencil, cap: int = 12) -> list[int]:
    bound = (L.g + 1) * min(L.d, L.e) ** 2
    return list(range(1, max(1, min(bound, cap)) + 1))


def _general_point(g, n, field, rng) -> MatrixPoint:
    mats = []
    for _ in range(g):
        a = rng.standard_normal((n, n))
        if field is Field.COMPLEX:
            a = a + 1j * rng.standard_normal((n, n))
        mats.append(a / np.sqrt(n))
    return MatrixPoint(tuple(mats), field, False)


def full_rank_sample(L: LinearPencil, sizes=None, trials: int = 50, seed=0,
                     selfadjoint: bool = True, field: Field | str | None = None) -> FullRankSample:
    """Smallest singular value of L(X) over random tuples.

    One-sided: a small value hints at a singular point, a large one proves
    nothing.  ``selfadjoint=False`` samples general (non-hermitian) tuples.
    """
    field = Field.parse(field) if field is not None else L.field
    sizes = default_sample_sizes(L) if sizes is None else list(sizes)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seeds = ss.spawn(len(sizes) * trials)
    min_sigma, min_rel, worst = np.inf, np.inf, None
    count = 0
    for k, n in enumerate(sizes):
        for t in range(trials):
            ss = seeds[k * trials + t]
            if selfadjoint:
                X = random_selfadjoint_point(L.g, n, field, ss)
            else:
                X = _general_point(L.g, n, field, np.random.default_rng(ss))
            s = np.linalg.svd(L.eval(X), compute_uv=False)
            sigma = float(s[-1]) if s.size else 0.0
            count += 1
            if sigma < min_sigma:
                min_sigma, worst = sigma, X
            min_rel = min(min_rel, sigma / s[0] if s.size and s[0] > 0 else 0.0)
    return FullRankSample(min_sigma, min_rel, worst, count)


def jointly_nilpotent(L: LinearPencil, rtol: float = 1e-9) -> bool:
    """Whether A_0^{-1}A_1, ..., A_0^{-1}A_g are jointly nilpotent.

    Iterates W_{k+1} = sum_j N_j W_k from W_0 = K^d; the family is nilpotent
    exactly when W_d = 0.  For a square pencil this is equivalent to
    det L(X) != 0 at every (not only self-adjoint) tuple.
    """
    if L.d != L.e:
        raise ValueError("joint nilpotency needs a square pencil")
    A0 = L.coeffs[0]
    if min_singular_value(A0) <= 1e-12 * max(1.0, np.abs(A0).max()):
        raise np.linalg.LinAlgError("A_0 is singular")
    N = [np.linalg.solve(A0, a) for a in L.coeffs[1:]]
    scale = max([1.0] + [np.linalg.norm(n, 2) for n in N])
    W = np.eye(L.d, dtype=L.coeffs.dtype)
    for _ in range(L.d):
        if W.shape[1] == 0:
            return True
        stacked = np.hstack([n @ W for n in N]) if N else np.zeros((L.d, 0))
        if stacked.size == 0 or np.abs(stacked).max() <= rtol * scale:
            return True
        W = range_basis(stacked, rtol)
    return W.shape[1] == 0


def pencil_from_text(rows, g: int, field: Field | str = Field.REAL) -> LinearPencil:
    """Pencil from a matrix of affine expression strings, e.g. [["1", "x1-x2"], ...]."""
    from .ncexpr import eval_strict, parse

    field = Field.parse(field)
    d, e = len(rows), len(rows[0])
    coeffs = np.zeros((g + 1, d, e), dtype=field.dtype)
    rng = np.random.default_rng(0)
    probe = rng.standard_normal(g)
    for a, row in enumerate(rows):
        if len(row) != e:
            raise ValueError("ragged pencil rows")
        for b, text in enumerate(row):
            ex = parse(text, g, field)
            at = lambda v: eval_strict(ex, MatrixPoint.scalar(v, field))[0, 0]
            base = at(np.zeros(g))
            coeffs[0, a, b] = base
            for j in range(g):
                unit = np.zeros(g)
                unit[j] = 1.0
                coeffs[j + 1, a, b] = at(unit) - base
            affine = base + coeffs[1:, a, b] @ probe
            if abs(at(probe) - affine) > 1e-9 * (1 + abs(affine)):
                raise ValueError(f"entry {text!r} is not affine")
    return LinearPencil(coeffs)
