"""Realizations r = c* L^{-1} b of nc rational expressions.

A realization is centered at a real scalar tuple lam: it represents
``X -> (c* (x) I) L(X - lam)^{-1} (b (x) I)``.  :func:`build` assembles one
compositionally from the expression tree, :func:`minimize` cuts it down to
the controllable and observable part, and :func:`regular_expression_of`
turns an elliptic minimal realization back into an expression whose every
inverse is defined on all self-adjoint tuples.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jsonio
from .linalg import Field, adjoint, condition_number, direct_sum
from .ncexpr import (Const, Expr, Inverse, MatrixPoint, Product, Star, Sum, Var, expr_field,
                     find_scalar_center, format_expr, nvars, shift, star)
from .pencil import LinearPencil

COND_LIMIT = 1e10
KRYLOV_RTOL = 1e-9


class BuildError(ValueError):
    """A sub-expression is undefined at the chosen center."""

    def __init__(self, message: str, subexpr: Expr | None = None):
        super().__init__(message)
        self.subexpr = subexpr


class NoCenter(ValueError):
    pass


class SingularPencil(ArithmeticError):
    """L(X - lam) is numerically singular."""


@dataclass(frozen=True, eq=False)
class Realization:
    c: np.ndarray
    pencil: LinearPencil
    b: np.ndarray
    center: tuple

    def __post_init__(self):
        dtype = np.result_type(self.pencil.coeffs, np.asarray(self.c), np.asarray(self.b))
        object.__setattr__(self, "c", np.ravel(np.asarray(self.c, dtype=dtype)))
        object.__setattr__(self, "b", np.ravel(np.asarray(self.b, dtype=dtype)))
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        pencil = self.pencil if self.pencil.coeffs.dtype == dtype else LinearPencil(
            self.pencil.coeffs.astype(dtype))
        object.__setattr__(self, "pencil", pencil)
        if pencil.d != pencil.e:
            raise ValueError("a realization needs a square pencil")
        if self.c.size != pencil.d or self.b.size != pencil.d:
            raise ValueError("vector length does not match the pencil size")
        if len(self.center) != pencil.g:
            raise ValueError("center has the wrong number of coordinates")

    @property
    def size(self) -> int:
        return self.pencil.d

    @property
    def g(self) -> int:
        return self.pencil.g

    @property
    def field(self) -> Field:
        return self.pencil.field

    def value_at_center(self) -> complex:
        return complex(np.conj(self.c) @ np.linalg.solve(self.pencil.coeffs[0], self.b))

    def __call__(self, X: MatrixPoint) -> np.ndarray:
        return eval_realization(self, X)

    def to_json(self) -> dict:
        return {
            "c": jsonio.encode_vector(self.c, self.field),
            "b": jsonio.encode_vector(self.b, self.field),
            "pencil": self.pencil.to_json(),
            "center": list(self.center),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Realization":
        pencil = LinearPencil.from_json(data["pencil"])
        field = pencil.field
        center = data.get("center") or [0.0] * pencil.g
        return cls(jsonio.decode_vector(data["c"], field), pencil,
                   jsonio.decode_vector(data["b"], field), tuple(center))


def eval_realization(R: Realization, X: MatrixPoint, cond_threshold: float = 1e12) -> np.ndarray:
    """(c* (x) I) L(X - lam)^{-1} (b (x) I)."""
    if X.g != R.g:
        raise ValueError(f"realization in {R.g} variables evaluated at a {X.g}-tuple")
    n = X.n
    M = R.pencil.eval(X.shifted([-v for v in R.center]))
    if condition_number(M) >= cond_threshold:
        raise SingularPencil("pencil is singular at this point")
    eye = np.eye(n)
    B = np.kron(R.b.reshape(-1, 1), eye)
    C = np.kron(R.c.reshape(-1, 1), eye)
    return adjoint(C) @ np.linalg.solve(M, B)


# ---------------------------------------------------------------------------
# compositional construction

def _unit(d, k, dtype):
    v = np.zeros(d, dtype=dtype)
    v[k] = 1.0
    return v


class _Builder:
    def __init__(self, g: int, dtype):
        self.g = g
        self.dtype = dtype
        self.memo: dict[int, tuple] = {}
        self.keep = []

    def pencil(self, blocks):
        return np.array(blocks, dtype=self.dtype)

    def go(self, node: Expr):
        hit = self.memo.get(id(node))
        if hit is not None:
            return hit
        out = self.make(node)
        self.memo[id(node)] = out
        self.keep.append(node)
        return out

    def make(self, node: Expr):
        g, dt = self.g, self.dtype
        if isinstance(node, Const):
            coeffs = np.zeros((g + 1, 1, 1), dtype=dt)
            coeffs[0, 0, 0] = 1.0
            return np.ones(1, dtype=dt), coeffs, np.array([node.value], dtype=dt)
        if isinstance(node, Var):
            coeffs = np.zeros((g + 1, 2, 2), dtype=dt)
            coeffs[0] = np.eye(2)
            coeffs[node.index, 0, 1] = -1.0
            return _unit(2, 0, dt), coeffs, _unit(2, 1, dt)
        if isinstance(node, Sum):
            c1, L1, b1 = self.go(node.left)
            c2, L2, b2 = self.go(node.right)
            coeffs = np.array([direct_sum(a1, a2) for a1, a2 in zip(L1, L2)])
            return np.concatenate([c1, c2]), coeffs, np.concatenate([b1, b2])
        if isinstance(node, Product):
            c1, L1, b1 = self.go(node.left)
            c2, L2, b2 = self.go(node.right)
            d1, d2 = L1.shape[1], L2.shape[1]
            coeffs = np.array([direct_sum(a1, a2) for a1, a2 in zip(L1, L2)])
            coeffs[0, :d1, d1:] = -np.outer(b1, np.conj(c2))
            c = np.concatenate([c1, np.zeros(d2, dtype=dt)])
            b = np.concatenate([np.zeros(d1, dtype=dt), b2])
            return c, coeffs, b
        if isinstance(node, Inverse):
            c, L, b = self.go(node.child)
            d = L.shape[1]
            value = np.conj(c) @ np.linalg.solve(L[0], b)
            scale = max(1.0, np.linalg.norm(c) * np.linalg.norm(b) / max(
                np.linalg.svd(L[0], compute_uv=False)[-1], 1e-300))
            if abs(value) <= 1e-12 * scale:
                raise BuildError(f"{format_expr(node.child)} vanishes at the center",
                                 node.child)
            coeffs = np.zeros((g + 1, d + 1, d + 1), dtype=dt)
            coeffs[:, :d, :d] = L
            coeffs[0, :d, d] = b
            coeffs[0, d, :d] = np.conj(c)
            return -_unit(d + 1, d, dt), coeffs, _unit(d + 1, d, dt)
        if isinstance(node, Star):
            c, L, b = self.go(node.child)
            return b, np.conj(np.transpose(L, (0, 2, 1))), c
        raise TypeError(type(node))


def build(e: Expr, center=None, g: int | None = None) -> Realization:
    """Realization of e centered at a real scalar tuple.

    Without an explicit center one is searched for; :class:`NoCenter` is
    raised when the search fails.
    """
    g = max(g or 0, nvars(e), len(center) if center is not None else 0)
    if center is None:
        center = find_scalar_center(e, g=g)
        if center is None:
            raise NoCenter(f"no scalar point found in the domain of {format_expr(e)}")
    center = tuple(float(v) for v in center) + (0.0,) * (g - len(center))
    field = expr_field(e)
    shifted = shift(e, center) if any(center) else e
    builder = _Builder(g, field.dtype)
    c, coeffs, b = builder.go(shifted)
    R = Realization(c, LinearPencil(coeffs), b, center)
    if condition_number(R.pencil.coeffs[0]) > COND_LIMIT:
        raise BuildError("realization is ill-conditioned at the center")
    return R


# ---------------------------------------------------------------------------
# minimization

def _krylov(mats, start, rtol=KRYLOV_RTOL) -> np.ndarray:
    """Orthonormal basis of the smallest subspace containing start and
    invariant under every matrix in mats."""
    d = start.shape[0]
    scale = max([1.0] + [np.linalg.norm(m, 2) for m in mats])
    norm0 = np.linalg.norm(start)
    if norm0 == 0.0:
        return np.zeros((d, 0), dtype=start.dtype)
    basis = (start / norm0).reshape(d, 1)
    fresh = basis
    while fresh.shape[1] and basis.shape[1] < d:
        cand = np.hstack([m @ fresh for m in mats])
        for _ in range(2):
            cand = cand - basis @ (adjoint(basis) @ cand)
        if cand.size == 0:
            break
        u, s, _ = np.linalg.svd(cand, full_matrices=False)
        keep = s > rtol * scale
        fresh = u[:, keep]
        if fresh.shape[1]:
            fresh = fresh - basis @ (adjoint(basis) @ fresh)
            fresh, _ = np.linalg.qr(fresh)
            basis = np.hstack([basis, fresh])
    return basis


def normalized(R: Realization) -> tuple[np.ndarray, list[np.ndarray], np.ndarray]:
    """(c, [N_1..N_g], b') with L(0)^{-1} L = I + sum N_j x_j."""
    A0 = R.pencil.coeffs[0]
    if condition_number(A0) > COND_LIMIT:
        raise np.linalg.LinAlgError("L(0) is ill-conditioned")
    N = [np.linalg.solve(A0, a) for a in R.pencil.coeffs[1:]]
    return R.c, N, np.linalg.solve(A0, R.b)


def minimize(R: Realization, rtol: float = KRYLOV_RTOL) -> Realization:
    """Controllable then observable reduction of a normalized realization."""
    c, N, b = normalized(R)
    dtype = R.pencil.coeffs.dtype
    g = R.g
    zero = Realization(np.ones(1, dtype=dtype),
                       LinearPencil(np.concatenate([np.ones((1, 1, 1)),
                                                    np.zeros((g, 1, 1))]).astype(dtype)),
                       np.zeros(1, dtype=dtype), R.center)
    Q = _krylov(N, b, rtol)
    if Q.shape[1] == 0:
        return zero
    N = [adjoint(Q) @ n @ Q for n in N]
    c, b = adjoint(Q) @ c, adjoint(Q) @ b
    W = _krylov([adjoint(n) for n in N], c, rtol)
    if W.shape[1] == 0:
        return zero
    N = [adjoint(W) @ n @ W for n in N]
    c, b = adjoint(W) @ c, adjoint(W) @ b
    k = W.shape[1]
    coeffs = np.array([np.eye(k, dtype=dtype)] + N, dtype=dtype)
    return Realization(c, LinearPencil(coeffs), b, R.center)


def minimal_realization(e: Expr, center=None, g: int | None = None) -> Realization:
    return minimize(build(e, center, g))


def original_pencil(R: Realization) -> LinearPencil:
    """The pencil of R in the original (unshifted) variables."""
    return R.pencil.shifted(R.center)


# ---------------------------------------------------------------------------
# regular expressions from everywhere-invertible matrices

def _add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and a.value == 0:
        return b
    if isinstance(b, Const) and b.value == 0:
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return Sum(a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    # every operand is regular, so dropping 0*e does not shrink a domain
    if isinstance(a, Const) and a.value == 0 or isinstance(b, Const) and b.value == 0:
        return Const(0.0)
    if isinstance(a, Const) and a.value == 1:
        return b
    if isinstance(b, Const) and b.value == 1:
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return Product(a, b)


def _inv(a: Expr) -> Expr:
    if isinstance(a, Const):
        if a.value == 0:
            raise ZeroDivisionError("inverse of the zero constant")
        return Const(1.0 / a.value)
    return Inverse(a)


def _neg(a: Expr) -> Expr:
    return _mul(Const(-1.0), a)


def _matmul(A, B):
    n, m, p = len(A), len(B), len(B[0])
    out = []
    for i in range(n):
        row = []
        for j in range(p):
            acc: Expr = Const(0.0)
            for k in range(m):
                acc = _add(acc, _mul(A[i][k], B[k][j]))
            row.append(acc)
        out.append(row)
    return out


def _adjoint_matrix(M):
    return [[star(M[j][i]) for j in range(len(M))] for i in range(len(M[0]))]


def _inverse_positive(N):
    """Inverse of an expression matrix that is positive definite at every
    self-adjoint tuple, by Schur complements on the leading entry."""
    n = len(N)
    s_inv = _inv(N[0][0])
    if n == 1:
        return [[s_inv]]
    row = [N[0][1:]]                       # N12 (1 x n-1)
    col = [[N[i][0]] for i in range(1, n)]  # N21 (n-1 x 1)
    rest = [r[1:] for r in N[1:]]           # N22
    col_s = [[_mul(col[i][0], s_inv)] for i in range(n - 1)]  # N21 s^-1
    s_row = [[_mul(s_inv, x) for x in row[0]]]                # s^-1 N12
    schur = _matmul(col_s, row)
    schur = [[_add(rest[i][j], _neg(schur[i][j])) for j in range(n - 1)] for i in range(n - 1)]
    S_inv = _inverse_positive(schur)
    top_right = [[_neg(x) for x in r] for r in _matmul(s_row, S_inv)]
    bottom_left = [[_neg(x) for x in r] for r in _matmul(S_inv, col_s)]
    corner = _add(s_inv, _matmul(_matmul(s_row, S_inv), col_s)[0][0])
    out = [[corner] + top_right[0]]
    for i in range(n - 1):
        out.append(bottom_left[i] + S_inv[i])
    return out


def regular_inverse_expression(M) -> list[list[Expr]]:
    """Entries of M^{-1} as regular expressions.

    M is a square array of expressions, each regular, whose value is
    invertible at every self-adjoint tuple.  With N = M* M, every leading
    entry and every Schur complement in the elimination of N is positive
    definite there, so each inverse node of the result is regular.
    """
    M = [[e if isinstance(e, Expr) else Const(e) for e in row] for row in M]
    if len(M) == 1:
        return [[_inv(M[0][0])]]
    Mstar = _adjoint_matrix(M)
    N = _matmul(Mstar, M)
    return _matmul(_inverse_positive(N), Mstar)


def _affine_entry(coeffs, i, j, center) -> Expr:
    g = coeffs.shape[0] - 1
    # the pencil is in the shifted variable x - center
    const = coeffs[0, i, j] - sum(center[k] * coeffs[k + 1, i, j] for k in range(g))
    out: Expr = Const(0.0)
    if const != 0:
        out = Const(const)
    for k in range(g):
        a = coeffs[k + 1, i, j]
        if a != 0:
            out = _add(out, _mul(Const(a), Var(k + 1)))
    return out


def pencil_expression_matrix(L: LinearPencil, center=None) -> list[list[Expr]]:
    center = [0.0] * L.g if center is None else list(center)
    return [[_affine_entry(L.coeffs, i, j, center) for j in range(L.e)] for i in range(L.d)]


def _neumann_expression(R: Realization, N, b) -> Expr:
    """c* L^{-1} b for a normalized pencil I + sum N_j y_j with nilpotent N.

    Iterates u <- b - sum_j N_j (y_j u) d times; nilpotency makes this exact
    and the result is a polynomial in y = x - center.
    """
    d = R.size
    ys = [_add(Var(j + 1), Const(-lam)) for j, lam in enumerate(R.center)]
    base = [Const(v) for v in b]
    u = list(base)
    for _ in range(d):
        nxt = []
        for i in range(d):
            acc = base[i]
            for n, y in zip(N, ys):
                for k in range(d):
                    if n[i, k] != 0 and not (isinstance(u[k], Const) and u[k].value == 0):
                        acc = _add(acc, _mul(Const(-n[i, k]), _mul(y, u[k])))
            nxt.append(acc)
        u = nxt
    out: Expr = Const(0.0)
    for i in range(d):
        out = _add(out, _mul(Const(np.conj(R.c[i])), u[i]))
    return out


def regular_expression_from_realization(R: Realization) -> Expr:
    """c* M^{-1} b with M the affine expression matrix of R's pencil.

    Valid (regular) only when the pencil is elliptic; the caller checks.
    A jointly nilpotent pencil gives an inverse-free (polynomial) result.
    """
    from .pencil import jointly_nilpotent

    if jointly_nilpotent(R.pencil):
        _, N, b = normalized(R)
        return _neumann_expression(R, N, b)
    Minv = regular_inverse_expression(pencil_expression_matrix(R.pencil, R.center))
    d = R.size
    out: Expr = Const(0.0)
    for i in range(d):
        ci = np.conj(R.c[i])
        if ci == 0:
            continue
        for k in range(d):
            if R.b[k] == 0:
                continue
            out = _add(out, _mul(Const(ci * R.b[k]), Minv[i][k]))
    return out


def regular_expression_of(e: Expr, tol: float = 1e-7) -> Expr:
    """A regular expression for the function of e.

    Raises ValueError unless the minimal realization of e has an elliptic
    pencil (e.g. e is not regular, or the classification is inconclusive).
    """
    from .ellipticity import Verdict, classify

    R = minimal_realization(e)
    cert = classify(R.pencil, tol)
    if cert.verdict not in (Verdict.STABLY_ELLIPTIC, Verdict.ELLIPTIC):
        raise ValueError(f"expression is not certified regular ({cert.verdict.value})")
    return regular_expression_from_realization(R)
