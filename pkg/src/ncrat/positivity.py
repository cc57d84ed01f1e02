"""Sums of hermitian squares, positively elliptic realizations, strict
positivity and Moore-Penrose counterexamples.

A self-adjoint rational function r is tested for a decomposition
r = W* G W with G >= 0, where W stacks a basis of the span of products of at
most k elements of the "chip set" of r: its sub-expressions, their adjoints,
and nothing else.  Both the basis and the identity r = W* G W are handled by
evaluation at random self-adjoint tuples; the certificate is re-checked on
fresh tuples.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field
from enum import Enum

import numpy as np

from . import jsonio
from .ellipticity import DEFAULT_TOL, Verdict, classify
from .linalg import Field, adjoint, direct_sum, hermitian_eig, real_embed
from .ncexpr import (Const, Expr, Inverse, MatrixPoint, OutsideDomain, Var, eval_many,
                     eval_mp, eval_strict, expr_field, format_expr, kappa, nvars, parse,
                     random_selfadjoint_point, star, subexpressions, tau)
from .pencil import LinearPencil
from .realization import (NoCenter, Realization, _add, _mul, build, minimize,
                          original_pencil)
from .sdp import (LmiProblem, Status, eliminate_equalities, hermitian_basis, hermitian_coords,
                  solve_max_min_eig)

log = logging.getLogger(__name__)

INDEPENDENCE_RTOL = 1e-8
RESIDUAL_TOL = 1e-6
DEFAULT_MAX_DIM = 40
PLAN_SIZES = tuple(range(1, 7))
PLAN_SAMPLES = 40


class NoDomainPoint(ValueError):
    """No random self-adjoint tuple landed in the domain of the expression."""


class NotRegular(ValueError):
    pass


# ---------------------------------------------------------------------------
# sampling

def domain_points(e: Expr, g: int, sizes, per_size: int, seed, field: Field | None = None,
                  max_tries: int = 20) -> list[MatrixPoint]:
    """per_size random self-adjoint tuples of each size in the domain of e."""
    field = expr_field(e) if field is None else field
    ss = np.random.SeedSequence(seed)
    out = []
    for n in sizes:
        got = 0
        for child in ss.spawn(per_size * max_tries):
            X = random_selfadjoint_point(g, n, field, child)
            try:
                eval_strict(e, X)
            except OutsideDomain:
                continue
            out.append(X)
            got += 1
            if got == per_size:
                break
        if got == 0:
            raise NoDomainPoint(f"no domain point of size {n} for {format_expr(e)[:80]}")
    return out


def _stack(values) -> np.ndarray:
    return np.concatenate([np.ravel(v) for v in values])


# ---------------------------------------------------------------------------
# the spaces V_k

def chip_set(e: Expr) -> list[Expr]:
    """Sub-expressions of e and their adjoints, constants removed, simplest first."""
    qs = [q for q in subexpressions(e, close_under_star=True) if not isinstance(q, Const)]
    return sorted(qs, key=lambda q: (tau(q), len(format_expr(q))))


@dataclass
class RationalBasis:
    elements: list[Expr]
    k: int
    level_dims: list[int]
    gram_points: list[MatrixPoint] = dc_field(repr=False)
    sigma_ratio: float = 1.0
    truncated: bool = False

    @property
    def dim(self) -> int:
        return len(self.elements)

    def level(self, j: int) -> list[Expr]:
        return self.elements[:self.level_dims[min(j, len(self.level_dims) - 1)]]


def basis_of_Vk(e: Expr, k: int, seed=0, max_dim: int = DEFAULT_MAX_DIM,
                g: int | None = None) -> RationalBasis:
    """Numerically independent products of at most k chip-set elements.

    V_j = V_{j-1} + Q V_{j-1}, so level j only multiplies the elements that
    were new at level j-1.  Candidates are kept when their evaluation vector
    leaves the span of the kept ones by more than INDEPENDENCE_RTOL.
    """
    g = max(g or 0, nvars(e))
    points = domain_points(e, g, PLAN_SIZES, 2, seed)
    chips = chip_set(e)
    one = Const(1.0)
    elements: list[Expr] = []
    Q = None  # orthonormal basis of the kept evaluation vectors
    truncated = False
    unit_norm = np.sqrt(sum(X.n for X in points))

    def offer(w: Expr) -> bool:
        nonlocal Q
        v = _stack(eval_many([w], X)[0] for X in points)
        # a function that vanishes up to rounding is no new direction
        nv = max(np.linalg.norm(v), unit_norm)
        v = v / nv
        r = v if Q is None else v - Q @ (adjoint(Q) @ v)
        if Q is not None:
            r = r - Q @ (adjoint(Q) @ r)
        if np.linalg.norm(r) <= INDEPENDENCE_RTOL:
            return False
        r = r / np.linalg.norm(r)
        Q = r[:, None] if Q is None else np.hstack([Q, r[:, None]])
        elements.append(w)
        return True

    offer(one)
    dims = [len(elements)]
    fresh = list(elements)
    for _ in range(k):
        new = []
        for b in fresh:
            for q in chips:
                if len(elements) >= max_dim:
                    truncated = True
                    break
                w = q if b is one else _mul(q, b)
                if offer(w):
                    new.append(w)
        dims.append(len(elements))
        fresh = new
        if not new:
            dims.extend([len(elements)] * (k + 1 - len(dims)))
            break
    E = np.array([_stack(eval_many([w], X)[0] for X in points) for w in elements]).T
    s = np.linalg.svd(E / np.linalg.norm(E, axis=0), compute_uv=False)
    return RationalBasis(elements, k, dims, points, float(s[-1] / s[0]), truncated)


# ---------------------------------------------------------------------------
# equivalence plan

@dataclass
class EquivalencePlan:
    kappa: int
    t: int
    dim_v: int
    size_bound: int
    actual_sizes: list[int]
    samples_per_size: int
    truncated: bool = False

    def to_json(self) -> dict:
        return {"kappa": self.kappa, "t": self.t, "dim_V": self.dim_v,
                "bound": self.size_bound, "sizes": list(self.actual_sizes),
                "samples_per_size": self.samples_per_size, "truncated": self.truncated}

    @classmethod
    def from_json(cls, data: dict) -> "EquivalencePlan":
        return cls(int(data["kappa"]), int(data["t"]), int(data["dim_V"]), int(data["bound"]),
                   [int(n) for n in data["sizes"]], int(data["samples_per_size"]),
                   bool(data.get("truncated", False)))


def equivalence_plan(e: Expr, basis: RationalBasis | None = None, seed=0,
                     max_dim: int = DEFAULT_MAX_DIM) -> EquivalencePlan:
    """Sizes that would make sampled equality exact, and the sizes actually used."""
    t = tau(e)
    if basis is None or basis.k != 2 * t + 1:
        basis = basis_of_Vk(e, 2 * t + 1, seed, max_dim)
    kap = kappa(e)
    bound = kap * (1 + (2 * t + 1) * basis.dim ** 2)
    return EquivalencePlan(kap, t, basis.dim, bound, list(PLAN_SIZES), PLAN_SAMPLES,
                           basis.truncated)


# ---------------------------------------------------------------------------
# Gram matrix problem

@dataclass
class _Gram:
    """Sampled linear system 'W* G W = r' in hermitian coordinates of G."""

    m: int
    field: Field
    A: np.ndarray        # equations x coordinates
    rhs: np.ndarray
    herm: list           # hermitian basis of m x m
    row_weights: list    # per point: (offset, n, weight)


def _gram_system(W_vals, r_vals, field: Field) -> _Gram:
    m = W_vals[0].shape[0]
    cplx = field is Field.COMPLEX
    herm = hermitian_basis(m, cplx)
    Hst = np.array(herm)                                   # p x m x m
    blocks, rhs, weights = [], [], []
    offset = 0
    for Wx, rx in zip(W_vals, r_vals):
        # P[a, b] = W_a(X)* W_b(X); the value of W* G W is sum_ab G_ab P_ab
        P = np.einsum("aji,bjk->abik", np.conj(Wx), Wx, optimize=True)
        cols = np.einsum("pab,abik->pik", Hst, P, optimize=True)
        w = 1.0 / (1.0 + max(np.linalg.norm(rx), np.abs(P).max()))
        n = rx.shape[0]
        rows = cols.reshape(len(herm), -1).T
        vals = rx.ravel()
        if cplx:
            rows = np.vstack([rows.real, rows.imag])
            vals = np.concatenate([vals.real, vals.imag])
        else:
            rows, vals = rows.real, vals.real
        blocks.append(w * rows)
        rhs.append(w * vals)
        weights.append((offset, n, w))
        offset += rows.shape[0]
    return _Gram(m, field, np.vstack(blocks), np.concatenate(rhs), herm, weights)


def _herm_from(coords, herm) -> np.ndarray:
    return sum(c * h for c, h in zip(coords, herm)) if len(herm) else np.zeros((0, 0))


def _lmi(mat: np.ndarray, field: Field) -> np.ndarray:
    return real_embed(mat) if field is Field.COMPLEX else mat.real


@dataclass
class _GramResult:
    feasible: bool
    G: np.ndarray | None
    t_star: float
    functional: np.ndarray | None   # weights on the sampled equations
    status: str


def _solve_gram(sys: _Gram, tol: float, max_iter: int = 200) -> _GramResult:
    nparam = len(sys.herm)
    sub = eliminate_equalities(nparam, sys.A, sys.rhs)
    if not sub.feasible:
        # r is not in the span of the products: the least-squares residual
        # annihilates every product and pairs negatively with r
        coef = np.linalg.lstsq(sys.A, sys.rhs, rcond=None)[0]
        rho = sys.rhs - sys.A @ coef
        return _GramResult(False, None, -np.inf, -rho / max(rho @ sys.rhs, 1e-300), "no Gram matrix")
    G0 = _herm_from(sub.point, sys.herm)
    dirs = [_herm_from(sub.basis[:, i], sys.herm) for i in range(sub.dim)]
    prob = LmiProblem(_lmi(G0, sys.field), [_lmi(d, sys.field) for d in dirs], "Gram matrix")
    sol = solve_max_min_eig(prob, tol=min(tol, 1e-8) * 0.1, max_iter=max_iter)
    if sol.status is Status.NUMERICAL_FAILURE:
        return _GramResult(False, None, sol.t_star, None, f"SDP failure: {sol.message}")
    G = G0 + sum(y * d for y, d in zip(sol.y, dirs)) if dirs else G0
    if sol.t_star >= -tol:
        return _GramResult(True, 0.5 * (G + adjoint(G)), sol.t_star, None, "feasible")
    # dual Z: tr(Z G) is constant on the affine space of Gram matrices and
    # nonnegative on PSD ones; write it as weights on the equations
    Z = sol.dual_matrix
    m = sys.m
    if sys.field is Field.COMPLEX:
        Zc = Z[:m, :m] + Z[m:, m:] + 1j * (Z[m:, :m] - Z[:m, m:])
    else:
        Zc = Z
    z = np.array([np.real(np.vdot(h, Zc)) for h in sys.herm])
    omega = np.linalg.lstsq(sys.A.T, z, rcond=None)[0]
    return _GramResult(False, None, sol.t_star, omega, f"max-min eigenvalue {sol.t_star:.3e}")


# ---------------------------------------------------------------------------
# certificates

@dataclass
class SohsCertificate:
    k: int
    basis: list[Expr]
    G: np.ndarray
    squares: list[Expr]
    plan: EquivalencePlan
    residual: dict
    field: Field = Field.REAL
    g: int = 0

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "field": self.field.value,
            "g": self.g,
            "basis": [format_expr(w) for w in self.basis],
            "G": jsonio.encode_matrix(self.G, self.field),
            "squares": [format_expr(s) for s in self.squares],
            "plan": self.plan.to_json(),
            "residual": dict(self.residual),
        }

    @classmethod
    def from_json(cls, data: dict) -> "SohsCertificate":
        field = Field.parse(data.get("field", "R"))
        g = int(data.get("g", 0))
        basis = [parse(s, g, field) for s in data["basis"]]
        m = len(basis)
        return cls(int(data["k"]), basis, jsonio.decode_matrix(data["G"], field, (m, m)),
                   [parse(s, g, field) for s in data["squares"]],
                   EquivalencePlan.from_json(data["plan"]), dict(data["residual"]), field, g)


def _factor(G: np.ndarray, tol: float) -> np.ndarray:
    """H with H* H = G after clipping eigenvalues in [-tol, 0) to zero."""
    eig = hermitian_eig(G)
    w, U = eig.eigenvalues, eig.eigenvectors
    if w.size and w[0] < -tol * max(1.0, abs(w[-1])):
        raise ValueError("Gram matrix is not positive semidefinite")
    top = max(w[-1], 0.0) if w.size else 0.0
    keep = w > 1e-12 * max(1.0, top)
    return np.sqrt(w[keep])[:, None] * adjoint(U[:, keep])


def _low_rank(G: np.ndarray, sys: _Gram) -> np.ndarray:
    """Drop the smallest eigenvalues of G while the sampled identity still holds.

    Barrier iterates sit near the analytic center of the feasible face, so a
    boundary solution carries many tiny eigenvalues that only add squares.
    """
    w, U = np.linalg.eigh(G)
    w = np.clip(w, 0.0, None)
    top = max(w[-1], 0.0) if w.size else 0.0

    def misfit(ww):
        Gt = (U * ww) @ adjoint(U)
        coords = hermitian_coords(Gt, sys.herm)
        return np.linalg.norm(sys.A @ coords - sys.rhs) / (1.0 + np.linalg.norm(sys.rhs))

    base = misfit(w)
    for rel in (1e-3, 1e-5, 1e-7, 1e-9):
        ww = np.where(w > rel * top, w, 0.0)
        if misfit(ww) <= max(10.0 * base, 1e-11):
            return (U * ww) @ adjoint(U)
    return (U * w) @ adjoint(U)


def _combination(coeffs, basis, field: Field) -> Expr:
    big = np.abs(coeffs).max(initial=0.0)
    out: Expr = Const(0.0)
    for c, w in zip(coeffs, basis):
        if abs(c) <= 1e-14 * big:
            continue
        c = complex(c) if field is Field.COMPLEX else float(np.real(c))
        out = _add(out, _mul(Const(c), w))
    return out


def residual_stats(e: Expr, squares, g: int, seed=1, sizes=PLAN_SIZES,
                   per_size: int = PLAN_SAMPLES) -> dict:
    """Relative residual |r - sum s_j* s_j| / (1 + |r|) on fresh domain points."""
    points = domain_points(e, g, sizes, per_size, seed)
    worst, total = 0.0, 0.0
    for X in points:
        vals = eval_many([e] + list(squares), X)
        rx = vals[0]
        acc = rx.copy()
        for s in vals[1:]:
            acc = acc - adjoint(s) @ s
        res = np.linalg.norm(acc, 2) / (1.0 + np.linalg.norm(rx, 2))
        worst = max(worst, res)
        total += res
    return {"max": float(worst), "mean": float(total / len(points)),
            "sizes": list(sizes), "samples_per_size": per_size, "points": len(points)}


def _check_selfadjoint(e: Expr, g: int, seed):
    for X in domain_points(e, g, (1, 2, 3), 2, seed):
        v = eval_strict(e, X)
        if np.linalg.norm(v - adjoint(v)) > 1e-8 * (1.0 + np.linalg.norm(v)):
            raise ValueError("expression is not self-adjoint")


@dataclass
class _Attempt:
    k: int
    level: int
    basis: list[Expr]
    points: list[MatrixPoint]
    system: _Gram
    result: _GramResult


def _attempt(e: Expr, basis: list[Expr], points, field, tol) -> tuple[_Gram, _GramResult]:
    W_vals, r_vals = [], []
    for X in points:
        vals = eval_many([e] + basis, X)
        r_vals.append(vals[0])
        W_vals.append(np.array(vals[1:]))
    sys = _gram_system(W_vals, r_vals, field)
    return sys, _solve_gram(sys, tol)


def _search(e: Expr, k: int | None, tol: float, seed, max_dim: int, g: int | None,
            escalate: bool):
    """Yield Gram attempts at growing levels V_0, V_1, ..., V_k (then V_{k+1})."""
    g = max(g or 0, nvars(e))
    field = expr_field(e)
    _check_selfadjoint(e, g, seed)
    t = tau(e)
    k = 2 * t + 1 if k is None else int(k)
    points = domain_points(e, g, PLAN_SIZES, PLAN_SAMPLES, seed)
    ks = [k, k + 1] if escalate else [k]
    tried = set()
    basis = None
    for kk in ks:
        basis = basis_of_Vk(e, kk, seed, max_dim, g)
        for j in range(kk + 1):
            W = basis.level(j)
            if len(W) in tried:
                continue
            tried.add(len(W))
            sys, res = _attempt(e, W, points, field, tol)
            log.debug("level %d dim %d: %s", j, len(W), res.status)
            yield _Attempt(kk, j, W, points, sys, res), basis


def sohs_decompose(e: Expr, k: int | None = None, tol: float = DEFAULT_TOL, seed=0,
                   max_dim: int = DEFAULT_MAX_DIM, g: int | None = None,
                   escalate: bool = True) -> SohsCertificate | None:
    """A sum-of-hermitian-squares certificate for e, or None.

    The default k is 2 tau(e) + 1; on failure k + 1 is tried once.  Levels
    are tried from the bottom, so the certificate uses the smallest V_j that
    works.  None means no certificate at the levels tried (with the basis cap
    in force), not a proof that none exists.
    """
    g = max(g or 0, nvars(e))
    field = expr_field(e)
    for att, basis in _search(e, k, tol, seed, max_dim, g, escalate):
        if not att.result.feasible:
            continue
        H = _factor(_low_rank(att.result.G, att.system), max(tol, 1e-9))
        squares = [_combination(row, att.basis, field) for row in H]
        stats = residual_stats(e, squares, g, seed=np.random.SeedSequence(seed).entropy + 1)
        if stats["max"] > RESIDUAL_TOL:
            log.debug("level %d: residual %.3e on fresh points", att.level, stats["max"])
            continue
        plan = equivalence_plan(e, basis if basis.k == 2 * tau(e) + 1 else None, seed, max_dim)
        return SohsCertificate(att.k, list(att.basis), att.result.G, squares, plan, stats,
                               field, g)
    return None


def verify_sohs(e: Expr, cert: SohsCertificate, tol: float = DEFAULT_TOL, seed=7,
                per_size: int = PLAN_SAMPLES) -> tuple[bool, str]:
    """Re-check a certificate: G >= -tol, few enough squares, and the
    identity r = sum s_j* s_j on fresh random points."""
    G = np.asarray(cert.G)
    if G.shape != (len(cert.basis), len(cert.basis)):
        return False, "Gram matrix does not match the basis"
    if np.linalg.norm(G - adjoint(G)) > 1e-9 * max(1.0, np.linalg.norm(G)):
        return False, "Gram matrix is not self-adjoint"
    if G.size and hermitian_eig(G).eigenvalues[0] < -tol * max(1.0, np.linalg.norm(G, 2)):
        return False, "Gram matrix is not positive semidefinite"
    if len(cert.squares) > max(1, len(cert.basis)):
        return False, "more squares than basis elements"
    g = max(cert.g, nvars(e))
    stats = residual_stats(e, cert.squares, g, seed=seed, per_size=per_size)
    if stats["max"] > RESIDUAL_TOL:
        return False, f"residual {stats['max']:.3e} on fresh points"
    return True, f"residual {stats['max']:.2e} on {stats['points']} fresh points"


# ---------------------------------------------------------------------------
# positively elliptic realizations

def positively_elliptic_realization(cert: SohsCertificate, center=None) -> Realization:
    """Direct sum over the squares s_j = c_j* L_j^{-1} b_j of the pencils
    [[c_j c_j*, L_j*], [-L_j, 0]] with vector (0; b_j)."""
    g = cert.g
    field = cert.field
    squares = cert.squares or [Const(0.0)]
    if center is None:
        probe = squares[0]
        for s in squares[1:]:
            probe = _add(probe, s)
        from .ncexpr import find_scalar_center
        center = find_scalar_center(probe, g=g)
        if center is None:
            raise NoCenter("no common scalar center for the squares")
    blocks, vecs = [], []
    for s in squares:
        R = minimize(build(s, center, g))
        L = R.pencil.coeffs.astype(field.dtype)
        c = R.c.astype(field.dtype)
        b = R.b.astype(field.dtype)
        d = L.shape[1]
        M = np.zeros((g + 1, 2 * d, 2 * d), dtype=field.dtype)
        M[0, :d, :d] = np.outer(c, np.conj(c))
        for j in range(g + 1):
            M[j, :d, d:] = adjoint(L[j])
            M[j, d:, :d] = -L[j]
        blocks.append(M)
        vecs.append(np.concatenate([np.zeros(d, dtype=field.dtype), b]))
    coeffs = np.array([direct_sum(*[blk[j] for blk in blocks]) for j in range(g + 1)])
    v = np.concatenate(vecs)
    return Realization(v, LinearPencil(coeffs), v, tuple(center))


def is_positively_elliptic(L: LinearPencil, atol: float = 1e-12) -> bool:
    """Re A_0 >= 0 and Re A_j = 0 for j >= 1."""
    from .linalg import real_part
    parts = [real_part(a) for a in L.coeffs]
    if any(np.abs(p).max(initial=0.0) > atol for p in parts[1:]):
        return False
    w = np.linalg.eigvalsh(parts[0]) if parts[0].size else np.zeros(0)
    return bool(w.size == 0 or w[0] >= -atol * max(1.0, abs(w[-1])))


# ---------------------------------------------------------------------------
# Moore-Penrose counterexamples

def _functional_blocks(att: _Attempt, omega: np.ndarray, field: Field) -> list[np.ndarray]:
    """Lambda(f) = sum_i <C_i, f(X_i)>: the weights omega on the sampled
    equations as one matrix C_i per sample point."""
    cplx = field is Field.COMPLEX
    blocks = []
    for offset, n, w in att.system.row_weights:
        size = n * n
        if cplx:
            re = omega[offset:offset + size]
            im = omega[offset + size:offset + 2 * size]
            blocks.append(w * (re + 1j * im).reshape(n, n))
        else:
            blocks.append(w * omega[offset:offset + size].reshape(n, n))
    return blocks


def _gns_point(e: Expr, att: _Attempt, omega: np.ndarray, g: int, field: Field,
               delta: float = 1e-4) -> MatrixPoint | None:
    basis = att.basis
    m = len(basis)
    points = att.points
    C = _functional_blocks(att, omega, field)
    W_vals = [np.array(eval_many(basis, X)) for X in points]
    # M[b, a] = Lambda(w_b* w_a) and the trace functional M0 likewise
    M = np.zeros((m, m), dtype=complex)
    M0 = np.zeros((m, m), dtype=complex)
    for Ci, Wx in zip(C, W_vals):
        P = np.einsum("bji,ajk->baik", np.conj(Wx), Wx, optimize=True)
        M += np.einsum("ik,baik->ba", np.conj(Ci), P, optimize=True)
        M0 += np.einsum("baii->ba", P) / Wx.shape[1]
    M0 /= len(W_vals)
    M = 0.5 * (M + adjoint(M))
    # regularize with the trace functional, strictly positive on squares
    M = M + delta * max(1.0, np.linalg.norm(M, 2)) / max(np.linalg.norm(M0, 2), 1e-300) * M0
    if field is Field.REAL:
        M = M.real
    w = np.linalg.eigvalsh(M)
    if w[0] <= 0:
        return None
    # inner space: coefficient vectors alpha with x_j W alpha in span W
    E = np.array([_stack(Wx[a] for Wx in W_vals) for a in range(m)]).T
    Epinv = np.linalg.pinv(E)
    present = sorted({v.index for v in subexpressions(e) if isinstance(v, Var)})
    F = {}
    for j in present:
        F[j] = np.array([_stack(X.mats[j - 1] @ Wx[a] for X, Wx in zip(points, W_vals))
                         for a in range(m)]).T
    if present:
        proj = np.vstack([F[j] - E @ (Epinv @ F[j]) for j in present])
        scale = max(1.0, np.linalg.norm(proj, 2))
        u, s, vh = np.linalg.svd(proj)
        rank = int(np.sum(s > 1e-8 * scale))
        A = adjoint(vh[rank:]) if rank < m else np.zeros((m, 0))
    else:
        A = np.eye(m)
    if A.shape[1] == 0:
        return None
    A = A.astype(M.dtype) if field is Field.COMPLEX else A.real
    K = adjoint(A) @ M @ A
    K = 0.5 * (K + adjoint(K))
    try:
        R = np.linalg.cholesky(K)             # K = R R*
    except np.linalg.LinAlgError:
        return None
    Rinv = np.linalg.inv(R)
    n = A.shape[1]
    mats = []
    for j in range(1, g + 1):
        if j not in F:
            mats.append(np.zeros((n, n), dtype=field.dtype))
            continue
        B = Epinv @ F[j] @ A                    # x_j (W A) = W B
        T = adjoint(A) @ M @ B                  # <x_j v_a, v_b>
        X = Rinv @ T @ adjoint(Rinv)
        X = 0.5 * (X + adjoint(X))
        mats.append(X if field is Field.COMPLEX else X.real)
    return MatrixPoint(tuple(mats), field, True) if g else MatrixPoint((), field, True)


def mp_value_min_eig(e: Expr, X: MatrixPoint) -> float:
    v = eval_mp(e, X)
    return float(np.linalg.eigvalsh(0.5 * (v + adjoint(v)))[0])


def mp_counterexample(e: Expr, k: int | None = None, tol: float = DEFAULT_TOL, seed=0,
                      max_dim: int = DEFAULT_MAX_DIM, g: int | None = None,
                      sample_sizes=PLAN_SIZES, samples: int = 50) -> MatrixPoint | None:
    """A self-adjoint tuple X with r_MP(X) not positive semidefinite, or None.

    First from the dual of the failed Gram problem (a functional negative on
    r and nonnegative on squares), regularized and turned into a tuple by the
    GNS construction; then, if that point does not verify, by random search.
    Every returned point satisfies lambda_min(r_MP(X)) <= -sqrt(tol).
    """
    g = max(g or 0, nvars(e))
    field = expr_field(e)
    thr = -np.sqrt(tol)
    try:
        attempts = list(_search(e, k, tol, seed, max_dim, g, escalate=False))
    except ValueError:
        attempts = []
    for att, _ in reversed(attempts):
        if att.result.feasible or att.result.functional is None:
            continue
        try:
            X = _gns_point(e, att, att.result.functional, g, field)
        except (np.linalg.LinAlgError, ValueError):
            X = None
        if X is not None and mp_value_min_eig(e, X) <= thr:
            return X
    best, best_val = None, np.inf
    ss = np.random.SeedSequence(seed)
    for n in sample_sizes:
        for child in ss.spawn(samples):
            X = random_selfadjoint_point(g, n, field, child)
            v = mp_value_min_eig(e, X)
            if v < best_val:
                best, best_val = X, v
        if best_val <= thr:
            return best
    return None


# ---------------------------------------------------------------------------
# strict positivity

class Positivity(str, Enum):
    STRICTLY_POSITIVE = "StrictlyPositive"
    NOT_STRICTLY_POSITIVE = "NotStrictlyPositive"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class PositivityReport:
    verdict: Positivity
    value_at_zero: np.ndarray | None
    inverse_verdict: Verdict | None
    message: str = ""


def _regularity(e: Expr, g: int, tol: float) -> Verdict:
    R = minimize(build(e, None, g))
    return classify(original_pencil(R), tol).verdict


def strictly_positive(e: Expr, tol: float = DEFAULT_TOL, g: int | None = None,
                      check_regular: bool = True) -> PositivityReport:
    """r(X) > 0 at every self-adjoint X  iff  r(0) > 0 and r^{-1} is regular.

    Raises NotRegular when e itself is not certified regular.
    """
    g = max(g or 0, nvars(e))
    if check_regular:
        v = _regularity(e, g, tol)
        if v is Verdict.INCONCLUSIVE:
            return PositivityReport(Positivity.INCONCLUSIVE, None, None,
                                    "regularity of the expression is inconclusive")
        if v is Verdict.NOT_ELLIPTIC:
            raise NotRegular("expression is not regular")
    field = expr_field(e)
    try:
        r0 = eval_strict(e, MatrixPoint.zeros(g, 1, field))
    except OutsideDomain as exc:
        raise NotRegular(f"expression is undefined at 0: {exc}") from exc
    r0 = np.atleast_2d(r0)
    val = float(np.real(r0[0, 0]))
    if abs(np.imag(r0[0, 0])) > 1e-9 * (1.0 + abs(val)):
        return PositivityReport(Positivity.NOT_STRICTLY_POSITIVE, r0, None,
                                "value at 0 is not real")
    if val <= tol:
        return PositivityReport(Positivity.NOT_STRICTLY_POSITIVE, r0, None,
                                f"value at 0 is {val:.6g}")
    try:
        inv_verdict = _regularity(Inverse(e), g, tol)
    except NoCenter:
        return PositivityReport(Positivity.INCONCLUSIVE, r0, None, "no center for the inverse")
    if inv_verdict is Verdict.INCONCLUSIVE:
        return PositivityReport(Positivity.INCONCLUSIVE, r0, inv_verdict,
                                "regularity of the inverse is inconclusive")
    if inv_verdict is Verdict.NOT_ELLIPTIC:
        return PositivityReport(Positivity.NOT_STRICTLY_POSITIVE, r0, inv_verdict,
                                "the inverse is not regular")
    return PositivityReport(Positivity.STRICTLY_POSITIVE, r0, inv_verdict,
                            f"value {val:.6g} at 0 and a regular inverse")
