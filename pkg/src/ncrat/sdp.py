"""Dense max-min-eigenvalue semidefinite programs.

Every certificate in the package reduces to one problem shape: over an
affine family S(y) = F_0 + sum_i y_i F_i of real symmetric matrices,
maximize t subject to S(y) - t I >= 0.  The solver is a primal log-det
barrier method; a large ball constraint ||y|| <= R keeps the barrier bounded
when the optimum is only approached as y runs off to infinity.

Hermitian problems are passed through :func:`embed_hermitian` first.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .linalg import gap_kernel_basis, null_space, real_embed


log = logging.getLogger(__name__)


class Status(str, enum.Enum):
    OPTIMAL_INTERIOR = "OptimalInterior"    # |t*| > tol, sign decides
    OPTIMAL_BOUNDARY = "OptimalBoundary"    # |t*| <= tol
    INFEASIBLE = "Infeasible"               # empty equality subspace
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class LmiProblem:
    base: np.ndarray
    directions: list = field(default_factory=list)
    description: str = ""

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=float)
        self.directions = [np.asarray(f, dtype=float) for f in self.directions]
        m = self.base.shape[0]
        for f in [self.base] + self.directions:
            if f.shape != (m, m):
                raise ValueError("all LMI matrices must share one square size")
            if np.abs(f - f.T).max(initial=0.0) > 1e-12 * (1 + np.abs(f).max(initial=0.0)):
                raise ValueError("LMI matrices must be symmetric")

    @property
    def size(self) -> int:
        return self.base.shape[0]

    def matrix(self, y) -> np.ndarray:
        out = self.base.copy()
        for yi, f in zip(y, self.directions):
            out += yi * f
        return out


@dataclass
class LmiSolution:
    t_star: float
    y: np.ndarray
    primal_matrix: np.ndarray
    dual_matrix: np.ndarray | None
    status: Status
    iterations: int = 0
    rank: int | None = None
    message: str = ""


@dataclass
class AffineSubspace:
    """{point + basis @ z}; ``feasible`` is False for an empty system."""

    point: np.ndarray
    basis: np.ndarray
    feasible: bool = True

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def eliminate_equalities(nvars: int, equalities=None, rhs=None, normalization=None,
                         rtol: float = 1e-9) -> AffineSubspace:
    """Solve the real linear system A v = rhs (plus an optional normalization
    row a . v = beta) as point + span(basis) with an orthonormal basis."""
    rows = []
    vals = []
    if equalities is not None and np.size(equalities):
        A = np.atleast_2d(np.asarray(equalities, dtype=float))
        rows.append(A)
        vals.append(np.zeros(A.shape[0]) if rhs is None else np.asarray(rhs, dtype=float))
    if normalization is not None:
        a, beta = normalization
        rows.append(np.asarray(a, dtype=float).reshape(1, nvars))
        vals.append(np.array([float(beta)]))
    if not rows:
        return AffineSubspace(np.zeros(nvars), np.eye(nvars))
    C = np.vstack(rows)
    r = np.concatenate(vals)
    if C.shape[1] != nvars:
        raise ValueError("constraint width does not match the variable count")
    point, *_ = np.linalg.lstsq(C, r, rcond=None)
    resid = np.linalg.norm(C @ point - r)
    scale = np.linalg.norm(C, 2) if C.size else 1.0
    if resid > 1e-8 * (1.0 + np.linalg.norm(r)) * max(1.0, scale):
        return AffineSubspace(point, np.zeros((nvars, 0)), feasible=False)
    return AffineSubspace(point, null_space(C, rtol))


def embed_hermitian(mats) -> list[np.ndarray]:
    """Real symmetric images of hermitian matrices (identity on real input)."""
    return [real_embed(np.asarray(m)) for m in mats]


def hermitian_basis(n: int, complex_field: bool) -> list[np.ndarray]:
    """Trace-orthonormal basis of the real space of n x n hermitian matrices."""
    out = []
    dtype = complex if complex_field else float
    for a in range(n):
        m = np.zeros((n, n), dtype=dtype)
        m[a, a] = 1.0
        out.append(m)
    s = 1.0 / np.sqrt(2.0)
    for a in range(n):
        for b in range(a + 1, n):
            m = np.zeros((n, n), dtype=dtype)
            m[a, b] = m[b, a] = s
            out.append(m)
            if complex_field:
                m = np.zeros((n, n), dtype=complex)
                m[a, b] = -1j * s
                m[b, a] = 1j * s
                out.append(m)
    return out


def hermitian_coords(h: np.ndarray, basis) -> np.ndarray:
    return np.array([np.real(np.vdot(q, h)) for q in basis])


def _orthonormal_directions(dirs, m, scale=1.0):
    """Trace-orthonormal basis of span(dirs) and the map back to dirs' coordinates.

    Directions below 1e-10 of ``scale`` are rounding noise (e.g. parameters
    that do not move the matrix at all) and are dropped.
    """
    if not dirs:
        return [], np.zeros((0, 0))
    V = np.array([f.ravel() for f in dirs])          # k x m^2
    u, s, vh = np.linalg.svd(V, full_matrices=False)
    keep = s > 1e-10 * max(1.0, scale, s[0] if s.size else 0.0)
    if not np.any(keep):
        return [], np.zeros((len(dirs), 0))
    basis = vh[keep]
    # y_orig = T @ y_new with V.T @ y_orig = basis.T @ y_new
    T = u[:, keep] / s[keep]
    return [b.reshape(m, m) for b in basis], T


def _lambda_min(a):
    return float(np.linalg.eigvalsh(a)[0]) if a.size else np.inf


def _polish_dual(Z, dirs, G):
    """Correct Z so that tr Z = 1 and tr(Z F_i) = 0 exactly.

    The correction G^{-1} A G^{-1} with A in span{I, F_i} is the smallest one
    in the metric of the barrier at G, so it lives where Z already has its
    weight and barely moves tr(Z G); a plain trace-metric projection then
    removes what rounding leaves behind.
    """
    m = Z.shape[0]
    E = [np.eye(m)] + list(dirs)
    Ginv = np.linalg.inv(G)
    W = [Ginv @ e @ Ginv for e in E]
    M = np.array([[np.vdot(w, e) for e in E] for w in W])
    rhs = np.array([1.0 - np.trace(Z)] + [-np.vdot(f, Z) for f in dirs])
    nu = np.linalg.lstsq(M, rhs, rcond=1e-14)[0]
    Z = Z + sum(n * w for n, w in zip(nu, W))
    J = np.eye(m)
    for f in dirs:
        Z = Z - np.vdot(f, Z) * f
        J = J - np.vdot(f, J) * f
    tj = np.trace(J)
    if tj > 1e-12:
        Z = Z + (1.0 - np.trace(Z)) / tj * J
    return 0.5 * (Z + Z.T)


def solve_max_min_eig(p: LmiProblem, tol: float = 1e-8, max_iter: int = 200,
                      radius: float = 1e5, mu_factor: float = 0.2) -> LmiSolution:
    """maximize t s.t. F_0 + sum y_i F_i - t I >= 0, ||y|| <= radius.

    Path following on the barrier  -t/mu - log det(S(y) - tI) - log(R^2 - |y|^2)
    with a tangent predictor after each centering.  The dual certificate is
    Z = mu (S - tI)^{-1} at the last centered iterate, trace-normalized and
    projected onto {tr(Z F_i) = 0}.
    """
    m = p.size
    if m == 0:
        return LmiSolution(np.inf, np.zeros(len(p.directions)), p.base, np.zeros((0, 0)),
                           Status.OPTIMAL_INTERIOR)
    F0 = 0.5 * (p.base + p.base.T)
    dirs, T = _orthonormal_directions([0.5 * (f + f.T) for f in p.directions], m,
                                      np.linalg.norm(F0))
    k = len(dirs)
    eye = np.eye(m)

    if k == 0:
        w, q = np.linalg.eigh(F0)
        Z = np.outer(q[:, 0], q[:, 0])
        status = Status.OPTIMAL_INTERIOR if abs(w[0]) > tol else Status.OPTIMAL_BOUNDARY
        return LmiSolution(float(w[0]), np.zeros(len(p.directions)), p.base.copy(), Z, status)

    stack = np.asarray(dirs)
    R2 = radius ** 2
    theta = m + 1.0

    def state_at(y, t):
        G = F0 + np.tensordot(y, stack, 1) - t * eye
        try:
            C = np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            return None
        s = R2 - y @ y
        if s <= 0:
            return None
        return G, C, s

    def phi(t, mu, state):
        _, C, s = state
        return -t / mu - 2.0 * np.log(np.diag(C)).sum() - np.log(s)

    def newton_system(y, t, mu, state):
        _, C, s = state
        Cinv = np.linalg.solve(C, eye)
        # B_i = C^{-1} F_i C^{-T}; the t direction is -I
        Bs = np.einsum("ab,kbc,dc->kad", Cinv, stack, Cinv, optimize=True)
        Bflat = np.vstack([-(Cinv @ Cinv.T).ravel()[None, :], Bs.reshape(k, -1)])
        grad = -Bflat @ eye.ravel()
        grad[0] -= 1.0 / mu
        grad[1:] += 2.0 * y / s
        H = Bflat @ Bflat.T
        H[1:, 1:] += (2.0 / s) * np.eye(k) + (4.0 / s ** 2) * np.outer(y, y)
        return grad, H

    def solve(H, rhs):
        try:
            return np.linalg.solve(H, rhs)
        except np.linalg.LinAlgError:
            return np.linalg.lstsq(H, rhs, rcond=None)[0]

    def finish(y_new, t, mu, it, status=None, message=""):
        y = T @ y_new
        S = p.matrix(y)
        t_star = _lambda_min(S)
        Z = None
        try:
            G = F0 + np.tensordot(y_new, stack, 1) - t * eye
            Z = np.linalg.inv(G)
            Z = _polish_dual(Z / np.trace(Z), dirs, G)
        except np.linalg.LinAlgError:
            pass
        if status is None:
            status = Status.OPTIMAL_INTERIOR if abs(t_star) > tol else Status.OPTIMAL_BOUNDARY
        return LmiSolution(t_star, y, S, Z, status, it, message=message)

    y = np.zeros(k)
    scale = max(1.0, np.abs(F0).max())
    t = _lambda_min(F0) - scale
    # the start is exactly centered in t for this mu
    mu = 1.0 / np.trace(np.linalg.inv(F0 - t * eye))
    it = 0
    polish = 0
    while True:
        while True:
            state = state_at(y, t)
            if state is None:
                return finish(y, t, mu, it, Status.NUMERICAL_FAILURE, "left the barrier domain")
            grad, H = newton_system(y, t, mu, state)
            step = -solve(H, grad)
            dec = -grad @ step
            if theta * mu <= tol:
                # tight centering on the last stage keeps the dual certificate exact
                polish += 1
                if dec < 1e-20 or polish > 8:
                    break
            elif dec < 1e-8:
                break
            if it >= max_iter:
                return finish(y, t, mu, it, Status.NUMERICAL_FAILURE, "iteration cap")
            it += 1
            f0 = phi(t, mu, state)
            alpha = 1.0
            while alpha > 1e-14:
                yn, tn = y + alpha * step[1:], t + alpha * step[0]
                st = state_at(yn, tn)
                # inside the quadratic region a full step is safe, and the
                # Armijo test is below rounding once -t/mu is huge
                if st is not None and (dec < 0.05 or phi(tn, mu, st) <= f0 - 0.25 * alpha * dec):
                    break
                alpha *= 0.5
            else:
                if theta * mu <= 1e3 * tol and dec < 1e-6:
                    break
                return finish(y, t, mu, it, Status.NUMERICAL_FAILURE, "line search stalled")
            moved = alpha * np.linalg.norm(step)
            y, t = yn, tn
            if moved <= 1e-13 * (1.0 + abs(t) + np.linalg.norm(y)):
                # at rounding level (e.g. pressed against the ball): centered
                break
            log.debug("mu=%.2e dec=%.2e alpha=%.2e t=%.10f", mu, dec, alpha, t)
        if theta * mu <= tol:
            break
        new_mu = mu * mu_factor
        # tangent of the central path: H dz/dmu = -e_t / mu^2
        e_t = np.zeros(k + 1)
        e_t[0] = 1.0
        pred = (mu - new_mu) / mu ** 2 * solve(H, e_t)
        alpha = 1.0
        while alpha > 1e-3:
            yn, tn = y + alpha * pred[1:], t + alpha * pred[0]
            if state_at(yn, tn) is not None:
                y, t = yn, tn
                break
            alpha *= 0.5
        mu = new_mu
    return finish(y, t, mu, it)


def max_rank_feasible(p: LmiProblem, tol: float = 1e-8, kernel_rtol: float = 1e-6,
                      max_iter: int = 200) -> LmiSolution:
    """A point of {S(y) >= 0} whose rank is maximal, by facial reduction.

    The barrier iterate is first pushed to the optimal face; its numerical
    kernel U is then imposed as the linear constraint S(y) U = 0 and the
    problem recompressed to the complement of U until the compressed problem
    is strictly feasible.
    """
    sol = solve_max_min_eig(p, tol, max_iter)
    if sol.status is Status.NUMERICAL_FAILURE or sol.t_star > tol or sol.t_star < -tol:
        sol.rank = int(np.sum(np.linalg.eigvalsh(sol.primal_matrix) > tol)) if sol.primal_matrix.size else 0
        return sol
    m = p.size
    k = len(p.directions)
    # current affine parametrization y = y0 + N z
    y0 = np.zeros(k)
    N = np.eye(k)
    P = np.eye(m)
    cur = sol
    for _ in range(m):
        S = cur.primal_matrix
        U = gap_kernel_basis(P.T @ S @ P, kernel_rtol)
        if U.shape[1] == 0:
            break
        U = P @ U
        # S(y0 + N z) U = 0 is linear in z
        rows = [((p.matrix(y0) @ U)).ravel()]
        A = np.array([(sum(N[i, j] * p.directions[i] for i in range(k)) @ U).ravel()
                      for j in range(N.shape[1])]).T if N.shape[1] else np.zeros((rows[0].size, 0))
        sub = eliminate_equalities(N.shape[1], A, -rows[0])
        if not sub.feasible:
            break
        y0 = y0 + N @ sub.point
        N = N @ sub.basis
        P = null_space(U.T)
        if P.shape[1] == 0:
            break
        base = P.T @ p.matrix(y0) @ P
        dirs = [P.T @ sum(N[i, j] * p.directions[i] for i in range(k)) @ P
                for j in range(N.shape[1])]
        inner = solve_max_min_eig(LmiProblem(0.5 * (base + base.T),
                                             [0.5 * (d + d.T) for d in dirs]), tol, max_iter)
        if inner.status is Status.NUMERICAL_FAILURE:
            inner.rank = None
            return inner
        y = y0 + N @ inner.y
        cur = LmiSolution(_lambda_min(p.matrix(y)), y, p.matrix(y), sol.dual_matrix,
                          Status.OPTIMAL_BOUNDARY, sol.iterations + inner.iterations)
        if inner.t_star > tol:
            cur.rank = P.shape[1]
            cur.message = "facial reduction"
            return cur
        if inner.t_star < -tol:
            break
    cur.rank = m - gap_kernel_basis(cur.primal_matrix, kernel_rtol).shape[1]
    return cur
