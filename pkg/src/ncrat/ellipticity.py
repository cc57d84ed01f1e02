"""Stably elliptic, elliptic and non-elliptic pencils.

A pencil L = A_0 + sum A_j x_j (d >= e) is stably elliptic when some D has
Re(D A_0) > 0 and Re(D A_j) = 0 for j >= 1.  It is elliptic when either that
holds, or some D gives 0 != Re(D A_0) >= 0 with Re(D A_j) = 0 and the
restriction L V to the kernel of Re(D A_0) is again elliptic.  Elliptic is
the same as L(X) having full rank at every self-adjoint tuple X.

:func:`classify` runs that recursion with one max-min-eigenvalue SDP per
level.  When the recursion stops with no admissible D, the SDP dual gives a
positive definite Gamma_1 orthogonal to every Re(D A_0); solving
A_0 Gamma_1 + sum A_j Gamma_j = 0 then yields an explicit self-adjoint tuple
at which the pencil drops rank.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import jsonio
from .linalg import (Field, adjoint, gap_kernel_basis, kernel_basis, min_singular_value, psd_sqrt, real_embed,
                     real_part, real_unembed)
from .ncexpr import MatrixPoint
from .pencil import LinearPencil
from .sdp import (LmiProblem, Status, eliminate_equalities, hermitian_basis, hermitian_coords,
                  max_rank_feasible, solve_max_min_eig)

DEFAULT_TOL = 1e-7


class Verdict(str, enum.Enum):
    STABLY_ELLIPTIC = "StablyElliptic"
    ELLIPTIC = "Elliptic"
    NOT_ELLIPTIC = "NotElliptic"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class ChainStep:
    D: np.ndarray
    eigs: np.ndarray
    V: np.ndarray
    t_star: float = 0.0


@dataclass
class EllipticityCertificate:
    verdict: Verdict
    chain: list = field(default_factory=list)
    transposed: bool = False
    epsilon: float | None = None
    witness: MatrixPoint | None = None
    message: str = ""

    def to_json(self) -> dict:
        def fld(a):
            return Field.COMPLEX if np.iscomplexobj(a) else Field.REAL

        return {
            "verdict": self.verdict.value,
            "transposed": self.transposed,
            "chain": [
                {
                    "D": jsonio.encode_matrix(s.D, fld(s.D)),
                    "field": fld(s.D).value,
                    "eigs": [float(v) for v in s.eigs],
                    "V": jsonio.encode_matrix(s.V, fld(s.V)) if s.V.size else [],
                    "V_shape": list(s.V.shape),
                    "t_star": float(s.t_star),
                }
                for s in self.chain
            ],
            "epsilon": self.epsilon,
            "witness": jsonio.encode_point(self.witness) if self.witness is not None else None,
            "message": self.message,
        }

    @classmethod
    def from_json(cls, data: dict) -> "EllipticityCertificate":
        chain = []
        for s in data.get("chain", []):
            f = Field.parse(s.get("field", "R"))
            D = jsonio.decode_matrix(s["D"], f)
            shape = tuple(s.get("V_shape", (D.shape[0], 0)))
            V = (jsonio.decode_matrix(s["V"], f, shape) if shape[1]
                 else np.zeros(shape, dtype=f.dtype))
            chain.append(ChainStep(D, np.asarray(s.get("eigs", []), float), V,
                                   float(s.get("t_star", 0.0))))
        witness = data.get("witness")
        return cls(Verdict(data["verdict"]), chain, bool(data.get("transposed", False)),
                   data.get("epsilon"), jsonio.decode_point(witness) if witness else None,
                   data.get("message", ""))


# ---------------------------------------------------------------------------
# the linear algebra of one recursion level

class _Level:
    """Real parametrization of D in K^{e x d} and the maps D -> Re(D A_j)."""

    def __init__(self, P: LinearPencil):
        self.P = P
        self.complex = P.field is Field.COMPLEX
        self.d, self.e = P.d, P.e
        self.nparam = self.d * self.e * (2 if self.complex else 1)
        self.hbasis = hermitian_basis(self.e, self.complex)
        # images of the parameter unit vectors under D -> Re(D A_j), in coordinates
        self.maps = []
        for a in P.coeffs:
            cols = [hermitian_coords(real_part(self.unit(p) @ a), self.hbasis)
                    for p in range(self.nparam)]
            self.maps.append(np.array(cols).T)
        # directions of D invisible to every map up to rounding carry no
        # information; dropping them keeps the SDP from exploiting noise
        _, sv, vt = np.linalg.svd(np.vstack(self.maps), full_matrices=False)
        keep = sv > 1e-8 * max(sv[0], 1.0) if sv.size else np.zeros(0, bool)
        self.Q = vt[keep].conj().T
        self.maps = [m @ self.Q for m in self.maps]
        self.nvar = self.Q.shape[1]

    def unit(self, p):
        v = np.zeros(self.nparam)
        v[p] = 1.0
        return self._raw(v)

    def D(self, z):
        return self._raw(self.Q @ z)

    def _raw(self, v):
        n = self.d * self.e
        D = np.asarray(v[:n]).reshape(self.e, self.d)
        if self.complex:
            D = D + 1j * np.asarray(v[n:]).reshape(self.e, self.d)
        return D

    def herm(self, coords):
        return sum(c * q for c, q in zip(coords, self.hbasis))

    def lmi_matrix(self, coords):
        return real_embed(self.herm(coords))


def _trace_row(level: _Level):
    # tr H in hermitian coordinates
    tr = np.array([np.real(np.trace(q)) for q in level.hbasis])
    return tr @ level.maps[0]


def _gamma_from_dual(level: _Level, Z: np.ndarray, t_star: float):
    """Positive definite Gamma orthogonal to {Re(D A_0) : Re(D A_j) = 0}."""
    if level.complex:
        Zc = 2.0 * real_unembed(Z)
    else:
        Zc = Z
    gamma = real_part(Zc) - t_star * np.eye(level.e)
    return gamma


def _witness_from_gamma(P: LinearPencil, gamma: np.ndarray, tol: float):
    """Self-adjoint tuple Y of size e with P(Y) rank deficient, or None."""
    e = P.e
    w = np.linalg.eigvalsh(gamma)
    if w[0] <= 1e-12 * max(1.0, w[-1]):
        return None
    cplx = P.field is Field.COMPLEX or np.iscomplexobj(gamma)
    hb = hermitian_basis(e, cplx)
    g = P.g
    target = P.coeffs[0] @ gamma
    if g == 0:
        Gammas = []
        resid = np.linalg.norm(target)
    else:
        # A_0 Gamma_1 + sum_j A_j Gamma_j = 0 in the real coordinates of Gamma_j
        cols = []
        for j in range(1, g + 1):
            for q in hb:
                m = P.coeffs[j] @ q
                cols.append(np.concatenate([m.real.ravel(), m.imag.ravel()]))
        A = np.array(cols).T
        rhs = -np.concatenate([target.real.ravel(), target.imag.ravel()])
        sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        resid = np.linalg.norm(A @ sol - rhs)
        n = len(hb)
        Gammas = [sum(c * q for c, q in zip(sol[j * n:(j + 1) * n], hb)) for j in range(g)]
    scale = max(1.0, np.linalg.norm(target))
    if resid > 1e-6 * scale:
        return None
    root_inv = psd_sqrt(gamma, inverse=True)
    mats = []
    for G in Gammas:
        Y = (root_inv @ G @ root_inv).T
        mats.append(0.5 * (Y + adjoint(Y)))
    field_ = Field.COMPLEX if cplx else Field.REAL
    return MatrixPoint(tuple(mats), field_, True)


def epsilon_bound(D: np.ndarray, L: LinearPencil, tol: float = DEFAULT_TOL) -> float:
    """eps with L(X)* L(X) >= eps I at every self-adjoint X.

    With Re(D A_0) = R* R this is ||R^{-1}||^{-4} ||D||^{-2}, i.e.
    lambda_min(Re(D A_0))^2 / ||D||^2.
    """
    parts = L.real_compress(D)
    scale = max(1.0, np.linalg.norm(D, 2) * max(np.linalg.norm(a, 2) for a in L.coeffs))
    for a in parts[1:]:
        if np.linalg.norm(a, 2) > tol * scale:
            raise ValueError("Re(D A_j) does not vanish")
    lam = np.linalg.eigvalsh(parts[0])[0]
    if lam <= 0:
        raise ValueError("Re(D A_0) is not positive definite")
    R = np.linalg.cholesky(parts[0]).conj().T
    rinv = np.linalg.norm(np.linalg.inv(R), 2)
    return float(rinv ** -4 * np.linalg.norm(D, 2) ** -2)


# ---------------------------------------------------------------------------
# classification

def _classify_tall(L: LinearPencil, tol: float, max_iter: int) -> EllipticityCertificate:
    chain: list[ChainStep] = []
    P = L
    while True:
        level = _Level(P)
        eqs = np.vstack(level.maps[1:]) if P.g else np.zeros((0, level.nvar))
        sub = eliminate_equalities(level.nvar, eqs, None, (_trace_row(level), 1.0))
        if not sub.feasible:
            # every admissible D has tr Re(D A_0) = 0, hence Re(D A_0) = 0
            gamma = np.eye(P.e)
            witness = _witness_from_gamma(P, gamma, tol)
            return _not_elliptic(L, chain, witness, tol, "no admissible D with nonzero Re(D A_0)")
        base_c = level.maps[0] @ sub.point
        F0 = level.lmi_matrix(base_c)
        dirs = [level.lmi_matrix(level.maps[0] @ sub.basis[:, i]) for i in range(sub.dim)]
        prob = LmiProblem(F0, dirs, "ellipticity level")
        sol = solve_max_min_eig(prob, tol=min(tol, 1e-8) * 0.1, max_iter=max_iter)
        if sol.status is Status.NUMERICAL_FAILURE:
            return EllipticityCertificate(Verdict.INCONCLUSIVE, chain,
                                          message=f"SDP failure: {sol.message}")
        t = sol.t_star
        if t > tol:
            v = sub.point + sub.basis @ sol.y
            D = level.D(v)
            H = real_part(D @ P.coeffs[0])
            chain.append(ChainStep(D, np.linalg.eigvalsh(H), np.zeros((P.e, 0), P.coeffs.dtype), t))
            eps = epsilon_bound(D, P, tol=1e-6)
            verdict = Verdict.STABLY_ELLIPTIC if len(chain) == 1 else Verdict.ELLIPTIC
            return EllipticityCertificate(verdict, chain, epsilon=eps if len(chain) == 1 else None)
        if t < -tol:
            gamma = _gamma_from_dual(level, sol.dual_matrix, t)
            # P = L V, so a kernel vector of P(Y) is one of L(Y) as well
            witness = _witness_from_gamma(P, gamma, tol)
            return _not_elliptic(L, chain, witness, tol, f"max-min eigenvalue {t:.3e} < 0")
        # boundary: recurse on the kernel of a maximal-rank Re(D A_0)
        mr = max_rank_feasible(prob, tol=min(tol, 1e-8) * 0.1, max_iter=max_iter)
        if mr.status is Status.NUMERICAL_FAILURE:
            return EllipticityCertificate(Verdict.INCONCLUSIVE, chain,
                                          message=f"facial reduction failure: {mr.message}")
        v = sub.point + sub.basis @ mr.y
        D = level.D(v)
        H = real_part(D @ P.coeffs[0])
        eigs = np.linalg.eigvalsh(H)
        if eigs[0] > tol:
            chain.append(ChainStep(D, eigs, np.zeros((P.e, 0), P.coeffs.dtype), float(eigs[0])))
            verdict = Verdict.STABLY_ELLIPTIC if len(chain) == 1 else Verdict.ELLIPTIC
            eps = epsilon_bound(D, P, tol=1e-6) if len(chain) == 1 else None
            return EllipticityCertificate(verdict, chain, epsilon=eps)
        V = gap_kernel_basis(H, 1e-6)
        if V.shape[1] == 0 or V.shape[1] >= P.e:
            return EllipticityCertificate(Verdict.INCONCLUSIVE, chain,
                                          message="boundary case without a usable kernel")
        chain.append(ChainStep(D, eigs, V, float(mr.t_star)))
        P = P.restrict(V)


def _not_elliptic(L, chain, witness, tol, message):
    if witness is not None and min_singular_value(L.eval(witness)) > np.sqrt(tol) * max(
            1.0, np.linalg.norm(L.eval(witness), 2)):
        witness = None
        message += "; witness extraction failed"
    return EllipticityCertificate(Verdict.NOT_ELLIPTIC, chain, witness=witness, message=message)


def classify(L: LinearPencil, tol: float = DEFAULT_TOL, max_iter: int = 200) -> EllipticityCertificate:
    """Stably elliptic / elliptic / not elliptic, with a checkable certificate."""
    if L.d < L.e:
        cert = _classify_tall(L.adjoint(), tol, max_iter)
        cert.transposed = True
        return cert
    return _classify_tall(L, tol, max_iter)


def singular_witness(L: LinearPencil, tol: float = DEFAULT_TOL) -> MatrixPoint | None:
    """A self-adjoint tuple where L loses rank, extracted from the SDP dual."""
    cert = classify(L, tol)
    return cert.witness


# ---------------------------------------------------------------------------
# verification

def verify_certificate(L: LinearPencil, cert: EllipticityCertificate,
                       tol: float = DEFAULT_TOL) -> tuple[bool, str]:
    """Re-check a certificate with plain linear algebra, independent of the SDP."""
    if cert.verdict is Verdict.INCONCLUSIVE:
        return False, "inconclusive certificates certify nothing"
    P = L.adjoint() if cert.transposed else L
    if cert.verdict is Verdict.NOT_ELLIPTIC:
        if cert.witness is None:
            return False, "no witness attached"
        M = L.eval(cert.witness)
        sigma = min_singular_value(M)
        if sigma > np.sqrt(tol) * max(1.0, np.linalg.norm(M, 2)):
            return False, f"witness is not singular (sigma_min = {sigma:.3e})"
        return True, "witness verified"
    if not cert.chain:
        return False, "empty chain"
    for k, step in enumerate(cert.chain):
        last = k == len(cert.chain) - 1
        if step.D.shape != (P.e, P.d):
            return False, f"step {k}: D has shape {step.D.shape}, expected {(P.e, P.d)}"
        nd = np.linalg.norm(step.D, 2)
        if nd == 0:
            return False, f"step {k}: D is zero"
        # the conditions are homogeneous in D, so test the unit-norm D
        parts = P.real_compress(step.D / nd)
        scale = max(1.0, max(np.linalg.norm(a, 2) for a in P.coeffs))
        for j, a in enumerate(parts[1:], start=1):
            if np.linalg.norm(a, 2) > tol * scale:
                return False, f"step {k}: Re(D A_{j}) does not vanish"
        w = np.linalg.eigvalsh(parts[0])
        if w[0] < -tol * scale:
            return False, f"step {k}: Re(D A_0) is not positive semidefinite"
        if last:
            if w[0] <= tol * scale:
                return False, f"step {k}: final Re(D A_0) is not positive definite"
            return True, f"{len(cert.chain)}-step chain verified"
        if w[-1] <= tol * scale:
            return False, f"step {k}: Re(D A_0) vanishes"
        V = step.V
        if V.shape[0] != P.e or V.shape[1] == 0 or V.shape[1] >= P.e:
            return False, f"step {k}: kernel basis has the wrong shape"
        if np.linalg.norm(adjoint(V) @ V - np.eye(V.shape[1])) > 1e-8:
            return False, f"step {k}: kernel basis is not orthonormal"
        # the kernel is cut at a spectral gap of at least 1e3, as in the recursion
        if np.linalg.norm(parts[0] @ V, 2) > 1e-3 * w[-1]:
            return False, f"step {k}: V is not in the kernel of Re(D A_0)"
        if gap_kernel_basis(parts[0], 1e-6).shape[1] != V.shape[1]:
            return False, f"step {k}: V does not span the kernel"
        P = P.restrict(V)
    return False, "unreachable"
