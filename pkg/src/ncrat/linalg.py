"""Dense linear algebra over the reals and complexes.

Matrices are plain numpy arrays; the field is read off the dtype
(``float64`` for R, ``complex128`` for C).  Everything downstream that does
PSD reasoning goes through :func:`real_embed` so a single real symmetric SDP
core serves both fields.
"""
from __future__ import annotations

import enum
from typing import NamedTuple

import numpy as np

DEFAULT_RTOL = 1e-8
PINV_RTOL = 1e-10


class Field(str, enum.Enum):
    REAL = "R"
    COMPLEX = "C"

    @classmethod
    def parse(cls, tag) -> "Field":
        if isinstance(tag, Field):
            return tag
        tag = str(tag).strip().upper()
        if tag in ("R", "REAL"):
            return cls.REAL
        if tag in ("C", "COMPLEX"):
            return cls.COMPLEX
        raise ValueError(f"unknown field tag {tag!r}")

    @property
    def dtype(self):
        return np.float64 if self is Field.REAL else np.complex128


class FieldMismatch(ValueError):
    pass


class HermitianEig(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def field_of(a: np.ndarray) -> Field:
    return Field.COMPLEX if np.iscomplexobj(a) else Field.REAL


def as_matrix(a, field: Field | str | None = None) -> np.ndarray:
    """Coerce to a 2-D array of the field's dtype."""
    arr = np.asarray(a)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if field is None:
        field = field_of(arr)
    field = Field.parse(field)
    if field is Field.REAL:
        if np.iscomplexobj(arr):
            if np.abs(arr.imag).max(initial=0.0) > 0:
                raise FieldMismatch("complex entries in a real matrix")
            arr = arr.real
        return np.array(arr, dtype=np.float64)
    return np.array(arr, dtype=np.complex128)


def adjoint(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def real_part(a: np.ndarray) -> np.ndarray:
    """Hermitian part (a + a*) / 2."""
    return 0.5 * (a + adjoint(a))


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if field_of(a) is not field_of(b):
        raise FieldMismatch("kron of a real and a complex matrix")
    return np.kron(a, b)


def pinv(a: np.ndarray, rtol: float = PINV_RTOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse with singular values <= rtol*s_max cut."""
    a = np.asarray(a)
    if a.size == 0:
        return np.zeros(a.shape[::-1], dtype=a.dtype)
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return np.zeros(a.shape[::-1], dtype=a.dtype)
    keep = s > rtol * smax
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (adjoint(vh) * inv) @ adjoint(u)


def is_selfadjoint(a: np.ndarray, tol: float = 1e-10) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = 1.0 + np.abs(a).max(initial=0.0)
    return bool(np.abs(a - adjoint(a)).max(initial=0.0) <= tol * scale)


def hermitian_eig(a: np.ndarray, tol: float = 1e-10) -> HermitianEig:
    """Spectral decomposition of a self-adjoint matrix, eigenvalues ascending."""
    if not is_selfadjoint(a, tol):
        raise ValueError("hermitian_eig needs a self-adjoint matrix")
    w, q = np.linalg.eigh(real_part(np.asarray(a)))
    return HermitianEig(w, q)


def kernel_basis(a: np.ndarray, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """Orthonormal basis (as columns) of the near-kernel of a PSD matrix.

    Eigenvectors with eigenvalue <= rtol * max(1, lambda_max) are kept.
    """
    a = np.asarray(a)
    w, q = np.linalg.eigh(real_part(a))
    if w.size == 0:
        return q[:, :0]
    cut = rtol * max(1.0, float(w[-1]))
    return q[:, w <= cut]


def gap_kernel_basis(a: np.ndarray, rtol: float = DEFAULT_RTOL, gap: float = 1e3) -> np.ndarray:
    """Near-kernel of a PSD matrix, cut at the first large spectral gap.

    Eigenvalues are scanned from the top; the first drop by a factor >= gap
    separates range from kernel.  Without such a drop this is
    :func:`kernel_basis` with the given rtol.  Useful for barrier iterates,
    whose vanishing eigenvalues may decay only like sqrt(mu).
    """
    a = np.asarray(a)
    w, q = np.linalg.eigh(real_part(a))
    if w.size == 0:
        return q[:, :0]
    top = max(float(w[-1]), 0.0)
    cut = rtol * max(1.0, top)
    for i in range(w.size - 1, 0, -1):
        hi, lo = w[i], max(w[i - 1], 0.0)
        if hi <= cut:
            break
        if hi >= gap * max(lo, 1e-300):
            cut = max(cut, lo)
            break
    return q[:, w <= cut]


def range_basis(a: np.ndarray, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """Orthonormal basis of the column space, relative singular value cutoff."""
    a = np.asarray(a)
    if a.size == 0:
        return np.zeros((a.shape[0], 0), dtype=a.dtype)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return u[:, :0]
    return u[:, s > rtol * s[0]]


def null_space(a: np.ndarray, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """Orthonormal basis of {v : a v = 0} up to a relative cutoff."""
    a = np.atleast_2d(np.asarray(a))
    n = a.shape[1]
    if a.shape[0] == 0:
        return np.eye(n, dtype=a.dtype)
    # tall input: the reduced factorization already has all n right vectors
    _, s, vh = np.linalg.svd(a, full_matrices=a.shape[0] < n)
    if s.size == 0 or s[0] == 0.0:
        return np.eye(n, dtype=a.dtype)
    rank = int(np.sum(s > rtol * s[0]))
    return adjoint(vh[rank:])


def min_singular_value(a: np.ndarray) -> float:
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.svd(a, compute_uv=False)[-1])


def condition_number(a: np.ndarray) -> float:
    s = np.linalg.svd(np.asarray(a), compute_uv=False)
    if s.size == 0:
        return 1.0
    if s[-1] == 0.0:
        return np.inf
    return float(s[0] / s[-1])


def psd_sqrt(a: np.ndarray, inverse: bool = False, floor: float = 0.0) -> np.ndarray:
    """Principal square root (or inverse root) of a PSD matrix."""
    w, q = np.linalg.eigh(real_part(a))
    w = np.maximum(w, floor)
    if inverse:
        if np.any(w <= 0):
            raise np.linalg.LinAlgError("inverse square root of a singular matrix")
        w = 1.0 / np.sqrt(w)
    else:
        w = np.sqrt(w)
    return (q * w) @ adjoint(q)


def real_embed(a: np.ndarray) -> np.ndarray:
    """[[Re, -Im], [Im, Re]]; identity map on real input."""
    a = np.asarray(a)
    if not np.iscomplexobj(a):
        return np.array(a, dtype=np.float64)
    re, im = a.real, a.imag
    return np.block([[re, -im], [im, re]])


def real_unembed(b: np.ndarray) -> np.ndarray:
    """Nearest complex matrix to a 2n x 2n real matrix under real_embed."""
    n = b.shape[0] // 2
    m = b.shape[1] // 2
    b11, b12 = b[:n, :m], b[:n, m:]
    b21, b22 = b[n:, :m], b[n:, m:]
    return 0.5 * (b11 + b22) + 0.5j * (b21 - b12)


def direct_sum(*blocks: np.ndarray) -> np.ndarray:
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    dtype = np.result_type(*blocks) if blocks else np.float64
    out = np.zeros((rows, cols), dtype=dtype)
    i = j = 0
    for b in blocks:
        out[i:i + b.shape[0], j:j + b.shape[1]] = b
        i += b.shape[0]
        j += b.shape[1]
    return out


