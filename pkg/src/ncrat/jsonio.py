"""JSON encodings shared by the pencil, point, realization and certificate formats.

Matrices are row-major lists of rows.  Over R each entry is a number; over C
each entry is a ``[re, im]`` pair.
"""
from __future__ import annotations

import json

import numpy as np

from .linalg import Field


def _num(x: float):
    x = float(x)
    if x.is_integer() and abs(x) < 2**53:
        return int(x)
    return x


def encode_matrix(a, field: Field | str) -> list:
    field = Field.parse(field)
    a = np.atleast_2d(np.asarray(a))
    if field is Field.REAL:
        if np.iscomplexobj(a):
            a = a.real
        return [[_num(v) for v in row] for row in a]
    return [[[_num(v.real), _num(v.imag)] for v in row] for row in a.astype(complex)]


def decode_matrix(data, field: Field | str, shape=None) -> np.ndarray:
    field = Field.parse(field)
    arr = np.asarray(data, dtype=float)
    if field is Field.COMPLEX:
        if arr.ndim == 3 and arr.shape[-1] == 2:
            arr = arr[..., 0] + 1j * arr[..., 1]
        else:
            arr = arr.astype(complex)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if shape is None else arr.reshape(shape)
    if arr.size == 0 and shape is not None:
        arr = arr.reshape(shape)
    return np.array(arr, dtype=field.dtype)


def encode_vector(v, field: Field | str) -> list:
    field = Field.parse(field)
    v = np.ravel(np.asarray(v))
    if field is Field.REAL:
        return [_num(np.real(x)) for x in v]
    return [[_num(x.real), _num(x.imag)] for x in v.astype(complex)]


def decode_vector(data, field: Field | str) -> np.ndarray:
    field = Field.parse(field)
    arr = np.asarray(data, dtype=float)
    if field is Field.COMPLEX and arr.ndim == 2 and arr.shape[-1] == 2:
        arr = arr[:, 0] + 1j * arr[:, 1]
    return np.array(np.ravel(arr), dtype=field.dtype)


def encode_point(X) -> dict:
    return {
        "field": X.field.value,
        "g": X.g,
        "n": X.n,
        "mats": [encode_matrix(m, X.field) for m in X.mats],
    }


def decode_point(data: dict):
    from .ncexpr import MatrixPoint
    from .linalg import is_selfadjoint

    field = Field.parse(data.get("field", "R"))
    n = data.get("n")
    mats = tuple(decode_matrix(m, field, None if n is None else (n, n)) for m in data["mats"])
    sa = all(is_selfadjoint(m, 1e-12) for m in mats)
    return MatrixPoint(mats, field, sa)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)
