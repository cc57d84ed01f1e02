"""Noncommutative rational expressions.

An expression is an immutable tree of :class:`Const`, :class:`Var`,
:class:`Sum`, :class:`Product`, :class:`Inverse` and :class:`Star` nodes.
Nodes hash and compare structurally, with the hash cached at construction so
that large shared DAGs (as produced by the regular-expression synthesis) stay
cheap to deduplicate.

Evaluation comes in two flavours: :func:`eval_strict` follows the usual
domain semantics and raises :class:`OutsideDomain` at the first singular
inverse, while :func:`eval_mp` replaces every inverse by a pseudoinverse and
is therefore total.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .linalg import Field, PINV_RTOL, adjoint, is_selfadjoint, pinv

COND_THRESHOLD = 1e12


class Expr:
    __slots__ = ("_hash",)

    def children(self) -> tuple["Expr", ...]:
        return ()

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other) or self._hash != other._hash:
            return False
        return self._key() == other._key()

    def _key(self):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({format_expr(self)})"

    def __str__(self):
        return format_expr(self)

    # convenience builders; parsing goes through the same constructors
    def __add__(self, other):
        return Sum(self, _lift(other))

    def __radd__(self, other):
        return Sum(_lift(other), self)

    def __mul__(self, other):
        return Product(self, _lift(other))

    def __rmul__(self, other):
        return Product(_lift(other), self)

    def __neg__(self):
        return negate(self)

    def __sub__(self, other):
        return Sum(self, negate(_lift(other)))

    def __rsub__(self, other):
        return Sum(_lift(other), negate(self))


def _lift(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return Const(x)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        value = complex(value)
        if value.imag == 0.0:
            value = float(value.real) + 0.0
        self.value = value
        self._hash = hash(("c", value))

    def _key(self):
        return self.value


class Var(Expr):
    __slots__ = ("index",)

    def __init__(self, index: int):
        if index < 1:
            raise ValueError("variable indices start at 1")
        self.index = int(index)
        self._hash = hash(("x", self.index))

    def _key(self):
        return self.index


class _Binary(Expr):
    __slots__ = ("left", "right")
    _tag = ""

    def __init__(self, left: Expr, right: Expr):
        self.left = left
        self.right = right
        self._hash = hash((self._tag, left._hash, right._hash))

    def children(self):
        return (self.left, self.right)

    def _key(self):
        return (self.left, self.right)


class Sum(_Binary):
    __slots__ = ()
    _tag = "+"


class Product(_Binary):
    __slots__ = ()
    _tag = "*"


class _Unary(Expr):
    __slots__ = ("child",)
    _tag = ""

    def __init__(self, child: Expr):
        self.child = child
        self._hash = hash((self._tag, child._hash))

    def children(self):
        return (self.child,)

    def _key(self):
        return self.child


class Inverse(_Unary):
    __slots__ = ()
    _tag = "inv"


class Star(_Unary):
    __slots__ = ()
    _tag = "star"

    def __new__(cls, child: Expr):
        # star(star(e)) is e
        if isinstance(child, Star):
            return child.child
        return super().__new__(cls)


def negate(e: Expr) -> Expr:
    """Unary minus as sugar: constants fold, everything else is (-1)*e."""
    if isinstance(e, Const):
        return Const(-e.value)
    return Product(Const(-1.0), e)


# ---------------------------------------------------------------------------
# parsing and printing

class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<var>x\d+)|(?P<name>inv|star|i)\b|(?P<op>[-+*()]))"
)


def _tokenize(text: str):
    pos = 0
    out = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            skip = len(text) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[skip]!r}", skip)
        out.append((m.lastgroup, m.group(m.lastgroup), m.start(m.lastgroup)))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, g: int, field: Field):
        self.tokens = _tokenize(text)
        self.i = 0
        self.g = g
        self.field = field

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.take()
        if val != value:
            raise ParseError(f"expected {value!r}, got {val or 'end of input'!r}", pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {val!r}", pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            e = Sum(e, rhs if op == "+" else negate(rhs))
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[1] == "*":
            self.take()
            e = Product(e, self.factor())
        return e

    def factor(self) -> Expr:
        if self.peek()[1] == "-":
            self.take()
            return negate(self.atom())
        return self.atom()

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "var":
            j = int(val[1:])
            if j < 1 or (self.g is not None and j > self.g):
                raise ParseError(f"variable {val} out of range 1..{self.g}", pos)
            return Var(j)
        if kind == "name" and val == "i":
            if self.field is not Field.COMPLEX:
                raise ParseError("'i' needs the complex field", pos)
            return Const(1j)
        if kind == "name":
            self.expect("(")
            inner = self.expr()
            self.expect(")")
            return Inverse(inner) if val == "inv" else Star(inner)
        if val == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        raise ParseError(f"unexpected {val or 'end of input'!r}", pos)


def parse(text: str, g: int | None = None, field: Field | str = Field.REAL) -> Expr:
    """Parse an expression.

    Grammar (whitespace insignificant, no implicit multiplication)::

        expr   := term { ("+"|"-") term }
        term   := factor { "*" factor }
        factor := ["-"] atom
        atom   := number | "i" | var | "inv(" expr ")" | "star(" expr ")" | "(" expr ")"

    ``a - b`` becomes ``Sum(a, -1*b)``; negating a literal folds into the
    constant.  ``g`` bounds the variable indices when given.
    """
    return _Parser(text, g, Field.parse(field)).parse()


def _format_number(v: float) -> str:
    if v == 0.0:
        return "0"
    if v.is_integer() and abs(v) < 1e15:
        s = str(int(v))
    else:
        s = repr(v)
    return f"({s})" if v < 0 else s


def _format_const(c: complex | float) -> str:
    if isinstance(c, float):
        return _format_number(c)
    if c == 1j:
        return "i"
    if c == -1j:
        return "(-i)"
    if c.real == 0.0:
        return f"({_format_number(c.imag)} * i)"
    return f"({_format_number(c.real)} + {_format_number(c.imag)} * i)"


def format_expr(e: Expr) -> str:
    """Fully parenthesised text that parses back to the same tree."""
    if isinstance(e, Const):
        return _format_const(e.value)
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Sum):
        return f"({format_expr(e.left)} + {format_expr(e.right)})"
    if isinstance(e, Product):
        return f"({format_expr(e.left)} * {format_expr(e.right)})"
    if isinstance(e, Inverse):
        return f"inv({format_expr(e.child)})"
    if isinstance(e, Star):
        return f"star({format_expr(e.child)})"
    raise TypeError(type(e))


# ---------------------------------------------------------------------------
# structural operations

@lru_cache(maxsize=None)
def star(e: Expr) -> Expr:
    """The involution pushed down to the leaves.

    Variables are self-adjoint, constants conjugate, products reverse.  A
    constant factor stays on the left so that star(i*x1) prints as (-i)*x1.
    """
    if isinstance(e, Const):
        return Const(np.conj(e.value))
    if isinstance(e, Var):
        return e
    if isinstance(e, Sum):
        return Sum(star(e.left), star(e.right))
    if isinstance(e, Product):
        if isinstance(e.left, Const):
            return Product(star(e.left), star(e.right))
        return Product(star(e.right), star(e.left))
    if isinstance(e, Inverse):
        return Inverse(star(e.child))
    if isinstance(e, Star):
        return e.child
    raise TypeError(type(e))


def fold(e: Expr) -> Expr:
    """Constant folding that never changes the domain.

    Removes ``+0`` and ``*1``, folds constant sums/products and inverses of
    nonzero constants, and eliminates Star over leaves.  ``0*e`` is kept since
    e may carry singularities.
    """
    memo: dict[int, Expr] = {}

    def go(node: Expr) -> Expr:
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, (Const, Var)):
            out = node
        elif isinstance(node, Sum):
            a, b = go(node.left), go(node.right)
            if isinstance(a, Const) and isinstance(b, Const):
                out = Const(a.value + b.value)
            elif isinstance(b, Const) and b.value == 0:
                out = a
            elif isinstance(a, Const) and a.value == 0:
                out = b
            else:
                out = Sum(a, b)
        elif isinstance(node, Product):
            a, b = go(node.left), go(node.right)
            if isinstance(a, Const) and isinstance(b, Const):
                out = Const(a.value * b.value)
            elif isinstance(a, Const) and a.value == 1:
                out = b
            elif isinstance(b, Const) and b.value == 1:
                out = a
            else:
                out = Product(a, b)
        elif isinstance(node, Inverse):
            a = go(node.child)
            if isinstance(a, Const) and a.value != 0:
                out = Const(1.0 / a.value)
            else:
                out = Inverse(a)
        elif isinstance(node, Star):
            a = go(node.child)
            out = star(a) if isinstance(a, (Const, Var)) else Star(a)
        else:
            raise TypeError(type(node))
        memo[key] = out
        return out

    return go(e)


def tau(e: Expr) -> int:
    """Complexity: constants 0, variables 1, sums max, products add,
    inverses double; star is free."""
    memo: dict[int, int] = {}

    def go(node):
        key = id(node)
        if key not in memo:
            if isinstance(node, Const):
                v = 0
            elif isinstance(node, Var):
                v = 1
            elif isinstance(node, Sum):
                v = max(go(node.left), go(node.right))
            elif isinstance(node, Product):
                v = go(node.left) + go(node.right)
            elif isinstance(node, Inverse):
                v = 2 * go(node.child)
            else:
                v = go(node.child)
            memo[key] = v
        return memo[key]

    return go(e)


def kappa(e: Expr) -> int:
    """#constants + 2 #symbols + #inverses, counted over occurrences."""
    counts = {"c": 0, "x": 0, "inv": 0}

    def go(node):
        if isinstance(node, Const):
            counts["c"] += 1
        elif isinstance(node, Var):
            counts["x"] += 1
        elif isinstance(node, Inverse):
            counts["inv"] += 1
        for ch in node.children():
            go(ch)

    go(e)
    return counts["c"] + 2 * counts["x"] + counts["inv"]


def subexpressions(e: Expr, close_under_star: bool = True) -> list[Expr]:
    """All sub-expressions in post-order, deduplicated structurally.

    With ``close_under_star`` the list is extended by the (pushed-down) star
    image of every member not already present.
    """
    seen: dict[Expr, None] = {}

    def go(node):
        for ch in node.children():
            go(ch)
        if node not in seen:
            seen[node] = None

    go(e)
    out = list(seen)
    if close_under_star:
        for q in list(out):
            s = star(q)
            if s not in seen:
                seen[s] = None
                out.append(s)
    return out


def nvars(e: Expr) -> int:
    best = 0
    stack = [e]
    visited = set()
    while stack:
        node = stack.pop()
        if id(node) in visited:
            continue
        visited.add(id(node))
        if isinstance(node, Var):
            best = max(best, node.index)
        stack.extend(node.children())
    return best


def expr_field(e: Expr) -> Field:
    stack = [e]
    visited = set()
    while stack:
        node = stack.pop()
        if id(node) in visited:
            continue
        visited.add(id(node))
        if isinstance(node, Const) and isinstance(node.value, complex):
            return Field.COMPLEX
        stack.extend(node.children())
    return Field.REAL


def shift(e: Expr, center) -> Expr:
    """Substitute x_j <- x_j + center_j (then fold constants)."""
    center = [float(c) for c in center]
    memo: dict[int, Expr] = {}

    def go(node):
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Var):
            lam = center[node.index - 1] if node.index <= len(center) else 0.0
            out = Sum(node, Const(lam))
        elif isinstance(node, Const):
            out = node
        elif isinstance(node, Sum):
            out = Sum(go(node.left), go(node.right))
        elif isinstance(node, Product):
            out = Product(go(node.left), go(node.right))
        elif isinstance(node, Inverse):
            out = Inverse(go(node.child))
        else:
            out = Star(go(node.child))
        memo[key] = out
        return out

    return fold(go(e))


# ---------------------------------------------------------------------------
# evaluation

@dataclass(frozen=True)
class MatrixPoint:
    """A g-tuple of n x n matrices."""

    mats: tuple
    field: Field = Field.REAL
    selfadjoint: bool = False

    def __post_init__(self):
        object.__setattr__(self, "field", Field.parse(self.field))
        mats = tuple(np.asarray(m, dtype=self.field.dtype) for m in self.mats)
        object.__setattr__(self, "mats", mats)
        if mats:
            n = mats[0].shape[0]
            for m in mats:
                if m.shape != (n, n):
                    raise ValueError("all components of a point must be n x n")
        if self.selfadjoint and not all(is_selfadjoint(m, 1e-12) for m in mats):
            raise ValueError("point flagged self-adjoint has non-self-adjoint entries")

    @property
    def g(self) -> int:
        return len(self.mats)

    @property
    def n(self) -> int:
        return self.mats[0].shape[0] if self.mats else 1

    def __getitem__(self, j):
        return self.mats[j]

    def shifted(self, center) -> "MatrixPoint":
        eye = np.eye(self.n)
        mats = tuple(m + c * eye for m, c in zip(self.mats, center))
        return MatrixPoint(mats, self.field, self.selfadjoint)

    def adjoint(self) -> "MatrixPoint":
        return MatrixPoint(tuple(adjoint(m) for m in self.mats), self.field, self.selfadjoint)

    def as_field(self, field: Field) -> "MatrixPoint":
        field = Field.parse(field)
        if field is self.field:
            return self
        return MatrixPoint(self.mats, field, self.selfadjoint)

    @classmethod
    def scalar(cls, values, field: Field = Field.REAL) -> "MatrixPoint":
        return cls(tuple(np.array([[v]]) for v in values), Field.parse(field), True)

    @classmethod
    def zeros(cls, g: int, n: int, field: Field = Field.REAL) -> "MatrixPoint":
        return cls(tuple(np.zeros((n, n)) for _ in range(g)), Field.parse(field), True)


class OutsideDomain(ArithmeticError):
    """Strict evaluation hit a (numerically) singular inverse."""

    def __init__(self, subexpr: Expr, cond: float):
        text = format_expr(subexpr)
        if len(text) > 200:
            text = text[:200] + "..."
        super().__init__(f"undefined at {text} (condition number {cond:.3g})")
        self.subexpr = subexpr
        self.cond = cond


def _check_point(e: Expr, X: MatrixPoint):
    need = nvars(e)
    if X.g < need:
        raise ValueError(f"expression uses x{need} but the point has {X.g} components")
    if X.field is Field.REAL and expr_field(e) is Field.COMPLEX:
        X = X.as_field(Field.COMPLEX)
    return X


def _evaluate(e: Expr, X: MatrixPoint, invert, cache: dict | None = None) -> np.ndarray:
    n = X.n
    dtype = X.field.dtype
    eye = np.eye(n, dtype=dtype)
    memo = {} if cache is None else cache
    keep = []

    def go(node):
        key = id(node)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if isinstance(node, Const):
            v = node.value * eye
        elif isinstance(node, Var):
            v = X.mats[node.index - 1]
        elif isinstance(node, Sum):
            v = go(node.left) + go(node.right)
        elif isinstance(node, Product):
            v = go(node.left) @ go(node.right)
        elif isinstance(node, Inverse):
            v = invert(node, go(node.child))
        else:
            v = go(star(node.child)) if not X.selfadjoint else adjoint(go(node.child))
        memo[key] = v
        keep.append(node)
        return v

    return go(e)


def _strict_inverse(threshold):
    def invert(node, a):
        s = np.linalg.svd(a, compute_uv=False)
        cond = np.inf if s[-1] == 0.0 else s[0] / s[-1]
        if not cond < threshold:
            raise OutsideDomain(node.child, cond)
        return np.linalg.inv(a)
    return invert


def eval_strict(e: Expr, X: MatrixPoint, cond_threshold: float = COND_THRESHOLD) -> np.ndarray:
    """r(X); raises OutsideDomain naming the first singular sub-expression."""
    X = _check_point(e, X)
    return _evaluate(e, X, _strict_inverse(cond_threshold))


def eval_many(exprs, X: MatrixPoint, cond_threshold: float = COND_THRESHOLD) -> list[np.ndarray]:
    """Strict values of several expressions, sharing common sub-trees."""
    exprs = list(exprs)
    if not exprs:
        return []
    for e in exprs:
        X = _check_point(e, X)
    cache: dict = {}
    invert = _strict_inverse(cond_threshold)
    return [_evaluate(e, X, invert, cache) for e in exprs]


def try_eval(e: Expr, X: MatrixPoint, cond_threshold: float = COND_THRESHOLD):
    try:
        return eval_strict(e, X, cond_threshold)
    except OutsideDomain:
        return None


def in_domain(e: Expr, X: MatrixPoint, cond_threshold: float = COND_THRESHOLD) -> bool:
    return try_eval(e, X, cond_threshold) is not None


def eval_mp(e: Expr, X: MatrixPoint, rtol: float = PINV_RTOL) -> np.ndarray:
    """Moore-Penrose evaluation: every inverse becomes a pseudoinverse."""
    X = _check_point(e, X)
    return _evaluate(e, X, lambda node, a: pinv(a, rtol))


def random_selfadjoint_point(g: int, n: int, field: Field | str = Field.REAL,
                             seed=None) -> MatrixPoint:
    """g independent GOE/GUE-like matrices scaled to operator norm O(1)."""
    if n < 1:
        raise ValueError("size must be at least 1")
    field = Field.parse(field)
    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(g):
        a = rng.standard_normal((n, n))
        if field is Field.COMPLEX:
            a = a + 1j * rng.standard_normal((n, n))
        a = (a + adjoint(a)) / (2.0 * math.sqrt(n))
        mats.append(a)
    return MatrixPoint(tuple(mats), field, True)


def find_scalar_center(e: Expr, attempts: int = 50, seed=0, g: int | None = None):
    """A real scalar tuple at which e and all its sub-expressions are defined.

    Tries the origin first, then Gaussian scalars of growing spread.
    """
    g = max(g or 0, nvars(e))
    field = expr_field(e)
    rng = np.random.default_rng(seed)
    candidates = [np.zeros(g)]
    for k in range(attempts):
        candidates.append(rng.standard_normal(g) * (1.0 + k / 5.0))
    for lam in candidates:
        if in_domain(e, MatrixPoint.scalar(lam, field), cond_threshold=1e8):
            return tuple(float(v) for v in lam)
    return None
