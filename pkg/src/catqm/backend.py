"""Dense-matrix semantics of terms over a commutative semiring with involution.

Two instances ship: ``FDHILB`` (complex floats, conjugation) and ``REL``
(booleans with or/and, trivial involution).  Matrices are plain numpy arrays
with ``rows = dim(cod)`` and ``cols = dim(dom)``; scalars are 1x1 matrices.

Index conventions: the basis element (a, b) of A (x) B sits at a*dim(B) + b,
and the components of A (+) B are laid out left block first.  With these,
the associator and unitors are identity matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from catqm import ir
from catqm.errors import DimensionMismatch, InvalidInverse, LiteralError, MissingPrimitive, ShapeMismatch
from catqm.ir import (
    Alpha, Compose, Conjugate, Copairing, Coname, Dagger, Dist, DualInvol, DualTensor, Eps, Eta, Id, Inj, Inv,
    Lambda, Name, Pairing, Prim, Proj, Rho, ScalarMul, Sigma, Tensor, Term, Transpose, UnitDual, dim, typecheck,
)

MatrixValue = np.ndarray


class ScalarRing:
    """Abelian semiring with involution, lifted to dense matrices."""

    name: str
    dtype: type
    exact: bool

    @property
    def zero(self):
        return self.dtype(0)

    @property
    def one(self):
        return self.dtype(1)

    def add(self, a, b):
        raise NotImplementedError

    def mul(self, a, b):
        raise NotImplementedError

    def conj(self, a):
        raise NotImplementedError

    def is_zero(self, a, tol: float = 0.0) -> bool:
        raise NotImplementedError

    def close(self, a, b, tol: float = 0.0) -> bool:
        raise NotImplementedError

    def coerce(self, x):
        raise NotImplementedError

    # matrix lifting
    def array(self, m) -> MatrixValue:
        return np.asarray(m, dtype=self.dtype)

    def matmul(self, x: MatrixValue, y: MatrixValue) -> MatrixValue:
        raise NotImplementedError

    def kron(self, x: MatrixValue, y: MatrixValue) -> MatrixValue:
        raise NotImplementedError

    def conj_matrix(self, x: MatrixValue) -> MatrixValue:
        raise NotImplementedError

    def scale(self, s, x: MatrixValue) -> MatrixValue:
        raise NotImplementedError

    def madd(self, x: MatrixValue, y: MatrixValue) -> MatrixValue:
        raise NotImplementedError

    def eye(self, n: int) -> MatrixValue:
        return np.eye(n, dtype=self.dtype)

    def zeros(self, rows: int, cols: int) -> MatrixValue:
        return np.zeros((rows, cols), dtype=self.dtype)

    def allclose(self, x: MatrixValue, y: MatrixValue, tol: float = 0.0) -> bool:
        raise NotImplementedError


def _mixed_close(x, y, tol):
    x, y = np.asarray(x), np.asarray(y)
    bound = tol * np.maximum(1.0, np.maximum(np.abs(x), np.abs(y)))
    return bool(np.all(np.abs(x - y) <= bound))


class ComplexRing(ScalarRing):
    name = "complex"
    dtype = np.complex128
    exact = False

    def add(self, a, b):
        return complex(a) + complex(b)

    def mul(self, a, b):
        return complex(a) * complex(b)

    def conj(self, a):
        return complex(a).conjugate()

    def is_zero(self, a, tol=0.0):
        return abs(a) <= tol

    def close(self, a, b, tol=0.0):
        return _mixed_close(a, b, tol)

    def coerce(self, x):
        return complex(x)

    def matmul(self, x, y):
        return x @ y

    def kron(self, x, y):
        return np.kron(x, y)

    def conj_matrix(self, x):
        return np.conj(x)

    def scale(self, s, x):
        return complex(s) * x

    def madd(self, x, y):
        return x + y

    def allclose(self, x, y, tol=0.0):
        return x.shape == y.shape and _mixed_close(x, y, tol)


class BooleanRing(ScalarRing):
    name = "boolean"
    dtype = np.bool_
    exact = True

    def add(self, a, b):
        return bool(a) or bool(b)

    def mul(self, a, b):
        return bool(a) and bool(b)

    def conj(self, a):
        return bool(a)

    def is_zero(self, a, tol=0.0):
        return not bool(a)

    def close(self, a, b, tol=0.0):
        return bool(a) == bool(b)

    def coerce(self, x):
        if isinstance(x, (bool, np.bool_)):
            return bool(x)
        if complex(x) in (0, 1):
            return complex(x) == 1
        raise LiteralError("boolean scalars are 0 or 1, got {!r}".format(x))

    def matmul(self, x, y):
        return (x.astype(np.int64) @ y.astype(np.int64)) > 0

    def kron(self, x, y):
        return np.kron(x, y).astype(bool)

    def conj_matrix(self, x):
        return x.copy()

    def scale(self, s, x):
        return x & bool(s)

    def madd(self, x, y):
        return x | y

    def allclose(self, x, y, tol=0.0):
        return x.shape == y.shape and bool(np.array_equal(x, y))


@dataclass(frozen=True)
class Backend:
    name: str
    ring: ScalarRing
    tol: float = 1e-9

    def with_tol(self, tol: float) -> Backend:
        return Backend(self.name, self.ring, tol)


FDHILB = Backend("fdhilb", ComplexRing(), 1e-9)
REL = Backend("rel", BooleanRing(), 0.0)
BACKENDS = {"fdhilb": FDHILB, "rel": REL}


def get_backend(name: str, tol: float | None = None) -> Backend:
    try:
        b = BACKENDS[name]
    except KeyError:
        raise ValueError("unknown backend {!r}; choose from {}".format(name, sorted(BACKENDS))) from None
    return b if tol is None or b.ring.exact else b.with_tol(tol)


# ---------------------------------------------------------------- permutations

def _perm_matrix(ring: ScalarRing, targets: list[int]) -> MatrixValue:
    """Matrix sending basis vector k to basis vector targets[k]."""
    n = len(targets)
    m = ring.zeros(n, n)
    m[targets, range(n)] = ring.one
    return m


def sigma_matrix(ring: ScalarRing, da: int, db: int) -> MatrixValue:
    return _perm_matrix(ring, [b * da + a for a in range(da) for b in range(db)])


def dist_matrix(ring: ScalarRing, da: int, db1: int, db2: int) -> MatrixValue:
    nb = db1 + db2
    targets = []
    for a in range(da):
        for k in range(nb):
            targets.append(a * db1 + k if k < db1 else da * db1 + a * db2 + (k - db1))
    return _perm_matrix(ring, targets)


def _is_permutation(m: MatrixValue) -> bool:
    return m.shape[0] == m.shape[1] and np.all(m.sum(axis=0) == 1) and np.all(m.sum(axis=1) == 1)


# ---------------------------------------------------------------- evaluation

def _literal(ring: ScalarRing, backend: Backend, p: Prim, inverse: bool = False) -> MatrixValue:
    rows = p.inverse_literal(backend.name) if inverse else p.literal(backend.name)
    if rows is None:
        if inverse:
            return None
        raise MissingPrimitive("primitive {!r} has no literal for backend {}".format(p.name, backend.name))
    return ring.array(rows)


def _eval(t: Term, b: Backend) -> MatrixValue:
    r = b.ring
    match t:
        case Id(a):
            return r.eye(dim(a))
        case Compose(g, f):
            return r.matmul(_eval(g, b), _eval(f, b))
        case Tensor(f, g):
            return r.kron(_eval(f, b), _eval(g, b))
        case Dagger(f):
            return r.conj_matrix(_eval(f, b)).T.copy()
        case Transpose(f):
            return _eval(f, b).T.copy()
        case Conjugate(f):
            return r.conj_matrix(_eval(f, b))
        case Eta(a):
            n = dim(a)
            m = r.zeros(n * n, 1)
            m[[i * n + i for i in range(n)], 0] = r.one
            return m
        case Eps(a):
            return _eval(Eta(a), b).T.copy()
        case Name(f):
            j = typecheck(f)
            return _eval(Compose(Tensor(Id(ir.Dual(j.dom)), f), Eta(j.dom)), b)
        case Coname(f):
            j = typecheck(f)
            return _eval(Compose(Eps(j.cod), Tensor(f, Id(ir.Dual(j.cod)))), b)
        case Proj(i, objs):
            dims = [dim(o) for o in objs]
            m = r.zeros(dims[i], sum(dims))
            off = sum(dims[:i])
            m[:, off:off + dims[i]] = r.eye(dims[i])
            return m
        case Inj(i, objs):
            return _eval(Proj(i, objs), b).T.copy()
        case Pairing(fs):
            return np.vstack([_eval(f, b) for f in fs])
        case Copairing(fs):
            return np.hstack([_eval(f, b) for f in fs])
        case Lambda(a) | Rho(a) | DualInvol(a):
            return r.eye(dim(a))
        case Alpha(a1, a2, a3):
            return r.eye(dim(a1) * dim(a2) * dim(a3))
        case DualTensor(a1, a2):
            return r.eye(dim(a1) * dim(a2))
        case UnitDual():
            return r.eye(1)
        case Sigma(a1, a2):
            return sigma_matrix(r, dim(a1), dim(a2))
        case Dist(a, b1, b2):
            return dist_matrix(r, dim(a), dim(b1), dim(b2))
        case Inv(f):
            return _eval_inverse(f, b)
        case ScalarMul(s, f):
            return r.scale(r.coerce(s), _eval(f, b))
        case Prim():
            return _literal(r, b, t)
    raise TypeError("cannot evaluate {!r}".format(t))


def _eval_inverse(f: Term, b: Backend) -> MatrixValue:
    r = b.ring
    if isinstance(f, (Sigma, Dist)):
        return _eval(f, b).T.copy()
    if isinstance(f, Prim):
        declared = _literal(r, b, f, inverse=True)
        if declared is not None:
            return declared
        m = _literal(r, b, f)
        if r.exact:
            if not _is_permutation(m):
                raise InvalidInverse("relation {!r} is not a bijection and has no declared inverse".format(f.name))
            return m.T.copy()
        try:
            return np.linalg.inv(m)
        except np.linalg.LinAlgError:
            raise InvalidInverse("matrix of {!r} is singular".format(f.name)) from None
    # remaining structural isomorphisms evaluate to identities
    return _eval(f, b)


def evaluate(t: Term, b: Backend = FDHILB) -> MatrixValue:
    """Denotation of a well-typed term in backend ``b``."""
    j = typecheck(t)
    m = _eval(t, b)
    if m.shape != (dim(j.cod), dim(j.dom)):
        raise DimensionMismatch("evaluated shape {} disagrees with judgment {!r}".format(m.shape, j))
    return m


# ---------------------------------------------------------------- vec / unvec

def vec(m: MatrixValue) -> MatrixValue:
    """State on A (x) B whose (i, j) amplitude is m[j, i], as a column."""
    m = np.asarray(m)
    return m.T.reshape(-1, 1).copy()


def unvec(v: MatrixValue, dim_a: int, dim_b: int) -> MatrixValue:
    v = np.asarray(v)
    if v.size != dim_a * dim_b:
        raise DimensionMismatch("vector of length {} is not {}x{}".format(v.size, dim_a, dim_b))
    return v.reshape(dim_a, dim_b).T.copy()


# ---------------------------------------------------------------- comparisons

class ScalarEquality(NamedTuple):
    equal: bool
    scalar: object


def equal(x: MatrixValue, y: MatrixValue, b: Backend = FDHILB) -> bool:
    if x.shape != y.shape:
        raise ShapeMismatch("cannot compare shapes {} and {}".format(x.shape, y.shape))
    return b.ring.allclose(x, y, b.tol)


def equal_up_to_scalar(x: MatrixValue, y: MatrixValue, b: Backend = FDHILB) -> ScalarEquality:
    """Is ``y = r * x`` for some nonzero scalar ``r``?"""
    r = b.ring
    if x.shape != y.shape:
        raise ShapeMismatch("cannot compare shapes {} and {}".format(x.shape, y.shape))
    x_zero = all(r.is_zero(v, b.tol) for v in x.flat)
    y_zero = all(r.is_zero(v, b.tol) for v in y.flat)
    if x_zero or y_zero:
        return ScalarEquality(x_zero and y_zero, r.one if x_zero and y_zero else None)
    if r.exact:
        same = r.allclose(x, y, b.tol)
        return ScalarEquality(same, r.one if same else None)
    k = int(np.argmax(np.abs(x)))
    s = y.flat[k] / x.flat[k]
    ok = r.allclose(r.scale(s, x), y, b.tol)
    return ScalarEquality(ok, complex(s) if ok else None)


# ---------------------------------------------------------------- scalars

def scalar(s, b: Backend = FDHILB, name: str = "s") -> Prim:
    """The scalar ``s`` as a morphism I -> I."""
    v = b.ring.coerce(s)
    kw = {"rel": [[v]]} if b.ring.exact else {"fdhilb": [[v]]}
    return ir.prim(name, ir.I, ir.I, **kw)


def s_add_routes(s, t, b: Backend = FDHILB) -> tuple[MatrixValue, MatrixValue]:
    """(categorical, ring) evaluations of s + t."""
    cat = ir.compose(ir.codiag(ir.I), ir.biproduct_map([scalar(s, b, "s"), scalar(t, b, "t")]), ir.diag(ir.I))
    ring = b.ring.array([[b.ring.add(b.ring.coerce(s), b.ring.coerce(t))]])
    return evaluate(cat, b), ring


def s_add(s, t, b: Backend = FDHILB) -> MatrixValue:
    cat, ring = s_add_routes(s, t, b)
    if not equal(cat, ring, b):
        raise ArithmeticError("categorical sum {} disagrees with ring sum {}".format(cat, ring))
    return cat


def s_mul(s, t, b: Backend = FDHILB) -> MatrixValue:
    return evaluate(Compose(scalar(s, b, "s"), scalar(t, b, "t")), b)


def scalar_action(s, a: ir.ObjectType, b: Backend = FDHILB) -> MatrixValue:
    """s_A = lambda^-1 . (s (x) 1_A) . lambda."""
    term = ir.compose(Inv(Lambda(a)), Tensor(scalar(s, b), Id(a)), Lambda(a))
    return evaluate(term, b)


# ---------------------------------------------------------------- JSON

def _num(x: float) -> float:
    x = float(x)
    return 0.0 if x == 0 else x


def scalar_to_json(s):
    if isinstance(s, (bool, np.bool_)):
        return int(s)
    if s is None:
        return None
    s = complex(s)
    return [_num(s.real), _num(s.imag)]


def matrix_to_json(m: MatrixValue, b: Backend = FDHILB) -> dict:
    rows, cols = m.shape
    if b.ring.exact:
        return {"rows": rows, "cols": cols, "entries": [int(bool(v)) for v in m.flat]}
    return {"rows": rows, "cols": cols, "entries": [scalar_to_json(v) for v in m.flat]}


def _entry(v):
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def matrix_from_json(obj: dict, b: Backend = FDHILB, rows: int | None = None, cols: int | None = None) -> MatrixValue:
    entries = obj["entries"] if isinstance(obj, dict) else obj
    rows = obj.get("rows", rows) if isinstance(obj, dict) else rows
    cols = obj.get("cols", cols) if isinstance(obj, dict) else cols
    flat = [_entry(v) for v in entries]
    if rows is None or cols is None or rows * cols != len(flat):
        raise DimensionMismatch("matrix JSON with {} entries does not match {}x{}".format(len(flat), rows, cols))
    arr = np.array(flat, dtype=complex).reshape(rows, cols)
    if b.ring.exact:
        return np.array([[b.ring.coerce(v) for v in row] for row in arr], dtype=bool)
    return arr
