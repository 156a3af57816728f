"""Object types, morphism terms and their typing rules.

Objects and terms are frozen dataclasses, so they hash, compare structurally
and can be shared freely between threads.

>>> Q = Base("Q", 2)
>>> typecheck(Eta(Q))
TypeJudgment(dom=I, cod=(Q* (x) Q))
>>> typecheck(diag(Unit()))
TypeJudgment(dom=I, cod=(I (+) I))
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from catqm.errors import ArityError, DimensionMismatch, IndexOutOfRange, InvalidInverse, TypeMismatch


# ---------------------------------------------------------------- objects

class ObjectType:
    __slots__ = ()

    def __matmul__(self, other: ObjectType) -> ObjectType:
        return TensorOb(self, other)

    @property
    def dual(self) -> ObjectType:
        return Dual(self)


@dataclass(frozen=True, repr=False)
class Unit(ObjectType):
    def __repr__(self):
        return "I"


@dataclass(frozen=True, repr=False)
class Base(ObjectType):
    name: str
    dim: int

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise DimensionMismatch("base object {!r} needs a positive dimension, got {!r}".format(self.name, self.dim))

    def __repr__(self):
        return self.name


@dataclass(frozen=True, repr=False)
class Dual(ObjectType):
    inner: ObjectType

    def __repr__(self):
        return "{!r}*".format(self.inner)


@dataclass(frozen=True, repr=False)
class TensorOb(ObjectType):
    left: ObjectType
    right: ObjectType

    def __repr__(self):
        return "({!r} (x) {!r})".format(self.left, self.right)


@dataclass(frozen=True, repr=False)
class BiproductOb(ObjectType):
    left: ObjectType
    right: ObjectType

    def __repr__(self):
        return "({!r} (+) {!r})".format(self.left, self.right)


I = Unit()


def dim(a: ObjectType) -> int:
    if isinstance(a, Unit):
        return 1
    if isinstance(a, Base):
        return int(a.dim)
    if isinstance(a, Dual):
        return dim(a.inner)
    if isinstance(a, TensorOb):
        return dim(a.left) * dim(a.right)
    if isinstance(a, BiproductOb):
        return dim(a.left) + dim(a.right)
    raise TypeError("not an object type: {!r}".format(a))


def tensor(*objs: ObjectType) -> ObjectType:
    """Right-nested tensor; the empty tensor is the unit."""
    if not objs:
        return I
    return reduce(lambda acc, o: TensorOb(o, acc), reversed(objs[:-1]), objs[-1])


def biproduct(*objs: ObjectType) -> ObjectType:
    """Right-nested biproduct of one or more objects."""
    if not objs:
        raise ArityError("empty biproduct")
    return reduce(lambda acc, o: BiproductOb(o, acc), reversed(objs[:-1]), objs[-1])


def components(a: ObjectType, n: int | None = None) -> list[ObjectType]:
    """Flatten the right spine of a biproduct, optionally into exactly ``n`` parts."""
    out = []
    while isinstance(a, BiproductOb) and (n is None or len(out) < n - 1):
        out.append(a.left)
        a = a.right
    out.append(a)
    if n is not None and len(out) != n:
        raise ArityError("{!r} does not split into {} biproduct components".format(a, n))
    return out


# ---------------------------------------------------------------- terms

class Term:
    __slots__ = ()

    def __matmul__(self, other: Term) -> Term:
        return Tensor(self, other)

    @property
    def dom(self) -> ObjectType:
        return typecheck(self).dom

    @property
    def cod(self) -> ObjectType:
        return typecheck(self).cod


@dataclass(frozen=True)
class Id(Term):
    obj: ObjectType


@dataclass(frozen=True)
class Compose(Term):
    """``Compose(g, f)`` is g after f."""
    g: Term
    f: Term


@dataclass(frozen=True)
class Tensor(Term):
    f: Term
    g: Term


@dataclass(frozen=True)
class Dagger(Term):
    f: Term


@dataclass(frozen=True)
class Transpose(Term):
    f: Term


@dataclass(frozen=True)
class Conjugate(Term):
    f: Term


@dataclass(frozen=True)
class Eta(Term):
    obj: ObjectType


@dataclass(frozen=True)
class Eps(Term):
    obj: ObjectType


@dataclass(frozen=True)
class Name(Term):
    f: Term


@dataclass(frozen=True)
class Coname(Term):
    f: Term


@dataclass(frozen=True)
class Proj(Term):
    i: int
    objs: tuple[ObjectType, ...]

    def __post_init__(self):
        object.__setattr__(self, "objs", tuple(self.objs))


@dataclass(frozen=True)
class Inj(Term):
    i: int
    objs: tuple[ObjectType, ...]

    def __post_init__(self):
        object.__setattr__(self, "objs", tuple(self.objs))


@dataclass(frozen=True)
class Pairing(Term):
    fs: tuple[Term, ...]

    def __post_init__(self):
        object.__setattr__(self, "fs", tuple(self.fs))


@dataclass(frozen=True)
class Copairing(Term):
    fs: tuple[Term, ...]

    def __post_init__(self):
        object.__setattr__(self, "fs", tuple(self.fs))


@dataclass(frozen=True)
class Lambda(Term):
    obj: ObjectType


@dataclass(frozen=True)
class Rho(Term):
    obj: ObjectType


@dataclass(frozen=True)
class Sigma(Term):
    a: ObjectType
    b: ObjectType


@dataclass(frozen=True)
class Alpha(Term):
    a: ObjectType
    b: ObjectType
    c: ObjectType


@dataclass(frozen=True)
class Dist(Term):
    a: ObjectType
    b1: ObjectType
    b2: ObjectType


@dataclass(frozen=True)
class DualInvol(Term):
    obj: ObjectType


@dataclass(frozen=True)
class DualTensor(Term):
    a: ObjectType
    b: ObjectType


@dataclass(frozen=True)
class UnitDual(Term):
    pass


@dataclass(frozen=True)
class Inv(Term):
    f: Term


@dataclass(frozen=True)
class ScalarMul(Term):
    s: complex | bool
    f: Term


Literal = tuple  # nested tuple of rows


def _freeze(m) -> Literal:
    arr = np.asarray(m)
    if arr.ndim != 2:
        raise DimensionMismatch("matrix literal must be two-dimensional, got shape {}".format(arr.shape))
    if arr.dtype == bool:
        return tuple(tuple(bool(x) for x in row) for row in arr)
    return tuple(tuple(complex(x) for x in row) for row in arr)


@dataclass(frozen=True)
class Prim(Term):
    """A named generator carrying one matrix literal per backend.

    ``literals`` and ``inverses`` are tuples of ``(backend_name, rows)``;
    use :func:`prim` to build one from arrays.
    """
    name: str
    dom_: ObjectType
    cod_: ObjectType
    literals: tuple = ()
    invertible: bool = False
    inverses: tuple = ()

    def __post_init__(self):
        shape = (dim(self.cod_), dim(self.dom_))
        checks = [(b, r, shape) for b, r in self.literals] + [(b, r, shape[::-1]) for b, r in self.inverses]
        for backend, rows, want in checks:
            got = (len(rows), len(rows[0]) if rows else 0)
            if got != want:
                raise DimensionMismatch(
                    "literal of {} for backend {} has shape {}, expected {}".format(self.name, backend, got, want))

    def __repr__(self):
        return "Prim({!r}: {!r} -> {!r})".format(self.name, self.dom_, self.cod_)

    def literal(self, backend: str):
        for b, rows in self.literals:
            if b == backend:
                return rows
        return None

    def inverse_literal(self, backend: str):
        for b, rows in self.inverses:
            if b == backend:
                return rows
        return None

    @property
    def backends(self) -> tuple[str, ...]:
        return tuple(b for b, _ in self.literals)


def prim(name: str, dom: ObjectType, cod: ObjectType, *, fdhilb=None, rel=None,
         invertible: bool = False, inverse: dict | None = None) -> Prim:
    """Build a :class:`Prim` from array-likes (rows = dim(cod), cols = dim(dom))."""
    lits = []
    if fdhilb is not None:
        lits.append(("fdhilb", _freeze(np.asarray(fdhilb, dtype=complex))))
    if rel is not None:
        lits.append(("rel", _freeze(np.asarray(rel, dtype=bool))))
    invs = []
    for b, m in (inverse or {}).items():
        invs.append((b, _freeze(np.asarray(m, dtype=bool if b == "rel" else complex))))
    return Prim(name, dom, cod, tuple(lits), invertible or bool(invs), tuple(invs))


# ---------------------------------------------------------------- typing

@dataclass(frozen=True)
class TypeJudgment:
    dom: ObjectType
    cod: ObjectType


_ISOS = (Lambda, Rho, Sigma, Alpha, Dist, DualInvol, DualTensor, UnitDual)


def _expect(found: ObjectType, expected: ObjectType, what: str) -> None:
    if found != expected:
        raise TypeMismatch("{}: {!r} vs {!r}".format(what, expected, found), expected=expected, found=found)


def _index(i: int, objs: Sequence[ObjectType], what: str) -> None:
    if not objs:
        raise ArityError("{} over an empty component list".format(what))
    if not 0 <= i < len(objs):
        raise IndexOutOfRange("{} index {} outside 0..{}".format(what, i, len(objs) - 1))


def typecheck(t: Term) -> TypeJudgment:
    J = TypeJudgment
    match t:
        case Id(a):
            return J(a, a)
        case Compose(g, f):
            jf, jg = typecheck(f), typecheck(g)
            _expect(jf.cod, jg.dom, "composition codomain/domain")
            return J(jf.dom, jg.cod)
        case Tensor(f, g):
            jf, jg = typecheck(f), typecheck(g)
            return J(TensorOb(jf.dom, jg.dom), TensorOb(jf.cod, jg.cod))
        case Dagger(f):
            j = typecheck(f)
            return J(j.cod, j.dom)
        case Transpose(f):
            j = typecheck(f)
            return J(Dual(j.cod), Dual(j.dom))
        case Conjugate(f):
            j = typecheck(f)
            return J(Dual(j.dom), Dual(j.cod))
        case Eta(a):
            return J(I, TensorOb(Dual(a), a))
        case Eps(a):
            return J(TensorOb(a, Dual(a)), I)
        case Name(f):
            j = typecheck(f)
            return J(I, TensorOb(Dual(j.dom), j.cod))
        case Coname(f):
            j = typecheck(f)
            return J(TensorOb(j.dom, Dual(j.cod)), I)
        case Proj(i, objs):
            _index(i, objs, "projection")
            return J(biproduct(*objs), objs[i])
        case Inj(i, objs):
            _index(i, objs, "injection")
            return J(objs[i], biproduct(*objs))
        case Pairing(fs):
            if not fs:
                raise ArityError("empty pairing")
            js = [typecheck(f) for f in fs]
            for k, j in enumerate(js[1:], 1):
                _expect(j.dom, js[0].dom, "pairing component {} domain".format(k))
            return J(js[0].dom, biproduct(*(j.cod for j in js)))
        case Copairing(fs):
            if not fs:
                raise ArityError("empty copairing")
            js = [typecheck(f) for f in fs]
            for k, j in enumerate(js[1:], 1):
                _expect(j.cod, js[0].cod, "copairing component {} codomain".format(k))
            return J(biproduct(*(j.dom for j in js)), js[0].cod)
        case Lambda(a):
            return J(a, TensorOb(I, a))
        case Rho(a):
            return J(a, TensorOb(a, I))
        case Sigma(a, b):
            return J(TensorOb(a, b), TensorOb(b, a))
        case Alpha(a, b, c):
            return J(TensorOb(a, TensorOb(b, c)), TensorOb(TensorOb(a, b), c))
        case Dist(a, b1, b2):
            return J(TensorOb(a, BiproductOb(b1, b2)), BiproductOb(TensorOb(a, b1), TensorOb(a, b2)))
        case DualInvol(a):
            return J(Dual(Dual(a)), a)
        case DualTensor(a, b):
            return J(Dual(TensorOb(a, b)), TensorOb(Dual(a), Dual(b)))
        case UnitDual():
            return J(Dual(I), I)
        case Inv(f):
            if isinstance(f, _ISOS) or (isinstance(f, Prim) and f.invertible):
                j = typecheck(f)
                return J(j.cod, j.dom)
            raise InvalidInverse("inverse of a non-isomorphism term {}".format(type(f).__name__))
        case ScalarMul(_, f):
            return typecheck(f)
        case Prim():
            return J(t.dom_, t.cod_)
    raise TypeError("not a term: {!r}".format(t))


# ---------------------------------------------------------------- builders

def compose(*ts: Term) -> Term:
    """``compose(h, g, f)`` is h . g . f."""
    if not ts:
        raise ArityError("empty composition")
    return reduce(lambda acc, f: Compose(acc, f), ts[1:], ts[0])


def diag(a: ObjectType) -> Term:
    return Pairing((Id(a), Id(a)))


def codiag(a: ObjectType) -> Term:
    return Copairing((Id(a), Id(a)))


def biproduct_map(fs: Sequence[Term]) -> Term:
    """f_1 (+) ... (+) f_n as a pairing of f_i . p_i."""
    if not fs:
        raise ArityError("empty biproduct map")
    doms = tuple(typecheck(f).dom for f in fs)
    return Pairing(tuple(Compose(f, Proj(i, doms)) for i, f in enumerate(fs)))


def epr_name(a: ObjectType) -> Term:
    return Name(Id(a))


def bell_state() -> Term:
    """Unnormalized EPR state on a qubit, I -> Q* (x) Q."""
    return epr_name(Base("Q", 2))


def dist_n(a: ObjectType, bs: Sequence[ObjectType]) -> Term:
    """A (x) (B_1 (+) ... (+) B_n) -> (A (x) B_1) (+) ... (+) (A (x) B_n)."""
    if not bs:
        raise ArityError("empty distribution")
    if len(bs) == 1:
        return Id(TensorOb(a, bs[0]))
    rest = dist_n(a, bs[1:])
    head = Dist(a, bs[0], biproduct(*bs[1:]))
    return Compose(biproduct_map([Id(TensorOb(a, bs[0])), rest]), head)


def undist_n(a: ObjectType, bs: Sequence[ObjectType]) -> Term:
    """Inverse of :func:`dist_n`, assembled from ``Inv`` nodes."""
    if len(bs) == 1:
        return Id(TensorOb(a, bs[0]))
    head = Inv(Dist(a, bs[0], biproduct(*bs[1:])))
    return Compose(head, biproduct_map([Id(TensorOb(a, bs[0])), undist_n(a, bs[1:])]))


def dist_left(bs: Sequence[ObjectType], a: ObjectType) -> Term:
    """(B_1 (+) ... (+) B_n) (x) A -> (B_1 (x) A) (+) ... (+) (B_n (x) A)."""
    swaps = biproduct_map([Sigma(a, b) for b in bs])
    return compose(swaps, dist_n(a, bs), Sigma(biproduct(*bs), a))


def undist_left(bs: Sequence[ObjectType], a: ObjectType) -> Term:
    swaps = biproduct_map([Sigma(b, a) for b in bs])
    return compose(Sigma(a, biproduct(*bs)), undist_n(a, bs), swaps)
