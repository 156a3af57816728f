"""Spectral decompositions, measurements, probabilities and density constructions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from catqm import ir
from catqm.backend import FDHILB, Backend, MatrixValue, equal, evaluate, unvec
from catqm.errors import IndexOutOfRange, NotNormalized, NotUnitary, TypeMismatch, WrongDimension
from catqm.ir import (
    Compose, Copairing, Dagger, DualInvol, Id, Inv, Lambda, Name, ObjectType, Pairing, Proj, ScalarMul, Tensor,
    Term, Transpose, UnitDual, dim, typecheck, undist_left,
)

NONDESTRUCTIVE = "nondestructive"
DESTRUCTIVE = "destructive-nondegenerate"


def is_unitary(u: MatrixValue, b: Backend = FDHILB) -> bool:
    if u.shape[0] != u.shape[1]:
        return False
    r = b.ring
    uh = r.conj_matrix(u).T
    eye = r.eye(u.shape[0])
    return r.allclose(r.matmul(u, uh), eye, b.tol) and r.allclose(r.matmul(uh, u), eye, b.tol)


@dataclass(frozen=True)
class SpectralDecomposition:
    """A unitary ``U : A -> A_1 (+) ... (+) A_n`` together with its components."""
    U: Term
    components: tuple[ObjectType, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        j = typecheck(self.U)
        if j.cod != ir.biproduct(*self.components):
            raise TypeMismatch("decomposition codomain {!r} is not the biproduct of {!r}".format(j.cod, self.components))

    @property
    def space(self) -> ObjectType:
        return typecheck(self.U).dom

    @property
    def n(self) -> int:
        return len(self.components)

    def validate(self, b: Backend = FDHILB) -> SpectralDecomposition:
        if not is_unitary(evaluate(self.U, b), b):
            raise NotUnitary("spectral decomposition is not unitary in backend {}".format(b.name))
        return self


def spectral_decomposition(matrix, space: ObjectType, components: Sequence[ObjectType], *, scale=1.0,
                           name: str = "U", backend: Backend = FDHILB) -> SpectralDecomposition:
    """Wrap ``scale * matrix`` as a primitive and check that it is unitary."""
    m = np.asarray(matrix)
    cod = ir.biproduct(*components)
    if backend.ring.exact:
        p = ir.prim(name, space, cod, rel=m.astype(bool), invertible=True)
    else:
        m = scale * m.astype(complex)
        p = ir.prim(name, space, cod, fdhilb=m, invertible=True, inverse={"fdhilb": m.conj().T})
    return SpectralDecomposition(p, tuple(components)).validate(backend)


def computational(a: ObjectType, backend: Backend = FDHILB) -> SpectralDecomposition:
    """The canonical basis bijection A ~ I (+) ... (+) I."""
    n = dim(a)
    eye = np.eye(n)
    if backend.ring.exact:
        p = ir.prim("basis_" + repr(a), a, ir.biproduct(*[ir.I] * n), rel=eye.astype(bool), invertible=True)
    else:
        p = ir.prim("basis_" + repr(a), a, ir.biproduct(*[ir.I] * n), fdhilb=eye, invertible=True,
                    rel=eye.astype(bool))
    return SpectralDecomposition(p, (ir.I,) * n)


@dataclass(frozen=True)
class Measurement:
    decomposition: SpectralDecomposition
    kind: str = NONDESTRUCTIVE

    def __post_init__(self):
        if self.kind not in (NONDESTRUCTIVE, DESTRUCTIVE):
            raise ValueError("unknown measurement kind {!r}".format(self.kind))
        if self.kind == DESTRUCTIVE and any(c != ir.I for c in self.decomposition.components):
            raise TypeMismatch("a destructive non-degenerate measurement needs every component to be I")

    @property
    def n(self) -> int:
        return self.decomposition.n

    @property
    def space(self) -> ObjectType:
        return self.decomposition.space


def branch_map(m: Measurement, j: int) -> Term:
    """pi_j = p_j . U."""
    if not 0 <= j < m.n:
        raise IndexOutOfRange("branch {} outside 0..{}".format(j, m.n - 1))
    d = m.decomposition
    return Compose(Proj(j, d.components), d.U)


def projector(m: Measurement, j: int) -> Term:
    pi = branch_map(m, j)
    return Compose(Dagger(pi), pi)


def measure_term(m: Measurement) -> Term:
    if m.kind == DESTRUCTIVE:
        return Pairing(tuple(branch_map(m, j) for j in range(m.n)))
    return Pairing(tuple(projector(m, j) for j in range(m.n)))


def _state_prim(psi, a: ObjectType, b: Backend, name: str = "psi") -> ir.Prim:
    v = np.asarray(psi).reshape(-1, 1)
    if v.shape[0] != dim(a):
        raise WrongDimension("state of length {} on object {!r} of dimension {}".format(v.shape[0], a, dim(a)))
    if b.ring.exact:
        return ir.prim(name, ir.I, a, rel=v.astype(bool))
    return ir.prim(name, ir.I, a, fdhilb=v.astype(complex))


def _check_normalized(psi, b: Backend) -> None:
    v = np.asarray(psi).reshape(-1)
    norm = float(np.vdot(v, v).real)
    if abs(norm - 1.0) > b.tol * max(1.0, norm):
        raise NotNormalized("state has squared norm {!r}".format(norm), norm=norm)


def branch_weights(m: Measurement, psi, b: Backend = FDHILB) -> list:
    """The scalars s_i^dagger . s_i with s_i = pi_i . psi, in any backend."""
    st = _state_prim(psi, m.space, b)
    out = []
    for j in range(m.n):
        s = Compose(branch_map(m, j), st)
        w = evaluate(Compose(Dagger(s), s), b)[0, 0]
        out.append(w)
    return out


def prob(m: Measurement, psi, b: Backend = FDHILB) -> list[float]:
    if b.ring.exact:
        raise ValueError("probabilities are only defined over the complex backend")
    _check_normalized(psi, b)
    ws = branch_weights(m, psi, b)
    return [float(np.real(w)) for w in ws]


def born_check(m: Measurement, psi, b: Backend = FDHILB, projectors: Sequence[MatrixValue] | None = None) -> bool:
    """Compare PROB against <psi | P_i psi>; ``projectors`` overrides the second route."""
    ps = prob(m, psi, b)
    v = _state_prim(psi, m.space, b)
    col = evaluate(v, b)[:, 0]
    mats = projectors if projectors is not None else [evaluate(projector(m, j), b) for j in range(m.n)]
    for p, mat in zip(ps, mats):
        inner = np.vdot(col, mat @ col)
        if not b.ring.close(p, inner, b.tol):
            return False
    return True


def validate_generalized(fs: Sequence[Term], b: Backend = FDHILB) -> bool:
    """Is sum_i f_i^dagger . f_i the identity?"""
    js = [typecheck(f) for f in fs]
    for j in js[1:]:
        if j.dom != js[0].dom:
            raise TypeMismatch("generalized measurement components disagree on domain", expected=js[0].dom,
                               found=j.dom)
    r = b.ring
    total = r.zeros(dim(js[0].dom), dim(js[0].dom))
    for f in fs:
        total = r.madd(total, evaluate(Compose(Dagger(f), f), b))
    return r.allclose(total, r.eye(dim(js[0].dom)), b.tol)


def ontic_density(xi: Term) -> Term:
    """Name of ``xi : A1* -> A2`` landed in A1 (x) A2."""
    j = typecheck(xi)
    if not isinstance(j.dom, ir.Dual):
        raise TypeMismatch("ontic density needs a map out of a dual object, got domain {!r}".format(j.dom))
    return Compose(Tensor(DualInvol(j.dom.inner), Id(j.cod)), Name(xi))


def epistemic_density(phi, m: Measurement, b: Backend = FDHILB) -> Term:
    """phi, measured without reading the outcome: I -> (I (+) ... (+) I) (x) A."""
    if not b.ring.exact:
        _check_normalized(phi, b)
    a = m.space
    st = _state_prim(phi, a, b, "phi")
    lam = ir.biproduct_map([Lambda(a)] * m.n)
    return ir.compose(undist_left([ir.I] * m.n, a), lam, measure_term(Measurement(m.decomposition)), st)


def omega_star(phi, m: Measurement, b: Backend = FDHILB, conjugate_scalars: bool = True):
    """Both sides of the omega_* identity for a destructive measurement.

    Returns ``(direct, assembled)`` where ``direct`` conjugates the map read off
    the epistemic state and ``assembled`` is the copairing of
    s_i . (pi_i^* . u_I).  The scalars enter conjugated unless
    ``conjugate_scalars`` is false.
    """
    if m.kind != DESTRUCTIVE:
        raise TypeMismatch("omega_* is stated for destructive non-degenerate measurements")
    r = b.ring
    a = m.space
    omega = unvec(evaluate(epistemic_density(phi, m, b), b), m.n, dim(a))
    direct = r.conj_matrix(omega)
    st = _state_prim(phi, a, b, "phi")
    u_unit = Inv(UnitDual())
    cols = []
    for j in range(m.n):
        pi = branch_map(m, j)
        s = evaluate(Compose(pi, st), b)[0, 0]
        if conjugate_scalars:
            s = r.conj(s)
        cols.append(ScalarMul(s if not r.exact else bool(s), Compose(Transpose(pi), u_unit)))
    assembled = evaluate(Copairing(tuple(cols)), b)
    return direct, assembled


def reduced_first(state: MatrixValue, d1: int, d2: int) -> MatrixValue:
    """M . M^dagger for the state reshaped with the first factor as rows."""
    mat = np.asarray(state).reshape(d1, d2)
    return mat @ mat.conj().T


def no_signalling_check(xi: Term, u, b: Backend = FDHILB) -> bool:
    """Acting with a unitary on the second factor of the name of ``xi`` leaves
    the first factor's reduced matrix unchanged."""
    if b.ring.exact:
        raise ValueError("the reduced-matrix check needs the complex backend")
    j = typecheck(xi)
    u_term = u if isinstance(u, Term) else ir.prim("U", j.cod, j.cod, fdhilb=np.asarray(u, dtype=complex))
    uj = typecheck(u_term)
    if uj.dom != j.cod or uj.cod != j.cod:
        raise TypeMismatch("unitary must act on {!r}".format(j.cod), expected=j.cod, found=uj.dom)
    if not is_unitary(evaluate(u_term, b), b):
        raise NotUnitary("local operation is not unitary")
    before = evaluate(Name(xi), b)
    after = evaluate(Compose(Tensor(Id(ir.Dual(j.dom)), u_term), Name(xi)), b)
    d1, d2 = dim(j.dom), dim(j.cod)
    return equal(reduced_first(before, d1, d2), reduced_first(after, d1, d2), b)
