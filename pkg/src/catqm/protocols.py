"""Bell constants, teleportation, entanglement swapping, gate teleportation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from catqm import ir
from catqm.backend import FDHILB, Backend, MatrixValue, equal, equal_up_to_scalar, evaluate, scalar_to_json, vec
from catqm.errors import NotUnitary, TypeMismatch
from catqm.ir import (
    Alpha, Coname, Compose, Dagger, Id, Inv, Lambda, Name, Pairing, Rho, ScalarMul, Tensor, Term, compose,
    dim, typecheck,
)
from catqm.measurement import SpectralDecomposition, is_unitary

Q = ir.Base("Q", 2)
SQRT_HALF = 1 / np.sqrt(2)

EXACT = "exact"
UP_TO_SCALAR = "up-to-scalar"
PER_BRANCH = "per-branch-up-to-scalar"

BETA = (
    np.array([[1, 0], [0, 1]]),
    np.array([[0, 1], [1, 0]]),
    np.array([[1, 0], [0, -1]]),
    np.array([[0, -1], [1, 0]]),
)


@dataclass(frozen=True)
class BellConstants:
    states: tuple[np.ndarray, ...]
    betas: tuple[ir.Prim, ...]
    corrections: tuple[Term, ...]


def beta(i: int) -> ir.Prim:
    """beta_{i+1} with its inverse and its boolean support attached."""
    m = BETA[i].astype(complex)
    return ir.prim("beta{}".format(i + 1), Q, Q, fdhilb=m, rel=m != 0,
                   inverse={"fdhilb": np.linalg.inv(m), "rel": (m != 0).T})


def bell_constants() -> BellConstants:
    states = tuple(np.array(s, dtype=complex).reshape(-1, 1) * SQRT_HALF for s in (
        [1, 0, 0, 1], [0, 1, 1, 0], [1, 0, 0, -1], [0, 1, -1, 0]))
    betas = tuple(beta(i) for i in range(4))
    return BellConstants(states, betas, tuple(Inv(b) for b in betas))


def bell_decomposition() -> SpectralDecomposition:
    """Bell-basis measurement on Q (x) Q as a unitary into four copies of I."""
    rows = np.vstack([vec(b).T * SQRT_HALF for b in BETA]).conj()
    u = ir.prim("bell", ir.TensorOb(Q, Q), ir.biproduct(*[ir.I] * 4), fdhilb=rows, invertible=True,
                inverse={"fdhilb": rows.conj().T})
    return SpectralDecomposition(u, (ir.I,) * 4).validate()


# ---------------------------------------------------------------- specs and reports

@dataclass(frozen=True)
class ProtocolSpec:
    name: str
    lhs: Term
    rhs: Term
    comparison: str = EXACT
    branches: int = 1
    weight: float | None = None  # expected |s|^2 per branch, when pinned
    backends: tuple[str, ...] = ("fdhilb",)

    def __post_init__(self):
        jl, jr = typecheck(self.lhs), typecheck(self.rhs)
        if jl != jr:
            raise TypeMismatch("protocol sides disagree: {!r} vs {!r}".format(jl, jr), expected=jl, found=jr)


@dataclass
class BranchResult:
    i: int
    passed: bool
    scalar: object = None


@dataclass
class Report:
    protocol: str
    backend: str
    branches: list[BranchResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(br.passed for br in self.branches)

    def to_json(self) -> dict:
        return {
            "protocol": self.protocol,
            "backend": self.backend,
            "branches": [{"i": br.i, "pass": br.passed, "scalar": scalar_to_json(br.scalar)} for br in self.branches],
            "pass": self.passed,
        }


def _blocks(m: MatrixValue, comps: Sequence[ir.ObjectType]) -> list[MatrixValue]:
    out, off = [], 0
    for c in comps:
        d = dim(c)
        out.append(m[off:off + d])
        off += d
    return out


def verify(spec: ProtocolSpec, b: Backend = FDHILB) -> Report:
    lhs, rhs = evaluate(spec.lhs, b), evaluate(spec.rhs, b)
    comps = ir.components(typecheck(spec.lhs).cod, spec.branches)
    report = Report(spec.name, b.name)
    for i, (lb, rb) in enumerate(zip(_blocks(lhs, comps), _blocks(rhs, comps)), 1):
        if spec.comparison == EXACT:
            ok = equal(lb, rb, b)
            report.branches.append(BranchResult(i, ok, b.ring.one if ok else None))
            continue
        res = equal_up_to_scalar(lb, rb, b)
        ok = res.equal
        if ok and spec.weight is not None and not b.ring.exact:
            ok = abs(abs(res.scalar) ** 2 - spec.weight) < b.tol
        report.branches.append(BranchResult(i, ok, res.scalar))
    return report


# ---------------------------------------------------------------- teleportation

def _half(t: Term, normalized: bool) -> Term:
    return ScalarMul(SQRT_HALF, t) if normalized else t


def epr_stage(a: ir.ObjectType, g: Term | None = None, normalized: bool = False) -> Term:
    """(1 (x) name(g)) . rho : A -> A (x) (A* (x) A)."""
    g = Id(a) if g is None else g
    return Compose(Tensor(Id(a), _half(Name(g), normalized)), Rho(a))


def bell_measurement(normalized: bool = False) -> Term:
    """<coname(beta_i)>_i : Q (x) Q* -> I (+) I (+) I (+) I."""
    return Pairing(tuple(_half(Coname(beta(i)), normalized) for i in range(4)))


def classical_communication(a: ir.ObjectType = Q, n: int = 4) -> Term:
    """(+)lambda^-1 . DIST : (I (+) ... (+) I) (x) A -> A (+) ... (+) A."""
    return Compose(ir.biproduct_map([Inv(Lambda(a))] * n), ir.dist_left([ir.I] * n, a))


def teleportation_pipeline(corrections: Sequence[Term], g: Term | None = None, normalized: bool = False) -> Term:
    return compose(
        ir.biproduct_map(list(corrections)),
        classical_communication(),
        Tensor(bell_measurement(normalized), Id(Q)),
        Alpha(Q, ir.Dual(Q), Q),
        epr_stage(Q, g, normalized),
    )


def teleportation_spec(normalized: bool = False, corrections: Sequence[Term] | None = None) -> ProtocolSpec:
    corr = corrections if corrections is not None else bell_constants().corrections
    lhs = Pairing((Id(Q),) * 4)
    rhs = teleportation_pipeline(corr, normalized=normalized)
    name = "teleportation" + ("-normalized" if normalized else "")
    if normalized:
        return ProtocolSpec(name, lhs, rhs, PER_BRANCH, 4, weight=0.25)
    return ProtocolSpec(name, lhs, rhs, EXACT, 4, backends=("fdhilb", "rel"))


def branch_without_correction(i: int, normalized: bool = False) -> Term:
    """Branch i of the pipeline before the unitary correction, Q -> Q."""
    return compose(
        Inv(Lambda(Q)),
        Tensor(_half(Coname(beta(i)), normalized), Id(Q)),
        Alpha(Q, ir.Dual(Q), Q),
        epr_stage(Q, None, normalized),
    )


def compositionality_term(f1: Term, f2: Term) -> Term:
    """lambda^-1 . (coname f1 (x) 1) . alpha . (1 (x) name f2) . rho : A -> C."""
    j1, j2 = typecheck(f1), typecheck(f2)
    if j1.cod != j2.dom:
        raise TypeMismatch("f1 codomain {!r} is not f2 domain {!r}".format(j1.cod, j2.dom),
                           expected=j2.dom, found=j1.cod)
    a, bb, c = j1.dom, j1.cod, j2.cod
    return compose(
        Inv(Lambda(c)),
        Tensor(Coname(f1), Id(c)),
        Alpha(a, ir.Dual(bb), c),
        Tensor(Id(a), Name(f2)),
        Rho(a),
    )


def compositionality_spec(f1: Term, f2: Term) -> ProtocolSpec:
    return ProtocolSpec("compositionality", Compose(f2, f1), compositionality_term(f1, f2), EXACT, 1,
                        backends=("fdhilb", "rel"))


def compositionality_check(f1: Term, f2: Term, b: Backend = FDHILB) -> bool:
    return equal(evaluate(compositionality_term(f1, f2), b), evaluate(Compose(f2, f1), b), b)


# ---------------------------------------------------------------- swapping and gates

def entanglement_swap_pipeline(corrections: Sequence[Term]) -> Term:
    """Two EPR names, Bell coname branches on the middle pair, corrections on the last wire.

    I -> (Q* (x) Q) (x) (Q* (x) Q) -> Q* (x) ((Q (x) Q*) (x) Q) -> Q* (x) ((+)I (x) Q)
      -> Q* (x) (+)Q -> (+)(Q* (x) Q) -> (+)(Q* (x) Q) corrected.
    """
    qs = ir.Dual(Q)
    pair = ir.TensorOb(qs, Q)
    n = len(corrections)
    prepare = compose(Tensor(Name(Id(Q)), Name(Id(Q))), Lambda(ir.I))
    regroup = compose(Tensor(Id(qs), Alpha(Q, qs, Q)), Inv(Alpha(qs, Q, pair)))
    measure = Tensor(Id(qs), Tensor(bell_measurement(), Id(Q)))
    communicate = Tensor(Id(qs), classical_communication(Q, n))
    spread = ir.dist_n(qs, [Q] * n)
    correct = ir.biproduct_map([Tensor(Id(qs), c) for c in corrections])
    return compose(correct, spread, communicate, measure, regroup, prepare)


def entanglement_swap_spec() -> ProtocolSpec:
    lhs = Pairing((Name(Id(Q)),) * 4)
    rhs = entanglement_swap_pipeline(bell_constants().corrections)
    return ProtocolSpec("entanglement-swap", lhs, rhs, PER_BRANCH, 4)


def gate_teleportation_spec(g: Term, b: Backend = FDHILB) -> ProtocolSpec:
    """Teleport through name(g); branch i is corrected by g . beta_i^-1 . g^-1."""
    j = typecheck(g)
    if j.dom != Q or j.cod != Q:
        raise TypeMismatch("gate must be an endomorphism of Q", expected=Q, found=j.dom)
    if not is_unitary(evaluate(g, b), b):
        raise NotUnitary("gate is not unitary")
    corr = [compose(g, Inv(beta(i)), Dagger(g)) for i in range(4)]
    lhs = Pairing((g,) * 4)
    rhs = teleportation_pipeline(corr, g=g)
    return ProtocolSpec("gate-teleportation", lhs, rhs, PER_BRANCH, 4)
