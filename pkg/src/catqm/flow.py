"""Information-flow lines through networks of bipartite boxes.

A network is a set of wires and a time-ordered list of boxes, each acting on
two wires.  A *project* box is the rank-one projector onto the bipartite state
encoding its label; a *prepare* box only creates that state.  The line starts
at the input endpoint and obeys one rule: entering a box at an input it leaves
by the other input, entering at an output it leaves by the other output.

Crossing a box through its inputs pairs the line with a bra, which conjugates
the label in a fixed basis; ``phase_conjugation`` controls whether the traced
composite records that.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from catqm import ir, sampling
from catqm.backend import (
    FDHILB, Backend, MatrixValue, equal_up_to_scalar, evaluate, matrix_from_json, matrix_to_json, scalar_to_json,
)
from catqm.errors import FlowError, OrientationConflict, PathMismatch, PathStuck
from catqm.ir import Alpha, Compose, Dagger, Id, Inv, Lambda, Name, Sigma, Tensor, Term, compose

PREPARE = "prepare"
PROJECT = "project"


@dataclass(frozen=True)
class Wire:
    name: str
    dim: int


@dataclass(frozen=True)
class Box:
    kind: str
    wires: tuple[str, str]
    label: str
    src: str
    dst: str
    time: int

    def other(self, w: str) -> str:
        return self.wires[1] if w == self.wires[0] else self.wires[0]


def _literals(m: np.ndarray) -> dict:
    m = np.asarray(m)
    if m.dtype == bool:
        return {"rel": m}
    lits = {"fdhilb": m.astype(complex)}
    if np.all((m == 0) | (m == 1)):
        lits["rel"] = m.real.astype(bool)
    return lits


@dataclass
class FlowNetwork:
    wires: list[Wire]
    morphs: dict[str, np.ndarray]
    boxes: list[Box]
    input_wire: str
    input_state: np.ndarray
    output: str
    context: np.ndarray | None = None
    _by_name: dict = field(init=False, repr=False)

    def __post_init__(self):
        self._by_name = {w.name: w for w in self.wires}
        if len(self._by_name) != len(self.wires):
            raise FlowError("duplicate wire names")
        self.boxes = sorted(self.boxes, key=lambda bx: bx.time)
        times = [bx.time for bx in self.boxes]
        if len(set(times)) != len(times):
            raise FlowError("box times must be strictly ordered, got {}".format(times))
        for w in (self.input_wire, self.output):
            if w not in self._by_name:
                raise FlowError("unknown wire {!r}".format(w))
        for bx in self.boxes:
            self._check_box(bx)
        self.input_state = np.asarray(self.input_state).reshape(-1, 1)
        if self.input_state.shape[0] != self.dim(self.input_wire):
            raise FlowError("input state has length {}, wire {} has dimension {}".format(
                self.input_state.shape[0], self.input_wire, self.dim(self.input_wire)))
        if self.input_wire in self.prepared_wires():
            raise FlowError("the input wire cannot start at a prepare box")
        want = int(np.prod([self.dim(w) for w in self.context_wires()]))
        if self.context is None:
            self.context = np.ones((want, 1), dtype=self.input_state.dtype)
        self.context = np.asarray(self.context).reshape(-1, 1)
        if self.context.shape[0] != want:
            raise FlowError("context state has length {}, expected {}".format(self.context.shape[0], want))

    def _check_box(self, bx: Box) -> None:
        a, b = bx.wires
        if a == b or a not in self._by_name or b not in self._by_name:
            raise FlowError("box {!r} must reference two distinct existing wires".format(bx.label))
        if {bx.src, bx.dst} != {a, b}:
            raise FlowError("box {!r} orientation {}->{} does not match its wires".format(bx.label, bx.src, bx.dst))
        if bx.kind not in (PREPARE, PROJECT):
            raise FlowError("unknown box kind {!r}".format(bx.kind))
        if bx.label not in self.morphs:
            raise FlowError("box label {!r} has no matrix".format(bx.label))
        m = np.asarray(self.morphs[bx.label])
        if m.shape != (self.dim(bx.dst), self.dim(bx.src)):
            raise FlowError("label {!r} has shape {}, box needs {}".format(
                bx.label, m.shape, (self.dim(bx.dst), self.dim(bx.src))))
        if bx.kind == PREPARE:
            for w in bx.wires:
                if self.boxes_on(w)[0] != bx:
                    raise FlowError("prepare box {!r} must be the first box on wire {}".format(bx.label, w))

    def dim(self, w: str) -> int:
        return self._by_name[w].dim

    def obj(self, w: str) -> ir.Base:
        return ir.Base(w, self._by_name[w].dim)

    def boxes_on(self, w: str) -> list[Box]:
        return [bx for bx in self.boxes if w in bx.wires]

    def prepared_wires(self) -> set[str]:
        return {w for bx in self.boxes if bx.kind == PREPARE for w in bx.wires}

    def context_wires(self) -> list[str]:
        skip = self.prepared_wires() | {self.input_wire}
        return [w.name for w in self.wires if w.name not in skip]

    def label_term(self, bx: Box) -> ir.Prim:
        return ir.prim(bx.label, self.obj(bx.src), self.obj(bx.dst), **_literals(self.morphs[bx.label]))

    def with_times(self, times: dict[str, int]) -> FlowNetwork:
        """Copy with boxes (keyed by label) moved to new times."""
        boxes = [Box(bx.kind, bx.wires, bx.label, bx.src, bx.dst, times.get(bx.label, bx.time)) for bx in self.boxes]
        return FlowNetwork(self.wires, self.morphs, boxes, self.input_wire, self.input_state, self.output,
                           self.context)


# ---------------------------------------------------------------- boxes

def box_matrix(bx: Box, net: FlowNetwork, b: Backend = FDHILB) -> MatrixValue:
    """Projector name(f) . name(f)^dagger, or the column name(f) for a preparation."""
    psi = Name(net.label_term(bx))
    if bx.kind == PREPARE:
        return evaluate(psi, b)
    return evaluate(Compose(psi, Dagger(psi)), b)


def _box_prim(bx: Box, net: FlowNetwork, b: Backend, as_state: bool = False) -> ir.Prim:
    """The box as a primitive on the wire pair (src, dst); ``as_state`` gives name(f) alone."""
    pair = ir.TensorOb(net.obj(bx.src), net.obj(bx.dst))
    if as_state or bx.kind == PREPARE:
        return ir.prim("Psi_" + bx.label, ir.I, pair, **{b.name: evaluate(Name(net.label_term(bx)), b)})
    return ir.prim("P_" + bx.label, pair, pair, **{b.name: box_matrix(bx, net, b)})


# ---------------------------------------------------------------- tracing

@dataclass(frozen=True)
class Step:
    box: int
    label: str
    enter: str
    leave: str
    through: str  # "inputs" or "outputs"
    aligned: bool


@dataclass
class PathReport:
    steps: list[Step]
    composite: Term

    @property
    def labels(self) -> list[str]:
        return [s.label for s in self.steps]

    def to_json(self) -> dict:
        return {"path": [{"label": s.label, "from": s.enter, "to": s.leave, "through": s.through,
                          "aligned": s.aligned} for s in self.steps]}


def _derived(p: ir.Prim, transpose: bool, conjugate: bool) -> ir.Prim:
    if not (transpose or conjugate):
        return p
    lits = {}
    for backend, rows in p.literals:
        m = np.array(rows)
        if transpose:
            m = m.T
        if conjugate and backend == "fdhilb":
            m = np.conj(m)
        lits[backend] = m
    name = p.name + ("^T" if transpose else "") + ("_*" if conjugate else "")
    dom, cod = (p.cod_, p.dom_) if transpose else (p.dom_, p.cod_)
    return ir.prim(name, dom, cod, **lits)


def trace_path(net: FlowNetwork, strict: bool = True, phase_conjugation: bool = True) -> PathReport:
    """Follow the line from the input endpoint to the output endpoint."""
    index = {bx: k for k, bx in enumerate(net.boxes)}
    wire, time, up = net.input_wire, float("-inf"), True
    steps: list[Step] = []
    terms: list[Term] = []
    visited = set()
    while True:
        on_wire = net.boxes_on(wire)
        if up:
            later = [bx for bx in on_wire if bx.time > time]
            if not later:
                if wire == net.output:
                    break
                raise PathMismatch("line ends at the output endpoint of {} instead of {}".format(wire, net.output))
            bx = later[0]
            if bx.kind == PREPARE:
                raise PathStuck("line runs into prepare box {!r}, which has no inputs".format(bx.label))
            through = "inputs"
        else:
            earlier = [bx for bx in on_wire if bx.time < time]
            if not earlier:
                raise PathMismatch("line ends at the input endpoint of wire {}".format(wire))
            bx = earlier[-1]
            through = "outputs"
        if bx in visited:
            raise PathStuck("line revisits box {!r}".format(bx.label))
        visited.add(bx)
        leave = bx.other(wire)
        aligned = bx.src == wire and bx.dst == leave
        if not aligned and strict:
            raise OrientationConflict("line crosses {!r} from {} to {} against its arrow {}->{}".format(
                bx.label, wire, leave, bx.src, bx.dst))
        steps.append(Step(index[bx], bx.label, wire, leave, through, aligned))
        conj = phase_conjugation and through == "inputs"
        terms.append(_derived(net.label_term(bx), transpose=not aligned, conjugate=conj))
        wire, time, up = leave, bx.time, not up
    if not terms:
        return PathReport(steps, Id(net.obj(net.input_wire)))
    return PathReport(steps, compose(*reversed(terms)))


# ---------------------------------------------------------------- wire bookkeeping

class _Register:
    """A state I -> W_1 (x) (W_2 (x) ...) built up as a term, tracking wire order."""

    def __init__(self, net: FlowNetwork, names: list[str], state: Term):
        self.net = net
        self.names = list(names)
        self.state = state

    def ob(self, names: Sequence[str]) -> ir.ObjectType:
        return ir.tensor(*[self.net.obj(w) for w in names])

    def _swap_at(self, names: list[str], k: int) -> Term:
        if k > 0:
            return Tensor(Id(self.net.obj(names[0])), self._swap_at(names[1:], k - 1))
        a, b = self.net.obj(names[0]), self.net.obj(names[1])
        if len(names) == 2:
            return Sigma(a, b)
        rest = self.ob(names[2:])
        return compose(Inv(Alpha(b, a, rest)), Tensor(Sigma(a, b), Id(rest)), Alpha(a, b, rest))

    def permute(self, target: list[str]) -> None:
        if sorted(target) != sorted(self.names):
            raise FlowError("cannot permute {} into {}".format(self.names, target))
        for pos, w in enumerate(target):
            k = self.names.index(w)
            while k > pos:
                self.state = Compose(self._swap_at(self.names, k - 1), self.state)
                self.names[k - 1], self.names[k] = self.names[k], self.names[k - 1]
                k -= 1

    def apply(self, pair: tuple[str, str], op: Term) -> None:
        a, b = pair
        self.permute([a, b] + [w for w in self.names if w not in pair])
        if len(self.names) == 2:
            self.state = Compose(op, self.state)
            return
        A, B, rest = self.net.obj(a), self.net.obj(b), self.ob(self.names[2:])
        self.state = compose(Inv(Alpha(A, B, rest)), Tensor(op, Id(rest)), Alpha(A, B, rest), self.state)

    def prepend(self, pair: tuple[str, str], psi: Term) -> None:
        if not self.names:
            self.state = Compose(psi, self.state)
        else:
            A, B, rest = self.net.obj(pair[0]), self.net.obj(pair[1]), self.ob(self.names)
            self.state = compose(Inv(Alpha(A, B, rest)), Tensor(psi, Id(rest)), Lambda(rest), self.state)
        self.names = list(pair) + self.names


def _column(name: str, cod: ir.ObjectType, v: np.ndarray, b: Backend) -> ir.Prim:
    v = np.asarray(v).reshape(-1, 1)
    if b.ring.exact:
        return ir.prim(name, ir.I, cod, rel=v.astype(bool))
    return ir.prim(name, ir.I, cod, fdhilb=v.astype(complex))


def oracle_term(net: FlowNetwork, b: Backend = FDHILB) -> Term:
    """Every box applied in time order to phi_in (x) Phi_in, as one term."""
    phi = _column("phi_in", net.obj(net.input_wire), net.input_state, b)
    ctx = net.context_wires()
    if ctx:
        big = _column("Phi_in", ir.tensor(*[net.obj(w) for w in ctx]), net.context, b)
        reg = _Register(net, [net.input_wire] + ctx, Compose(Tensor(phi, big), Lambda(ir.I)))
    else:
        reg = _Register(net, [net.input_wire], phi)
    for bx in net.boxes:
        p = _box_prim(bx, net, b)
        if bx.kind == PREPARE:
            reg.prepend((bx.src, bx.dst), p)
        else:
            reg.apply((bx.src, bx.dst), p)
    reg.permute([w.name for w in net.wires])
    return reg.state


def final_boxes(net: FlowNetwork) -> list[Box]:
    """Boxes that close off every wire except the output."""
    finals = []
    for w in net.wires:
        if w.name == net.output:
            continue
        on = net.boxes_on(w.name)
        if not on:
            raise FlowError("wire {} is never touched, so the final state does not factor".format(w.name))
        last = on[-1]
        partner = last.other(w.name)
        if partner == net.output or net.boxes_on(partner)[-1] != last:
            raise FlowError("final box on wire {} does not close both of its wires".format(w.name))
        if last not in finals:
            finals.append(last)
    return finals


def predicted_term(net: FlowNetwork, composite: Term, b: Backend = FDHILB) -> Term:
    """Final boxes' states next to composite(phi_in) on the output wire."""
    phi = _column("phi_in", net.obj(net.input_wire), net.input_state, b)
    reg = _Register(net, [net.output], Compose(composite, phi))
    for bx in reversed(final_boxes(net)):
        reg.prepend((bx.src, bx.dst), _box_prim(bx, net, b, as_state=True))
    reg.permute([w.name for w in net.wires])
    return reg.state


@dataclass
class FlowVerdict:
    oracle_state: MatrixValue
    predicted_state: MatrixValue
    equal_up_to_scalar: bool
    scalar: object
    k_zero: bool
    path: PathReport

    @property
    def passed(self) -> bool:
        return self.equal_up_to_scalar and not self.k_zero

    def to_json(self, b: Backend = FDHILB) -> dict:
        out = {
            "labels": self.path.labels,
            "path": self.path.to_json()["path"],
            "k_zero": self.k_zero,
            "equal_up_to_scalar": self.equal_up_to_scalar,
            "scalar": scalar_to_json(self.scalar),
            "oracle": matrix_to_json(self.oracle_state, b),
            "predicted": matrix_to_json(self.predicted_state, b),
            "pass": self.passed,
        }
        return out


def verify_flow(net: FlowNetwork, b: Backend = FDHILB, strict: bool = True,
                phase_conjugation: bool = True) -> FlowVerdict:
    path = trace_path(net, strict=strict, phase_conjugation=phase_conjugation)
    oracle = evaluate(oracle_term(net, b), b)
    predicted = evaluate(predicted_term(net, path.composite, b), b)
    k_zero = all(b.ring.is_zero(v, b.tol) for v in oracle.flat)
    if k_zero:
        return FlowVerdict(oracle, predicted, False, None, True, path)
    res = equal_up_to_scalar(predicted, oracle, b)
    return FlowVerdict(oracle, predicted, res.equal, res.scalar, False, path)


# ---------------------------------------------------------------- stock networks

QUIZ_BOXES = (
    # (time, wires, label, src, dst)
    (1, ("H2", "H3"), "f6", "H2", "H3"),
    (2, ("H4", "H5"), "f8", "H4", "H5"),
    (3, ("H3", "H4"), "f7", "H3", "H4"),
    (4, ("H3", "H4"), "f4", "H4", "H3"),
    (5, ("H2", "H3"), "f5", "H3", "H2"),
    (6, ("H2", "H3"), "f2", "H2", "H3"),
    (7, ("H1", "H2"), "f1", "H1", "H2"),
    (8, ("H3", "H4"), "f3", "H3", "H4"),
)


def quiz_network(labels: dict[str, np.ndarray], phi, context=None, dim: int = 2) -> FlowNetwork:
    """The eight-projector network on wires H1..H5 with labels f1..f8."""
    wires = [Wire("H{}".format(k), dim) for k in range(1, 6)]
    boxes = [Box(PROJECT, w, lab, s, d, t) for t, w, lab, s, d in QUIZ_BOXES]
    return FlowNetwork(wires, dict(labels), boxes, "H1", phi, "H5", context)


def two_box_network(f1, f2, phi, dim: int = 2) -> FlowNetwork:
    """Prepare name(f2) on H2,H3, then project on name(f1) over H1,H2."""
    wires = [Wire("H1", dim), Wire("H2", dim), Wire("H3", dim)]
    boxes = [Box(PREPARE, ("H2", "H3"), "f2", "H2", "H3", 1), Box(PROJECT, ("H1", "H2"), "f1", "H1", "H2", 2)]
    return FlowNetwork(wires, {"f1": f1, "f2": f2}, boxes, "H1", phi, "H3")


def rel_chain_network(r1: np.ndarray, r2: np.ndarray, s_in: int, context=None) -> FlowNetwork:
    """(P_R1 (x) 1) . (1 (x) P_R2) on X (x) Y (x) Z, started from the singleton {s_in}."""
    nx, ny = r1.shape[1], r1.shape[0]
    nz = r2.shape[0]
    wires = [Wire("X", nx), Wire("Y", ny), Wire("Z", nz)]
    boxes = [Box(PROJECT, ("Y", "Z"), "R2", "Y", "Z", 1), Box(PROJECT, ("X", "Y"), "R1", "X", "Y", 2)]
    phi = np.zeros((nx, 1), dtype=bool)
    phi[s_in] = True
    ctx = np.ones((ny * nz, 1), dtype=bool) if context is None else context
    return FlowNetwork(wires, {"R1": np.asarray(r1, bool), "R2": np.asarray(r2, bool)}, boxes, "X", phi, "Z", ctx)


# ---------------------------------------------------------------- flow files

def _random_matrix(gen, rows, cols, b: Backend):
    if b.ring.exact:
        return sampling.relation(gen, rows, cols)
    return sampling.complex_matrix(gen, rows, cols)


def _vector(spec, n: int, gen, b: Backend, default_ones: bool):
    if spec is None and default_ones:
        return np.ones((n, 1), dtype=bool if b.ring.exact else complex)
    if spec is None or spec == "random":
        if b.ring.exact:
            v = sampling.relation(gen, n, 1)
            v[gen.integers(n)] = True
            return v
        return sampling.state(gen, n)
    return matrix_from_json(spec, b, n, 1)


def load_flow(source, b: Backend = FDHILB, seed: int = 0) -> FlowNetwork:
    """Read a flow file (path or parsed dict); ``"random"`` entries are drawn from ``seed``."""
    if isinstance(source, (str, Path)):
        data = json.loads(Path(source).read_text(encoding="utf-8"))
    else:
        data = source
    gen = sampling.rng(seed)
    wires = [Wire(w["name"], int(w["dim"])) for w in data["wires"]]
    dims = {w.name: w.dim for w in wires}
    boxes = [Box(bx.get("kind", PROJECT), tuple(bx["wires"]), bx["label"], bx["from"], bx["to"], int(bx["time"]))
             for bx in data["boxes"]]
    shapes = {}
    for bx in boxes:
        shapes.setdefault(bx.label, (dims.get(bx.dst, 0), dims.get(bx.src, 0)))
    morphs = {}
    given = data.get("morphs", {})
    for label in sorted(shapes):
        rows, cols = shapes[label]
        spec = given.get(label, "random")
        if spec == "random":
            morphs[label] = _random_matrix(gen, rows, cols, b)
        elif spec == "identity":
            morphs[label] = np.eye(rows, cols, dtype=bool if b.ring.exact else complex)
        else:
            morphs[label] = matrix_from_json(spec, b, rows, cols)
    inp = data["input"]
    phi = _vector(inp.get("state", "random"), dims[inp["wire"]], gen, b, default_ones=False)
    net = FlowNetwork(wires, morphs, boxes, inp["wire"], phi, data["output"])
    n_ctx = int(np.prod([dims[w] for w in net.context_wires()]))
    net.context = _vector(data.get("context"), n_ctx, gen, b, default_ones=True)
    return net


def dump_flow(net: FlowNetwork, b: Backend = FDHILB) -> dict:
    return {
        "wires": [{"name": w.name, "dim": w.dim} for w in net.wires],
        "morphs": {k: matrix_to_json(np.asarray(v), b) for k, v in sorted(net.morphs.items())},
        "boxes": [{"kind": bx.kind, "wires": list(bx.wires), "label": bx.label, "from": bx.src, "to": bx.dst,
                   "time": bx.time} for bx in net.boxes],
        "input": {"wire": net.input_wire, "state": matrix_to_json(net.input_state, b)},
        "context": matrix_to_json(net.context, b),
        "output": net.output,
    }
