"""The ``.cq`` protocol language: lexer, parser, printer, elaborator, assertion runner.

    object Q = I (+) I
    morph b2 : Q -> Q = [[0, 1], [1, 0]]
    term loop = eps Q . sigma Q*, Q . eta Q
    assert loop ~= scal 2 (id I)

Object expressions: postfix ``*`` binds tightest, then ``(x)`` (left
associative), then ``(+)``, which is read as one n-ary, right-nested sum so
that ``p 2 of A (+) B (+) C`` names the third summand.  Term expressions:
prefix operators bind tightest, then ``(x)``, then composition ``g . f``.
Object arguments inside a term extend greedily as long as the next operand is
an object.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from catqm import ir
from catqm.backend import FDHILB, Backend, equal, equal_up_to_scalar, evaluate, scalar_to_json
from catqm.errors import (
    CatQMError, DuplicateIdentifier, LiteralError, ParseError, ShapeMismatch, TypeMismatch, UnknownIdentifier,
)

KEYWORDS = frozenset("""object morph term assert I id dagger transpose conj eta eps name coname pair copair of
    lambda rho sigma alpha dist inv scal""".split())
UNARY = ("dagger", "transpose", "conj", "name", "coname", "inv")
STRUCT_ARITY = {"id": 1, "eta": 1, "eps": 1, "lambda": 1, "rho": 1, "sigma": 2, "alpha": 3, "dist": 3}

# ---------------------------------------------------------------- lexer

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+) | (?P<nl>\n) | (?P<comment>\#[^\n]*)
  | (?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)(?P<imag>i)?(?![A-Za-z0-9_])
  | (?P<id>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>\(x\)|\(\+\)|->|==|~=|[()\[\],.:=*+-])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # ID NUM INT IMAG SYM EOF
    text: str
    pos: tuple[int, int]


def tokenize(src: str) -> list[Token]:
    out, i, line, col0 = [], 0, 1, 0
    while i < len(src):
        m = _TOKEN.match(src, i)
        if m is None:
            raise ParseError("unexpected character {!r}".format(src[i]), pos=(line, i - col0 + 1))
        pos = (line, i - col0 + 1)
        if m.group("nl"):
            line, col0 = line + 1, m.end()
        elif m.group("num"):
            text = m.group("num")
            if m.group("imag"):
                out.append(Token("IMAG", text, pos))
            else:
                out.append(Token("INT" if text.isdigit() else "NUM", text, pos))
        elif m.group("id"):
            out.append(Token("ID", m.group("id"), pos))
        elif m.group("sym"):
            out.append(Token("SYM", m.group("sym"), pos))
        i = m.end()
    out.append(Token("EOF", "", (line, i - col0 + 1)))
    return out


# ---------------------------------------------------------------- surface syntax

def _pos():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class OUnit:
    pos: tuple | None = _pos()


@dataclass(frozen=True)
class ORef:
    name: str
    pos: tuple | None = _pos()


@dataclass(frozen=True)
class ODual:
    inner: object
    pos: tuple | None = _pos()


@dataclass(frozen=True)
class OTensor:
    left: object
    right: object
    pos: tuple | None = _pos()


@dataclass(frozen=True)
class OSum:
    items: tuple
    pos: tuple | None = _pos()


ObjExpr = Union[OUnit, ORef, ODual, OTensor, OSum]


@dataclass(frozen=True)
class TRef:
    name: str
    pos: tuple | None = _pos()


@dataclass(frozen=True)
class TCompose:
    g: object
    f: object
    pos: tuple | None = _pos()


@dataclass(frozen=True)
class TTensor:
    left: object
    right: object
    pos: tuple | None = _pos()


@dataclass(frozen=True)
class TUnary:
    op: str
    arg: object
    pos: tuple | None = _pos()


@dataclass(frozen=True)
class TStruct:
    op: str
    objs: tuple
    pos: tuple | None = _pos()


@dataclass(frozen=True)
class TFamily:
    op: str  # pair | copair
    items: tuple
    pos: tuple | None = _pos()


@dataclass(frozen=True)
class TIndex:
    op: str  # p | q
    index: int
    obj: object
    pos: tuple | None = _pos()


@dataclass(frozen=True)
class TScal:
    value: complex
    arg: object
    pos: tuple | None = _pos()


@dataclass(frozen=True)
class ObjectDecl:
    name: str
    obj: object
    pos: tuple | None = _pos()


@dataclass(frozen=True)
class MorphDecl:
    name: str
    dom: object
    cod: object
    matrix: tuple  # rows of complex
    pos: tuple | None = _pos()


@dataclass(frozen=True)
class TermDecl:
    name: str
    term: object
    pos: tuple | None = _pos()


@dataclass(frozen=True)
class Assertion:
    lhs: object
    op: str  # "==" or "~="
    rhs: object
    pos: tuple | None = _pos()


@dataclass(frozen=True)
class Program:
    statements: tuple
    symbols: dict = field(default_factory=dict, compare=False)


# ---------------------------------------------------------------- parser

class _Parser:
    def __init__(self, src: str):
        self.toks = tokenize(src)
        self.i = 0
        self.symbols: dict[str, str] = {}

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t.kind in ("SYM", "ID") and t.text == text

    def advance(self) -> Token:
        t = self.peek()
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            t = self.peek()
            raise ParseError("expected {!r}, found {!r}".format(text, t.text or "end of input"), pos=t.pos,
                             expected=text)
        return self.advance()

    def fresh_id(self) -> Token:
        t = self.peek()
        if t.kind != "ID" or t.text in KEYWORDS:
            raise ParseError("expected an identifier, found {!r}".format(t.text), pos=t.pos, expected="identifier")
        if t.text in self.symbols:
            raise DuplicateIdentifier("{!r} is already declared".format(t.text), pos=t.pos)
        return self.advance()

    # statements
    def program(self) -> Program:
        stmts = []
        while self.peek().kind != "EOF":
            stmts.append(self.statement())
        return Program(tuple(stmts), dict(self.symbols))

    def statement(self):
        t = self.peek()
        if self.at("object"):
            self.advance()
            name = self.fresh_id()
            self.expect("=")
            o = self.oexpr(in_term=False)
            self.symbols[name.text] = "object"
            return ObjectDecl(name.text, o, pos=t.pos)
        if self.at("morph"):
            self.advance()
            name = self.fresh_id()
            self.expect(":")
            dom = self.oexpr(in_term=False)
            self.expect("->")
            cod = self.oexpr(in_term=False)
            self.expect("=")
            mat = self.matrix()
            self.symbols[name.text] = "morph"
            return MorphDecl(name.text, dom, cod, mat, pos=t.pos)
        if self.at("term"):
            self.advance()
            name = self.fresh_id()
            self.expect("=")
            body = self.texpr()
            self.symbols[name.text] = "term"
            return TermDecl(name.text, body, pos=t.pos)
        if self.at("assert"):
            self.advance()
            lhs = self.texpr()
            op = self.peek()
            if not (self.at("==") or self.at("~=")):
                raise ParseError("expected '==' or '~=', found {!r}".format(op.text), pos=op.pos, expected="== or ~=")
            self.advance()
            rhs = self.texpr()
            return Assertion(lhs, op.text, rhs, pos=t.pos)
        raise ParseError("expected a statement, found {!r}".format(t.text), pos=t.pos,
                         expected="object, morph, term or assert")

    # objects
    def oexpr(self, in_term: bool):
        first = self.otensor(in_term)
        items = [first]
        while self.at("(+)"):
            nxt = self._continue(lambda: self.otensor(in_term), in_term)
            if nxt is None:
                break
            items.append(nxt)
        return first if len(items) == 1 else OSum(tuple(items), pos=first.pos)

    def otensor(self, in_term: bool):
        left = self.opostfix(in_term)
        while self.at("(x)"):
            right = self._continue(lambda: self.opostfix(in_term), in_term)
            if right is None:
                break
            left = OTensor(left, right, pos=left.pos)
        return left

    def _continue(self, parse_operand, in_term: bool):
        """Consume a binary object operator and its operand; inside a term, back off if the operand is not an object."""
        mark = self.i
        self.advance()
        if not in_term:
            return parse_operand()
        try:
            return parse_operand()
        except (ParseError, UnknownIdentifier):
            self.i = mark
            return None

    def opostfix(self, in_term: bool):
        o = self.oprimary(in_term)
        while self.at("*"):
            t = self.advance()
            o = ODual(o, pos=t.pos)
        return o

    def oprimary(self, in_term: bool):
        t = self.peek()
        if self.at("I"):
            self.advance()
            return OUnit(pos=t.pos)
        if self.at("("):
            self.advance()
            o = self.oexpr(in_term=False)
            self.expect(")")
            return o
        if t.kind == "ID" and t.text not in KEYWORDS:
            kind = self.symbols.get(t.text)
            if kind is None:
                raise UnknownIdentifier("{!r} is not declared".format(t.text), pos=t.pos)
            if kind != "object":
                raise ParseError("expected an object, found {} {!r}".format(kind, t.text), pos=t.pos, expected="object")
            self.advance()
            return ORef(t.text, pos=t.pos)
        raise ParseError("expected an object, found {!r}".format(t.text or "end of input"), pos=t.pos,
                         expected="object")

    # terms
    def texpr(self):
        g = self.ttensor()
        while self.at("."):
            self.advance()
            f = self.ttensor()
            g = TCompose(g, f, pos=g.pos)
        return g

    def ttensor(self):
        left = self.tunary()
        while self.at("(x)"):
            self.advance()
            right = self.tunary()
            left = TTensor(left, right, pos=left.pos)
        return left

    def _is_index(self) -> bool:
        t = self.peek()
        return t.kind == "ID" and t.text in ("p", "q") and self.peek(1).kind == "INT"

    def tunary(self):
        t = self.peek()
        if t.kind == "ID" and t.text in UNARY:
            self.advance()
            return TUnary(t.text, self.tunary(), pos=t.pos)
        if self.at("scal"):
            self.advance()
            s = self.scalar()
            return TScal(s, self.tunary(), pos=t.pos)
        if t.kind == "ID" and t.text in STRUCT_ARITY:
            self.advance()
            objs = [self.oexpr(in_term=True)]
            for _ in range(STRUCT_ARITY[t.text] - 1):
                self.expect(",")
                objs.append(self.oexpr(in_term=True))
            return TStruct(t.text, tuple(objs), pos=t.pos)
        if self.at("pair") or self.at("copair"):
            self.advance()
            self.expect("[")
            items = [self.texpr()]
            while self.at(","):
                self.advance()
                items.append(self.texpr())
            self.expect("]")
            return TFamily(t.text, tuple(items), pos=t.pos)
        if self._is_index():
            self.advance()
            k = int(self.advance().text)
            self.expect("of")
            return TIndex(t.text, k, self.oexpr(in_term=True), pos=t.pos)
        if self.at("("):
            self.advance()
            body = self.texpr()
            self.expect(")")
            return body
        if t.kind == "ID" and t.text not in KEYWORDS:
            kind = self.symbols.get(t.text)
            if kind is None:
                raise UnknownIdentifier("{!r} is not declared".format(t.text), pos=t.pos)
            if kind == "object":
                raise ParseError("expected a term, found object {!r}".format(t.text), pos=t.pos, expected="term")
            self.advance()
            return TRef(t.text, pos=t.pos)
        raise ParseError("expected a term, found {!r}".format(t.text or "end of input"), pos=t.pos, expected="term")

    # literals
    def _signed(self) -> tuple[float, bool]:
        sign = 1.0
        if self.at("+") or self.at("-"):
            sign = -1.0 if self.advance().text == "-" else 1.0
        t = self.peek()
        if t.kind not in ("NUM", "INT", "IMAG"):
            raise ParseError("expected a number, found {!r}".format(t.text), pos=t.pos, expected="number")
        self.advance()
        return sign * float(t.text), t.kind == "IMAG"

    def scalar(self) -> complex:
        v, imag = self._signed()
        if imag:
            return complex(0.0, v)
        if (self.at("+") or self.at("-")) and self.peek(1).kind == "IMAG":
            w, _ = self._signed()
            return complex(v, w)
        return complex(v, 0.0)

    def matrix(self) -> tuple:
        start = self.expect("[")
        rows = [self.row()]
        while self.at(","):
            self.advance()
            rows.append(self.row())
        self.expect("]")
        if len({len(r) for r in rows}) != 1:
            raise ParseError("ragged matrix literal", pos=start.pos, expected="rows of equal length")
        return tuple(rows)

    def row(self) -> tuple:
        self.expect("[")
        vals = [self.scalar()]
        while self.at(","):
            self.advance()
            vals.append(self.scalar())
        self.expect("]")
        return tuple(vals)


def parse(src: str) -> Program:
    return _Parser(src).program()


# ---------------------------------------------------------------- printer

def _fmt_scalar(z: complex) -> str:
    z = complex(z)
    if z.imag == 0:
        return repr(float(z.real))
    sign = "-" if z.imag < 0 else "+"
    return "{}{}{}i".format(repr(float(z.real)), sign, repr(abs(float(z.imag))))


def show_obj(o) -> str:
    match o:
        case OUnit():
            return "I"
        case ORef(name=n):
            return n
        case ODual(inner=a):
            return "({})*".format(show_obj(a))
        case OTensor(left=a, right=b):
            return "({} (x) {})".format(show_obj(a), show_obj(b))
        case OSum(items=xs):
            return "(" + " (+) ".join(show_obj(x) for x in xs) + ")"
    raise TypeError("not an object expression: {!r}".format(o))


def show_term(t) -> str:
    match t:
        case TRef(name=n):
            return n
        case TCompose(g=g, f=f):
            return "({} . {})".format(show_term(g), show_term(f))
        case TTensor(left=a, right=b):
            return "({} (x) {})".format(show_term(a), show_term(b))
        case TUnary(op=op, arg=a):
            return "({} {})".format(op, show_term(a))
        case TStruct(op=op, objs=objs):
            return "({} {})".format(op, ", ".join(show_obj(o) for o in objs))
        case TFamily(op=op, items=xs):
            return "({} [{}])".format(op, ", ".join(show_term(x) for x in xs))
        case TIndex(op=op, index=k, obj=o):
            return "({} {} of {})".format(op, k, show_obj(o))
        case TScal(value=s, arg=a):
            return "(scal {} {})".format(_fmt_scalar(s), show_term(a))
    raise TypeError("not a term expression: {!r}".format(t))


def show_statement(s) -> str:
    match s:
        case ObjectDecl(name=n, obj=o):
            return "object {} = {}".format(n, show_obj(o))
        case MorphDecl(name=n, dom=d, cod=c, matrix=m):
            rows = ", ".join("[" + ", ".join(_fmt_scalar(v) for v in r) + "]" for r in m)
            return "morph {} : {} -> {} = [{}]".format(n, show_obj(d), show_obj(c), rows)
        case TermDecl(name=n, term=t):
            return "term {} = {}".format(n, show_term(t))
        case Assertion(lhs=a, op=op, rhs=b):
            return "assert {} {} {}".format(show_term(a), op, show_term(b))
    raise TypeError("not a statement: {!r}".format(s))


def pretty(p: Program) -> str:
    return "".join(show_statement(s) + "\n" for s in p.statements)


# ---------------------------------------------------------------- elaboration

@dataclass
class ElabAssertion:
    index: int
    lhs: ir.Term
    op: str
    rhs: ir.Term
    pos: tuple | None
    text: str


@dataclass
class Elaboration:
    backend: str
    objects: dict = field(default_factory=dict)
    terms: dict = field(default_factory=dict)  # morphs and term declarations
    judgments: dict = field(default_factory=dict)
    assertions: list = field(default_factory=list)


def _located(err: CatQMError, pos, decl) -> CatQMError:
    if err.pos is None:
        err.pos = pos
    if err.decl is None:
        err.decl = decl
    return err


class _Elaborator:
    def __init__(self, b: Backend):
        self.b = b
        self.out = Elaboration(b.name)
        self.decl = None

    def obj(self, o) -> ir.ObjectType:
        match o:
            case OUnit():
                return ir.I
            case ORef(name=n):
                return self.out.objects[n]
            case ODual(inner=a):
                return ir.Dual(self.obj(a))
            case OTensor(left=a, right=c):
                return ir.TensorOb(self.obj(a), self.obj(c))
            case OSum(items=xs):
                return ir.biproduct(*[self.obj(x) for x in xs])
        raise TypeError(o)

    def summands(self, o) -> tuple:
        return tuple(self.obj(x) for x in o.items) if isinstance(o, OSum) else (self.obj(o),)

    def scalar(self, z: complex, pos):
        try:
            return self.b.ring.coerce(z)
        except CatQMError as e:
            raise _located(e, pos, self.decl)

    def term(self, t) -> ir.Term:
        out = self._build(t)
        try:
            ir.typecheck(out)
        except CatQMError as e:
            raise _located(e, t.pos, self.decl)
        return out

    def _build(self, t) -> ir.Term:
        match t:
            case TRef(name=n):
                return self.out.terms[n]
            case TCompose(g=g, f=f):
                return ir.Compose(self.term(g), self.term(f))
            case TTensor(left=a, right=c):
                return ir.Tensor(self.term(a), self.term(c))
            case TUnary(op=op, arg=a):
                ctor = {"dagger": ir.Dagger, "transpose": ir.Transpose, "conj": ir.Conjugate, "name": ir.Name,
                        "coname": ir.Coname, "inv": ir.Inv}[op]
                return ctor(self.term(a))
            case TStruct(op=op, objs=objs):
                ctor = {"id": ir.Id, "eta": ir.Eta, "eps": ir.Eps, "lambda": ir.Lambda, "rho": ir.Rho,
                        "sigma": ir.Sigma, "alpha": ir.Alpha, "dist": ir.Dist}[op]
                return ctor(*[self.obj(o) for o in objs])
            case TFamily(op=op, items=xs):
                ctor = ir.Pairing if op == "pair" else ir.Copairing
                return ctor(tuple(self.term(x) for x in xs))
            case TIndex(op=op, index=k, obj=o):
                return (ir.Proj if op == "p" else ir.Inj)(k, self.summands(o))
            case TScal(value=s, arg=a):
                return ir.ScalarMul(self.scalar(s, t.pos), self.term(a))
        raise TypeError(t)

    def morph(self, s: MorphDecl) -> ir.Prim:
        dom, cod = self.obj(s.dom), self.obj(s.cod)
        rows = np.array(s.matrix, dtype=complex)
        if rows.shape != (ir.dim(cod), ir.dim(dom)):
            raise ShapeMismatch("matrix is {}x{} but {} -> {} needs {}x{}".format(
                *rows.shape, dom, cod, ir.dim(cod), ir.dim(dom)), pos=s.pos, decl=s.name)
        r = self.b.ring
        if r.exact:
            lit = np.array([[self.scalar(v, s.pos) for v in row] for row in rows], dtype=bool)
            inverse = None
            if rows.shape[0] == rows.shape[1] and _is_perm(lit):
                inverse = lit.T
        else:
            lit = rows
            inverse = None
            if rows.shape[0] == rows.shape[1] and abs(np.linalg.det(rows)) > self.b.tol:
                inverse = np.linalg.inv(rows)
        kw = {self.b.name: lit}
        if inverse is not None:
            return ir.prim(s.name, dom, cod, invertible=True, inverse={self.b.name: inverse}, **kw)
        return ir.prim(s.name, dom, cod, **kw)

    def run(self, p: Program) -> Elaboration:
        for k, s in enumerate(p.statements):
            self.decl = getattr(s, "name", "assert #{}".format(k + 1))
            try:
                self.statement(s)
            except CatQMError as e:
                raise _located(e, s.pos, self.decl)
        return self.out

    def statement(self, s) -> None:
        match s:
            case ObjectDecl(name=n, obj=o):
                self.out.objects[n] = ir.Base(n, ir.dim(self.obj(o)))
            case MorphDecl(name=n):
                m = self.morph(s)
                self.out.terms[n] = m
                self.out.judgments[n] = ir.typecheck(m)
            case TermDecl(name=n, term=t):
                term = self.term(t)
                self.out.terms[n] = term
                self.out.judgments[n] = ir.typecheck(term)
            case Assertion(lhs=a, op=op, rhs=c):
                lhs, rhs = self.term(a), self.term(c)
                jl, jr = ir.typecheck(lhs), ir.typecheck(rhs)
                if jl != jr:
                    raise TypeMismatch("assertion sides have types {!r} and {!r}".format(jl, jr),
                                       expected=jl, found=jr, pos=s.pos)
                idx = len(self.out.assertions) + 1
                self.out.assertions.append(ElabAssertion(idx, lhs, op, rhs, s.pos, show_statement(s)))


def _is_perm(m: np.ndarray) -> bool:
    return bool(np.all(m.sum(axis=0) == 1) and np.all(m.sum(axis=1) == 1))


def elaborate(p: Program, b: Backend = FDHILB) -> Elaboration:
    """Typecheck every declaration in order; errors carry the declaration and position."""
    return _Elaborator(b).run(p)


@dataclass
class AssertionResult:
    index: int
    line: int | None
    op: str
    passed: bool
    scalar: object
    text: str


@dataclass
class AssertionReport:
    backend: str
    results: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_json(self) -> dict:
        return {
            "backend": self.backend,
            "assertions": [{"i": r.index, "line": r.line, "op": r.op, "pass": r.passed,
                            "scalar": scalar_to_json(r.scalar), "text": r.text} for r in self.results],
            "pass": self.passed,
        }


def run_asserts(p: Program | Elaboration, b: Backend = FDHILB) -> AssertionReport:
    """Evaluate each assertion; nothing runs unless the whole program elaborated."""
    elab = p if isinstance(p, Elaboration) else elaborate(p, b)
    results = []
    for a in elab.assertions:
        try:
            x, y = evaluate(a.lhs, b), evaluate(a.rhs, b)
        except CatQMError as e:
            raise _located(e, a.pos, "assert #{}".format(a.index))
        if a.op == "==":
            ok = equal(x, y, b)
            s = b.ring.one if ok else None
        else:
            res = equal_up_to_scalar(x, y, b)
            ok, s = res.equal, res.scalar
        results.append(AssertionResult(a.index, a.pos[0] if a.pos else None, a.op, ok, s, a.text))
    return AssertionReport(b.name, results)
