"""AST, parser, pretty-printer and typechecker for the quantum while-language.

Surface syntax (whitespace-insensitive, ``//`` starts a line comment)::

    def W := load "w.qmat.json" end
    def pf := proof [q1 q2] :
        { I[q1] };
        [q1 q2] :=0;
        { inv: N[q1 q2] };
        while M[q1 q2] do
            ( [q1 q2] *= W1; [q1 q2] *= W2 # [q1 q2] *= W2; [q1 q2] *= W1 )
        end;
        { Zero[q1] }
    end
    show pf end

``#`` (or ``□``) separates the branches of a nondeterministic choice. Nested
choices are flattened, so ``(a # (b # c))`` and ``((a # b) # c)`` give the
same node.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Union

import numpy as np

from .errors import (
    ArityMismatch,
    DisjointnessError,
    DuplicateDefinition,
    NotMeasurement,
    NotPredicate,
    NotUnitary,
    ParseError,
    UnknownName,
)
from .operators import (
    TOL,
    Assertion,
    LabeledOperator,
    ProjectiveMeasurement,
    extend_matrix,
    is_predicate_matrix,
    is_unitary,
)

Pos = Optional[tuple]

# ---------------------------------------------------------------------------
# AST


def _pos():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Term:
    name: str
    vars: tuple
    pos: Pos = _pos()


@dataclass(frozen=True)
class AssertionExpr:
    terms: tuple
    pos: Pos = _pos()


@dataclass(frozen=True)
class Skip:
    pos: Pos = _pos()


@dataclass(frozen=True)
class Abort:
    pos: Pos = _pos()


@dataclass(frozen=True)
class Init:
    vars: tuple
    pos: Pos = _pos()


@dataclass(frozen=True)
class Unitary:
    vars: tuple
    op: str
    pos: Pos = _pos()
    # bound by typecheck
    matrix: Optional[np.ndarray] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Seq:
    children: tuple
    pos: Pos = _pos()


@dataclass(frozen=True)
class NDet:
    branches: tuple
    pos: Pos = _pos()


@dataclass(frozen=True)
class If:
    meas: str
    vars: tuple
    then_branch: object
    else_branch: object
    pos: Pos = _pos()
    measurement: Optional[ProjectiveMeasurement] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class While:
    meas: str
    vars: tuple
    body: object
    invariant: Optional[AssertionExpr] = None
    pos: Pos = _pos()
    measurement: Optional[ProjectiveMeasurement] = field(default=None, compare=False, repr=False)
    inv: Optional[Assertion] = field(default=None, compare=False, repr=False)


ProgramNode = Union[Skip, Abort, Init, Unitary, Seq, NDet, If, While]


@dataclass(frozen=True)
class Load:
    name: str
    path: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class ProofDef:
    name: str
    vars: tuple
    pre: Optional[AssertionExpr]
    body: object
    post: AssertionExpr
    pos: Pos = _pos()


@dataclass(frozen=True)
class Show:
    name: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class DeclarationFile:
    decls: tuple


def seq(children) -> ProgramNode:
    """Sequential composition, flattened; a single statement is returned as is."""
    flat = []
    for c in children:
        flat.extend(c.children if isinstance(c, Seq) else [c])
    if len(flat) == 1:
        return flat[0]
    return Seq(tuple(flat), pos=flat[0].pos if flat else None)


def ndet(branches, pos=None) -> ProgramNode:
    flat = []
    for b in branches:
        flat.extend(b.branches if isinstance(b, NDet) else [b])
    if len(flat) == 1:
        return flat[0]
    return NDet(tuple(flat), pos=pos)


def qv(s: ProgramNode) -> tuple:
    """Quantum variables of a program, in order of first appearance."""
    out: list = []

    def add(vs):
        out.extend(v for v in vs if v not in out)

    def walk(n):
        if isinstance(n, (Init, Unitary)):
            add(n.vars)
        elif isinstance(n, Seq):
            for c in n.children:
                walk(c)
        elif isinstance(n, NDet):
            for b in n.branches:
                walk(b)
        elif isinstance(n, If):
            add(n.vars)
            walk(n.then_branch)
            walk(n.else_branch)
        elif isinstance(n, While):
            add(n.vars)
            walk(n.body)

    walk(s)
    return tuple(out)


def has_loop(s: ProgramNode) -> bool:
    if isinstance(s, While):
        return True
    if isinstance(s, Seq):
        return any(has_loop(c) for c in s.children)
    if isinstance(s, NDet):
        return any(has_loop(b) for b in s.branches)
    if isinstance(s, If):
        return has_loop(s.then_branch) or has_loop(s.else_branch)
    return False


# ---------------------------------------------------------------------------
# lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<string>"[^"\n]*")
  | (?P<op>:=|\*=|[\[\]{}();:\#□])
  | (?P<num>\d+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)

KEYWORDS = {"def", "load", "end", "proof", "show", "skip", "abort", "if", "then", "else", "while", "do"}


@dataclass(frozen=True)
class Token:
    kind: str  # 'id', 'kw', 'op', 'num', 'string', 'eof'
    text: str
    pos: tuple


def tokenize(source: str) -> list:
    tokens = []
    i, line, col = 0, 1, 1
    while i < len(source):
        m = _TOKEN_RE.match(source, i)
        if not m:
            raise ParseError(f"unexpected character {source[i]!r}", (line, col))
        kind, text = m.lastgroup, m.group()
        if kind == "id" and text in KEYWORDS:
            kind = "kw"
        if kind == "op" and text == "□":
            text = "#"
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, text, (line, col)))
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        i = m.end()
    tokens.append(Token("eof", "", (line, col)))
    return tokens


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "kw")

    def fail(self, expected):
        t = self.tok
        shown = "end of input" if t.kind == "eof" else repr(t.text)
        raise ParseError(f"unexpected {shown}", t.pos, expected)

    def expect(self, text) -> Token:
        if not self.at(text):
            self.fail({text})
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> Token:
        if self.tok.kind != "id":
            self.fail({"identifier"})
        t = self.tok
        self.i += 1
        return t

    # file := { decl }
    def file(self) -> DeclarationFile:
        decls = []
        while self.tok.kind != "eof":
            decls.append(self.decl())
        return DeclarationFile(tuple(decls))

    def decl(self):
        pos = self.tok.pos
        if self.at("show"):
            self.i += 1
            name = self.ident().text
            self.expect("end")
            return Show(name, pos)
        if not self.at("def"):
            self.fail({"def", "show"})
        self.i += 1
        name = self.ident().text
        self.expect(":=")
        if self.at("load"):
            self.i += 1
            if self.tok.kind != "string":
                self.fail({"string literal"})
            path = self.tok.text[1:-1]
            self.i += 1
            self.expect("end")
            return Load(name, path, pos)
        if self.at("proof"):
            d = self.proof(name, pos)
            self.expect("end")
            return d
        self.fail({"load", "proof"})

    def ids(self) -> tuple:
        self.expect("[")
        names = [self.ident().text]
        while self.tok.kind == "id":
            names.append(self.ident().text)
        self.expect("]")
        return tuple(names)

    def term(self) -> Term:
        t = self.ident()
        return Term(t.text, self.ids(), t.pos)

    def terms(self) -> tuple:
        out = [self.term()]
        while self.tok.kind == "id":
            out.append(self.term())
        return tuple(out)

    def assertion(self) -> AssertionExpr:
        pos = self.expect("{").pos
        terms = self.terms()
        self.expect("}")
        return AssertionExpr(terms, pos)

    def at_inv(self) -> bool:
        return self.at("{") and self.peek().text == "inv" and self.peek(2).text == ":"

    def proof(self, name, pos) -> ProofDef:
        self.expect("proof")
        vars = self.ids()
        self.expect(":")
        pre = None
        if self.at("{") and not self.at_inv():
            pre = self.assertion()
            self.expect(";")
        body = self.stmts(stop_at_assertion=True)
        self.expect(";")
        post = self.assertion()
        return ProofDef(name, vars, pre, body, post, pos)

    def stmts(self, stop_at_assertion=False):
        out = [self.stmt()]
        while self.at(";"):
            if stop_at_assertion and self.peek().text == "{" and not (
                self.peek(2).text == "inv" and self.peek(3).text == ":"
            ):
                break
            self.i += 1
            out.append(self.stmt())
        return seq(out)

    def stmt(self):
        t = self.tok
        if self.at("skip"):
            self.i += 1
            return Skip(t.pos)
        if self.at("abort"):
            self.i += 1
            return Abort(t.pos)
        if self.at("["):
            vars = self.ids()
            if self.at(":="):
                self.i += 1
                if not (self.tok.kind == "num" and self.tok.text == "0"):
                    self.fail({"0"})
                self.i += 1
                return Init(vars, t.pos)
            if self.at("*="):
                self.i += 1
                return Unitary(vars, self.ident().text, t.pos)
            self.fail({":=0", "*="})
        if self.at("("):
            self.i += 1
            branches = [self.stmts()]
            while self.at("#"):
                self.i += 1
                branches.append(self.stmts())
            self.expect(")")
            return ndet(branches, t.pos)
        if self.at("if"):
            self.i += 1
            meas = self.ident().text
            vars = self.ids()
            self.expect("then")
            then_b = self.stmts()
            else_b = Skip(None)
            if self.at("else"):
                self.i += 1
                else_b = self.stmts()
            self.expect("end")
            return If(meas, vars, then_b, else_b, t.pos)
        inv = None
        if self.at_inv():
            self.i += 3
            inv = AssertionExpr(self.terms(), t.pos)
            self.expect("}")
            self.expect(";")
        if self.at("while"):
            wpos = self.tok.pos
            self.i += 1
            meas = self.ident().text
            vars = self.ids()
            self.expect("do")
            body = self.stmts()
            self.expect("end")
            return While(meas, vars, body, inv, wpos)
        if inv is not None:
            self.fail({"while"})
        self.fail({"skip", "abort", "[", "(", "if", "while", "{ inv:"})


def parse(source: str) -> DeclarationFile:
    """Parse a declaration file. Raises :class:`ParseError` with line/column."""
    return _Parser(source).file()


def parse_program(source: str) -> ProgramNode:
    """Parse a bare statement list (no declarations)."""
    p = _Parser(source)
    s = p.stmts()
    if p.tok.kind != "eof":
        p.fail({";", "end of input"})
    return s


# ---------------------------------------------------------------------------
# pretty printer


def _ids(vs) -> str:
    return "[" + " ".join(vs) + "]"


def pretty_assertion(a: AssertionExpr) -> str:
    return "{ " + " ".join(f"{t.name}{_ids(t.vars)}" for t in a.terms) + " }"


def pretty_stmt(s, indent: int = 0) -> str:
    pad = "    " * indent
    if isinstance(s, Skip):
        return pad + "skip"
    if isinstance(s, Abort):
        return pad + "abort"
    if isinstance(s, Init):
        return pad + f"{_ids(s.vars)} :=0"
    if isinstance(s, Unitary):
        return pad + f"{_ids(s.vars)} *= {s.op}"
    if isinstance(s, Seq):
        return ";\n".join(pretty_stmt(c, indent) for c in s.children)
    if isinstance(s, NDet):
        parts = [pretty_stmt(b, indent + 1) for b in s.branches]
        return pad + "(\n" + f"\n{pad}#\n".join(parts) + f"\n{pad})"
    if isinstance(s, If):
        return (
            pad + f"if {s.meas}{_ids(s.vars)} then\n"
            + pretty_stmt(s.then_branch, indent + 1)
            + f"\n{pad}else\n"
            + pretty_stmt(s.else_branch, indent + 1)
            + f"\n{pad}end"
        )
    if isinstance(s, While):
        head = ""
        if s.invariant is not None:
            head = pad + "{ inv: " + pretty_assertion(s.invariant)[2:] + ";\n"
        return (
            head + pad + f"while {s.meas}{_ids(s.vars)} do\n"
            + pretty_stmt(s.body, indent + 1)
            + f"\n{pad}end"
        )
    raise TypeError(f"not a program node: {s!r}")


def pretty(f: DeclarationFile) -> str:
    out = []
    for d in f.decls:
        if isinstance(d, Load):
            out.append(f'def {d.name} := load "{d.path}" end')
        elif isinstance(d, Show):
            out.append(f"show {d.name} end")
        else:
            lines = [f"def {d.name} := proof {_ids(d.vars)} :"]
            if d.pre is not None:
                lines.append("    " + pretty_assertion(d.pre) + ";")
            lines.append(pretty_stmt(d.body, 1) + ";")
            lines.append("    " + pretty_assertion(d.post))
            lines.append("end")
            out.append("\n".join(lines))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# builtins and typechecking

_S2 = 1 / np.sqrt(2)
_PLUS = np.array([[0.5, 0.5], [0.5, 0.5]])
_MINUS = np.array([[0.5, -0.5], [-0.5, 0.5]])


def builtins() -> dict:
    """Reserved operator names.

    Values are matrices, a ``(2, d, d)`` array for measurements, or a plain
    number ``p`` standing for ``p * I`` at whatever arity it is used (this is
    how ``I`` and ``Zero`` fit any register).
    """
    p0 = np.diag([1.0, 0.0])
    p1 = np.diag([0.0, 1.0])
    return {
        "I": 1.0,
        "Zero": 0.0,
        "X": np.array([[0, 1], [1, 0]], dtype=complex),
        "Y": np.array([[0, -1j], [1j, 0]]),
        "Z": np.diag([1.0, -1.0]).astype(complex),
        "H": _S2 * np.array([[1, 1], [1, -1]], dtype=complex),
        "CX": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
        "P0": p0,
        "P1": p1,
        "Pp": _PLUS,
        "Pm": _MINUS,
        "M01": np.stack([p0, p1]),
        "Mpm": np.stack([_PLUS, _MINUS]),
    }


def is_measurement_value(v) -> bool:
    return isinstance(v, np.ndarray) and v.ndim == 3


def bind_matrix(name: str, value, nvars: int, pos=None) -> np.ndarray:
    """Matrix of ``value`` at arity ``nvars``, or :class:`ArityMismatch`."""
    d = 2**nvars
    if isinstance(value, (int, float, complex)):
        return value * np.eye(d, dtype=complex)
    value = np.asarray(value)
    if value.shape[-1] != d:
        raise ArityMismatch(
            f"operator {name!r} of dimension {value.shape[-1]} applied to {nvars} qubit(s) (needs {d})", pos
        )
    return value


@dataclass(frozen=True, eq=False)
class CheckedProof:
    """A typechecked proof term with all operators bound to matrices."""

    name: str
    vars: tuple
    pre: Optional[Assertion]
    body: ProgramNode
    post: Assertion
    decl: ProofDef


def _lookup(env, name, pos):
    if name not in env:
        raise UnknownName(f"unknown name {name!r}", pos)
    return env[name]


def _check_vars(vars, register, pos, what):
    if len(set(vars)) != len(vars):
        raise DisjointnessError(f"{what} uses a repeated variable in {list(vars)}", pos)
    stray = [v for v in vars if v not in register]
    if stray:
        raise UnknownName(f"{what} uses qubit(s) {stray} outside the proof register {list(register)}", pos)


def bind_assertion(expr: AssertionExpr, env: Mapping, register: tuple) -> Assertion:
    ops, names = [], []
    for t in expr.terms:
        _check_vars(t.vars, register, t.pos, f"term {t.name}")
        value = _lookup(env, t.name, t.pos)
        if is_measurement_value(value):
            raise NotPredicate(f"{t.name!r} is a measurement, not a predicate", t.pos)
        m = bind_matrix(t.name, value, len(t.vars), t.pos)
        if not is_predicate_matrix(m):
            raise NotPredicate(f"{t.name}{_ids(t.vars)} is not a predicate (needs 0 <= M <= I)", t.pos)
        ops.append(extend_matrix(m, t.vars, register))
        names.append(f"{t.name}{_ids(t.vars)}")
    return Assertion(register, tuple(ops), tuple(names))


def bind_program(s, env: Mapping, register: tuple):
    """Return ``s`` with operators resolved; raises typecheck errors."""
    if isinstance(s, (Skip, Abort)):
        return s
    if isinstance(s, Init):
        _check_vars(s.vars, register, s.pos, "initialisation")
        return s
    if isinstance(s, Unitary):
        _check_vars(s.vars, register, s.pos, f"unitary {s.op}")
        value = _lookup(env, s.op, s.pos)
        if is_measurement_value(value):
            raise NotUnitary(f"{s.op!r} is a measurement, not a unitary", s.pos)
        m = bind_matrix(s.op, value, len(s.vars), s.pos)
        if not is_unitary(m, TOL.herm):
            raise NotUnitary(f"operator {s.op!r} is not unitary", s.pos)
        return replace(s, matrix=m)
    if isinstance(s, Seq):
        return replace(s, children=tuple(bind_program(c, env, register) for c in s.children))
    if isinstance(s, NDet):
        return replace(s, branches=tuple(bind_program(b, env, register) for b in s.branches))
    if isinstance(s, (If, While)):
        _check_vars(s.vars, register, s.pos, f"measurement {s.meas}")
        value = _lookup(env, s.meas, s.pos)
        if not is_measurement_value(value) or value.shape[0] != 2:
            raise NotMeasurement(f"{s.meas!r} is not a two-outcome measurement", s.pos)
        p0 = bind_matrix(s.meas, value[0], len(s.vars), s.pos)
        p1 = bind_matrix(s.meas, value[1], len(s.vars), s.pos)
        try:
            meas = ProjectiveMeasurement(s.vars, p0, p1)
        except Exception as exc:
            raise NotMeasurement(f"{s.meas!r}: {exc}", s.pos) from exc
        if isinstance(s, If):
            return replace(
                s,
                then_branch=bind_program(s.then_branch, env, register),
                else_branch=bind_program(s.else_branch, env, register),
                measurement=meas,
            )
        inv = bind_assertion(s.invariant, env, register) if s.invariant is not None else None
        return replace(s, body=bind_program(s.body, env, register), measurement=meas, inv=inv)
    raise TypeError(f"not a program node: {s!r}")


def typecheck(f: DeclarationFile, env: Mapping) -> list:
    """Check every proof term of ``f`` against ``env``; returns :class:`CheckedProof` list.

    ``env`` must already contain the operators named by ``load`` declarations.
    """
    defined: dict = {}
    reserved = set(builtins())
    proofs = []
    for d in f.decls:
        if isinstance(d, Show):
            if d.name not in defined and d.name not in env:
                # generated names (VAR0, ...) only exist after verification
                if not re.fullmatch(r"VAR\d+", d.name):
                    raise UnknownName(f"show: unknown name {d.name!r}", d.pos)
            continue
        if d.name in defined or d.name in reserved:
            raise DuplicateDefinition(f"name {d.name!r} is already defined", d.pos)
        defined[d.name] = d
        if isinstance(d, Load):
            if d.name not in env:
                raise UnknownName(f"operator {d.name!r} was not loaded", d.pos)
            continue
        register = d.vars
        if len(set(register)) != len(register):
            raise DisjointnessError(f"proof register {list(register)} repeats a variable", d.pos)
        pre = bind_assertion(d.pre, env, register) if d.pre is not None else None
        post = bind_assertion(d.post, env, register)
        body = bind_program(d.body, env, register)
        proofs.append(CheckedProof(d.name, register, pre, body, post, d))
    return proofs

