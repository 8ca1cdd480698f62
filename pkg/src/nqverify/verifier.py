"""End-to-end verification of declaration files.

:func:`verify` parses a file, loads the operator files it names, computes the
verification condition of every proof term backwards from its postcondition,
compares it with the stated precondition and renders annotated outlines.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InvalidInvariant, LoopPresentError, UnknownName
from .operators import Assertion, ProjectiveMeasurement
from .order import FAILS, HOLDS, INCONCLUSIVE, OrderDecision, inf_le
from .qmat import env_value, load_operator, save_operator
from .semantics import EmpiricalVerdict, check_formula_empirical
from .syntax import (
    Abort,
    CheckedProof,
    If,
    Init,
    Load,
    NDet,
    ProofDef,
    Seq,
    Show,
    Skip,
    Unitary,
    While,
    bind_matrix,
    builtins,
    has_loop,
    is_measurement_value,
    parse,
    pretty_assertion,
    typecheck,
)
from .wlp import wlp, wp_steps

COMPUTED = "computed"
EXIT_CODES = {HOLDS: 0, COMPUTED: 0, FAILS: 1, INCONCLUSIVE: 2}
INPUT_ERROR_EXIT = 3


@dataclass(frozen=True)
class Options:
    epsilon: float = 1e-7
    max_iters: int = 2000
    oracle_depth: int = 0  # 0 disables the empirical cross-check
    oracle_samples: int = 200
    save_dir: Optional[str] = None
    seed: int = 0
    mode: str = "partial"


# ---------------------------------------------------------------------------
# rendering


def format_number(z: complex, digits: int = 6) -> str:
    """Fixed-precision text for a matrix entry; magnitudes below 1e-12 print as 0."""
    re_, im = float(np.real(z)), float(np.imag(z))
    re_ = 0.0 if abs(re_) < 1e-12 else re_
    im = 0.0 if abs(im) < 1e-12 else im
    if im == 0.0:
        return "0" if re_ == 0.0 else f"{re_:.{digits}g}"
    if re_ == 0.0:
        return f"{im:.{digits}g}j"
    return f"{re_:.{digits}g}{im:+.{digits}g}j"


def format_matrix(m: np.ndarray, digits: int = 6) -> str:
    cells = [[format_number(z, digits) for z in row] for row in np.asarray(m)]
    w = max(len(c) for row in cells for c in row)
    rows = ["[" + " ".join(c.rjust(w) for c in row) + "]" for row in cells]
    return "[" + ("\n ".join(rows)) + "]"


class Namer:
    """Names for the predicates appearing in outlines.

    User-written post and invariant terms keep their names; anything else gets
    the next ``VARk``. One counter is shared by all proofs in a file.
    """

    def __init__(self):
        self.entries: list = []  # (label, register, matrix)
        self.generated: dict = {}  # "VARk" -> (register, matrix)
        self.counter = 0

    def seed(self, a: Assertion) -> None:
        for nm, m in zip(a.names, a.ops):
            if nm is not None and self._find(a.vars, m) is None:
                self.entries.append((nm, a.vars, m))

    def _find(self, vars, m):
        for label, v, k in self.entries:
            if v == vars and np.allclose(k, m, atol=1e-9, rtol=0):
                return label
        return None

    def name(self, vars, m) -> str:
        label = self._find(vars, m)
        if label is None:
            key = f"VAR{self.counter}"
            self.counter += 1
            label = f"{key}[{' '.join(vars)}]"
            self.entries.append((label, vars, m))
            self.generated[key] = (vars, m)
        return label

    def label(self, a: Assertion) -> str:
        return "{ " + " ".join(self.name(a.vars, m) for m in a.ops) + " }"


@dataclass
class ProofOutline:
    """A program annotated with a named assertion at every control point."""

    proof: CheckedProof
    steps: list
    pres: dict  # id(node) -> Assertion
    labels: dict  # id(node) -> label of its precondition
    vc: Assertion
    vc_label: str
    post_label: str
    table: dict  # generated name -> (register, matrix)
    vc_parts: list = field(default_factory=list)  # one label per element of vc
    decision: Optional[OrderDecision] = None

    def render(self) -> str:
        p = self.proof
        out = [f"proof [{' '.join(p.vars)}] :"]
        if p.decl.pre is not None:
            out.append("    " + pretty_assertion(p.decl.pre) + ";")
        body = self._block(p.body, 1)
        body[0] += "  // verification condition"
        out.extend(body)
        out[-1] += ";"
        out.append("    " + self.post_label)
        return "\n".join(out)

    def _block(self, s, indent) -> list:
        pad = "    " * indent
        children = s.children if isinstance(s, Seq) else (s,)
        lines: list = []
        for i, c in enumerate(children):
            lines.append(pad + self.labels[id(c)] + ";")
            lines.extend(self._stmt(c, indent))
            if i < len(children) - 1:
                lines[-1] += ";"
        return lines

    def _stmt(self, s, indent) -> list:
        pad = "    " * indent
        ids = lambda vs: "[" + " ".join(vs) + "]"
        if isinstance(s, Skip):
            return [pad + "skip"]
        if isinstance(s, Abort):
            return [pad + "abort"]
        if isinstance(s, Init):
            return [pad + f"{ids(s.vars)} :=0"]
        if isinstance(s, Unitary):
            return [pad + f"{ids(s.vars)} *= {s.op}"]
        if isinstance(s, NDet):
            lines = [pad + "("]
            for k, b in enumerate(s.branches):
                if k:
                    lines.append(pad + "#")
                lines.extend(self._block(b, indent + 1))
            lines.append(pad + ")")
            return lines
        if isinstance(s, If):
            return (
                [pad + f"if {s.meas}{ids(s.vars)} then"]
                + self._block(s.then_branch, indent + 1)
                + [pad + "else"]
                + self._block(s.else_branch, indent + 1)
                + [pad + "end"]
            )
        if isinstance(s, While):
            head = [pad + "{ inv: " + pretty_assertion(s.invariant)[2:] + ";"] if s.invariant else []
            return (
                head + [pad + f"while {s.meas}{ids(s.vars)} do"]
                + self._block(s.body, indent + 1)
                + [pad + "end"]
            )
        raise TypeError(s)


@dataclass
class ProofReport:
    name: str
    verdict: str
    vc: Assertion
    outline: ProofOutline
    decision: Optional[OrderDecision] = None
    oracle: Optional[EmpiricalVerdict] = None

    def render(self) -> str:
        o = self.outline
        lines = [f"proof {self.name}: {self.verdict}"]
        lines.append(f"  verification condition: {o.vc_label}")
        if self.decision is not None:
            lines.append(f"  precondition vs verification condition: {self.decision.verdict}")
            for part in self.decision.parts:
                nlabel = o.vc_parts[part.index]
                if part.verdict == HOLDS:
                    w = ", ".join(format_number(x) for x in part.weights)
                    lines.append(f"    {nlabel}: holds, weights ({w}), residual {format_number(part.residual)}")
                elif part.verdict == FAILS:
                    lines.append(f"    {nlabel}: fails, margin {format_number(part.margin)}")
                    lines.append("    witness state:")
                    lines.extend("      " + ln for ln in format_matrix(part.witness).splitlines())
                else:
                    lines.append(
                        f"    {nlabel}: inconclusive, optimum in [{format_number(part.lower)}, "
                        f"{format_number(part.upper)}] after {part.iterations} iterations"
                    )
        else:
            lines.append("  no precondition given; the verification condition is the computed precondition")
        if self.oracle is not None:
            lines.append(f"  empirical check: {self.oracle}")
        return "\n".join(lines)


@dataclass
class VerificationRun:
    reports: list = field(default_factory=list)
    outputs: list = field(default_factory=list)  # rendered report / show text, in file order
    namer: Namer = field(default_factory=Namer)

    @property
    def verdict(self) -> str:
        vs = {r.verdict for r in self.reports}
        for v in (FAILS, INCONCLUSIVE):
            if v in vs:
                return v
        return HOLDS if HOLDS in vs else COMPUTED

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.verdict]

    @property
    def text(self) -> str:
        return "\n\n".join(self.outputs) + "\n"

    def report(self, name: str) -> ProofReport:
        for r in self.reports:
            if r.name == name:
                return r
        raise KeyError(name)

    def generated(self, key: str) -> np.ndarray:
        return self.namer.generated[key][1]


# ---------------------------------------------------------------------------
# pipeline


def _load_env(f, base: Path) -> tuple:
    env = builtins()
    loaded = {}
    for d in f.decls:
        if isinstance(d, Load) and d.name not in env:
            op = load_operator(base / d.path)
            loaded[d.name] = op
            env[d.name] = env_value(op)
    return env, loaded


def _outline(proof: CheckedProof, pre: Assertion, steps: list, namer: Namer) -> ProofOutline:
    namer.seed(proof.post)
    _seed_invariants(proof.body, namer)
    pres: dict = {}
    labels: dict = {}
    for st in steps:
        pres[id(st.node)] = st.pre
        labels[id(st.node)] = namer.label(st.pre)
    vc_label = namer.label(pre)
    post_label = namer.label(proof.post)
    parts = [namer.name(pre.vars, m) for m in pre.ops]
    return ProofOutline(proof, steps, pres, labels, pre, vc_label, post_label, namer.generated, parts)


def _seed_invariants(s, namer: Namer) -> None:
    if isinstance(s, While):
        if s.inv is not None:
            namer.seed(s.inv)
        _seed_invariants(s.body, namer)
    elif isinstance(s, Seq):
        for c in s.children:
            _seed_invariants(c, namer)
    elif isinstance(s, NDet):
        for b in s.branches:
            _seed_invariants(b, namer)
    elif isinstance(s, If):
        _seed_invariants(s.then_branch, namer)
        _seed_invariants(s.else_branch, namer)


def invariant_error_text(err: InvalidInvariant) -> str:
    """Error text for a rejected invariant, including the failed order relation."""
    lines = ["Error:"]
    d = err.decision
    if d is not None and err.node is not None and err.node.invariant is not None:
        namer = Namer()
        rhs = namer.label(d.psi)
        lines.append("Order relation not satisfied:")
        lines.append(f"    {pretty_assertion(err.node.invariant)} <= {rhs}")
        bad = d.failing
        if bad is not None:
            lines.append(f"    violated element {namer.name(d.psi.vars, d.psi.ops[bad.index])}, "
                         f"margin {format_number(bad.margin)}")
    lines.append(f"Error: {err}")
    return "\n".join(lines)


def verify_proof(proof: CheckedProof, options: Options, namer: Optional[Namer] = None) -> ProofReport:
    namer = namer if namer is not None else Namer()
    if options.mode == "total":
        if has_loop(proof.body):
            raise LoopPresentError(
                "total-correctness mode handles loop-free programs only", proof.decl.pos
            )
        pre, steps = wp_steps(proof.body, proof.post)
    elif options.mode == "partial":
        pre, steps = wlp(proof.body, proof.post, tol_accept=options.epsilon, max_iters=options.max_iters)
    else:
        raise ValueError(f"unknown mode {options.mode!r}")
    outline = _outline(proof, pre, steps, namer)
    decision = None
    verdict = COMPUTED
    if proof.pre is not None:
        decision = inf_le(proof.pre, pre, options.epsilon, options.max_iters)
        verdict = decision.verdict
        outline.decision = decision
    oracle = None
    if options.oracle_depth > 0:
        theta = proof.pre if proof.pre is not None else pre
        oracle = check_formula_empirical(theta, proof.body, proof.post, options.mode,
                                         options.oracle_samples, options.oracle_depth, options.seed)
    return ProofReport(proof.name, verdict, pre, outline, decision, oracle)


def show_text(name: str, run: VerificationRun, env: dict, loaded: dict) -> str:
    for r in run.reports:
        if r.name == name:
            return r.outline.render()
    if name in run.namer.generated:
        vars, m = run.namer.generated[name]
        return f"{name}[{' '.join(vars)}] =\n{format_matrix(m)}"
    if name in loaded and isinstance(loaded[name], ProjectiveMeasurement):
        op = loaded[name]
        return f"{name} =\nP0:\n{format_matrix(op.p0)}\nP1:\n{format_matrix(op.p1)}"
    if name in env:
        v = env[name]
        if is_measurement_value(v):
            return f"{name} =\nP0:\n{format_matrix(v[0])}\nP1:\n{format_matrix(v[1])}"
        return f"{name} =\n{format_matrix(bind_matrix(name, v, 1) if np.isscalar(v) else v)}"
    raise UnknownName(f"show: unknown name {name!r}")


def verify_source(source: str, base_dir=".", options: Optional[Options] = None) -> VerificationRun:
    """Verify every proof term of a declaration file given as text."""
    options = options or Options()
    f = parse(source)
    env, loaded = _load_env(f, Path(base_dir))
    proofs = {p.name: p for p in typecheck(f, env)}
    run = VerificationRun()
    for d in f.decls:
        if isinstance(d, ProofDef):
            try:
                rep = verify_proof(proofs[d.name], options, run.namer)
            except InvalidInvariant as err:
                err.report_text = invariant_error_text(err)
                raise
            run.reports.append(rep)
            run.outputs.append(rep.render())
        elif isinstance(d, Show):
            run.outputs.append(show_text(d.name, run, env, loaded))
    if options.save_dir:
        out = Path(options.save_dir)
        out.mkdir(parents=True, exist_ok=True)
        for key, (_, m) in run.namer.generated.items():
            save_operator(out / f"{key}.qmat.json", m, kind="hermitian")
    return run


def verify(path, options: Optional[Options] = None) -> VerificationRun:
    """Verify a declaration file; ``load`` paths are resolved next to it."""
    path = Path(path)
    return verify_source(path.read_text(), path.parent, options)


# ---------------------------------------------------------------------------
# bundled case studies

CORPUS_DIR = Path(__file__).parent / "corpus"


@dataclass
class CorpusCase:
    label: str
    ok: bool
    detail: str


def _expect_verdicts(label, file, expected: dict, cases):
    try:
        run = verify(CORPUS_DIR / file)
    except Exception as exc:  # any error is a mismatch here
        cases.append(CorpusCase(label, False, f"unexpected {type(exc).__name__}: {exc}"))
        return None
    for name, want in expected.items():
        got = run.report(name).verdict
        cases.append(CorpusCase(f"{label} {name}", got == want, f"{got} (expected {want})"))
    return run


def errcorr_reduced_state_check(psi: np.ndarray, atol: float = 1e-10) -> bool:
    """Every channel of the error-correction program keeps ``psi`` on ``q``."""
    from .operators import DensityOperator, apply, partial_trace
    from .semantics import denote_loopfree

    f = parse((CORPUS_DIR / "errcorr.nqpv").read_text())
    env, _ = _load_env(f, CORPUS_DIR)
    body = typecheck(f, env)[0].body
    vars = ("q", "q1", "q2")
    sem = denote_loopfree(body, vars)
    rho_in = np.kron(np.outer(psi, psi.conj()), np.diag([1.0, 0, 0, 0]))
    target = np.outer(psi, psi.conj())
    if len(sem) != 4:
        return False
    for e in sem:
        out = apply(e, DensityOperator(vars, rho_in))
        red = partial_trace(out, ("q",)).matrix
        if not np.allclose(red, target, atol=atol, rtol=0):
            return False
    return True


def run_corpus() -> list:
    """Run every bundled case study and negative test; returns :class:`CorpusCase` list."""
    cases: list = []
    run = _expect_verdicts("qwalk", "qwalk.nqpv", {"pf": HOLDS}, cases)
    if run is not None:
        vc = run.report("pf").vc
        ok = len(vc) == 1 and np.allclose(vc.ops[0], np.eye(4), atol=1e-6, rtol=0)
        cases.append(CorpusCase("qwalk verification condition is I", ok, "" if ok else "differs from I"))
    try:
        verify(CORPUS_DIR / "qwalk_bad_invariant.nqpv")
        cases.append(CorpusCase("qwalk with P0[q1] invariant", False, "accepted"))
    except InvalidInvariant as exc:
        ok = "P0[q1]" in str(exc) and "not a valid loop invariant" in str(exc)
        cases.append(CorpusCase("qwalk with P0[q1] invariant", ok, str(exc)))
    _expect_verdicts("errcorr", "errcorr.nqpv", {k: HOLDS for k in ("pf0", "pf1", "pfplus", "pfi")}, cases)
    s2 = 1 / np.sqrt(2)
    for lab, psi in [("|0>", [1, 0]), ("|1>", [0, 1]), ("|+>", [s2, s2]), ("(|0>+i|1>)/sqrt2", [s2, 1j * s2])]:
        ok = errcorr_reduced_state_check(np.array(psi, dtype=complex))
        cases.append(CorpusCase(f"errcorr channels keep {lab} on q", ok, ""))
    _expect_verdicts("deutsch", "deutsch.nqpv", {"pf": HOLDS}, cases)
    run = _expect_verdicts("counterexample", "counterexample.nqpv", {"pf": FAILS}, cases)
    if run is not None:
        part = run.report("pf").decision.failing
        ok = part is not None and abs(part.margin - 0.5) < 1e-9
        cases.append(CorpusCase("counterexample margin 1/2", ok, ""))
    return cases


def corpus_text(cases) -> str:
    lines = [f"{'PASS' if c.ok else 'FAIL'}  {c.label}" + (f"  [{c.detail}]" if c.detail else "")
             for c in cases]
    n = sum(c.ok for c in cases)
    lines.append(f"{n}/{len(cases)} corpus checks passed")
    return "\n".join(lines)
