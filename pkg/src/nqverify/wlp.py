"""Backward predicate transformers over finite assertions.

``wlp`` handles every construct; a loop is discharged with its annotated
invariant ``Inv``: the loop precondition is ``P0(Psi) + P1(Inv)`` (elementwise
over both sets) provided ``Inv`` is below the body's precondition for that
assertion. ``wp_loopfree`` is the same recursion with ``abort`` sent to
``{0}`` instead of ``{I}``.

On a set of predicates every transformer acts element by element and takes
the union, so a measurement only combines branch preconditions that stem from
the same postcondition element.

Every produced assertion is pruned (dominated elements dropped) and each
element is re-checked to lie between 0 and I.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InternalError, InvalidInvariant, LoopPresentError, MissingInvariant, SetExplosionError
from .operators import Assertion, extend_matrix, is_predicate_matrix, permute_qubits
from .order import OrderDecision, inf_le, prune
from .syntax import Abort, If, Init, NDet, Seq, Skip, Unitary, While, has_loop, pretty_assertion

DEFAULT_CAP = 4096


@dataclass(frozen=True, eq=False)
class TransformStep:
    """One rule application: ``{pre} node {post}``."""

    node: object
    post: Assertion
    pre: Assertion
    rule: str
    decision: Optional[OrderDecision] = None
    # for While: the body's own precondition, which ``decision`` compares with the invariant
    body_pre: Optional[Assertion] = None


def init_pre(m: np.ndarray, qs, register) -> np.ndarray:
    """``sum_i |i><0| M |0><i|`` on ``qs``: identity on ``qs`` tensored with ``<0|M|0>``."""
    qs, register = tuple(qs), tuple(register)
    rest = tuple(v for v in register if v not in qs)
    dq, dr = 2 ** len(qs), 2 ** len(rest)
    t = permute_qubits(m, register, qs + rest).reshape(dq, dr, dq, dr)
    k = t[0, :, 0, :]
    return permute_qubits(np.kron(np.eye(dq), k), qs + rest, register)


def _checked(ops, vars, node, cap) -> Assertion:
    ops = list(ops)
    if len(ops) > cap:
        raise SetExplosionError(
            f"precondition of {type(node).__name__} at {getattr(node, 'pos', None) or '?'} "
            f"has {len(ops)} predicates (cap {cap})"
        )
    for m in ops:
        if not is_predicate_matrix(m):
            raise InternalError(f"transformer produced a non-predicate at {type(node).__name__}")
    return prune(Assertion(vars, tuple(ops)))


def _meas_combine(m, a: Assertion, b: Assertion, node, cap) -> Assertion:
    """``{P1 A P1 + P0 B P0}`` for ``A`` in ``a`` (outcome 1), ``B`` in ``b`` (outcome 0)."""
    vars = a.vars
    p0 = extend_matrix(m.p0, m.vars, vars)
    p1 = extend_matrix(m.p1, m.vars, vars)
    if len(a) * len(b) > cap:
        raise SetExplosionError(
            f"measurement at {node.pos or '?'} combines {len(a)} x {len(b)} predicates (cap {cap})"
        )
    ops = [p1 @ x @ p1 + p0 @ y @ p0 for x in a.ops for y in b.ops]
    return _checked(ops, vars, node, cap)


class _Transformer:
    def __init__(self, liberal: bool, cap: int, tol_accept: float, max_iters: int):
        self.liberal = liberal
        self.cap = cap
        self.tol_accept = tol_accept
        self.max_iters = max_iters
        self.steps: list = []

    def quiet(self) -> _Transformer:
        """A transformer with the same settings whose steps are discarded."""
        return _Transformer(self.liberal, self.cap, self.tol_accept, self.max_iters)

    def run(self, s, post: Assertion) -> Assertion:
        vars = post.vars
        if isinstance(s, Skip):
            pre, rule = post, "Skip"
        elif isinstance(s, Abort):
            d = 2 ** len(vars)
            pre = Assertion(vars, (np.eye(d) if self.liberal else np.zeros((d, d)),))
            rule = "Abort"
        elif isinstance(s, Init):
            pre = _checked((init_pre(m, s.vars, vars) for m in post.ops), vars, s, self.cap)
            rule = "Init"
        elif isinstance(s, Unitary):
            u = extend_matrix(s.matrix, s.vars, vars)
            ud = u.conj().T
            pre = _checked((ud @ m @ u for m in post.ops), vars, s, self.cap)
            rule = "Unit"
        elif isinstance(s, Seq):
            pre = post
            for c in reversed(s.children):
                pre = self.run(c, pre)
            rule = "Seq"
        elif isinstance(s, NDet):
            ops = []
            for b in s.branches:
                ops.extend(self.run(b, post).ops)
            pre = _checked(ops, vars, s, self.cap)
            rule = "NDet"
        elif isinstance(s, If):
            a = self.run(s.then_branch, post)
            b = self.run(s.else_branch, post)
            if len(post) == 1:
                pre = _meas_combine(s.measurement, a, b, s, self.cap)
            else:
                # branch preconditions are only paired when they come from the
                # same postcondition element; pairing across elements is sound
                # but not weakest
                ops = []
                for m in post.ops:
                    single = Assertion(vars, (m,))
                    a_m = self.quiet().run(s.then_branch, single)
                    b_m = self.quiet().run(s.else_branch, single)
                    ops.extend(_meas_combine(s.measurement, a_m, b_m, s, self.cap).ops)
                pre = _checked(ops, vars, s, self.cap)
            rule = "Meas"
        elif isinstance(s, While):
            if not self.liberal:
                raise LoopPresentError("while loop in a program required to be loop-free", s.pos)
            if s.inv is None:
                raise MissingInvariant("while loop has no invariant annotation", s.pos)
            inv = s.inv.extend(vars)
            phi = _meas_combine(s.measurement, inv, post, s, self.cap)
            body_pre = self.run(s.body, phi)
            decision = inf_le(inv, body_pre, self.tol_accept, self.max_iters)
            if not decision.holds:
                name = pretty_assertion(s.invariant) if s.invariant is not None else "{ ? }"
                extra = "" if decision.verdict == "fails" else " (the order check was inconclusive)"
                raise InvalidInvariant(
                    f"The predicate '{name}' is not a valid loop invariant.{extra}", s, decision, s.pos
                )
            self.steps.append(TransformStep(s, post, phi, "While", decision, body_pre))
            return phi
        else:
            raise TypeError(f"not a program node: {s!r}")
        self.steps.append(TransformStep(s, post, pre, rule))
        return pre


def wlp(s, psi: Assertion, cap: int = DEFAULT_CAP, tol_accept: float = 1e-7,
        max_iters: int = 2000):
    """Weakest liberal precondition (invariant-derived for loops) and the rule applications.

    Steps are listed in the order the backward pass finishes them.
    """
    t = _Transformer(True, cap, tol_accept, max_iters)
    pre = t.run(s, prune(psi))
    return pre, t.steps


def wp_loopfree(s, psi: Assertion, cap: int = DEFAULT_CAP) -> Assertion:
    """Weakest precondition of a loop-free program."""
    return wp_steps(s, psi, cap)[0]


def wp_steps(s, psi: Assertion, cap: int = DEFAULT_CAP):
    """``wp_loopfree`` together with its rule applications."""
    if has_loop(s):
        raise LoopPresentError("wp is only computed for loop-free programs", _first_loop_pos(s))
    t = _Transformer(False, cap, 1e-7, 2000)
    pre = t.run(s, prune(psi))
    return pre, t.steps


def _first_loop_pos(s):
    if isinstance(s, While):
        return s.pos
    for c in getattr(s, "children", ()) or getattr(s, "branches", ()):
        p = _first_loop_pos(c)
        if p is not None:
            return p
    if isinstance(s, If):
        return _first_loop_pos(s.then_branch) or _first_loop_pos(s.else_branch)
    return None


def check_invariant(inv: Assertion, loop: While, psi: Assertion, tol_accept: float = 1e-7,
                    max_iters: int = 2000) -> OrderDecision:
    """Decide whether ``inv`` is below ``wlp(body, P0(psi) + P1(inv))``."""
    vars = psi.vars
    inv = inv.extend(vars)
    phi = _meas_combine(loop.measurement, inv, prune(psi), loop, DEFAULT_CAP)
    body_pre, _ = wlp(loop.body, phi, tol_accept=tol_accept, max_iters=max_iters)
    return inf_le(inv, body_pre, tol_accept, max_iters)


def replay(step: TransformStep, liberal: bool = True) -> Assertion:
    """Recompute ``step.pre`` from ``step.post`` alone."""
    return _Transformer(liberal, DEFAULT_CAP, 1e-7, 2000).run(step.node, step.post)


def loop_pre(loop: While, inv: Assertion, psi: Assertion) -> Assertion:
    """``P0(psi) + P1(inv)`` elementwise."""
    return _meas_combine(loop.measurement, inv.extend(psi.vars), psi, loop, DEFAULT_CAP)
