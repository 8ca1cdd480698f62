"""Executable lifted semantics: programs denote finite sets of channels.

Loop-free programs are denoted exactly. A loop is unrolled to a fixed depth
``n``: for every scheduler prefix ``eta`` (one body channel per iteration) the
channel ``sum_{i<=n} P0 eta_i P1 ... eta_1 P1`` is built directly from its
definition. These sets under-approximate the true loop semantics.

Nothing here shares code with the predicate transformers in :mod:`wlp`; the
two are checked against each other.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import LoopPresentError, SetExplosionError
from .operators import (
    Assertion,
    DensityOperator,
    SuperOperator,
    as_vars,
    compose,
)
from .syntax import Abort, If, Init, NDet, Seq, Skip, Unitary, While, qv

DEFAULT_CAP = 4096
VIOLATION_TOL = 1e-7


@dataclass(frozen=True)
class SemanticsSet:
    elements: tuple
    truncated: bool = False

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)


def _dedup_channels(channels) -> list:
    """Drop channels whose transfer matrices coincide (within 1e-10)."""
    buckets: dict = {}
    out = []
    for c in channels:
        key = np.round(c.transfer, 7).tobytes()
        bucket = buckets.setdefault(key, [])
        if any(c.same_channel(o) for o in bucket):
            continue
        bucket.append(c)
        out.append(c)
    return out


def _check_cap(n, cap, node):
    if n > cap:
        raise SetExplosionError(
            f"semantics of {type(node).__name__} at {node.pos or '?'} has {n} elements (cap {cap})"
        )


def _sum(a: SuperOperator, b: SuperOperator) -> SuperOperator:
    return a + b


def _atomic(s, vars) -> SuperOperator:
    if isinstance(s, Skip):
        return SuperOperator.identity(vars)
    if isinstance(s, Abort):
        return SuperOperator.zero(vars)
    if isinstance(s, Init):
        return SuperOperator.reset(s.vars).extend(vars)
    if isinstance(s, Unitary):
        return SuperOperator.unitary(s.vars, s.matrix).extend(vars)
    raise TypeError(s)


@dataclass
class _Ctx:
    depth: int
    cap: int
    loops_allowed: bool
    truncate: bool = False
    truncated: bool = False


def _denote(s, vars, ctx: _Ctx) -> list:
    cap = ctx.cap
    if isinstance(s, (Skip, Abort, Init, Unitary)):
        return [_atomic(s, vars)]
    if isinstance(s, Seq):
        acc = [SuperOperator.identity(vars)]
        for c in s.children:
            nxt = _denote(c, vars, ctx)
            _check_cap(len(acc) * len(nxt), cap, s)
            acc = _dedup_channels([compose(f, e) for e in acc for f in nxt])
        return acc
    if isinstance(s, NDet):
        out = []
        for b in s.branches:
            out.extend(_denote(b, vars, ctx))
            _check_cap(len(out), cap, s)
        return _dedup_channels(out)
    if isinstance(s, If):
        p0 = s.measurement.branch(0).extend(vars)
        p1 = s.measurement.branch(1).extend(vars)
        s0 = _denote(s.else_branch, vars, ctx)
        s1 = _denote(s.then_branch, vars, ctx)
        _check_cap(len(s0) * len(s1), cap, s)
        return _dedup_channels([_sum(compose(e, p0), compose(f, p1)) for e in s0 for f in s1])
    if isinstance(s, While):
        if not ctx.loops_allowed:
            raise LoopPresentError("while loop in a program required to be loop-free", s.pos)
        body = _denote(s.body, vars, ctx)
        n_sched = len(body) ** ctx.depth
        if n_sched > cap and ctx.truncate:
            ctx.truncated = True
        table = while_unrollings(s, ctx.depth, vars, body=body, cap=cap, truncate=ctx.truncate)
        return _dedup_channels(table.values())
    raise TypeError(f"not a program node: {s!r}")


def denote_loopfree(s, vars=None, cap: int = DEFAULT_CAP) -> SemanticsSet:
    """The exact set of channels of a loop-free program, on register ``vars``."""
    vars = as_vars(vars) if vars is not None else qv(s)
    return SemanticsSet(tuple(_denote(s, vars, _Ctx(0, cap, loops_allowed=False))))


def denote_bounded(s, depth: int, vars=None, cap: int = DEFAULT_CAP,
                   truncate: bool = False) -> SemanticsSet:
    """Channels with every loop unrolled ``depth`` times, over all scheduler prefixes.

    With ``truncate`` a loop with more than ``cap`` scheduler prefixes keeps
    the first ``cap`` in lexicographic order and the result is flagged
    ``truncated``; otherwise :class:`SetExplosionError` is raised.
    """
    vars = as_vars(vars) if vars is not None else qv(s)
    ctx = _Ctx(depth, cap, loops_allowed=True, truncate=truncate)
    elements = tuple(_denote(s, vars, ctx))
    return SemanticsSet(elements, ctx.truncated)


def while_unrollings(loop: While, depth: int, vars=None, body=None, cap: int = DEFAULT_CAP,
                     truncate: bool = False) -> dict:
    """Map each scheduler prefix (tuple of body-channel indices) to its unrolled channel.

    ``body`` defaults to the bounded semantics of the loop body, in its
    enumeration order; index ``k`` in a scheduler picks ``body[k]``.
    """
    vars = as_vars(vars) if vars is not None else qv(loop)
    if body is None:
        body = list(denote_bounded(loop.body, depth, vars, cap))
    n_sched = len(body) ** depth
    if not truncate:
        _check_cap(n_sched, cap, loop)
    p0 = loop.measurement.branch(0).extend(vars)
    p1 = loop.measurement.branch(1).extend(vars)
    steps = [compose(eta, p1) for eta in body]
    out = {}
    schedulers = itertools.product(range(len(body)), repeat=depth)
    for eta in itertools.islice(schedulers, cap):
        total = p0
        prefix = SuperOperator.identity(vars)
        for k in eta:
            prefix = compose(steps[k], prefix)
            total = total + compose(p0, prefix)
        out[eta] = total
    return out


# ---------------------------------------------------------------------------
# expectations and empirical correctness


def expectation(rho, theta: Assertion) -> float:
    """``min_M tr(M rho)`` over the predicates of ``theta``."""
    m = np.asarray(rho.matrix if hasattr(rho, "matrix") else rho)
    if hasattr(rho, "vars") and tuple(rho.vars) != theta.vars:
        theta = theta.extend(rho.vars)
    vals = [np.trace(M @ m) for M in theta.ops]
    return float(min(v.real for v in vals))


def _batch_expectation(rhos: np.ndarray, theta: Assertion) -> np.ndarray:
    ops = np.stack(theta.ops)
    vals = np.einsum("mab,sba->sm", ops, rhos).real
    return vals.min(axis=1)


def _batch_apply(e: SuperOperator, rhos: np.ndarray) -> np.ndarray:
    ks = e.stacked
    return np.einsum("kab,sbc,kdc->sad", ks, rhos, ks.conj())


def random_pure_states(d: int, n: int, rng) -> np.ndarray:
    z = rng.normal(size=(n, d)) + 1j * rng.normal(size=(n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def sample_densities(d: int, n: int, rng, corners: bool = True) -> np.ndarray:
    """Partial density operators: corner cases first, then random mixtures.

    Random samples mix up to ``d`` Haar-random pure states with Dirichlet
    weights and scale by a trace drawn from (0, 1].
    """
    out = []
    if corners:
        for i in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, i] = 1
            out.append(e)
        out.append(np.eye(d, dtype=complex) / d)
        plus = np.ones(d) / np.sqrt(d)
        out.append(np.outer(plus, plus).astype(complex))
    while len(out) < n:
        r = int(rng.integers(1, d + 1))
        psi = random_pure_states(d, r, rng)
        w = rng.dirichlet(np.ones(r))
        t = 1.0 - rng.random()  # in (0, 1]
        if rng.random() < 0.3:
            t = 1.0
        out.append(t * np.einsum("k,ka,kb->ab", w, psi, psi.conj()))
    return np.stack(out[:n])


@dataclass(frozen=True)
class Counterexample:
    rho: np.ndarray
    sigma: np.ndarray
    margin: float
    sample_index: int
    channel_index: int


@dataclass(frozen=True)
class EmpiricalVerdict:
    counterexample: Optional[Counterexample]
    samples: int
    channels: int

    @property
    def ok(self) -> bool:
        return self.counterexample is None

    def __str__(self):
        if self.ok:
            return f"no-counterexample ({self.samples} states x {self.channels} channels)"
        c = self.counterexample
        return f"counterexample (sample {c.sample_index}, channel {c.channel_index}, margin {c.margin:.3g})"


def violation_margins(pre: Assertion, post: Assertion, channels, rhos: np.ndarray, mode: str = "partial") -> np.ndarray:
    """Array [sample, channel] of ``lhs - rhs`` in the correctness inequality."""
    lhs = _batch_expectation(rhos, pre)
    tr_rho = np.einsum("saa->s", rhos).real
    out = np.empty((len(rhos), len(channels)))
    for j, e in enumerate(channels):
        sig = _batch_apply(e, rhos)
        rhs = _batch_expectation(sig, post)
        if mode == "partial":
            rhs = rhs + tr_rho - np.einsum("saa->s", sig).real
        out[:, j] = lhs - rhs
    return out


def check_formula_empirical(pre: Assertion, program, post: Assertion, mode: str = "partial",
                            samples: int = 1000, depth: int = 6, seed: int = 0,
                            cap: int = DEFAULT_CAP) -> EmpiricalVerdict:
    """Search for a state violating ``{pre} program {post}``.

    One-sided: a returned counterexample is a genuine violation in partial
    mode (unrolling only adds non-termination mass), while ``ok`` proves
    nothing. In total mode with loops, a truncated unrolling can report
    spurious violations.
    """
    if mode not in ("partial", "total"):
        raise ValueError(f"mode must be 'partial' or 'total', not {mode!r}")
    vars = post.vars
    pre = pre.extend(vars)
    sem = denote_bounded(program, depth, vars, cap)
    rng = np.random.default_rng(seed)
    rhos = sample_densities(2 ** len(vars), samples, rng)
    margins = violation_margins(pre, post, sem.elements, rhos, mode)
    bad = np.argwhere(margins > VIOLATION_TOL)
    if len(bad) == 0:
        return EmpiricalVerdict(None, len(rhos), len(sem))
    i, j = bad[0]  # argwhere is row-major: first by sample, then channel
    sigma = _batch_apply(sem.elements[j], rhos[i : i + 1])[0]
    cex = Counterexample(rhos[i], sigma, float(margins[i, j]), int(i), int(j))
    return EmpiricalVerdict(cex, len(rhos), len(sem))


def output_states(sem, rho: DensityOperator) -> list:
    """``[[S]](rho)`` as a list of matrices, deduplicated."""
    outs = []
    for e in sem:
        s = _batch_apply(e.extend(rho.vars), rho.matrix[None])[0]
        if not any(np.allclose(s, o, atol=1e-10) for o in outs):
            outs.append(s)
    return outs
