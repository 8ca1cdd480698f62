"""Loewner order between predicates and the inf-order between finite assertions.

``theta <=_inf psi`` holds iff for every ``N`` in ``psi``::

    max over states rho of  min_j tr((M_j - N) rho)  <=  0.

By the minimax theorem this equals ``min_{lambda in simplex} lambda_max(sum_j
lambda_j (M_j - N))``, so a holds verdict is certified by simplex weights
(re-checked with one eigendecomposition) and a fails verdict by a state
(re-checked with ``m`` traces). The search is exponentiated-gradient mirror
descent on the simplex followed by a cutting-plane polish; the verdicts never
depend on the search being good, only on the certificates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .errors import InternalCertificateError, ValidationError
from .operators import (
    TOL,
    Assertion,
    LabeledOperator,
    _union,
    eig_hermitian,
    extend_matrix,
    hermitian_defect,
)

TOL_ACCEPT = 1e-7
MAX_ITERS = 2000
PRUNE_TOL = 1e-9

HOLDS, FAILS, INCONCLUSIVE = "holds", "fails", "inconclusive"


def loewner_le(a, b, tol: float = TOL.psd) -> bool:
    """True iff ``b - a`` has no eigenvalue below ``-tol``.

    ``a`` and ``b`` may be :class:`LabeledOperator` on different registers;
    both are extended to the union register first.
    """
    if isinstance(a, LabeledOperator) and isinstance(b, LabeledOperator):
        target = _union(a.vars, b.vars)
        am = extend_matrix(a.matrix, a.vars, target)
        bm = extend_matrix(b.matrix, b.vars, target)
    else:
        am, bm = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
        if am.shape != bm.shape:
            raise ValidationError(f"shape mismatch {am.shape} vs {bm.shape}")
    w, _ = eig_hermitian(bm - am)
    return bool(w[-1] >= -tol)


def _below(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    """a <= b in the Loewner order, with a cheap diagonal rejection first."""
    diff = b - a
    if np.min(np.diag(diff).real) < -tol:
        return False
    return bool(np.linalg.eigvalsh((diff + diff.conj().T) / 2)[0] >= -tol)


def prune(theta: Assertion, tol: float = PRUNE_TOL) -> Assertion:
    """Drop duplicates and every element lying above another element.

    Leaves ``min_M tr(M rho)`` unchanged for every ``rho`` (up to ``tol``).
    Order of the surviving elements follows their first appearance.
    """
    kept: list = []
    names: list = []
    src_names = theta.names or (None,) * len(theta.ops)
    for m, nm in zip(theta.ops, src_names):
        if any(_below(k, m, tol) for k in kept):
            continue
        keep_idx = [i for i, k in enumerate(kept) if not _below(m, k, tol)]
        kept = [kept[i] for i in keep_idx] + [m]
        names = [names[i] for i in keep_idx] + [nm]
    return Assertion(theta.vars, tuple(kept), tuple(names))


# ---------------------------------------------------------------------------
# decisions


@dataclass(frozen=True)
class PartDecision:
    """Verdict for one element ``N`` of the right-hand assertion."""

    index: int
    verdict: str
    weights: Optional[np.ndarray] = None  # holds: simplex weights over theta
    residual: Optional[float] = None  # holds: lambda_max(sum_j w_j M_j - N)
    witness: Optional[np.ndarray] = None  # fails: density matrix, trace 1
    margin: Optional[float] = None  # fails: min_j tr((M_j - N) rho)
    lower: float = -np.inf
    upper: float = np.inf
    iterations: int = 0


@dataclass(frozen=True)
class OrderDecision:
    verdict: str
    parts: tuple
    theta: Assertion = field(repr=False)
    psi: Assertion = field(repr=False)
    tol_accept: float = TOL_ACCEPT

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS

    @property
    def failing(self) -> Optional[PartDecision]:
        return next((p for p in self.parts if p.verdict == FAILS), None)

    def verify(self) -> None:
        """Re-check every certificate; raise :class:`InternalCertificateError` if one is bad."""
        theta = self.theta
        for p in self.parts:
            n = self.psi.ops[p.index]
            diffs = [m - n for m in theta.ops]
            if p.verdict == HOLDS:
                w = np.asarray(p.weights, dtype=float)
                if w.shape != (len(diffs),) or np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
                    raise InternalCertificateError(f"weights for element {p.index} are not in the simplex")
                h = sum(wj * a for wj, a in zip(w, diffs))
                top = float(eig_hermitian(h)[0][0])
                if top > self.tol_accept:
                    raise InternalCertificateError(
                        f"holds certificate for element {p.index} has residual {top:.3g}"
                    )
            elif p.verdict == FAILS:
                rho = p.witness
                if hermitian_defect(rho) > TOL.herm:
                    raise InternalCertificateError("witness is not Hermitian")
                if np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0] < -TOL.psd:
                    raise InternalCertificateError("witness is not positive semidefinite")
                if abs(np.trace(rho).real - 1) > TOL.tr:
                    raise InternalCertificateError("witness does not have unit trace")
                margin = min(float(np.trace(a @ rho).real) for a in diffs)
                if margin <= self.tol_accept:
                    raise InternalCertificateError(
                        f"fails certificate for element {p.index} has margin {margin:.3g}"
                    )
            elif not (p.lower <= p.upper + 1e-12):
                raise InternalCertificateError("inconclusive interval is empty")

    def summary(self) -> str:
        lines = [f"verdict: {self.verdict}"]
        for p in self.parts:
            if p.verdict == HOLDS:
                w = ", ".join(f"{x:.6g}" for x in p.weights)
                lines.append(f"  N{p.index}: holds, weights ({w}), residual {p.residual:.3g}")
            elif p.verdict == FAILS:
                lines.append(f"  N{p.index}: fails, margin {p.margin:.6g}")
            else:
                lines.append(
                    f"  N{p.index}: inconclusive in [{p.lower:.3g}, {p.upper:.3g}] after {p.iterations} iterations"
                )
        return "\n".join(lines)


def _top(h: np.ndarray):
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    return float(w[-1]), v[:, -1], w, v


def _gains(diffs: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``<v| A_j |v>`` for every j."""
    return np.einsum("a,jab,b->j", v.conj(), diffs, v).real


def _decide_one(diffs: np.ndarray, index: int, tol: float, max_iters: int) -> PartDecision:
    m = len(diffs)
    if m == 1:
        top, v, _, _ = _top(diffs[0])
        if top <= tol:
            return PartDecision(index, HOLDS, np.ones(1), top, lower=top, upper=top, iterations=1)
        return PartDecision(index, FAILS, witness=np.outer(v, v.conj()), margin=top,
                            lower=top, upper=top, iterations=1)

    upper, best_w = np.inf, None
    lower, best_rho = -np.inf, None
    cuts: list = []
    it = 0

    def observe(w, h):
        nonlocal upper, best_w, lower, best_rho
        top, v, evals, evecs = _top(h)
        if top < upper:
            upper, best_w = top, w.copy()
        # every near-top eigenvector is a useful cut for the polish stage
        near = np.nonzero(evals >= top - 1e-6 * max(1.0, abs(top)))[0]
        cuts.extend(evecs[:, near].T)
        g = _gains(diffs, v)
        if g.min() > lower:
            lower, best_rho = float(g.min()), np.outer(v, v.conj())
        return g

    # single-element weights first: cheap and exact when theta has a minimum
    for j in range(m):
        it += 1
        e = np.zeros(m)
        e[j] = 1.0
        observe(e, diffs[j])
        if upper <= tol or lower > tol:
            break

    # mirror descent on the simplex
    if upper > tol and lower <= tol:
        lip = max(float(np.max(np.abs(np.linalg.eigvalsh(a)))) for a in diffs) or 1.0
        w = np.full(m, 1.0 / m)
        budget = max_iters // 2
        for t in range(budget):
            it += 1
            g = observe(w, np.einsum("j,jab->ab", w, diffs))
            if upper <= tol or lower > tol:
                break
            eta = np.sqrt(np.log(m) / (t + 1)) / lip
            w = w * np.exp(-eta * (g - g.min()))
            w /= w.sum()

    # cutting-plane polish: min_{w, z} z  s.t.  sum_j w_j <v_t|A_j|v_t> <= z
    while upper > tol and lower <= tol and it < max_iters:
        it += 1
        vs = np.array(cuts)
        g = np.einsum("ta,jab,tb->tj", vs.conj(), diffs, vs).real
        c = np.zeros(m + 1)
        c[-1] = 1.0
        a_ub = np.hstack([g, -np.ones((len(g), 1))])
        a_eq = np.hstack([np.ones((1, m)), np.zeros((1, 1))])
        res = linprog(c, A_ub=a_ub, b_ub=np.zeros(len(g)), A_eq=a_eq, b_eq=[1.0],
                      bounds=[(0, None)] * m + [(None, None)], method="highs")
        if res.status != 0:
            break
        w = np.clip(res.x[:m], 0, None)
        w /= w.sum()
        mu = np.clip(-res.ineqlin.marginals, 0, None)
        if mu.sum() > 0:
            mu /= mu.sum()
            rho = np.einsum("t,ta,tb->ab", mu, vs, vs.conj())
            lo = float(min(np.trace(a @ rho).real for a in diffs))
            if lo > lower:
                lower, best_rho = lo, rho
        n_before = len(cuts)
        observe(w, np.einsum("j,jab->ab", w, diffs))
        if len(cuts) == n_before:
            break

    if upper <= tol:
        best_w = np.clip(best_w, 0, None)
        best_w = best_w / best_w.sum()
        resid = _top(np.einsum("j,jab->ab", best_w, diffs))[0]
        return PartDecision(index, HOLDS, best_w, resid, lower=lower, upper=upper, iterations=it)
    if lower > tol:
        rho = best_rho / np.trace(best_rho).real
        return PartDecision(index, FAILS, witness=rho, margin=lower, lower=lower, upper=upper, iterations=it)
    return PartDecision(index, INCONCLUSIVE, lower=lower, upper=upper, iterations=it)


def inf_le(theta: Assertion, psi: Assertion, tol_accept: float = TOL_ACCEPT,
           max_iters: int = MAX_ITERS) -> OrderDecision:
    """Decide ``theta <=_inf psi`` with a checked certificate for every element of ``psi``."""
    target = _union(theta.vars, psi.vars)
    theta, psi = theta.extend(target), psi.extend(target)
    ms = np.stack(theta.ops)
    parts = []
    for i, n in enumerate(psi.ops):
        if hermitian_defect(n) > TOL.herm:
            raise ValidationError(f"element {i} of the right-hand assertion is not Hermitian")
        parts.append(_decide_one(ms - n[None], i, tol_accept, max_iters))
    verdicts = {p.verdict for p in parts}
    verdict = FAILS if FAILS in verdicts else INCONCLUSIVE if INCONCLUSIVE in verdicts else HOLDS
    out = OrderDecision(verdict, tuple(parts), theta, psi, tol_accept)
    out.verify()
    return out
