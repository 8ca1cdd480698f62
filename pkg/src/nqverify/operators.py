"""Dense linear algebra over named qubit registers.

Operators are complex ``2**n x 2**n`` matrices attached to an ordered tuple
of qubit names. The first name is the most significant bit of the
computational-basis index, so ``CX`` on ``(q1, q2)`` with ``q1`` as control is
the familiar 4x4 matrix.

Super-operators are kept as finite Kraus lists. Two channels are compared by
their transfer matrix (the action on the matrix units), never by their Kraus
lists, since Kraus representations are not unique.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DisjointnessError,
    ExtensionError,
    HermiticityError,
    ValidationError,
)


@dataclass(frozen=True)
class Tolerances:
    herm: float = 1e-9
    psd: float = 1e-7
    tr: float = 1e-9


TOL = Tolerances()

# entrywise tolerance for treating two matrices as the same element of a set
DEDUP_ATOL = 1e-10


def as_vars(names: Iterable[str]) -> tuple[str, ...]:
    names = tuple(names)
    if len(set(names)) != len(names):
        raise DisjointnessError(f"repeated qubit variable in {list(names)}")
    return names


def _nqubits(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim < 1 or (1 << n) != dim:
        raise ValidationError(f"dimension {dim} is not a power of two")
    return n


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def hermitian_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - dagger(a)), initial=0.0))


def eigvalsh(a: np.ndarray) -> np.ndarray:
    """Eigenvalues (ascending) of the Hermitian part of ``a``."""
    return np.linalg.eigvalsh((a + dagger(a)) / 2)


def min_eigenvalue(a: np.ndarray) -> float:
    return float(eigvalsh(a)[0])


def is_unitary(u: np.ndarray, tol: float = TOL.herm) -> bool:
    d = u.shape[0]
    return bool(np.max(np.abs(dagger(u) @ u - np.eye(d))) <= tol)


def is_predicate_matrix(m: np.ndarray, tol: Tolerances = TOL) -> bool:
    if hermitian_defect(m) > tol.herm:
        return False
    w = eigvalsh(m)
    return bool(w[0] >= -tol.psd and w[-1] <= 1 + tol.psd)


@dataclass(frozen=True, eq=False)
class LabeledOperator:
    """A square matrix acting on the qubits named in ``vars``."""

    vars: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vars", as_vars(self.vars))
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"operator matrix must be square, got shape {m.shape}")
        if m.shape[0] != 2 ** len(self.vars):
            raise ValidationError(
                f"matrix of dimension {m.shape[0]} does not fit {len(self.vars)} qubit(s) {list(self.vars)}"
            )
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dagger(self) -> LabeledOperator:
        return LabeledOperator(self.vars, dagger(self.matrix))

    def allclose(self, other: LabeledOperator, atol: float = 1e-9) -> bool:
        if set(self.vars) != set(other.vars):
            return False
        b = extend(other, self.vars).matrix if other.vars != self.vars else other.matrix
        return bool(np.allclose(self.matrix, b, atol=atol, rtol=0))

    def __repr__(self):
        return f"{type(self).__name__}({list(self.vars)}, dim={self.dim})"


class QuantumPredicate(LabeledOperator):
    """Hermitian operator between 0 and I in the Loewner order."""

    def __post_init__(self):
        super().__post_init__()
        if hermitian_defect(self.matrix) > TOL.herm:
            raise ValidationError(f"predicate on {list(self.vars)} is not Hermitian")
        w = eigvalsh(self.matrix)
        if w[0] < -TOL.psd or w[-1] > 1 + TOL.psd:
            raise ValidationError(
                f"predicate on {list(self.vars)} has eigenvalues outside [0, 1] "
                f"(min {w[0]:.3g}, max {w[-1]:.3g})"
            )


class DensityOperator(LabeledOperator):
    """Positive operator with trace at most one (a partial density operator)."""

    def __post_init__(self):
        super().__post_init__()
        if hermitian_defect(self.matrix) > TOL.herm:
            raise ValidationError("density operator is not Hermitian")
        if min_eigenvalue(self.matrix) < -TOL.psd:
            raise ValidationError("density operator is not positive semidefinite")
        t = self.trace
        if t > 1 + TOL.tr:
            raise ValidationError(f"density operator has trace {t:.12g} > 1")

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)


@dataclass(frozen=True, eq=False)
class ProjectiveMeasurement:
    """Two-outcome projective measurement ``(P0, P1)`` on ``vars``."""

    vars: tuple[str, ...]
    p0: np.ndarray
    p1: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vars", as_vars(self.vars))
        d = 2 ** len(self.vars)
        for name in ("p0", "p1"):
            p = _frozen(getattr(self, name))
            if p.shape != (d, d):
                raise ValidationError(f"projector {name} has shape {p.shape}, expected {(d, d)}")
            if hermitian_defect(p) > TOL.herm:
                raise ValidationError(f"projector {name} is not Hermitian")
            if np.max(np.abs(p @ p - p)) > TOL.herm:
                raise ValidationError(f"projector {name} is not idempotent")
            object.__setattr__(self, name, p)
        if np.max(np.abs(self.p0 + self.p1 - np.eye(d))) > TOL.herm:
            raise ValidationError("measurement projectors do not sum to the identity")

    def branch(self, outcome: int) -> SuperOperator:
        return SuperOperator(self.vars, [self.p1 if outcome else self.p0])


@dataclass(frozen=True, eq=False)
class SuperOperator:
    """Completely positive map ``A -> sum_i E_i A E_i^dagger`` on ``vars``."""

    vars: tuple[str, ...]
    kraus: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "vars", as_vars(self.vars))
        d = 2 ** len(self.vars)
        ks = tuple(_frozen(k) for k in self.kraus)
        if not ks:
            raise ValidationError("a super-operator needs at least one Kraus operator")
        for k in ks:
            if k.shape != (d, d):
                raise ValidationError(f"Kraus operator of shape {k.shape} on {len(self.vars)} qubit(s)")
        object.__setattr__(self, "kraus", ks)

    @property
    def dim(self) -> int:
        return 2 ** len(self.vars)

    @classmethod
    def identity(cls, vars) -> SuperOperator:
        vars = as_vars(vars)
        return cls(vars, [np.eye(2 ** len(vars))])

    @classmethod
    def zero(cls, vars) -> SuperOperator:
        vars = as_vars(vars)
        d = 2 ** len(vars)
        return cls(vars, [np.zeros((d, d))])

    @classmethod
    def unitary(cls, vars, u) -> SuperOperator:
        return cls(vars, [u])

    @classmethod
    def reset(cls, vars) -> SuperOperator:
        """The channel setting every qubit in ``vars`` to |0>."""
        vars = as_vars(vars)
        d = 2 ** len(vars)
        ks = []
        for i in range(d):
            k = np.zeros((d, d))
            k[0, i] = 1.0
            ks.append(k)
        return cls(vars, ks)

    @cached_property
    def stacked(self) -> np.ndarray:
        return np.stack(self.kraus)

    @cached_property
    def transfer(self) -> np.ndarray:
        """Matrix T with vec(E(A)) = T vec(A) for row-major vec."""
        ks = self.stacked
        d = self.dim
        return np.einsum("kab,kcd->acbd", ks, ks.conj()).reshape(d * d, d * d)

    @cached_property
    def choi(self) -> np.ndarray:
        v = self.stacked.reshape(len(self.kraus), -1)
        return v.T @ v.conj()

    def extend(self, target) -> SuperOperator:
        target = as_vars(target)
        if target == self.vars:
            return self
        return SuperOperator(target, [extend_matrix(k, self.vars, target) for k in self.kraus])

    def compressed(self) -> SuperOperator:
        """Equivalent channel with at most ``dim**2`` Kraus operators."""
        d = self.dim
        v = self.stacked.reshape(len(self.kraus), -1).T
        u, s, _ = np.linalg.svd(v, full_matrices=False)
        keep = s > 1e-12 * max(1.0, s[0] if s.size else 1.0)
        if not np.any(keep):
            return SuperOperator.zero(self.vars)
        ks = (u[:, keep] * s[keep]).T.reshape(-1, d, d)
        return SuperOperator(self.vars, list(ks))

    def kraus_sum(self) -> np.ndarray:
        ks = self.stacked
        return np.einsum("kba,kbc->ac", ks.conj(), ks)

    def is_trace_nonincreasing(self, tol: float = TOL.psd) -> bool:
        return min_eigenvalue(np.eye(self.dim) - self.kraus_sum()) >= -tol

    def same_channel(self, other: SuperOperator, atol: float = DEDUP_ATOL) -> bool:
        if self.vars != other.vars:
            other = other.extend(self.vars)
        return bool(np.allclose(self.transfer, other.transfer, atol=atol, rtol=0))

    def __add__(self, other: SuperOperator) -> SuperOperator:
        target = _union(self.vars, other.vars)
        a, b = self.extend(target), other.extend(target)
        out = SuperOperator(target, a.kraus + b.kraus)
        return out.compressed() if len(out.kraus) > out.dim**2 else out

    def __repr__(self):
        return f"SuperOperator({list(self.vars)}, {len(self.kraus)} Kraus)"


def _union(a: Sequence[str], b: Sequence[str]) -> tuple[str, ...]:
    return tuple(a) + tuple(v for v in b if v not in a)


# ---------------------------------------------------------------------------
# register manipulation


def permute_qubits(matrix: np.ndarray, source: Sequence[str], target: Sequence[str]) -> np.ndarray:
    """Reorder the tensor factors of ``matrix`` from ``source`` order to ``target`` order."""
    if tuple(source) == tuple(target):
        return matrix
    n = len(source)
    perm = [list(source).index(v) for v in target]
    t = np.asarray(matrix).reshape((2,) * (2 * n))
    t = t.transpose(perm + [n + p for p in perm])
    return t.reshape(2**n, 2**n)


def extend_matrix(matrix: np.ndarray, vars: Sequence[str], target: Sequence[str]) -> np.ndarray:
    vars, target = tuple(vars), tuple(target)
    if vars == target:
        return np.asarray(matrix)
    missing = [v for v in vars if v not in target]
    if missing:
        raise ExtensionError(f"variables {missing} are not in register {list(target)}")
    rest = [v for v in target if v not in vars]
    full = np.kron(matrix, np.eye(2 ** len(rest)))
    return permute_qubits(full, vars + tuple(rest), target)


def extend(op: LabeledOperator, target: Sequence[str]) -> LabeledOperator:
    """Cylinder extension of ``op`` to the register ``target`` (identity elsewhere)."""
    target = as_vars(target)
    return type(op)(target, extend_matrix(op.matrix, op.vars, target))


def tensor(a: LabeledOperator, b: LabeledOperator) -> LabeledOperator:
    common = set(a.vars) & set(b.vars)
    if common:
        raise DisjointnessError(f"tensor factors share variables {sorted(common)}")
    return LabeledOperator(a.vars + b.vars, np.kron(a.matrix, b.matrix))


def partial_trace(rho: LabeledOperator, keep: Sequence[str]) -> LabeledOperator:
    """Trace out every qubit of ``rho`` not listed in ``keep``; result is ordered as ``keep``."""
    keep = as_vars(keep)
    missing = [v for v in keep if v not in rho.vars]
    if missing:
        raise ExtensionError(f"cannot keep {missing}: not in {list(rho.vars)}")
    traced = tuple(v for v in rho.vars if v not in keep)
    m = permute_qubits(rho.matrix, rho.vars, keep + traced)
    dk, dt = 2 ** len(keep), 2 ** len(traced)
    out = np.einsum("ajbj->ab", m.reshape(dk, dt, dk, dt))
    cls = DensityOperator if isinstance(rho, DensityOperator) else LabeledOperator
    return cls(keep, out)


# ---------------------------------------------------------------------------
# channels


def apply(e: SuperOperator, rho: LabeledOperator) -> LabeledOperator:
    """``sum_i E_i rho E_i^dagger`` with ``e`` extended to ``rho``'s register."""
    ks = e.extend(rho.vars).stacked
    out = np.einsum("kab,bc,kdc->ad", ks, rho.matrix, ks.conj())
    cls = DensityOperator if isinstance(rho, DensityOperator) else LabeledOperator
    return cls(rho.vars, out)


def adjoint(e: SuperOperator) -> SuperOperator:
    return SuperOperator(e.vars, [dagger(k) for k in e.kraus])


def compose(f: SuperOperator, e: SuperOperator) -> SuperOperator:
    """The channel ``f o e`` (apply ``e`` first)."""
    target = _union(e.vars, f.vars)
    fe, ee = f.extend(target), e.extend(target)
    ks = np.einsum("jab,ibc->jiac", fe.stacked, ee.stacked).reshape(-1, fe.dim, fe.dim)
    out = SuperOperator(target, list(ks))
    return out.compressed() if len(out.kraus) > out.dim**2 else out


# ---------------------------------------------------------------------------
# spectra


def eig_hermitian(a: LabeledOperator | np.ndarray, tol: float = TOL.herm):
    """Descending eigenvalues and a top eigenvector of a Hermitian operator."""
    m = a.matrix if isinstance(a, LabeledOperator) else np.asarray(a, dtype=complex)
    if hermitian_defect(m) > tol * max(1.0, float(np.max(np.abs(m), initial=0.0))):
        raise HermiticityError("eigendecomposition requested for a non-Hermitian operator")
    w, v = np.linalg.eigh((m + dagger(m)) / 2)
    return w[::-1].copy(), v[:, -1].copy()


def loewner_min_gap(a: np.ndarray, b: np.ndarray) -> float:
    """Smallest eigenvalue of ``b - a``; non-negative iff ``a`` is below ``b``."""
    return min_eigenvalue(b - a)


# ---------------------------------------------------------------------------
# assertions


def _dedup(mats: Iterable[np.ndarray], atol: float = DEDUP_ATOL) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for m in mats:
        if not any(np.allclose(m, k, atol=atol, rtol=0) for k in out):
            out.append(m)
    return out


@dataclass(frozen=True, eq=False)
class Assertion:
    """A finite, nonempty set of quantum predicates over one register.

    ``names`` optionally carries a display name per element; it plays no role
    in any computation.
    """

    vars: tuple[str, ...]
    ops: tuple[np.ndarray, ...]
    names: tuple[str | None, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "vars", as_vars(self.vars))
        d = 2 ** len(self.vars)
        names = tuple(self.names) or (None,) * len(self.ops)
        kept, kept_names = [], []
        for m, nm in zip(self.ops, names):
            m = _frozen(m)
            if m.shape != (d, d):
                raise ValidationError(f"predicate of shape {m.shape} on register {list(self.vars)}")
            if any(np.allclose(m, k, atol=DEDUP_ATOL, rtol=0) for k in kept):
                continue
            kept.append(m)
            kept_names.append(nm)
        if not kept:
            raise ValidationError("an assertion needs at least one predicate")
        object.__setattr__(self, "ops", tuple(kept))
        object.__setattr__(self, "names", tuple(kept_names))

    @classmethod
    def of(cls, operators: Sequence[LabeledOperator], target=None, names=None) -> Assertion:
        """Build from labeled operators, extending each to ``target``."""
        if target is None:
            target = ()
            for op in operators:
                target = _union(target, op.vars)
        target = as_vars(target)
        return cls(target, tuple(extend_matrix(op.matrix, op.vars, target) for op in operators),
                   tuple(names) if names else ())

    @classmethod
    def single(cls, vars, matrix) -> Assertion:
        return cls(vars, (matrix,))

    def __len__(self):
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    @property
    def dim(self) -> int:
        return 2 ** len(self.vars)

    def extend(self, target) -> Assertion:
        target = as_vars(target)
        if target == self.vars:
            return self
        return Assertion(target, tuple(extend_matrix(m, self.vars, target) for m in self.ops), self.names)

    def validate(self, tol: Tolerances = TOL) -> Assertion:
        for i, m in enumerate(self.ops):
            if not is_predicate_matrix(m, tol):
                raise ValidationError(f"element {i} of assertion is not a predicate (0 <= M <= I)")
        return self

    def same_set(self, other: Assertion, atol: float = 1e-9) -> bool:
        """Set equality with entrywise tolerance."""
        other = other.extend(self.vars)
        match = lambda a, bs: any(np.allclose(a, b, atol=atol, rtol=0) for b in bs)
        return all(match(a, other.ops) for a in self.ops) and all(match(b, self.ops) for b in other.ops)

    def __repr__(self):
        return f"Assertion({list(self.vars)}, {len(self.ops)} predicate(s))"


# ---------------------------------------------------------------------------
# common states


def basis_state(bits: str) -> np.ndarray:
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2)] = 1.0
    return v


def projector(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())
