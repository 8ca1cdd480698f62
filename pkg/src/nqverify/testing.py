"""Random programs, predicates and states for property tests."""

from __future__ import annotations

import numpy as np

from .operators import ProjectiveMeasurement
from .syntax import Abort, If, Init, NDet, Seq, Skip, Unitary

QUBITS = ("a", "b", "c")


def random_unitary(d: int, rng) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_predicate(d: int, rng, rank: int | None = None) -> np.ndarray:
    """Random Hermitian matrix with spectrum in [0, 1]."""
    u = random_unitary(d, rng)
    w = rng.uniform(0, 1, d)
    if rank is not None:
        w[rank:] = 0
    return (u * w) @ u.conj().T


def random_projector(d: int, rng) -> np.ndarray:
    k = int(rng.integers(1, d)) if d > 1 else 1
    u = random_unitary(d, rng)[:, :k]
    return u @ u.conj().T


def random_measurement(vars, rng) -> ProjectiveMeasurement:
    d = 2 ** len(vars)
    p1 = random_projector(d, rng)
    p1 = (p1 + p1.conj().T) / 2
    return ProjectiveMeasurement(vars, np.eye(d) - p1, p1)


def _subset(rng, register, kmax=2):
    k = int(rng.integers(1, min(kmax, len(register)) + 1))
    idx = rng.choice(len(register), size=k, replace=False)
    return tuple(register[i] for i in idx)


class ProgramGenerator:
    """Loop-free programs with bounded statement and choice counts.

    ``max_atoms`` bounds atomic statements (skip, abort, init, unitary);
    ``max_ndet`` bounds choice nodes.
    """

    def __init__(self, rng, register=QUBITS[:2], max_atoms=6, max_ndet=2, abort_prob=0.1):
        self.rng = rng
        self.register = tuple(register)
        self.max_atoms = max_atoms
        self.max_ndet = max_ndet
        self.abort_prob = abort_prob

    def program(self):
        self.atoms = int(self.rng.integers(1, self.max_atoms + 1))
        self.ndets = 0
        return self._stmt(self.atoms)

    def _atom(self):
        r = self.rng.random()
        if r < self.abort_prob:
            return Abort()
        if r < self.abort_prob + 0.1:
            return Skip()
        if r < self.abort_prob + 0.25:
            return Init(_subset(self.rng, self.register))
        vs = _subset(self.rng, self.register)
        return Unitary(vs, "U", matrix=random_unitary(2 ** len(vs), self.rng))

    def _stmt(self, budget: int):
        if budget <= 1:
            return self._atom()
        r = self.rng.random()
        left = int(self.rng.integers(1, budget))
        right = budget - left
        if r < 0.3 and self.ndets < self.max_ndet:
            self.ndets += 1
            return NDet((self._stmt(left), self._stmt(right)))
        if r < 0.55:
            vs = _subset(self.rng, self.register)
            m = random_measurement(vs, self.rng)
            return If("M", vs, self._stmt(left), self._stmt(right), measurement=m)
        a, b = self._stmt(left), self._stmt(right)
        flat = []
        for c in (a, b):
            flat.extend(c.children if isinstance(c, Seq) else [c])
        return Seq(tuple(flat))


def count_atoms(s) -> int:
    if isinstance(s, Seq):
        return sum(count_atoms(c) for c in s.children)
    if isinstance(s, NDet):
        return sum(count_atoms(b) for b in s.branches)
    if isinstance(s, If):
        return count_atoms(s.then_branch) + count_atoms(s.else_branch)
    return 1


def count_ndet(s) -> int:
    if isinstance(s, Seq):
        return sum(count_ndet(c) for c in s.children)
    if isinstance(s, NDet):
        return 1 + sum(count_ndet(b) for b in s.branches)
    if isinstance(s, If):
        return count_ndet(s.then_branch) + count_ndet(s.else_branch)
    return 0
