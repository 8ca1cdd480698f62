# Operators on named qubit registers.
#
# Every matrix carries the names of the qubits it acts on. The first name is
# the most significant bit, so X on [a] inside [a b] is X kron I.

import numpy as np

from nqverify import DensityOperator, LabeledOperator, SuperOperator, apply, extend, partial_trace, tensor
from nqverify.operators import basis_state, projector

X = np.array([[0, 1], [1, 0]], dtype=complex)
H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)

print(extend(LabeledOperator(("a",), X), ("a", "b")).matrix.real)

# CX written with control b and target a, moved onto the register [a b]
cx_ba = extend(LabeledOperator(("b", "a"), CX), ("a", "b"))
print(cx_ba.matrix.real)

# H on two qubits sends |00> to the uniform superposition
hh = tensor(LabeledOperator(("a",), H), LabeledOperator(("b",), H))
print(hh.matrix @ basis_state("00"))

# channels are Kraus lists; reset sends any state to |0>
reset = SuperOperator.reset(("a",))
print(apply(reset, DensityOperator(("a",), np.diag([0.0, 1.0]))).matrix.real)

# reduced state of a Bell pair is maximally mixed
bell = DensityOperator(("a", "b"), projector(np.array([1, 0, 0, 1]) / np.sqrt(2)))
print(partial_trace(bell, ("a",)).matrix.real)
