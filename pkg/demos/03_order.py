# Comparing finite sets of predicates.
#
# theta <=_inf psi asks whether the worst-case expectation of theta never
# exceeds that of psi. Each answer carries a certificate: simplex weights for
# "holds", a state for "fails".

import numpy as np

from nqverify import Assertion, inf_le, loewner_le
from nqverify.testing import random_predicate

p0, p1, half = np.diag([1.0, 0]), np.diag([0, 1.0]), np.eye(2) / 2

print(loewner_le(p0, half))  # False: |0><0| - I/2 has eigenvalue 1/2

d = inf_le(Assertion(("q",), (p0, p1)), Assertion(("q",), (half,)))
print(d.summary())

d = inf_le(Assertion(("q",), (p0,)), Assertion(("q",), (half,)))
print(d.summary())
print(d.failing.witness.real)

# random two-qubit instances: every verdict is re-checked before it is returned
rng = np.random.default_rng(0)
counts = {}
for _ in range(50):
    theta = Assertion(("a", "b"), tuple(random_predicate(4, rng) for _ in range(3)))
    psi = Assertion(("a", "b"), (random_predicate(4, rng),))
    v = inf_le(theta, psi).verdict
    counts[v] = counts.get(v, 0) + 1
print(counts)
