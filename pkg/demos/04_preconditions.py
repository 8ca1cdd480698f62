# Backward predicate transformers.
#
# wlp runs from the postcondition to the front of the program; a loop uses its
# annotated invariant. The result is checked against the channel semantics.

import numpy as np

from nqverify import Assertion, denote_loopfree, parse_program, wlp, wp_loopfree
from nqverify.order import prune
from nqverify.syntax import bind_program, builtins
from nqverify.testing import QUBITS, ProgramGenerator, random_predicate

env = builtins()
s = bind_program(parse_program("[q] *= H; (skip # abort)"), env, ("q",))
plus = Assertion(("q",), (np.array([[1, 1], [1, 1]]) / 2,))
pre, steps = wlp(s, plus)
for st in steps:
    print(st.rule, [(np.round(m.real, 3) + 0.0).tolist() for m in st.pre.ops])
print("wp:", [(np.round(m.real, 3) + 0.0).tolist() for m in wp_loopfree(s, plus).ops])

# duality with the semantics on random programs
rng = np.random.default_rng(3)
bad = 0
for _ in range(50):
    reg = QUBITS[:2]
    prog = ProgramGenerator(rng, reg).program()
    m = random_predicate(4, rng)
    lib = [sum(k.conj().T @ (m - np.eye(4)) @ k for k in e.kraus) + np.eye(4)
           for e in denote_loopfree(prog, reg)]
    bad += not prune(Assertion(reg, tuple(lib))).same_set(wlp(prog, Assertion(reg, (m,)))[0])
print("mismatches:", bad)
