# Programs denote finite sets of channels.
#
# A nondeterministic choice contributes one channel per branch. Loops are
# unrolled to a fixed depth for every scheduler (choice of body channel per
# iteration).

import numpy as np

from nqverify import DensityOperator, denote_bounded, denote_loopfree, parse_program
from nqverify.semantics import output_states, while_unrollings
from nqverify.syntax import bind_program, builtins
from nqverify.verifier import CORPUS_DIR, verify

env = builtins()
s = bind_program(parse_program("(skip # [q] *= X)"), env, ("q",))
sem = denote_loopfree(s)
print(len(sem), "channels")

for rho in [np.diag([1.0, 0]), np.array([[1, -1], [-1, 1]]) / 2, np.eye(2) / 2]:
    outs = output_states(sem, DensityOperator(("q",), rho))
    print(len(outs), "distinct output(s) from", rho.real.tolist())

# the quantum walk never halts: no probability mass leaves the loop
run = verify(CORPUS_DIR / "qwalk.nqpv")
proof = run.report("pf").outline.proof
loop = proof.body.children[1]
start = np.zeros((4, 4))
start[0, 0] = 1
for depth in range(7):
    table = while_unrollings(loop, depth, ("q1", "q2"))
    mass = max(abs(np.trace(sum(k @ start @ k.conj().T for k in f.kraus))) for f in table.values())
    print(f"depth {depth}: {len(table)} schedulers, largest halting probability {mass:.1e}")

print(len(denote_bounded(proof.body, 3)), "distinct channel(s) at depth 3")
