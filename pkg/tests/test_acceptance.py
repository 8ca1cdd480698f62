"""End-to-end acceptance checks, one PASS/FAIL line per criterion.

Run ``pytest tests/test_acceptance.py -s`` to see the lines. Every reference
value is computed here independently of the transformers (channel sets from
the semantics engine, explicit Kraus sums, or hand-written matrices).
"""

import time

import numpy as np
import pytest

from nqverify.errors import InvalidInvariant
from nqverify.operators import Assertion, SuperOperator, compose
from nqverify.order import inf_le, prune
from nqverify.semantics import check_formula_empirical, denote_loopfree, violation_margins, while_unrollings
from nqverify.testing import QUBITS, ProgramGenerator, count_atoms, count_ndet, random_predicate
from nqverify.verifier import CORPUS_DIR, errcorr_reduced_state_check, verify, verify_source
from nqverify.wlp import wlp, wp_loopfree

from conftest import corpus_proofs, find_loop

RESULTS = {}


def report(num, ok, elapsed, limit, detail=""):
    within = elapsed < limit
    line = (f"criterion {num:2d}: {'PASS' if ok and within else 'FAIL'}  "
            f"({elapsed:.2f}s, limit {limit:g}s){'  ' + detail if detail else ''}")
    RESULTS[num] = line
    print(line)
    assert ok, line
    assert within, line


@pytest.fixture(scope="module", autouse=True)
def summary():
    yield
    print("\n" + "\n".join(RESULTS[k] for k in sorted(RESULTS)))


def test_criterion_01_qwalk_holds():
    t = time.perf_counter()
    run = verify(CORPUS_DIR / "qwalk.nqpv")
    rep = run.report("pf")
    vc = rep.vc
    ok = rep.verdict == "holds" and len(vc) == 1 and vc.vars == ("q1", "q2")
    ok = ok and np.allclose(vc.ops[0], np.eye(4), atol=1e-6, rtol=0)
    report(1, ok, time.perf_counter() - t, 1.0, f"verdict {rep.verdict}")


def test_criterion_02_invalid_invariant(capsys):
    from nqverify.cli import main

    t = time.perf_counter()
    with pytest.raises(InvalidInvariant) as info:
        verify(CORPUS_DIR / "qwalk_bad_invariant.nqpv")
    code = main(["verify", str(CORPUS_DIR / "qwalk_bad_invariant.nqpv")])
    err = capsys.readouterr().err
    ok = "P0[q1]" in str(info.value) and code == 3 and "P0[q1]" in err
    with capsys.disabled():
        report(2, ok, time.perf_counter() - t, 1.0, f"exit {code}")


def test_criterion_03_errcorr():
    t = time.perf_counter()
    run = verify(CORPUS_DIR / "errcorr.nqpv")
    ok = all(run.report(n).verdict == "holds" for n in ("pf0", "pf1", "pfplus", "pfi"))
    s2 = 1 / np.sqrt(2)
    for psi in ([1, 0], [0, 1], [s2, s2], [s2, 1j * s2]):
        ok = ok and errcorr_reduced_state_check(np.array(psi, dtype=complex), atol=1e-10)
    report(3, ok, time.perf_counter() - t, 2.0)


def test_criterion_04_deutsch():
    t = time.perf_counter()
    rep = verify(CORPUS_DIR / "deutsch.nqpv").report("pf")
    report(4, rep.verdict == "holds", time.perf_counter() - t, 1.0, f"verdict {rep.verdict}")


def test_criterion_05_order_certificates():
    t = time.perf_counter()
    p0, p1, half = np.diag([1.0, 0]), np.diag([0, 1.0]), np.eye(2) / 2
    d1 = inf_le(Assertion(("q",), (p0, p1)), Assertion(("q",), (half,)))
    d2 = inf_le(Assertion(("q",), (p0,)), Assertion(("q",), (half,)))
    d1.verify()
    d2.verify()
    a, b = d1.parts[0], d2.parts[0]
    ok = d1.verdict == "holds" and np.allclose(a.weights, [0.5, 0.5], atol=1e-9) and a.residual <= 1e-9
    ok = ok and d2.verdict == "fails" and np.allclose(b.witness, p0, atol=1e-9)
    ok = ok and abs(b.margin - 0.5) <= 1e-9
    # recompute both certificates by hand
    ok = ok and np.linalg.eigvalsh(0.5 * p0 + 0.5 * p1 - half).max() <= 1e-9
    ok = ok and abs(np.trace((p0 - half) @ b.witness).real - 0.5) <= 1e-9
    report(5, ok, time.perf_counter() - t, 0.1)


def _adjoint_sets(sem, m, d):
    """Liberal and total preconditions of one predicate, from the channel set."""
    eye = np.eye(d)
    lib, tot = [], []
    for e in sem:
        adj = lambda a: sum(k.conj().T @ a @ k for k in e.kraus)
        tot.append(adj(m))
        lib.append(adj(m) + eye - adj(eye))
    return lib, tot


def test_criterion_06_duality():
    t = time.perf_counter()
    rng = np.random.default_rng(20240601)
    n_prog, n_checks, bad = 200, 0, []
    for i in range(n_prog):
        n = int(rng.integers(1, 4))
        reg = QUBITS[:n]
        s = ProgramGenerator(rng, reg, max_atoms=6, max_ndet=2).program()
        assert count_atoms(s) <= 6 and count_ndet(s) <= 2
        sem = denote_loopfree(s, reg)
        d = 2 ** n
        for _ in range(3):
            m = random_predicate(d, rng)
            lib, tot = _adjoint_sets(sem, m, d)
            post = Assertion(reg, (m,))
            pre_l, _ = wlp(s, post)
            pre_t = wp_loopfree(s, post)
            n_checks += 1
            if not (prune(Assertion(reg, tuple(lib))).same_set(pre_l, 1e-9)
                    and prune(Assertion(reg, tuple(tot))).same_set(pre_t, 1e-9)):
                bad.append(i)
    report(6, not bad, time.perf_counter() - t, 60.0,
           f"{n_prog} programs, {n_checks} predicates, {len(bad)} mismatches")


def test_criterion_07_recursion_identity(qwalk_loop):
    t = time.perf_counter()
    vars = ("q1", "q2")
    body = list(denote_loopfree(qwalk_loop.body, vars))
    p0 = qwalk_loop.measurement.branch(0).extend(vars)
    p1 = qwalk_loop.measurement.branch(1).extend(vars)
    worst, count = 0.0, 0
    prev = {(): p0}  # depth 0: only the exit branch
    assert np.allclose(while_unrollings(qwalk_loop, 0, vars, body=body)[()].transfer, p0.transfer)
    for n in range(0, 6):
        table = while_unrollings(qwalk_loop, n + 1, vars, body=body)
        for eta, f in table.items():
            rhs = p0 + compose(prev[eta[1:]], compose(body[eta[0]], p1))
            worst = max(worst, float(np.abs(f.transfer - rhs.transfer).max()))
            count += 1
        prev = table
    report(7, worst <= 1e-10, time.perf_counter() - t, 10.0,
           f"{count} scheduler prefixes, max deviation {worst:.2e}")


def test_criterion_08_nontermination(qwalk_loop):
    t = time.perf_counter()
    vars = ("q1", "q2")
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 1
    worst, count = 0.0, 0
    for n in range(0, 7):
        for f in while_unrollings(qwalk_loop, n, vars).values():
            out = sum(k @ rho @ k.conj().T for k in f.kraus)
            worst = max(worst, abs(np.trace(out).real))
            count += 1
    report(8, worst <= 1e-10, time.perf_counter() - t, 10.0,
           f"{count} schedulers, max trace {worst:.2e}")


def _boundary_theta(pre, d, rng):
    """Two predicates whose inf is close to the smallest eigenvalue of ``pre``."""
    c = min(np.linalg.eigvalsh(n)[0] for n in pre.ops)
    dm = random_predicate(d, rng) - 0.5 * np.eye(d)
    a, b = rng.uniform(0.2, 1, 2)
    sc = min(c, 1 - c) / max(a, b)
    return (c * np.eye(d) + a * sc * dm, c * np.eye(d) - b * sc * dm)


def test_criterion_09_soundness():
    t = time.perf_counter()
    rng = np.random.default_rng(99)
    verdicts, bad = {"holds": 0, "fails": 0, "inconclusive": 0}, []
    for i in range(100):
        n = int(rng.integers(1, 3))
        reg = QUBITS[:n]
        d = 2 ** n
        s = ProgramGenerator(rng, reg).program()
        post = Assertion(reg, tuple(random_predicate(d, rng) for _ in range(int(rng.integers(1, 3)))))
        pre, _ = wlp(s, post)
        if i % 2 == 0:
            ops = tuple(random_predicate(d, rng) for _ in range(int(rng.integers(1, 4))))
        else:
            ops = _boundary_theta(pre, d, rng)
        theta = Assertion(reg, ops)
        dec = inf_le(theta, pre)
        verdicts[dec.verdict] += 1
        if dec.verdict == "holds":
            if not check_formula_empirical(theta, s, post, samples=1000, seed=i).ok:
                bad.append(i)
        elif dec.verdict == "fails":
            sem = denote_loopfree(s, reg)
            m = violation_margins(theta, post, sem.elements, dec.failing.witness[None]).max()
            if not m > 1e-8:
                bad.append(i)
    ok = not bad and verdicts["holds"] > 0 and verdicts["fails"] > 0
    report(9, ok, time.perf_counter() - t, 120.0, f"{verdicts}, {len(bad)} inconsistent")


DOUBLE_ERRCORR = """
def psi0 := load "psi0.qmat.json" end
def psiplus := load "psiplus.qmat.json" end

def pf := proof [a a1 a2 b b1 b2] :
    { psi0[a] psiplus[b] };
    [a1 a2] :=0; [b1 b2] :=0;
    [a a1] *= CX; [a a2] *= CX;
    [b b1] *= CX; [b b2] *= CX;
    ( skip # [a] *= X # [a1] *= X # [a2] *= X );
    ( skip # [b] *= X # [b1] *= X # [b2] *= X );
    [a a2] *= CX; [a a1] *= CX;
    [b b2] *= CX; [b b1] *= CX;
    if M01[a2] then if M01[a1] then [a] *= X end end;
    if M01[b2] then if M01[b1] then [b] *= X end end;
    { psi0[a] psiplus[b] }
end
"""


def test_criterion_10_six_qubit_errcorr():
    t = time.perf_counter()
    run = verify_source(DOUBLE_ERRCORR, CORPUS_DIR)
    rep = run.report("pf")
    ok = rep.verdict == "holds" and len(rep.vc.vars) == 6
    # the computed precondition is exactly the postcondition (as a set)
    ok = ok and rep.vc.same_set(rep.outline.proof.post.extend(rep.vc.vars), 1e-9)
    report(10, ok, time.perf_counter() - t, 30.0, f"verdict {rep.verdict}, 6 qubits")
