import numpy as np
import pytest

from nqverify.errors import LoopPresentError, SetExplosionError
from nqverify.operators import Assertion, DensityOperator, SuperOperator, compose, projector
from nqverify.semantics import (
    check_formula_empirical,
    denote_bounded,
    denote_loopfree,
    expectation,
    output_states,
    sample_densities,
    while_unrollings,
)
from nqverify.syntax import bind_program, builtins, parse_program, seq
from nqverify.testing import QUBITS, ProgramGenerator, random_predicate

from conftest import corpus_proofs

ENV = builtins()


def program(src, register):
    return bind_program(parse_program(src), ENV, tuple(register))


def test_choice_between_skip_and_flip():
    s = program("(skip # [q] *= X)", "q")
    sem = denote_loopfree(s)
    assert len(sem) == 2
    rho = DensityOperator(("q",), np.diag([1.0, 0]))
    outs = output_states(sem, rho)
    assert len(outs) == 2
    assert any(np.allclose(o, np.diag([1.0, 0])) for o in outs)
    assert any(np.allclose(o, np.diag([0, 1.0])) for o in outs)


def test_global_phase_disappears():
    s = program("(skip # [q] *= X)", "q")
    minus = DensityOperator(("q",), projector([1, -1]) / 2)
    outs = output_states(denote_loopfree(s), minus)
    assert len(outs) == 1 and np.allclose(outs[0], minus.matrix)


def test_maximally_mixed_state_is_a_single_output():
    s = program("(skip # [q] *= X)", "q")
    outs = output_states(denote_loopfree(s), DensityOperator(("q",), np.eye(2) / 2))
    assert len(outs) == 1 and np.allclose(outs[0], np.eye(2) / 2)


def test_errcorr_has_four_channels():
    body = corpus_proofs("errcorr.nqpv")["pf0"].body
    sem = denote_loopfree(body, ("q", "q1", "q2"))
    assert len(sem) == 4
    for e in sem:
        assert e.is_trace_nonincreasing()


def test_errcorr_channels_have_product_form():
    # each channel is (measure-and-correct) o (decode) o U o (encode) o reset
    body = corpus_proofs("errcorr.nqpv")["pf0"].body
    reg = ("q", "q1", "q2")
    x = ENV["X"]
    mats = []
    for j in range(3):
        parts = [x if i == j else np.eye(2) for i in range(3)]
        mats.append(np.kron(np.kron(parts[0], parts[1]), parts[2]))
    flips = [np.eye(8)] + mats
    cx01 = np.kron(ENV["CX"], np.eye(2))
    cx02 = np.eye(8)
    for i in range(8):
        b = [(i >> 2) & 1, (i >> 1) & 1, i & 1]
        c = [b[0], b[1], b[2] ^ b[0]]
        cx02[:, i] = 0
        cx02[c[0] * 4 + c[1] * 2 + c[2], i] = 1
    enc = cx02 @ cx01
    dec = cx01 @ cx02
    reset = SuperOperator.reset(("q1", "q2")).extend(reg)
    syndrome = [np.kron(np.eye(2), projector(np.eye(4)[k])) for k in range(4)]
    # q2 = 0 is one outcome; q2 = 1 splits on q1, and 11 gets the X correction
    q2_zero = syndrome[0] + syndrome[2]
    correct = SuperOperator(reg, (q2_zero, syndrome[1], np.kron(x, np.eye(4)) @ syndrome[3]))
    expected = [compose(correct, compose(SuperOperator(reg, (dec @ f @ enc,)), reset)) for f in flips]
    sem = list(denote_loopfree(body, reg))
    for e in expected:
        assert any(e.same_channel(c) for c in sem)


def test_loop_rejected_by_loopfree(qwalk_proof):
    with pytest.raises(LoopPresentError):
        denote_loopfree(qwalk_proof.body)


def test_depth_zero_is_exit_projection(qwalk_loop):
    sem = denote_bounded(qwalk_loop, 0, ("q1", "q2"))
    assert len(sem) == 1
    assert sem.elements[0].same_channel(qwalk_loop.measurement.branch(0).extend(("q1", "q2")))


def test_cap_raises_or_truncates(qwalk_loop):
    with pytest.raises(SetExplosionError):
        denote_bounded(qwalk_loop, 6, ("q1", "q2"), cap=32)
    sem = denote_bounded(qwalk_loop, 6, ("q1", "q2"), cap=32, truncate=True)
    assert sem.truncated
    assert not denote_bounded(qwalk_loop, 3, ("q1", "q2")).truncated


def test_cap_on_choices():
    s = program("(skip # [q] *= X # [q] *= Z); (skip # [q] *= H)", "q")
    assert len(denote_loopfree(s)) == 6
    with pytest.raises(SetExplosionError):
        denote_loopfree(s, cap=5)


def test_monotone_unrolling(qwalk_loop, rng):
    # every depth-m channel lies below some depth-n channel (m <= n): the
    # difference of Choi matrices is positive semidefinite
    vars = ("q1", "q2")
    body = list(denote_loopfree(qwalk_loop.body, vars))
    for m, n in [(1, 2), (2, 4), (3, 3)]:
        lo = while_unrollings(qwalk_loop, m, vars, body=body)
        hi = while_unrollings(qwalk_loop, n, vars, body=body)
        for eta, f in lo.items():
            ext = next(g for k, g in hi.items() if k[:m] == eta)
            assert np.linalg.eigvalsh(ext.choi - f.choi)[0] >= -1e-7


def test_composition_is_elementwise(rng):
    for _ in range(20):
        gen = ProgramGenerator(rng, QUBITS[:2], max_atoms=3)
        s0, s1 = gen.program(), gen.program()
        whole = denote_loopfree(seq([s0, s1]), QUBITS[:2])
        parts = [compose(f, e) for e in denote_loopfree(s0, QUBITS[:2]) for f in denote_loopfree(s1, QUBITS[:2])]
        assert all(any(c.same_channel(p) for p in parts) for c in whole)
        assert all(any(c.same_channel(p) for p in whole) for c in parts)


def test_expectation_examples(rng):
    p0, p1 = np.diag([1.0, 0]), np.diag([0, 1.0])
    theta = Assertion(("q",), (p0, p1))
    assert expectation(DensityOperator(("q",), p0), theta) == 0
    assert np.isclose(expectation(DensityOperator(("q",), np.eye(2) / 2), theta), 0.5)
    for rho in sample_densities(2, 20, rng):
        assert np.isclose(expectation(rho, Assertion(("q",), (np.eye(2) / 2,))), np.trace(rho).real / 2)


def test_expectation_is_antitone(rng):
    small = Assertion(("a",), (random_predicate(2, rng),))
    big = Assertion(("a",), small.ops + (random_predicate(2, rng),))
    for rho in sample_densities(2, 50, rng):
        assert expectation(rho, big) <= expectation(rho, small) + 1e-12


def test_sampled_states_are_partial_densities(rng):
    rhos = sample_densities(4, 100, rng)
    for r in rhos:
        assert np.allclose(r, r.conj().T)
        assert np.linalg.eigvalsh(r)[0] >= -1e-12
        assert 0 < np.trace(r).real <= 1 + 1e-12


def test_qwalk_partial_correctness_holds_empirically(qwalk_proof):
    v = check_formula_empirical(qwalk_proof.pre, qwalk_proof.body, qwalk_proof.post, depth=6, samples=200)
    assert v.ok


def test_skip_counterexample():
    s = program("skip", "q")
    v = check_formula_empirical(Assertion(("q",), (np.diag([1.0, 0]),)), s,
                                Assertion(("q",), (np.eye(2) / 2,)))
    assert not v.ok
    c = v.counterexample
    assert c.sample_index == 0 and np.allclose(c.rho, np.diag([1.0, 0]))
    assert np.isclose(c.margin, 0.5)


def test_zero_precondition_is_always_total(rng):
    for _ in range(10):
        s = ProgramGenerator(rng, QUBITS[:2]).program()
        post = Assertion(QUBITS[:2], (random_predicate(4, rng),))
        zero = Assertion(QUBITS[:2], (np.zeros((4, 4)),))
        assert check_formula_empirical(zero, s, post, mode="total", samples=100).ok


def test_union_of_passing_formulas_passes(rng):
    s = program("(skip # [q] *= H)", "q")
    post = Assertion(("q",), (np.eye(2),))
    a = Assertion(("q",), (0.3 * random_predicate(2, rng),))
    b = Assertion(("q",), (0.3 * random_predicate(2, rng),))
    assert check_formula_empirical(a, s, post).ok and check_formula_empirical(b, s, post).ok
    assert check_formula_empirical(Assertion(("q",), a.ops + b.ops), s, post).ok


def test_bad_mode():
    s = program("skip", "q")
    a = Assertion(("q",), (np.eye(2),))
    with pytest.raises(ValueError):
        check_formula_empirical(a, s, a, mode="angelic")
