import numpy as np
import pytest

from nqverify.syntax import While, parse, typecheck
from nqverify.verifier import CORPUS_DIR, _load_env


def corpus_proofs(name):
    """Typechecked proofs of a bundled declaration file, keyed by name."""
    f = parse((CORPUS_DIR / name).read_text())
    env, _ = _load_env(f, CORPUS_DIR)
    return {p.name: p for p in typecheck(f, env)}


def find_loop(s):
    if isinstance(s, While):
        return s
    for c in getattr(s, "children", ()):
        w = find_loop(c)
        if w is not None:
            return w
    return None


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def qwalk_proof():
    return corpus_proofs("qwalk.nqpv")["pf"]


@pytest.fixture(scope="session")
def qwalk_loop(qwalk_proof):
    return find_loop(qwalk_proof.body)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
