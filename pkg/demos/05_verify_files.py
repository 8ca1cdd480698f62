# Verifying declaration files and reading the annotated outline.
#
# The same runs are available from the shell:
#     nqverify verify src/nqverify/corpus/qwalk.nqpv
#     nqverify corpus

from nqverify import Options, verify
from nqverify.errors import InvalidInvariant
from nqverify.verifier import CORPUS_DIR, corpus_text, run_corpus

run = verify(CORPUS_DIR / "qwalk.nqpv")
print(run.text)

try:
    verify(CORPUS_DIR / "qwalk_bad_invariant.nqpv")
except InvalidInvariant as err:
    print(err.report_text)

run = verify(CORPUS_DIR / "counterexample.nqpv", Options(oracle_depth=1))
print(run.text)
print("exit code", run.exit_code)

print(corpus_text(run_corpus()))
