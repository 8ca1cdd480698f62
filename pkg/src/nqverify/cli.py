"""Command line: ``nqverify verify FILE`` and ``nqverify corpus``.

Exit codes: 0 holds (or a computed precondition, or all corpus checks pass),
1 fails, 2 inconclusive, 3 input error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import InputError, InvalidInvariant, VerifierError
from .verifier import INPUT_ERROR_EXIT, Options, corpus_text, run_corpus, verify


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nqverify", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="verify every proof term of a declaration file")
    v.add_argument("file")
    v.add_argument("--epsilon", type=float, default=1e-7, help="acceptance tolerance of the order check")
    v.add_argument("--max-iters", type=int, default=2000)
    v.add_argument("--oracle-depth", type=int, default=0,
                   help="loop unrolling depth for the empirical cross-check (0: off)")
    v.add_argument("--save-dir", default=None, help="write generated predicates here as qmat-v1")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--mode", choices=("partial", "total"), default="partial")
    sub.add_parser("corpus", help="run the bundled case studies")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "corpus":
        cases = run_corpus()
        print(corpus_text(cases))
        return 0 if all(c.ok for c in cases) else 1
    opts = Options(args.epsilon, args.max_iters, args.oracle_depth, save_dir=args.save_dir,
                   seed=args.seed, mode=args.mode)
    try:
        run = verify(args.file, opts)
    except InvalidInvariant as err:
        print(getattr(err, "report_text", f"Error: {err}"), file=sys.stderr)
        return INPUT_ERROR_EXIT
    except (InputError, OSError) as err:
        print(f"Error: {err}", file=sys.stderr)
        return INPUT_ERROR_EXIT
    except VerifierError as err:
        print(f"Error: {type(err).__name__}: {err}", file=sys.stderr)
        return INPUT_ERROR_EXIT
    sys.stdout.write(run.text)
    return run.exit_code


if __name__ == "__main__":
    sys.exit(main())
