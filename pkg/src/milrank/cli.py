"""Command-line entry point.

This module stays free of numpy imports: the ``--threads`` cap has to be
exported to the BLAS environment variables before numpy first loads, so
the actual command implementations are imported inside ``main``.
"""

from __future__ import annotations

import os
import sys

THREAD_ENV_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def _peek_threads(argv: list[str]) -> int:
    for i, token in enumerate(argv):
        if token == "--threads" and i + 1 < len(argv):
            try:
                return max(1, int(argv[i + 1]))
            except ValueError:
                return 1
        if token.startswith("--threads="):
            try:
                return max(1, int(token.split("=", 1)[1]))
            except ValueError:
                return 1
    return 1


def main(argv: list[str] | None = None) -> int:
    args = list(sys.argv[1:] if argv is None else argv)
    threads = _peek_threads(args)
    for var in THREAD_ENV_VARS:
        os.environ.setdefault(var, str(threads))
    from ._commands import run
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
