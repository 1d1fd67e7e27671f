"""Run every registered numerical check and print one verdict line each.

    python3 scripts/verify_all.py               # all checks
    python3 scripts/verify_all.py lre rhoext    # a subset
"""

import argparse
import sys
import time

from psido import suite


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", help="check identifiers (default: all)")
    args = ap.parse_args(argv)
    names = args.names or list(suite.CHECKS)
    unknown = [n for n in names if n not in suite.CHECKS]
    if unknown:
        ap.error(f"unknown checks: {', '.join(unknown)}")
    failed = 0
    for name in names:
        t0 = time.perf_counter()
        res = suite.run_check(name)
        failed += not res.passed
        print(f"{res.summary()}  [{time.perf_counter() - t0:.1f}s]", flush=True)
    print(f"{len(names) - failed}/{len(names)} passed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
