#!/usr/bin/env python3
"""Run every built-in example check and print its report; exit 1 on any mismatch."""
import argparse
import sys

from spread.reproduce import EXAMPLE_IDS, format_report, reproduce


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--trials", type=int, default=300)
    args = ap.parse_args(argv)

    failed = 0
    for ex in EXAMPLE_IDS:
        mc = {"seed": args.seed, "trials": args.trials} if ex in ("4.2.1", "4.2.2") else {}
        checks = reproduce(ex, **mc)
        bad = sum(not c.ok for c in checks)
        failed += bad
        print(f"== {ex}: {len(checks) - bad}/{len(checks)} ok")
        print(format_report(checks))
        print()
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
