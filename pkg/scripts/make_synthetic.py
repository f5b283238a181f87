"""Regenerate the bundled synthetic basis dataset.

    python3 scripts/make_synthetic.py [--rows 3000] [--seed 7] [--out PATH]

The series follows ``basis = 0.35 - 46 lois - 2.66 vix + noise`` with lois
and vix as decimal fractions (see ``fairbasis.analytics.synthetic_table``).
"""

import argparse
from pathlib import Path

from fairbasis.analytics import synthetic_table, write_table

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "fairbasis" / "data" / "synthetic_basis.csv"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=3000)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = parser.parse_args()
    write_table(synthetic_table(args.rows, seed=args.seed), args.out)
    print(args.out)


if __name__ == "__main__":
    main()
