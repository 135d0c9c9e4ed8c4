"""Write a synthetic 160-patient CSV with the published sex x age x diagnosis cell counts.

Usage: python scripts/make_synthetic_data.py [--seed 0] [--out data/synthetic_patients.csv]
"""

import argparse

from manovaboot.fixtures import write_synthetic_csv


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="data/synthetic_patients.csv")
    args = ap.parse_args()
    write_synthetic_csv(args.out, seed=args.seed)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
