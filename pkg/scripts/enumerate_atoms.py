"""Enumerate JA atoms and list the normalised-eigenvalue classes with their sizes."""

import argparse

from metachem.ja.atoms import enumerate_atoms


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tol", type=float, default=1e-6)
    ap.add_argument("--top", type=int, default=10, help="how many of the largest classes to list")
    args = ap.parse_args()

    census = enumerate_atoms(args.tol)
    print(census.summary())
    print()
    print("largest classes (members, mu1, mu2, mu3):")
    for rep in sorted(census.representatives, key=lambda r: -r[1])[: args.top]:
        _, members, m1, m2, m3 = rep[:5]
        print(f"  {members:5d}  {m1:+.4f} {m2:+.4f} {m3:+.4f}")


if __name__ == "__main__":
    main()
