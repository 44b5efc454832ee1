"""Volume products of the reference bodies in dimensions 2 to 4.

    python scripts/baseline_table.py [--samples 200000]
"""

import argparse

from mahlerlab.cli import RunConfig, baseline_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(f"{'body':>15} {'dim':>3} {'vp':>12} {'vp/|B|^2':>9} {'stderr':>9} method")
    for n in (2, 3, 4):
        for name, dim, vp, nvp, err, method in baseline_rows(RunConfig(dim=n, samples=args.samples, seed=args.seed)):
            print(f"{name:>15} {dim:>3} {vp:>12.6f} {nvp:>9.5f} {err:>9.2e} {method}")


if __name__ == "__main__":
    main()
