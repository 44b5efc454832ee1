"""Cap/cone decrease of the volume product at a point of the Euclidean ball.

Prints the per-height table and the fitted power law for n = 2 and n = 3.

    python scripts/run_theorem_ball.py [--dims 2 3] [--deltas 1e-2 1e-3 1e-4]
"""

import argparse
import json
import math

import numpy as np

from mahlerlab.bodies import Ball
from mahlerlab.perturb import verify_theorem


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dims", type=int, nargs="+", default=[2, 3])
    ap.add_argument("--deltas", type=float, nargs="+", default=[1e-2, 1e-3, 1e-4])
    args = ap.parse_args()

    for n in args.dims:
        x = np.zeros(n)
        x[-1] = 1.0
        diag = verify_theorem(Ball(n), x, args.deltas)
        print(f"--- B_2^{n}, method {diag.method}")
        print(json.dumps(diag.summary(), indent=2))
        print(f"expected exponent {(n + 1) / 2:.1f}")
        if n == 2:
            print(f"expected constant {2 * math.sqrt(2) * math.pi / 3:.4f}")


if __name__ == "__main__":
    main()
