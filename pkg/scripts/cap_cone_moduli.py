"""Measured cap volume and cone excess against their leading terms.

Uses the unit ball (closed forms) and an l_p ball at a diagonal point
(sampled), and prints measured / leading for each height.

    python scripts/cap_cone_moduli.py [--p 4] [--samples 1000000]
"""

import argparse

import numpy as np

from mahlerlab.bodies import Ball, LpBall
from mahlerlab.perturb import cap_modulus, cone_modulus


def report(name, modulus):
    print(name)
    for t, measured, leading, ratio in modulus.csv_rows():
        print(f"  t={t:.0e}  measured={measured:.6e}  leading={leading:.6e}  ratio={ratio:.5f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, default=4.0)
    ap.add_argument("--samples", type=int, default=1_000_000)
    args = ap.parse_args()
    deltas = [1e-1, 1e-2, 1e-3, 1e-4]

    x = np.array([0.0, 0.0, 1.0])
    report("unit ball, cap", cap_modulus(Ball(3), x, deltas))
    report("unit ball, cone", cone_modulus(Ball(3), x, deltas, samples=args.samples))

    K = LpBall(2, args.p)
    u = np.ones(2) / np.sqrt(2)
    x = K.radial(u) * u
    report(f"l_{args.p:g} disk, cap", cap_modulus(K, x, deltas))
    report(f"l_{args.p:g} disk, cone", cone_modulus(K, x, deltas, samples=args.samples))


if __name__ == "__main__":
    main()
