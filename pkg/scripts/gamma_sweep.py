"""Exactness of both protocols over random valid gamma parameters.

    python scripts/gamma_sweep.py --samples 50
"""

import argparse

import numpy as np

from mergelab.protocols import build_one_way, build_two_way, simulate
from mergelab.states import GammaParams, build_instance, validate_gammas


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    worst = {"twoway": 0.0, "oneway": 0.0}
    done = 0
    while done < args.samples:
        g = GammaParams(*np.exp(1j * rng.uniform(-np.pi, np.pi, size=2)))
        if validate_gammas(g):
            continue
        inst = build_instance(g)
        for name, builder in (("twoway", build_two_way), ("oneway", build_one_way)):
            rep = simulate(builder(g), inst)
            worst[name] = max(worst[name], 1 - rep.min_fidelity_sq)
        done += 1
    for name, w in worst.items():
        print(f"{name}: worst 1 - fidelity^2 over {done} gamma pairs = {w:.2e}")


if __name__ == "__main__":
    main()
