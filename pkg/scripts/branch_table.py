"""Per-branch table for one of the merging protocols.

    python scripts/branch_table.py twoway
    python scripts/branch_table.py oneway --gamma1 exp:0.3
"""

import argparse

import numpy as np

from mergelab.cli import parse_gamma
from mergelab.protocols import build_one_way, build_two_way, enumerate_branches, initial_state, simulate
from mergelab.states import GammaParams, build_instance


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("protocol", choices=["twoway", "oneway"])
    ap.add_argument("--gamma1", default="exp:0.7853981633974483")
    ap.add_argument("--gamma2", default="exp:0.7853981633974483")
    args = ap.parse_args()

    g = GammaParams(parse_gamma(args.gamma1), parse_gamma(args.gamma2))
    inst = build_instance(g)
    p = (build_two_way if args.protocol == "twoway" else build_one_way)(g)
    pre, _ = enumerate_branches(p, initial_state(p, inst.psi), upto=len(p.steps) - 1)
    rep = simulate(p, inst)

    print(f"{'transcript':>12} {'prob':>10} {'R-reduction err':>16} {'fidelity^2':>12}")
    for leaf, b in zip(pre, rep.branches):
        rho = leaf.state().reduced(["R"]).matrix
        err = np.max(np.abs(rho - np.eye(3) / 3))
        print(f"{str(b.transcript):>12} {b.probability:10.6f} {err:16.2e} {b.fidelity_sq:12.10f}")
    print(f"\n{len(rep.branches)} branches, total probability {rep.total_prob:.12f}, "
          f"min fidelity^2 {rep.min_fidelity_sq:.12f}, cost {rep.cost_bits:g} ebit, {rep.direction.value}")


if __name__ == "__main__":
    main()
