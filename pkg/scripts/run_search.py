"""Measure the best zero-cost one-way merging fidelity on the three instances.

    python scripts/run_search.py --restarts 200 --seed 7 --out results/search.json
"""

import argparse
import json
import time
from pathlib import Path

from mergelab.cli import round_floats
from mergelab.protocols import elimination_instance
from mergelab.search import SearchConfig, optimize_one_way_zero_cost
from mergelab.states import build_instance, easy_family, instance_from_family


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--restarts", type=int, default=100)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    cfg = SearchConfig(restarts=args.restarts, seed=args.seed, threads=args.threads)
    instances = {
        "psi": build_instance(),
        "elimination": elimination_instance(),
        "easy": instance_from_family(easy_family()),
    }
    results = {}
    for name, inst in instances.items():
        t0 = time.perf_counter()
        rep = optimize_one_way_zero_cost(inst, cfg)
        bests = sorted(r.best for r in rep.per_restart)
        results[name] = {
            "bestFidelitySq": rep.best_fidelity_sq,
            "gapEstimate": rep.gap_estimate,
            "worstRestart": bests[0],
            "medianRestart": bests[len(bests) // 2],
            "meanEvaluations": sum(r.evaluations for r in rep.per_restart) / len(bests),
            "seconds": time.perf_counter() - t0,
        }
        print(f"{name:12s} best {rep.best_fidelity_sq:.10f}  gap {rep.gap_estimate:.3e}  "
              f"spread {bests[-1] - bests[0]:.1e}  {results[name]['seconds']:.1f}s")
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps(round_floats({"restarts": args.restarts, "seed": args.seed,
                                                     "results": results}), indent=2) + "\n")


if __name__ == "__main__":
    main()
