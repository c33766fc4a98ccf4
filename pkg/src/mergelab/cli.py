"""Command-line interface: ``mergelab <verb> [options]``.

Every verb prints one JSON document (``run --trace`` prints one line per
branch first). Floats are rounded to 12 significant digits so reports diff
cleanly. Exit codes: 0 success, 1 failed check or invalid parameters, 2 usage.
"""

from __future__ import annotations

import argparse
import cmath
import json
import math
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import linalg, measure, protocols, search, states
from .koashi_imoto import build_ki_psi, verify_ki

SIG_DIGITS = 12


def load_schema(name: str) -> dict:
    """JSON schema shipped with the package, e.g. ``load_schema("verify_report")``."""
    return json.loads(resources.files("mergelab").joinpath("schemas", f"{name}.json").read_text())


class UsageError(Exception):
    pass


def round_floats(obj):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return obj
        r = float(f"{obj:.{SIG_DIGITS}g}")
        return 0.0 if r == 0 else r
    if isinstance(obj, dict):
        return {k: round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    if isinstance(obj, np.generic):
        return round_floats(obj.item())
    return obj


def dumps(obj, indent=2) -> str:
    return json.dumps(round_floats(obj), indent=indent)


def parse_gamma(text: str) -> complex:
    """``re+imi`` literal (``0.7+0.7i``, ``1+0i``, ``-1i``) or polar ``exp:theta``."""
    t = text.strip().replace(" ", "")
    if t.startswith("exp:"):
        try:
            return cmath.exp(1j * float(t[4:]))
        except ValueError:
            raise UsageError(f"bad polar gamma {text!r}") from None
    try:
        return complex(t.replace("i", "j"))
    except ValueError:
        raise UsageError(f"bad gamma literal {text!r}; use re+imi or exp:theta") from None


def _gammas(args) -> states.GammaParams:
    return states.GammaParams(parse_gamma(args.gamma1), parse_gamma(args.gamma2))


def _threads(args) -> int:
    return args.threads if args.threads else (os.cpu_count() or 1)


# -- verbs ------------------------------------------------------------------


def _check(name, ok, value=None, tol=None) -> dict:
    out = {"name": name, "ok": bool(ok)}
    if value is not None:
        out["value"] = float(value)
    if tol is not None:
        out["tolerance"] = tol
    return out


def _reference_reductions_defect(p: protocols.Protocol, inst: states.MergeInstance) -> float:
    """Largest deviation of a pre-correction R-reduction from I/dim R."""
    leaves, _ = protocols.enumerate_branches(p, protocols.initial_state(p, inst.psi), upto=len(p.steps) - 1)
    worst = 0.0
    for leaf in leaves:
        rho = linalg.reduced_density(leaf.amps, leaf.dims, leaf.labels, ["R"]).matrix
        worst = max(worst, float(np.max(np.abs(rho - np.eye(len(rho)) / len(rho)))))
    return worst


def verify_report(g: states.GammaParams, threads: int = 1) -> dict:
    problems = states.validate_gammas(g)
    report = {"gammas": g.to_json(), "ok": False, "violations": problems, "checks": []}
    if problems:
        return report
    checks = report["checks"]
    inst = states.build_instance(g)
    vecs = np.array([s.amplitudes for s in inst.family])
    gram_err = float(np.max(np.abs(vecs.conj() @ vecs.T - np.eye(inst.D))))
    checks.append(_check("family orthonormal", gram_err <= 1e-12, gram_err, 1e-12))
    fams = [("B measurement complete", measure.build_b_measurement())]
    fams += [(f"A measurement j={j} complete", measure.build_a_measurement(j, g)) for j in range(3)]
    for name, f in fams:
        ok, res = measure.is_complete(f)
        checks.append(_check(name, ok, res, measure.TOL_COMPLETE))
    ki = build_ki_psi(g)
    ok, res = verify_ki(inst.psi, ki)
    checks.append(_check("Koashi-Imoto reconstruction", ok, res, 1e-10))

    summaries, built = {}, {}
    for key, builder, cost, direction in (
        ("twoWay", protocols.build_two_way, 0.0, protocols.Direction.TWO_WAY),
        ("oneWay", protocols.build_one_way, 1.0, protocols.Direction.ONE_WAY_AB),
    ):
        p = built[key] = builder(g)
        rep = protocols.simulate(p, inst, threads=threads)
        checks.append(_check(f"{key} exact", abs(1 - rep.min_fidelity_sq) <= 1e-9, rep.min_fidelity_sq, 1e-9))
        checks.append(_check(f"{key} probability", abs(1 - rep.total_prob) <= 1e-9, rep.total_prob, 1e-9))
        checks.append(_check(f"{key} cost", rep.cost_bits == cost, rep.cost_bits))
        checks.append(_check(f"{key} direction", rep.direction == direction))
        purity = min(b.purity for b in rep.branches)
        checks.append(_check(f"{key} final state pure", abs(1 - purity) <= 1e-9, purity, 1e-9))
        summaries[key] = rep.to_json(include_branches=False)
    defect = _reference_reductions_defect(built["twoWay"], inst)
    checks.append(_check("twoWay reference maximally mixed before correction", defect <= 1e-9, defect, 1e-9))

    h = entropy_report(inst)
    want = math.log2(3) - math.log2(11)
    checks.append(_check("conditional entropy", abs(h["H_A_given_B"] - want) <= 1e-9, h["H_A_given_B"], 1e-9))
    report.update(summaries)
    report["entropy"] = h
    report["ok"] = all(c["ok"] for c in checks)
    return report


def entropy_report(inst: states.MergeInstance) -> dict:
    psi = inst.psi
    return {
        "H_R": linalg.entropy(psi.reduced(["R"])),
        "H_B": linalg.entropy(psi.reduced(["B"])),
        "H_AB": linalg.entropy(psi.reduced(["A", "B"])),
        "H_A_given_B": linalg.cond_entropy(psi, "A", "B"),
    }


def _emit(obj, args, out):
    text = dumps(obj)
    if getattr(args, "json", None):
        Path(args.json).write_text(text + "\n")
    print(text, file=out)


def cmd_verify(args, out) -> int:
    rep = verify_report(_gammas(args), _threads(args))
    _emit(rep, args, out)
    if not rep["ok"]:
        failed = rep["violations"] + [c["name"] for c in rep["checks"] if not c["ok"]]
        print("verification failed: " + "; ".join(failed), file=sys.stderr)
        return 1
    return 0


_BUILDERS = {"twoway": protocols.build_two_way, "oneway": protocols.build_one_way}


def cmd_run(args, out) -> int:
    g = _gammas(args)
    p = _BUILDERS[args.protocol](g)
    rep = protocols.simulate(p, states.build_instance(g), threads=_threads(args))
    if args.trace:
        for line in rep.branch_lines():
            print(dumps(line, indent=None), file=out)
        _emit(rep.to_json(include_branches=False), args, out)
    else:
        _emit(rep.to_json(), args, out)
    return 0 if abs(1 - rep.min_fidelity_sq) <= 1e-9 else 1


def cmd_entropy(args, out) -> int:
    _emit(entropy_report(states.build_instance(_gammas(args))), args, out)
    return 0


def cmd_discriminate(args, out) -> int:
    g = _gammas(args)
    p = _BUILDERS[args.protocol](g)
    res = protocols.discriminate(p, args.l, states.build_instance(g))
    _emit({"protocol": args.protocol, "l": args.l, "outcome": res.outcome,
           "probability": res.probability, "distribution": list(res.distribution)}, args, out)
    return 0 if res.outcome == args.l and abs(1 - res.probability) <= 1e-9 else 1


def parse_alpha(text: str) -> np.ndarray:
    try:
        vals = np.array([complex(t.strip().replace("i", "j")) for t in text.split(",")])
    except ValueError:
        raise UsageError(f"bad coefficient list {text!r}") from None
    n = np.linalg.norm(vals)
    if n == 0:
        raise UsageError("coefficients must not all vanish")
    return vals / n


def cmd_decode(args, out) -> int:
    g = _gammas(args)
    alpha = parse_alpha(args.alpha)
    inst = states.build_instance(g)
    if len(alpha) != inst.D:
        raise UsageError(f"need {inst.D} coefficients")
    names = ["twoway", "oneway"] if args.protocol == "both" else [args.protocol]
    fids = {n: protocols.decode_superposition(_BUILDERS[n](g), alpha, inst) for n in names}
    _emit({"alpha": {"re": alpha.real.tolist(), "im": alpha.imag.tolist()}, "fidelitySq": fids}, args, out)
    return 0 if all(abs(1 - f) <= 1e-9 for f in fids.values()) else 1


def _search_instance(name: str, g: states.GammaParams) -> states.MergeInstance:
    if name == "psi":
        return states.build_instance(g)
    if name == "easy":
        return states.instance_from_family(states.easy_family())
    return protocols.elimination_instance()


def cmd_search(args, out) -> int:
    seed = args.seed
    if seed is None:
        seed = int(os.environ.get("MERGELAB_SEED", "0"))
    cfg = search.SearchConfig(restarts=args.restarts, max_kraus=args.max_kraus, iterations=args.iterations,
                              seed=seed, tolerance=args.tolerance, threads=_threads(args))
    rep = search.optimize_one_way_zero_cost(_search_instance(args.instance, _gammas(args)), cfg)
    obj = rep.to_json()
    obj["instance"] = args.instance
    if not args.full:
        obj.pop("bestProtocol")
    _emit(obj, args, out)
    return 0


def cmd_export(args, out) -> int:
    g = _gammas(args)
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    files = {
        "instance.json": states.build_instance(g).to_json(),
        "ki.json": build_ki_psi(g).to_json(),
        "twoway.json": protocols.build_two_way(g).to_json(),
        "oneway.json": protocols.build_one_way(g).to_json(),
    }
    for name, obj in files.items():
        (d / name).write_text(dumps(obj, indent=None) + "\n")
    _emit({"written": [str(d / n) for n in files]}, args, out)
    return 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--gamma1", default="exp:" + repr(math.pi / 4), help="re+imi or exp:theta")
    common.add_argument("--gamma2", default="exp:" + repr(math.pi / 4), help="re+imi or exp:theta")
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    common.add_argument("--json", metavar="PATH", help="also write the report to PATH")

    ap = argparse.ArgumentParser(prog="mergelab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("verify", parents=[common], help="run every invariant check")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("run", parents=[common], help="simulate a protocol")
    p.add_argument("protocol", choices=sorted(_BUILDERS))
    p.add_argument("--trace", action="store_true", help="one JSON line per branch")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("entropy", parents=[common], help="entropies of the merging state")
    p.set_defaults(fn=cmd_entropy)

    p = sub.add_parser("discriminate", parents=[common], help="merge |psi_l>, then identify l")
    p.add_argument("l", type=int, choices=[0, 1, 2])
    p.add_argument("--protocol", choices=sorted(_BUILDERS), default="twoway")
    p.set_defaults(fn=cmd_discriminate)

    p = sub.add_parser("decode", parents=[common], help="merge a superposition of the family")
    p.add_argument("--alpha", required=True, help="comma-separated coefficients, normalized internally")
    p.add_argument("--protocol", choices=sorted(_BUILDERS) + ["both"], default="both")
    p.set_defaults(fn=cmd_decode)

    p = sub.add_parser("search", parents=[common], help="optimize zero-cost one-way protocols")
    p.add_argument("--restarts", type=int, default=100)
    p.add_argument("--seed", type=int, default=None, help="default: $MERGELAB_SEED or 0")
    p.add_argument("--max-kraus", type=int, default=121)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--tolerance", type=float, default=1e-10)
    p.add_argument("--instance", choices=["psi", "easy", "elimination"], default="psi")
    p.add_argument("--full", action="store_true", help="include the best measurement")
    p.set_defaults(fn=cmd_search)

    p = sub.add_parser("export", parents=[common], help="write instance, decomposition and protocols as JSON")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(fn=cmd_export)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.fn(args, out)
    except UsageError as e:
        print(f"mergelab: {e}", file=sys.stderr)
        return 2
    except states.InvalidGammaError as e:
        print(f"mergelab: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"mergelab: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
