"""Search over zero-cost one-way protocols: A measures with rank-one Kraus
operators, tells B the outcome, and B applies the best isometric decoder.

For outcome a the unnormalized B-side branch is C_a = sum_i V[a, i] psi[:, i, :]
(viewed as B x R). Its decoder-optimal contribution to the average squared
fidelity is ||C_a conj(T)||_1^2 with T the target as an R x (B'B) matrix. The
objective sum_a ||K_a||_1^2 is maximized over isometries V by a
minorize-maximize iteration (each step solves a polar problem), with a
safeguarded squared-extrapolation acceleration.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .correction import optimal_recovery_fidelity, recovery_fidelity_sq
from .measure import KrausFamily, rank_one_family
from .protocols import Correct, Measure, Message, Protocol
from .states import MergeInstance

MONOTONE_SLACK = 1e-12


@dataclass(frozen=True)
class SearchConfig:
    restarts: int = 100
    max_kraus: int = 121
    iterations: int = 1000
    seed: int = 0
    tolerance: float = 1e-10
    threads: int = 1
    accelerate: bool = True

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.max_kraus < 1:
            raise ValueError("max_kraus must be at least 1")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")


@dataclass(frozen=True)
class RestartResult:
    index: int
    best: float
    iterations: int
    evaluations: int
    trace: tuple[float, ...] = field(repr=False)


@dataclass(frozen=True)
class SearchReport:
    config: SearchConfig
    best_fidelity_sq: float
    per_restart: tuple[RestartResult, ...]
    best_kraus: np.ndarray = field(repr=False)
    verified_fidelity_sq: float = float("nan")

    @property
    def gap_estimate(self) -> float:
        return 1.0 - self.best_fidelity_sq

    def to_json(self) -> dict:
        v = self.best_kraus
        return {
            "config": {
                "restarts": self.config.restarts,
                "maxKraus": self.config.max_kraus,
                "iterations": self.config.iterations,
                "seed": self.config.seed,
                "tolerance": self.config.tolerance,
                "threads": self.config.threads,
                "accelerate": self.config.accelerate,
            },
            "bestFidelitySq": self.best_fidelity_sq,
            "gapEstimate": self.gap_estimate,
            "verifiedFidelitySq": self.verified_fidelity_sq,
            "empirical": True,
            "perRestart": [
                {"index": r.index, "best": r.best, "iterations": r.iterations, "evaluations": r.evaluations}
                for r in self.per_restart
            ],
            "bestProtocol": {
                "measurementRows": {"shape": list(v.shape), "re": v.real.ravel().tolist(),
                                    "im": v.imag.ravel().tolist()},
                "decoder": "optimal isometry per outcome",
            },
        }


class _Objective:
    """Precomputed tensors for one instance."""

    def __init__(self, instance: MergeInstance, n: int):
        psi = instance.psi.tensor()
        if instance.psi.labels != ("R", "A", "B"):
            raise ValueError("instance state must be ordered (R, A, B)")
        d_r, d_a, d_b = psi.shape
        if n < d_a:
            raise ValueError(f"max_kraus ({n}) must be at least dim A ({d_a}) for a complete rank-one family")
        t = psi.reshape(d_r, d_a * d_b)
        _, r_m = np.linalg.qr(t.T)
        self.p = np.einsum("rib,sr->ibs", psi, r_m.conj()).reshape(d_a, d_b * d_r)
        self.n, self.d_a, self.d_b, self.d_r = n, d_a, d_b, d_r

    def value(self, v: np.ndarray):
        k = (v @ self.p).reshape(self.n, self.d_b, self.d_r)
        u, s, xh = np.linalg.svd(k, full_matrices=False)
        z = s.sum(axis=1)
        return float((z ** 2).sum()), u @ xh, z

    def advance(self, state) -> np.ndarray:
        """MM step from a point whose ``value`` is ``state``."""
        _, y, z = state
        h = np.conj(y).reshape(self.n, -1) @ self.p.T
        return _polar(np.conj(z[:, None] * h))


def _polar(g: np.ndarray) -> np.ndarray:
    u, _, xh = np.linalg.svd(g, full_matrices=False)
    return u @ xh


def _random_isometry(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    return _polar(rng.normal(size=(n, d)) + 1j * rng.normal(size=(n, d)))


def _run_restart(obj: _Objective, cfg: SearchConfig, index: int, seed_seq: np.random.SeedSequence):
    rng = np.random.default_rng(seed_seq)
    v = _random_isometry(rng, obj.n, obj.d_a)
    state = obj.value(v)
    trace, evals = [], 1
    for it in range(cfg.iterations):
        f0 = state[0]
        if trace and f0 < trace[-1] - MONOTONE_SLACK:
            raise AssertionError(f"objective decreased in restart {index}: {trace[-1]} -> {f0}")
        converged = bool(trace) and f0 - trace[-1] < cfg.tolerance
        trace.append(f0)
        if converged:
            break
        v1 = obj.advance(state)
        s1 = obj.value(v1)
        evals += 1
        if not cfg.accelerate:
            v, state = v1, s1
            continue
        v2 = obj.advance(s1)
        r = v1 - v
        w = v2 - v1 - r
        alpha = min(-np.linalg.norm(r) / max(np.linalg.norm(w), 1e-300), -1.0)
        vx = _polar(v - 2 * alpha * r + alpha * alpha * w)
        sx = obj.value(vx)
        evals += 1
        # the extrapolated point is kept only if it beats the plain MM iterate
        if sx[0] >= s1[0]:
            v, state = vx, sx
        else:
            v, state = v2, obj.value(v2)
            evals += 1
    else:
        trace.append(state[0])
    return RestartResult(index, max(trace), len(trace), evals, tuple(trace)), v, trace[-1]


def optimize_one_way_zero_cost(instance: MergeInstance, cfg: SearchConfig = SearchConfig()) -> SearchReport:
    """Best average merging fidelity found over zero-cost one-way protocols.

    Restarts are seeded from independent children of ``cfg.seed``, so the
    result does not depend on ``cfg.threads``.
    """
    obj = _Objective(instance, cfg.max_kraus)
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    work = lambda i: _run_restart(obj, cfg, i, children[i])
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            results = list(ex.map(work, range(cfg.restarts)))
    else:
        results = [work(i) for i in range(cfg.restarts)]
    best_idx = max(range(len(results)), key=lambda i: (results[i][2], -i))
    _, v_best, f_best = results[best_idx]
    v_best = np.asarray(v_best)
    return SearchReport(cfg, float(min(f_best, 1.0)), tuple(r[0] for r in results), v_best,
                        verify_kraus(instance, v_best))


def kraus_family_from_rows(v: np.ndarray, label: str = "A") -> KrausFamily:
    """Rank-one family whose a-th bra has coefficients v[a, :]."""
    v = np.asarray(v)
    return rank_one_family(np.conj(v), (label,), (v.shape[1],))


def evaluate_family(instance: MergeInstance, family: KrausFamily) -> float:
    """Average fidelity when B decodes every outcome of ``family`` optimally."""
    from .measure import apply

    target = instance.target()
    total = 0.0
    for outcome in family.outcome_labels:
        prob, post = apply(family, outcome, instance.psi)
        if post is None:
            continue
        total += prob * recovery_fidelity_sq(post, target, ("R",))
    return float(total)


def verify_kraus(instance: MergeInstance, v: np.ndarray) -> float:
    """Independent re-evaluation of a search result through measurement and optimal decoders."""
    return evaluate_family(instance, kraus_family_from_rows(v))


def protocol_from_kraus(instance: MergeInstance, v: np.ndarray) -> Protocol:
    """Explicit one-way protocol for a measurement found by the search."""
    from .measure import apply

    fam = kraus_family_from_rows(v)
    target = instance.target()
    decoders = {}
    for outcome in fam.outcome_labels:
        prob, post = apply(fam, outcome, instance.psi)
        if post is None:
            continue
        decoders[(outcome,)] = optimal_recovery_fidelity(post, target, ("R",)).isometry
    steps = (Measure("A", fam), Message("A", "B"), Correct("B", decoders))
    return Protocol(1, steps, {"R": "R", "A": "A", "B": "B"}, name="search-best")
