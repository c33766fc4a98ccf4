"""LOCC protocols as branching step sequences, and exact simulation of every branch.

A protocol is a flat list of steps. Measurements append an outcome to the
transcript; messages make the sender's known outcomes known to the receiver;
conditioned operations are looked up by the outcomes the acting party knows
at that point, which is what keeps the protocol LOCC.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence, Union

import numpy as np

from .correction import solve_exact_correction
from .koashi_imoto import build_ki_psi
from .linalg import (
    TOL_NORM,
    DensityOperator,
    LinearMap,
    PureState,
    apply_map,
    fidelity_sq,
    map_to_json,
    reduced_density,
    state_to_json,
    tensor,
)
from .measure import (
    PROB_FLOOR,
    TOL_COMPLETE,
    KrausFamily,
    build_a_measurement,
    build_b_measurement,
    completeness_residual,
    rank_one_family,
)
from .states import (
    GammaParams,
    MergeInstance,
    build_instance,
    elimination_family,
    instance_from_family,
    phi_K,
    pauli_x,
    pauli_z,
)

Transcript = tuple


class ProtocolError(ValueError):
    pass


class Direction(str, Enum):
    ONE_WAY_AB = "one-way-AB"
    ONE_WAY_BA = "one-way-BA"
    TWO_WAY = "two-way"


@dataclass(frozen=True)
class Measure:
    party: str
    family: Union[KrausFamily, Mapping[Transcript, KrausFamily]]


@dataclass(frozen=True)
class Message:
    sender: str
    receiver: str


@dataclass(frozen=True)
class Correct:
    """Local isometry, either fixed or keyed by the party's known outcomes."""

    party: str
    isometry: Union[LinearMap, Mapping[Transcript, LinearMap]]


Step = Union[Measure, Message, Correct]


@dataclass(frozen=True)
class Protocol:
    resource_k: int
    steps: tuple
    owners: Mapping[str, str] = field(default_factory=lambda: {"R": "R", "A": "A", "B": "B"})
    target_labels: tuple[str, ...] = ("R", "Bp", "B")
    name: str = ""

    @property
    def cost_bits(self) -> float:
        return math.log2(self.resource_k)

    def with_steps(self, steps: Sequence[Step]) -> "Protocol":
        return Protocol(self.resource_k, tuple(steps), dict(self.owners), self.target_labels, self.name)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "resourceK": self.resource_k,
            "costBits": self.cost_bits,
            "direction": classify(self).value,
            "owners": dict(self.owners),
            "targetLabels": list(self.target_labels),
            "steps": [_step_json(s) for s in self.steps],
        }


def _key_str(key) -> str:
    return ",".join(str(k) for k in key)


def _step_json(s: Step) -> dict:
    if isinstance(s, Message):
        return {"type": "message", "from": s.sender, "to": s.receiver}
    if isinstance(s, Measure):
        out = {"type": "measure", "party": s.party}
        if isinstance(s.family, KrausFamily):
            out["family"] = s.family.to_json()
        else:
            out["families"] = {_key_str(k): f.to_json() for k, f in s.family.items()}
        return out
    out = {"type": "correct", "party": s.party}
    if isinstance(s.isometry, LinearMap):
        out["isometry"] = map_to_json(s.isometry)
    else:
        out["isometries"] = {_key_str(k): map_to_json(v) for k, v in s.isometry.items()}
    return out


def classify(p: Protocol) -> Direction:
    """One-way A->B iff every message goes A->B (vacuously true with no messages)."""
    dirs = {(s.sender, s.receiver) for s in p.steps if isinstance(s, Message)}
    if dirs <= {("A", "B")}:
        return Direction.ONE_WAY_AB
    if dirs <= {("B", "A")}:
        return Direction.ONE_WAY_BA
    return Direction.TWO_WAY


def validate(p: Protocol, tol: float = TOL_COMPLETE) -> None:
    """Completeness of every family and isometry property of every correction."""
    for s in p.steps:
        if isinstance(s, Measure):
            fams = [s.family] if isinstance(s.family, KrausFamily) else list(s.family.values())
            for f in fams:
                r = completeness_residual(f)
                if r > tol:
                    raise ProtocolError(f"incomplete Kraus family for {s.party} (residual {r:.3e})")
        elif isinstance(s, Correct):
            isos = [s.isometry] if isinstance(s.isometry, LinearMap) else list(s.isometry.values())
            for v in isos:
                if not v.is_isometry(tol):
                    raise ProtocolError(f"correction for {s.party} is not an isometry")


# -- branch enumeration -----------------------------------------------------


@dataclass
class Leaf:
    transcript: tuple
    parties: tuple
    known: dict
    prob: float
    amps: np.ndarray
    dims: tuple
    labels: tuple
    owners: dict

    def key_for(self, party: str) -> tuple:
        return tuple(self.transcript[i] for i in sorted(self.known.get(party, ())))

    def state(self) -> PureState:
        return PureState(self.amps, self.dims, self.labels)


def _check_local(party: str, labels: Sequence[str], owners: Mapping[str, str]):
    for l in labels:
        if owners.get(l) != party:
            raise ProtocolError(f"{party} cannot act on {l!r} (held by {owners.get(l)!r})")


def _lookup(table, key, what: str):
    if not isinstance(table, Mapping):
        return table
    if key not in table:
        raise ProtocolError(f"no {what} for known outcomes {key}")
    return table[key]


def _apply_local(leaf: Leaf, party: str, op: LinearMap):
    _check_local(party, op.domain_labels, leaf.owners)
    amps, dims, labels = apply_map(leaf.amps, leaf.dims, leaf.labels, op)
    owners = {l: o for l, o in leaf.owners.items() if l in labels}
    owners.update({l: party for l in op.codomain_labels})
    return amps, dims, labels, owners


def enumerate_branches(p: Protocol, initial: PureState, upto: int | None = None) -> tuple[list[Leaf], float]:
    """Depth-first walk over all outcomes; returns (leaves above the floor, pruned probability)."""
    steps = p.steps if upto is None else p.steps[:upto]
    owners = {l: p.owners[l] for l in initial.labels}
    root = Leaf((), (), {}, 1.0, initial.amplitudes, initial.dims, initial.labels, owners)
    leaves, pruned = [], [0.0]

    def walk(i: int, leaf: Leaf):
        if i == len(steps):
            leaves.append(leaf)
            return
        s = steps[i]
        if isinstance(s, Message):
            known = {k: set(v) for k, v in leaf.known.items()}
            known.setdefault(s.receiver, set()).update(known.get(s.sender, set()))
            walk(i + 1, Leaf(leaf.transcript, leaf.parties, known, leaf.prob, leaf.amps,
                             leaf.dims, leaf.labels, leaf.owners))
        elif isinstance(s, Correct):
            op = _lookup(s.isometry, leaf.key_for(s.party), "correction")
            amps, dims, labels, owners = _apply_local(leaf, s.party, op)
            walk(i + 1, Leaf(leaf.transcript, leaf.parties, leaf.known, leaf.prob, amps, dims, labels, owners))
        else:
            fam = _lookup(s.family, leaf.key_for(s.party), "measurement")
            for outcome, op in zip(fam.outcome_labels, fam.operators):
                amps, dims, labels, owners = _apply_local(leaf, s.party, op)
                q = float(np.vdot(amps, amps).real)
                prob = leaf.prob * q
                if prob <= PROB_FLOOR:
                    pruned[0] += prob
                    continue
                known = {k: set(v) for k, v in leaf.known.items()}
                known.setdefault(s.party, set()).add(len(leaf.transcript))
                walk(i + 1, Leaf(leaf.transcript + (outcome,), leaf.parties + (s.party,), known,
                                 prob, amps / np.sqrt(q), dims, labels, owners))

    walk(0, root)
    return leaves, pruned[0]


# -- simulation ---------------------------------------------------------------


@dataclass(frozen=True)
class BranchRecord:
    transcript: tuple
    probability: float
    final_state: Union[PureState, DensityOperator]
    fidelity_sq: float
    purity: float


@dataclass(frozen=True)
class RunReport:
    branches: tuple[BranchRecord, ...]
    total_prob: float
    pruned_prob: float
    min_fidelity_sq: float
    avg_fidelity_sq: float
    cost_bits: float
    direction: Direction
    name: str = ""

    @property
    def epsilon_achieved(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.min_fidelity_sq))

    def branch_lines(self) -> list[dict]:
        return [{"transcript": list(b.transcript), "prob": b.probability, "fidelitySq": b.fidelity_sq}
                for b in self.branches]

    def to_json(self, include_states: bool = False, include_branches: bool = True) -> dict:
        out = {
            "protocol": self.name,
            "costBits": self.cost_bits,
            "direction": self.direction.value,
            "branchCount": len(self.branches),
            "totalProb": self.total_prob,
            "prunedProb": self.pruned_prob,
            "minFidelitySq": self.min_fidelity_sq,
            "avgFidelitySq": self.avg_fidelity_sq,
            "epsilonAchieved": self.epsilon_achieved,
        }
        if include_branches:
            rows = []
            for b in self.branches:
                row = {"transcript": list(b.transcript), "prob": b.probability,
                       "fidelitySq": b.fidelity_sq, "purity": b.purity}
                if include_states:
                    row["finalState"] = state_to_json(b.final_state)
                rows.append(row)
            out["branches"] = rows
        return out


def _final_state(leaf: Leaf, target: PureState):
    """Target-register state of a leaf: extra registers traced out, missing ones in |0>."""
    present = [l for l in target.labels if l in leaf.labels]
    missing = [l for l in target.labels if l not in leaf.labels]
    extra = [l for l in leaf.labels if l not in target.labels]
    if not extra:
        st = PureState(leaf.amps, leaf.dims, leaf.labels)
    else:
        st = reduced_density(leaf.amps, leaf.dims, leaf.labels, present)
    for l in missing:
        d = target.dims[target.labels.index(l)]
        anc = PureState.basis(0, d, l)
        st = tensor(st, anc) if isinstance(st, PureState) else DensityOperator(
            np.kron(st.matrix, anc.density().matrix), st.dims + (d,), st.labels + (l,))
    return st.permute(target.labels)


def _evaluate(leaf: Leaf, target: PureState) -> BranchRecord:
    st = _final_state(leaf, target)
    purity = 1.0 if isinstance(st, PureState) else st.purity()
    return BranchRecord(leaf.transcript, leaf.prob, st, fidelity_sq(st, target), purity)


def run_protocol(p: Protocol, initial: PureState, target: PureState, threads: int = 1) -> RunReport:
    validate(p)
    leaves, pruned = enumerate_branches(p, initial)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            records = list(ex.map(lambda lf: _evaluate(lf, target), leaves))
    else:
        records = [_evaluate(lf, target) for lf in leaves]
    total = float(sum(r.probability for r in records))
    fids = [r.fidelity_sq for r in records]
    avg = float(sum(r.probability * r.fidelity_sq for r in records))
    return RunReport(tuple(records), total, pruned, min(fids) if fids else 0.0, avg,
                     p.cost_bits, classify(p), p.name)


def initial_state(p: Protocol, core: PureState) -> PureState:
    """Attach the consumed resource Phi_K on (Abar, Bbar); nothing is attached for K = 1."""
    if p.resource_k == 1:
        return core
    return tensor(core, phi_K(p.resource_k, ("Abar", "Bbar")))


def simulate(p: Protocol, instance: MergeInstance, threads: int = 1) -> RunReport:
    return run_protocol(p, initial_state(p, instance.psi), instance.target(), threads)


# -- builders -----------------------------------------------------------------


def _solve_corrections(p: Protocol, instance: MergeInstance, party: str = "B", order=None) -> dict:
    leaves, _ = enumerate_branches(p, initial_state(p, instance.psi))
    target = instance.target()
    out = {}
    for leaf in leaves:
        foreign = [l for l, o in leaf.owners.items() if o not in (party, "R") and leaf.dims[leaf.labels.index(l)] > 1]
        if foreign:
            raise ProtocolError(f"branch {leaf.transcript} leaves {foreign} outside {party}")
        res = solve_exact_correction(leaf.state(), target, ("R",), order=order)
        if res is None or not res.exact:
            raise ProtocolError(f"branch {leaf.transcript} admits no exact correction")
        key = leaf.key_for(party)
        out[key] = res.isometry
    return out


def _owners(k: int) -> dict:
    owners = {"R": "R", "A": "A", "B": "B"}
    if k > 1:
        owners.update({"Abar": "A", "Bbar": "B"})
    return owners


def build_two_way(g: GammaParams = GammaParams(), completion_order: Sequence[int] | None = None) -> Protocol:
    """B measures, tells A; A measures conditioned on that, tells B; B corrects. No entanglement.

    ``completion_order`` permutes the canonical vectors used to complete each
    correction to a full isometry (default: natural order).
    """
    instance = build_instance(g)
    steps = [
        Measure("B", build_b_measurement("B")),
        Message("B", "A"),
        Measure("A", {(j,): build_a_measurement(j, g, "A") for j in range(3)}),
        Message("A", "B"),
    ]
    p = Protocol(1, tuple(steps), _owners(1), name="twoway")
    corrections = _solve_corrections(p, instance, order=completion_order)
    return p.with_steps(steps + [Correct("B", corrections)])


def bell_vectors() -> np.ndarray:
    """Rows (X^x Z^z (x) I)|Phi_2>, outcome index 2x + z."""
    phi = phi_K(2).amplitudes
    x, z = pauli_x(2).matrix, pauli_z(2).matrix
    rows = []
    for a in range(2):
        for b in range(2):
            op = np.linalg.matrix_power(x, a) @ np.linalg.matrix_power(z, b)
            rows.append(np.kron(op, np.eye(2)) @ phi)
    return np.array(rows)


def flag_controlled_measurement(flag_dim: int = 4, reg_dim: int = 3) -> KrausFamily:
    """Six outcomes on (a0, aR, Abar) -> a0, controlled by the flag a0.

    Flag 0: Bell measurement on the two-dimensional part of aR with Abar, padded
    by the two projections onto |2>_aR. Other flags: computational basis of aR
    and Abar, outcome 2q + t.
    """
    per_flag = []
    bell = np.zeros((6, reg_dim, 2), dtype=complex)
    bell[:4, :2, :] = bell_vectors().reshape(4, 2, 2)
    bell[4, 2, 0] = bell[5, 2, 1] = 1.0
    per_flag.append(bell.reshape(6, -1))
    comp = np.eye(reg_dim * 2, dtype=complex)
    per_flag += [comp] * (flag_dim - 1)
    ops = []
    for m in range(6):
        mat = np.zeros((flag_dim, flag_dim * reg_dim * 2), dtype=complex)
        for f in range(flag_dim):
            e = np.zeros(flag_dim)
            e[f] = 1.0
            mat[f] = np.kron(e, np.conj(per_flag[f][m]))
        ops.append(LinearMap(mat, (flag_dim, reg_dim, 2), (flag_dim,), ("a0", "aR", "Abar"), ("a0",)))
    return KrausFamily(tuple(ops), ("a0", "aR", "Abar"))


def flag_fourier_measurement(flag_dim: int = 4) -> KrausFamily:
    kets = np.array([[np.exp(2j * np.pi * n * f / flag_dim) for f in range(flag_dim)]
                     for n in range(flag_dim)]) / np.sqrt(flag_dim)
    return rank_one_family(kets, ("a0",), (flag_dim,))


def build_one_way(g: GammaParams = GammaParams(), completion_order: Sequence[int] | None = None) -> Protocol:
    """One ebit: Koashi-Imoto embeddings, flag-controlled measurement, flag erasure, B corrects."""
    instance = build_instance(g)
    ki = build_ki_psi(g)
    steps = [
        Correct("A", ki.embed_a),
        Correct("B", ki.embed_b),
        Measure("A", flag_controlled_measurement(ki.flag_dim)),
        Measure("A", flag_fourier_measurement(ki.flag_dim)),
        Message("A", "B"),
    ]
    p = Protocol(2, tuple(steps), _owners(2), name="oneway")
    corrections = _solve_corrections(p, instance, order=completion_order)
    return p.with_steps(steps + [Correct("B", corrections)])


def build_elimination_protocol() -> Protocol:
    """Discriminates {|00>, |01>, |1+>}: A measures Z, B records the outcome in B'."""
    steps = [
        Measure("A", rank_one_family(np.eye(2), ("A",), (2,))),
        Message("A", "B"),
    ]
    corrections = {}
    for a in range(2):
        m = np.kron(np.eye(2)[:, [a]], np.eye(2))
        corrections[(a,)] = LinearMap(m, (2,), (2, 2), ("B",), ("Bp", "B"))
    return Protocol(1, tuple(steps) + (Correct("B", corrections),), _owners(1), name="elimination")


def elimination_instance() -> MergeInstance:
    return instance_from_family(elimination_family())


def identity_protocol(k: int = 1) -> Protocol:
    return Protocol(k, (), _owners(k), name="identity")


# -- applications ---------------------------------------------------------------


def _superposition(instance: MergeInstance, alpha) -> PureState:
    alpha = np.asarray(alpha, dtype=complex)
    if alpha.shape != (instance.D,):
        raise ValueError(f"need {instance.D} coefficients, got {alpha.shape}")
    if abs(np.linalg.norm(alpha) - 1.0) > 1e-9:
        raise ValueError("coefficients must be normalized")
    amps = sum(a * s.amplitudes for a, s in zip(alpha, instance.family))
    return PureState(amps, instance.family[0].dims, ("A", "B"))


def decode_superposition(p: Protocol, alpha, instance: MergeInstance | None = None) -> float:
    """Worst branch fidelity of sum_l alpha_l |psi_l>_AB -> sum_l alpha_l |psi_l>_{B'B}."""
    instance = instance or build_instance()
    src = _superposition(instance, alpha)
    target = src.relabel({"A": "Bp"})
    rep = run_protocol(_retarget(p, ("Bp", "B")), initial_state(p, src), target)
    return rep.min_fidelity_sq


def _retarget(p: Protocol, labels) -> Protocol:
    return Protocol(p.resource_k, p.steps, dict(p.owners), tuple(labels), p.name)


@dataclass(frozen=True)
class DiscriminationResult:
    outcome: int
    probability: float
    distribution: tuple[float, ...]  # one entry per family member, then the complement


def discriminate(p: Protocol, l: int, instance: MergeInstance | None = None) -> DiscriminationResult:
    """Run ``p`` on |psi_l>_AB, then measure B'B in {|psi_m>} plus complement."""
    instance = instance or build_instance()
    alpha = np.zeros(instance.D)
    alpha[l] = 1.0
    src = _superposition(instance, alpha)
    targets = [s.relabel({"A": "Bp"}) for s in instance.family]
    rep = run_protocol(_retarget(p, ("Bp", "B")), initial_state(p, src), targets[l])
    probs = np.zeros(instance.D)
    for b in rep.branches:
        for m, t in enumerate(targets):
            probs[m] += b.probability * fidelity_sq(b.final_state, t)
    rest = max(0.0, 1.0 - float(probs.sum()))
    m = int(np.argmax(probs))
    return DiscriminationResult(m, float(probs[m]), tuple(float(x) for x in probs) + (rest,))
