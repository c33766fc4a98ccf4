"""Kraus measurements and the explicit families of the two-way merging protocol."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import LinearMap, PureState, apply_map, map_from_json, map_to_json
from .states import GammaParams, pauli_x, require_valid

TOL_COMPLETE = 1e-10
PROB_FLOOR = 1e-14

# Index triples of C^9 carrying Fourier-basis outcomes of A's measurement.
FOURIER_TRIPLES = ((0, 4, 8), (1, 5, 6), (2, 3, 7))
# Index triples of C^9 carrying the sign-pattern outcomes (coefficient -conj(gamma2) on the last one).
SIGN_TRIPLES = ((0, 4, 6), (1, 5, 7), (2, 3, 8))


@dataclass(frozen=True)
class KrausFamily:
    operators: tuple[LinearMap, ...]
    acts_on: tuple[str, ...]
    outcome_labels: tuple[int, ...] = None

    def __post_init__(self):
        ops = tuple(self.operators)
        if not ops:
            raise ValueError("a Kraus family needs at least one operator")
        acts_on = (self.acts_on,) if isinstance(self.acts_on, str) else tuple(self.acts_on)
        first = ops[0]
        for op in ops:
            if (op.domain_dims, op.codomain_dims) != (first.domain_dims, first.codomain_dims):
                raise ValueError("Kraus operators must share domain and codomain")
            if op.codomain_labels != first.codomain_labels:
                raise ValueError("Kraus operators must share codomain labels")
        ops = tuple(op.on(acts_on, op.codomain_labels) for op in ops)
        labels = tuple(range(len(ops))) if self.outcome_labels is None else tuple(self.outcome_labels)
        if len(labels) != len(ops) or len(set(labels)) != len(labels):
            raise ValueError("outcome labels must be unique, one per operator")
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "acts_on", acts_on)
        object.__setattr__(self, "outcome_labels", labels)

    def __len__(self):
        return len(self.operators)

    def __getitem__(self, outcome) -> LinearMap:
        return self.operators[self.outcome_labels.index(outcome)]

    @property
    def codomain_labels(self) -> tuple[str, ...]:
        return self.operators[0].codomain_labels

    def stacked(self) -> np.ndarray:
        return np.stack([op.matrix for op in self.operators])

    def to_json(self) -> dict:
        return {
            "actsOn": list(self.acts_on),
            "outcomes": list(self.outcome_labels),
            "operators": [map_to_json(op) for op in self.operators],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "KrausFamily":
        return cls(tuple(map_from_json(o) for o in obj["operators"]), tuple(obj["actsOn"]),
                   tuple(obj["outcomes"]))


def rank_one_family(bras: np.ndarray, acts_on: Sequence[str], dims: Sequence[int]) -> KrausFamily:
    """Family of bras <v_k| from the rows of ``bras`` (rows are the kets v_k, conjugated on use)."""
    dims = tuple(dims)
    ops = tuple(LinearMap(np.conj(row).reshape(1, -1), dims, (), tuple(acts_on), ()) for row in np.asarray(bras))
    return KrausFamily(ops, tuple(acts_on))


def completeness_residual(f: KrausFamily) -> float:
    m = f.stacked()
    s = np.einsum("kij,kil->jl", m.conj(), m)
    return float(np.max(np.abs(s - np.eye(s.shape[0]))))


def is_complete(f: KrausFamily, tol: float = TOL_COMPLETE) -> tuple[bool, float]:
    """(sum_k M_k^dag M_k == I within ``tol``, max-entry residual)."""
    r = completeness_residual(f)
    return r <= tol, r


def apply_raw(f: KrausFamily, outcome, amps, dims, labels):
    return apply_map(amps, dims, labels, f[outcome])


def apply(f: KrausFamily, outcome, state: PureState) -> tuple[float, PureState | None]:
    """Born-rule branch: probability and normalized post-measurement state (None if negligible)."""
    amps, dims, labels = apply_map(state.amplitudes, state.dims, state.labels, f[outcome])
    prob = float(np.vdot(amps, amps).real)
    if prob <= PROB_FLOOR:
        return prob, None
    return prob, PureState(amps / np.sqrt(prob), dims, labels)


def build_b_measurement(label: str = "B") -> KrausFamily:
    """Three outcomes: sqrt(1/3) on the C^2 block, one third of C^9 each."""
    ops = []
    for j in range(3):
        d = np.zeros(11)
        d[:2] = np.sqrt(1 / 3)
        d[2 + 3 * j: 5 + 3 * j] = 1.0
        ops.append(LinearMap(np.diag(d), (11,), (11,), (label,), (label,)))
    return KrausFamily(tuple(ops), (label,))


def fourier_vectors() -> dict[tuple[int, int, int], list[np.ndarray]]:
    """DFT bases of the three-dimensional coordinate subspaces of C^9 in ``FOURIER_TRIPLES``.

    The n-th vector carries phase exp(2 pi i n t / 3) on the t-th coordinate of
    its triple.
    """
    out = {}
    for triple in FOURIER_TRIPLES:
        vecs = []
        for n in range(3):
            v = np.zeros(9, dtype=complex)
            for t, idx in enumerate(triple):
                v[idx] = np.exp(2j * np.pi * n * t / 3) / np.sqrt(3)
            vecs.append(v)
        out[triple] = vecs
    return out


def a_measurement_vectors(g: GammaParams) -> np.ndarray:
    """The 33 unnormalized kets phi_{k|0} in C^2 (+) C^9, as rows."""
    rows = []
    c2 = np.sqrt(3 / 36)
    c9 = np.sqrt(1 / 36)
    for a, b, c in SIGN_TRIPLES:
        for sb in (1, -1):
            for sa, small in ((1, 0), (-1, 1)):
                for s in (1, -1):
                    v = np.zeros(11, dtype=complex)
                    v[small] = s * c2
                    v[2 + a] += sa * c9
                    v[2 + b] += sb * c9
                    v[2 + c] += -np.conj(g.gamma2) * c9
                    rows.append(v)
    for triple, vecs in fourier_vectors().items():
        for w in vecs:
            rows.append(np.concatenate([np.zeros(2), np.sqrt(28 / 36) * w]))
    return np.array(rows)


def conditioning_shift(j: int) -> np.ndarray:
    """I_2 (+) X_9^(3j), applied to the kets phi_{k|0} to obtain phi_{k|j}."""
    s = np.zeros((11, 11), dtype=complex)
    s[:2, :2] = np.eye(2)
    s[2:, 2:] = np.linalg.matrix_power(pauli_x(9).matrix, (3 * j) % 9)
    return s


def build_a_measurement(j: int, g: GammaParams = GammaParams(), label: str = "A") -> KrausFamily:
    """A's 33-outcome rank-one measurement conditioned on B's outcome ``j``.

    Each element is a bra, so A's system is consumed by the measurement.
    """
    if j not in (0, 1, 2):
        raise ValueError(f"conditioning outcome must be 0, 1 or 2, got {j}")
    require_valid(g)
    kets = a_measurement_vectors(g) @ conditioning_shift(j).T
    return rank_one_family(kets, (label,), (11,))
