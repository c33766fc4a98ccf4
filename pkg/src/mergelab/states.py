"""The concrete objects of the separation example.

Three mutually orthogonal states on C^11 (x) C^11, each split as C^2 (+) C^9
on both sides, and the tripartite state that purifies their uniform mixture
with a three-dimensional reference R.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import TOL_NORM, LinearMap, PureState, block_embedding, state_to_json

DEFAULT_GAMMA = cmath.exp(1j * cmath.pi / 4)


class InvalidGammaError(ValueError):
    pass


@dataclass(frozen=True)
class GammaParams:
    gamma1: complex = DEFAULT_GAMMA
    gamma2: complex = DEFAULT_GAMMA

    def to_json(self) -> dict:
        return {
            "gamma1": [float(self.gamma1.real), float(self.gamma1.imag)],
            "gamma2": [float(self.gamma2.real), float(self.gamma2.imag)],
        }


def validate_gammas(g: GammaParams) -> list[str]:
    """Return the list of violated constraints (empty when ``g`` is valid)."""
    out = []
    for name, gam in (("gamma1", g.gamma1), ("gamma2", g.gamma2)):
        if abs(abs(gam) - 1.0) > TOL_NORM:
            out.append(f"{name} must have unit modulus (|{name}| = {abs(gam):.12g})")
        if abs(complex(gam).imag) <= TOL_NORM:
            out.append(f"{name} must be nonreal")
    for sign, tag in ((1, "+"), (-1, "-")):
        if abs(g.gamma2 - sign * 1j * g.gamma1 ** 2) <= TOL_NORM:
            out.append(f"gamma2 must differ from {tag}i*gamma1^2")
    return out


def require_valid(g: GammaParams) -> None:
    problems = validate_gammas(g)
    if problems:
        raise InvalidGammaError("; ".join(problems))


def pauli_x(k: int, label: str = "q") -> LinearMap:
    """Cyclic shift |l> -> |l+1 mod k>."""
    return LinearMap(np.roll(np.eye(k), 1, axis=0), (k,), (k,), (label,), (label,))


def pauli_z(k: int, label: str = "q") -> LinearMap:
    """Clock operator |l> -> exp(2 pi i l / k) |l>."""
    return LinearMap(np.diag(np.exp(2j * np.pi * np.arange(k) / k)), (k,), (k,), (label,), (label,))


def phi_K(K: int, labels: Sequence[str] = ("A", "B")) -> PureState:
    """Maximally entangled state of Schmidt rank ``K``."""
    if K < 1:
        raise ValueError("Schmidt rank must be at least 1")
    return PureState(np.eye(K).ravel() / np.sqrt(K), (K, K), tuple(labels))


def _block_matrices(g: GammaParams):
    """Amplitude matrices (A rows, B columns) of the C^2 and C^9 blocks for l = 0, 1, 2."""
    phi2 = np.eye(2) / np.sqrt(2)
    phi9 = np.eye(9) / 3
    x2, z2, x9 = pauli_x(2).matrix, pauli_z(2).matrix, pauli_x(9).matrix
    small = [phi2, g.gamma1 * x2 @ phi2, g.gamma2 * z2 @ phi2]
    large = [phi9, np.linalg.matrix_power(x9, 3) @ phi9, np.linalg.matrix_power(x9, 6) @ phi9]
    return small, large


def build_family(g: GammaParams = GammaParams()) -> list[PureState]:
    """The three orthogonal states on A (x) B, each sqrt(2/11) Phi_2-type (+) sqrt(9/11) Phi_9-type."""
    require_valid(g)
    e2, e9 = block_embedding((2, 9), 0), block_embedding((2, 9), 1)
    small, large = _block_matrices(g)
    fam = []
    for s, t in zip(small, large):
        m = np.sqrt(2 / 11) * e2 @ s @ e2.T + np.sqrt(9 / 11) * e9 @ t @ e9.T
        fam.append(PureState(m.ravel(), (11, 11), ("A", "B")))
    return fam


@dataclass(frozen=True)
class MergeInstance:
    """A tripartite state (1/sqrt(D)) sum_l |l>_R |psi_l>_AB together with its family."""

    psi: PureState
    family: tuple[PureState, ...]
    gammas: GammaParams | None = None

    @property
    def D(self) -> int:
        return len(self.family)

    @property
    def dim_a(self) -> int:
        return self.family[0].dims[0]

    def target(self) -> PureState:
        """Merged state: A's share moved to B's register B' (labels R, Bp, B)."""
        return self.psi.relabel({"A": "Bp"})

    def to_json(self) -> dict:
        return {
            "D": self.D,
            "gammas": None if self.gammas is None else self.gammas.to_json(),
            "psi": state_to_json(self.psi),
            "family": [state_to_json(s) for s in self.family],
        }


def instance_from_family(family: Sequence[PureState], gammas: GammaParams | None = None) -> MergeInstance:
    family = tuple(family)
    D = len(family)
    dims = family[0].dims
    if any(s.dims != dims or s.labels != ("A", "B") for s in family):
        raise ValueError("family members must share the signature (A, B)")
    amps = np.concatenate([s.amplitudes for s in family]) / np.sqrt(D)
    psi = PureState(amps, (D,) + dims, ("R", "A", "B"))
    return MergeInstance(psi, family, gammas)


def build_instance(g: GammaParams = GammaParams()) -> MergeInstance:
    return instance_from_family(build_family(g), g)


def elimination_family() -> list[PureState]:
    """{|00>, |01>, |1+>}: discriminable by one-way LOCC only through elimination."""
    plus = np.array([1, 1]) / np.sqrt(2)
    vecs = [np.kron([1, 0], [1, 0]), np.kron([1, 0], [0, 1]), np.kron([0, 1], plus)]
    return [PureState(v, (2, 2), ("A", "B")) for v in vecs]


def easy_family(dim_a: int = 2) -> list[PureState]:
    """A holds |0> in every member, so merging needs nothing from A."""
    out = []
    for l in range(3):
        v = np.zeros((dim_a, 3), dtype=complex)
        v[0, l] = 1.0
        out.append(PureState(v.ravel(), (dim_a, 3), ("A", "B")))
    return out
