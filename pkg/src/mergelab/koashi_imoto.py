"""Koashi-Imoto block structure of the merging state.

The decomposition is written down for the specific state rather than computed
by the general algorithm; ``verify_ki`` checks that it reconstructs the state
through the two local embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np

from .linalg import LinearMap, PureState, apply_map, map_to_json, state_to_json
from .states import GammaParams, pauli_x, pauli_z, phi_K, require_valid


@dataclass(frozen=True)
class KIBlock:
    prob: float
    omega: PureState  # on (aL, bL); a 1x1 scalar block when trivial
    phi: PureState    # on (R, aR, bR)


@dataclass(frozen=True)
class KIDecomposition:
    blocks: tuple[KIBlock, ...]
    embed_a: LinearMap  # A -> (a0, aR)
    embed_b: LinearMap  # B -> (b0, bR)

    @property
    def flag_dim(self) -> int:
        return self.embed_a.codomain_dims[0]

    @property
    def probs(self) -> np.ndarray:
        return np.array([b.prob for b in self.blocks])

    def to_json(self) -> dict:
        return {
            "flagDim": self.flag_dim,
            "blocks": [
                {"prob": b.prob, "omega": state_to_json(b.omega), "phi": state_to_json(b.phi)}
                for b in self.blocks
            ],
            "embedA": map_to_json(self.embed_a),
            "embedB": map_to_json(self.embed_b),
        }


def _trivial_omega() -> PureState:
    return PureState(np.ones(1), (1, 1), ("aL", "bL"))


def _embedding(label_in: str, flag: str, reg: str) -> LinearMap:
    """C^2 (+) C^9 -> flag (4) (x) register (3).

    C^2 coordinate c goes to |0>|c>; C^9 coordinate 3q + s goes to |s+1>|q>.
    """
    m = np.zeros((4 * 3, 11))
    for c in range(2):
        m[0 * 3 + c, c] = 1.0
    for idx in range(9):
        q, s = divmod(idx, 3)
        m[(s + 1) * 3 + q, 2 + idx] = 1.0
    return LinearMap(m, (11,), (4, 3), (label_in,), (flag, reg))


def build_ki_psi(g: GammaParams = GammaParams()) -> KIDecomposition:
    """Four blocks with weights 2/11, 3/11, 3/11, 3/11; all left parts trivial."""
    require_valid(g)
    phi2 = phi_K(2).amplitudes.reshape(2, 2)
    twisted = [phi2, g.gamma1 * pauli_x(2).matrix @ phi2, g.gamma2 * pauli_z(2).matrix @ phi2]
    block0 = np.array(twisted) / np.sqrt(3)
    blocks = [KIBlock(2 / 11, _trivial_omega(), PureState(block0.ravel(), (3, 2, 2), ("R", "aR", "bR")))]
    shifted = np.zeros((3, 3, 3))
    for l in range(3):
        for m in range(3):
            shifted[l, (l + m) % 3, m] = 1 / 3
    for _ in range(3):
        blocks.append(KIBlock(3 / 11, _trivial_omega(), PureState(shifted.ravel(), (3, 3, 3), ("R", "aR", "bR"))))
    return KIDecomposition(tuple(blocks), _embedding("A", "a0", "aR"), _embedding("B", "b0", "bR"))


def reconstruct(ki: KIDecomposition) -> np.ndarray:
    """sum_j sqrt(p_j) |j>_a0 |j>_b0 (omega_j (x) phi_j), ordered (R, a0, aR, b0, bR).

    Left-part registers must be trivial; register blocks are zero-padded.
    """
    f = ki.flag_dim
    da, db = ki.embed_a.codomain_dims[1], ki.embed_b.codomain_dims[1]
    dr = ki.blocks[0].phi.dims[0]
    out = np.zeros((dr, f, da, f, db), dtype=complex)
    for j, b in enumerate(ki.blocks):
        if b.omega.dim != 1:
            raise NotImplementedError("non-trivial left parts need their own registers")
        r, a, bb = b.phi.dims
        out[:, j, :a, j, :bb] += np.sqrt(b.prob) * b.omega.amplitudes[0] * b.phi.tensor()
    return out.ravel()


def verify_ki(psi: PureState, ki: KIDecomposition, tol: float = 1e-10) -> tuple[bool, float]:
    """Compare (U^A (x) U^B)|psi> with the block reconstruction; also checks the embeddings."""
    amps, dims, labels = apply_map(psi.amplitudes, psi.dims, psi.labels, ki.embed_a)
    amps, dims, labels = apply_map(amps, dims, labels, ki.embed_b)
    order = ("R", ki.embed_a.codomain_labels[0], ki.embed_a.codomain_labels[1],
             ki.embed_b.codomain_labels[0], ki.embed_b.codomain_labels[1])
    axes = [labels.index(l) for l in order]
    got = np.transpose(amps.reshape(dims), axes).ravel()
    want = reconstruct(ki)
    residual = float(np.max(np.abs(got - want))) if got.size == want.size else float("inf")
    residual = max(residual, ki.embed_a.isometry_defect(), ki.embed_b.isometry_defect(),
                   abs(float(ki.probs.sum()) - 1.0))
    return residual <= tol, residual


def product_decomposition() -> KIDecomposition:
    """J = 1 decomposition of |0>_R |0>_A |0>_B with one-dimensional registers."""
    phi = PureState(np.ones(1), (1, 1, 1), ("R", "aR", "bR"))
    one = np.ones((1, 1))
    return KIDecomposition(
        (KIBlock(1.0, _trivial_omega(), phi),),
        LinearMap(one, (1,), (1, 1), ("A",), ("a0", "aR")),
        LinearMap(one, (1,), (1, 1), ("B",), ("b0", "bR")),
    )
