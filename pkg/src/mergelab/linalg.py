"""Dense complex linear algebra on small labelled Hilbert spaces.

Every state and operator carries an explicit subsystem signature (labels and
dimensions). Reshapes, contractions and partial traces are all derived from
that signature, so tensor-factor order never has to be tracked by hand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod
from typing import Iterable, Sequence

import numpy as np

TOL_NORM = 1e-10
RANK_EPS = 1e-9
EIG_FLOOR = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=complex)
    arr.setflags(write=False)
    return arr


def _check_signature(dims, labels):
    dims = tuple(int(d) for d in dims)
    labels = tuple(str(l) for l in labels)
    if len(dims) != len(labels):
        raise ValueError(f"dims {dims} and labels {labels} differ in length")
    if any(d < 1 for d in dims):
        raise ValueError(f"subsystem dimensions must be positive, got {dims}")
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate subsystem labels {labels}")
    return dims, labels


def _index(labels: Sequence[str], wanted: Iterable[str]) -> list[int]:
    out = []
    for w in wanted:
        if w not in labels:
            raise KeyError(f"unknown subsystem label {w!r}; have {tuple(labels)}")
        out.append(labels.index(w))
    return out


@dataclass(frozen=True)
class PureState:
    """Normalized state vector over labelled subsystems."""

    amplitudes: np.ndarray
    dims: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        dims, labels = _check_signature(self.dims, self.labels)
        amps = _frozen(np.ravel(self.amplitudes))
        if amps.size != prod(dims):
            raise ValueError(f"{amps.size} amplitudes do not match dims {dims}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > TOL_NORM:
            raise ValueError(f"state is not normalized (squared norm {norm:.3e})")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_unnormalized(cls, vec, dims, labels) -> "PureState":
        vec = np.ravel(np.asarray(vec, dtype=complex))
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(vec / norm, dims, labels)

    @classmethod
    def basis(cls, index: int, dim: int, label: str = "q") -> "PureState":
        v = np.zeros(dim, dtype=complex)
        v[index] = 1.0
        return cls(v, (dim,), (label,))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def density(self) -> "DensityOperator":
        v = self.amplitudes
        return DensityOperator(np.outer(v, v.conj()), self.dims, self.labels)

    def relabel(self, mapping: dict[str, str]) -> "PureState":
        return PureState(self.amplitudes, self.dims, tuple(mapping.get(l, l) for l in self.labels))

    def permute(self, order: Sequence[str]) -> "PureState":
        """Reorder the tensor factors to ``order`` (must name every label)."""
        if sorted(order) != sorted(self.labels):
            raise ValueError(f"{tuple(order)} is not a permutation of {self.labels}")
        axes = _index(self.labels, order)
        amps = np.transpose(self.tensor(), axes)
        return PureState(amps.ravel(), tuple(self.dims[a] for a in axes), tuple(order))

    def reduced(self, keep: Sequence[str]) -> "DensityOperator":
        return reduced_density(self.amplitudes, self.dims, self.labels, keep)


@dataclass(frozen=True)
class DensityOperator:
    matrix: np.ndarray
    dims: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        dims, labels = _check_signature(self.dims, self.labels)
        m = _frozen(self.matrix)
        d = prod(dims)
        if m.shape != (d, d):
            raise ValueError(f"matrix shape {m.shape} does not match dims {dims}")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > TOL_NORM:
            raise ValueError("density operator is not Hermitian")
        if abs(np.trace(m).real - 1.0) > TOL_NORM:
            raise ValueError(f"density operator has trace {np.trace(m).real:.12g}")
        if np.linalg.eigvalsh(m).min() < -TOL_NORM:
            raise ValueError("density operator is not positive semidefinite")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def maximally_mixed(cls, dim: int, label: str = "q") -> "DensityOperator":
        return cls(np.eye(dim) / dim, (dim,), (label,))

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)

    def permute(self, order: Sequence[str]) -> "DensityOperator":
        if sorted(order) != sorted(self.labels):
            raise ValueError(f"{tuple(order)} is not a permutation of {self.labels}")
        axes = _index(self.labels, order)
        n = len(self.dims)
        t = self.matrix.reshape(self.dims + self.dims)
        t = np.transpose(t, axes + [n + a for a in axes])
        d = prod(self.dims)
        return DensityOperator(t.reshape(d, d), tuple(self.dims[a] for a in axes), tuple(order))


@dataclass(frozen=True)
class LinearMap:
    """Matrix from a labelled domain to a labelled codomain.

    An empty codomain signature means the map is a bra: the subsystems it acts
    on are consumed entirely.
    """

    matrix: np.ndarray
    domain_dims: tuple[int, ...]
    codomain_dims: tuple[int, ...]
    domain_labels: tuple[str, ...] = field(default=None)
    codomain_labels: tuple[str, ...] = field(default=None)

    def __post_init__(self):
        dd = tuple(int(d) for d in self.domain_dims)
        cd = tuple(int(d) for d in self.codomain_dims)
        dl = self.domain_labels if self.domain_labels is not None else tuple(f"in{i}" for i in range(len(dd)))
        cl = self.codomain_labels if self.codomain_labels is not None else tuple(f"out{i}" for i in range(len(cd)))
        dd, dl = _check_signature(dd, dl)
        cd, cl = _check_signature(cd, cl)
        m = _frozen(self.matrix)
        if m.ndim == 1:
            m = _frozen(m.reshape(1, -1))
        if m.shape != (prod(cd), prod(dd)):
            raise ValueError(f"matrix shape {m.shape} does not match {cd} <- {dd}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "domain_dims", dd)
        object.__setattr__(self, "codomain_dims", cd)
        object.__setattr__(self, "domain_labels", dl)
        object.__setattr__(self, "codomain_labels", cl)

    def on(self, domain: Sequence[str], codomain: Sequence[str] | None = None) -> "LinearMap":
        """Same matrix with new labels; codomain defaults to the domain labels."""
        codomain = tuple(domain) if codomain is None else tuple(codomain)
        return LinearMap(self.matrix, self.domain_dims, self.codomain_dims, tuple(domain), codomain)

    @property
    def dagger(self) -> "LinearMap":
        return LinearMap(self.matrix.conj().T, self.codomain_dims, self.domain_dims,
                         self.codomain_labels, self.domain_labels)

    def __matmul__(self, other: "LinearMap") -> "LinearMap":
        if self.domain_dims != other.codomain_dims:
            raise ValueError(f"cannot compose {self.domain_dims} with {other.codomain_dims}")
        return LinearMap(self.matrix @ other.matrix, other.domain_dims, self.codomain_dims,
                         other.domain_labels, self.codomain_labels)

    def isometry_defect(self) -> float:
        m = self.matrix
        return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[1]))))

    def is_isometry(self, tol: float = TOL_NORM) -> bool:
        return self.isometry_defect() <= tol


def identity(dim: int, label: str = "q") -> LinearMap:
    return LinearMap(np.eye(dim), (dim,), (dim,), (label,), (label,))


def tensor(a, b):
    """Kronecker product of two states or two maps; signatures concatenate."""
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(np.kron(a.amplitudes, b.amplitudes), a.dims + b.dims, a.labels + b.labels)
    if isinstance(a, LinearMap) and isinstance(b, LinearMap):
        return LinearMap(np.kron(a.matrix, b.matrix), a.domain_dims + b.domain_dims,
                         a.codomain_dims + b.codomain_dims, a.domain_labels + b.domain_labels,
                         a.codomain_labels + b.codomain_labels)
    raise TypeError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")


def direct_sum(*fragments, dims: Sequence[int] | None = None) -> np.ndarray:
    """Stack fragments so block ``i`` occupies the next ``dims[i]`` coordinates."""
    parts = [np.ravel(np.asarray(f, dtype=complex)) for f in fragments]
    if dims is not None:
        got = tuple(p.size for p in parts)
        if got != tuple(dims):
            raise ValueError(f"fragment dimensions {got}, expected {tuple(dims)}")
    return np.concatenate(parts)


def direct_sum_embed(v2, v9) -> np.ndarray:
    """Embed C^2 (+) C^9 into C^11: coordinates 0-1 from ``v2``, 2-10 from ``v9``."""
    return direct_sum(v2, v9, dims=(2, 9))


def block_embedding(block_dims: Sequence[int], which: int) -> np.ndarray:
    """Isometry placing block ``which`` of a direct sum into the full space."""
    total = sum(block_dims)
    start = sum(block_dims[:which])
    e = np.zeros((total, block_dims[which]), dtype=complex)
    e[start:start + block_dims[which], :] = np.eye(block_dims[which])
    return e


def apply_map(amps: np.ndarray, dims: Sequence[int], labels: Sequence[str], op: LinearMap):
    """Apply ``op`` (tensored with identity elsewhere) to a raw amplitude vector.

    Returns the unnormalized amplitudes and the new signature. Codomain factors
    take the position of the first consumed domain factor.
    """
    dims, labels = tuple(dims), tuple(labels)
    axes = _index(labels, op.domain_labels)
    for a, d in zip(axes, op.domain_dims):
        if dims[a] != d:
            raise ValueError(f"{labels[a]!r} has dim {dims[a]}, operator expects {d}")
    rest = [i for i in range(len(dims)) if i not in axes]
    clash = set(op.codomain_labels) & {labels[i] for i in rest}
    if clash:
        raise ValueError(f"codomain labels {sorted(clash)} already present")
    t = np.asarray(amps, dtype=complex).reshape(dims)
    t = np.transpose(t, axes + rest).reshape(prod(op.domain_dims), -1)
    out = op.matrix @ t
    pos = min(axes)
    insert_at = sum(1 for i in rest if i < pos)
    rest_dims = [dims[i] for i in rest]
    rest_labels = [labels[i] for i in rest]
    new_shape = tuple(op.codomain_dims) + tuple(rest_dims)
    out = out.reshape(new_shape)
    nc = len(op.codomain_dims)
    order = list(range(nc, nc + insert_at)) + list(range(nc)) + list(range(nc + insert_at, len(new_shape)))
    out = np.transpose(out, order)
    new_dims = tuple(rest_dims[:insert_at]) + op.codomain_dims + tuple(rest_dims[insert_at:])
    new_labels = tuple(rest_labels[:insert_at]) + op.codomain_labels + tuple(rest_labels[insert_at:])
    return out.ravel(), new_dims, new_labels


def apply_to_state(op: LinearMap, psi: PureState) -> PureState:
    amps, dims, labels = apply_map(psi.amplitudes, psi.dims, psi.labels, op)
    return PureState.from_unnormalized(amps, dims, labels)


def reduced_density(amps, dims, labels, keep: Sequence[str]) -> DensityOperator:
    keep = tuple(keep)
    ax = _index(labels, keep)
    rest = [i for i in range(len(dims)) if i not in ax]
    dk = prod(dims[i] for i in ax)
    m = np.transpose(np.asarray(amps).reshape(dims), ax + rest).reshape(dk, -1)
    rho = m @ m.conj().T
    return DensityOperator(rho, tuple(dims[i] for i in ax), keep)


def partial_trace(rho: DensityOperator, keep: Sequence[str]) -> DensityOperator:
    """Trace out every subsystem not listed in ``keep`` (kept in ``keep`` order)."""
    keep = tuple(keep)
    ax = _index(rho.labels, keep)
    n = len(rho.dims)
    rest = [i for i in range(n) if i not in ax]
    t = rho.matrix.reshape(rho.dims + rho.dims)
    t = np.transpose(t, ax + rest + [n + i for i in ax] + [n + i for i in rest])
    dk = prod(rho.dims[i] for i in ax)
    dr = prod(rho.dims[i] for i in rest)
    t = t.reshape(dk, dr, dk, dr)
    return DensityOperator(np.einsum("ajbj->ab", t), tuple(rho.dims[i] for i in ax), keep)


@dataclass(frozen=True)
class SchmidtDecomposition:
    coefficients: np.ndarray
    left: np.ndarray   # columns are left Schmidt vectors
    right: np.ndarray  # columns are right Schmidt vectors

    @property
    def rank(self) -> int:
        return int(np.sum(self.coefficients > RANK_EPS))

    def reconstruct(self) -> np.ndarray:
        return np.einsum("i,ai,bi->ab", self.coefficients, self.left, self.right).ravel()


def schmidt(psi: PureState, cut: Sequence[str]) -> SchmidtDecomposition:
    """Schmidt decomposition across ``cut`` | rest, via SVD of the reshaped amplitudes.

    ``reconstruct()`` returns amplitudes ordered (cut..., rest...).
    """
    cut = tuple(cut)
    ax = _index(psi.labels, cut)
    rest = [i for i in range(len(psi.dims)) if i not in ax]
    dl = prod(psi.dims[i] for i in ax)
    m = np.transpose(psi.tensor(), ax + rest).reshape(dl, -1)
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    return SchmidtDecomposition(s, u, vh.T)


def fidelity_sq(state, target: PureState) -> float:
    """Squared fidelity <target|state|target> against a pure target."""
    if set(state.labels) != set(target.labels):
        raise ValueError(f"labels {state.labels} do not match target {target.labels}")
    state = state.permute(target.labels)
    if state.dims != target.dims:
        raise ValueError(f"dims {state.dims} do not match target {target.dims}")
    t = target.amplitudes
    if isinstance(state, PureState):
        val = abs(np.vdot(t, state.amplitudes)) ** 2
    else:
        val = np.vdot(t, state.matrix @ t).real
    return float(min(max(val, 0.0), 1.0))


def _eigenvalues(rho: DensityOperator | np.ndarray) -> np.ndarray:
    m = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho)
    w = np.linalg.eigvalsh(m)
    if w.min() < -TOL_NORM:
        raise ValueError(f"operator is not positive semidefinite (min eigenvalue {w.min():.3e})")
    return w


def entropy(rho: DensityOperator) -> float:
    """Von Neumann entropy in bits."""
    w = _eigenvalues(rho)
    w = w[w > EIG_FLOOR]
    return float(-np.sum(w * np.log2(w)) + 0.0)


def cond_entropy(psi: PureState, a, b) -> float:
    """H(a|b) = H(ab) - H(b) for subsystem labels (or label tuples) ``a`` and ``b``."""
    a = (a,) if isinstance(a, str) else tuple(a)
    b = (b,) if isinstance(b, str) else tuple(b)
    return entropy(psi.reduced(a + b)) - entropy(psi.reduced(b))


# -- JSON ---------------------------------------------------------------------

def _split(m: np.ndarray):
    flat = np.ravel(m)
    return [float(x) for x in flat.real], [float(x) for x in flat.imag]


def state_to_json(psi: PureState | DensityOperator) -> dict:
    data = psi.amplitudes if isinstance(psi, PureState) else psi.matrix
    re, im = _split(data)
    return {"dims": list(psi.dims), "labels": list(psi.labels), "re": re, "im": im}


def state_from_json(obj: dict) -> PureState:
    amps = np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
    return PureState(amps, tuple(obj["dims"]), tuple(obj["labels"]))


def density_from_json(obj: dict) -> DensityOperator:
    d = prod(obj["dims"])
    m = (np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)).reshape(d, d)
    return DensityOperator(m, tuple(obj["dims"]), tuple(obj["labels"]))


def map_to_json(op: LinearMap) -> dict:
    re, im = _split(op.matrix)
    return {
        "domainDims": list(op.domain_dims),
        "domainLabels": list(op.domain_labels),
        "dims": list(op.codomain_dims),
        "labels": list(op.codomain_labels),
        "re": re,
        "im": im,
    }


def map_from_json(obj: dict) -> LinearMap:
    cd, dd = tuple(obj["dims"]), tuple(obj["domainDims"])
    m = (np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float))
    return LinearMap(m.reshape(prod(cd), prod(dd)), dd, cd, tuple(obj["domainLabels"]), tuple(obj["labels"]))
