"""Receiver-side correction isometries.

Both solvers view a bipartite vector on R (x) rest as the matrix whose column
r is the rest-side vector paired with |r>_R. The correction acts on the rest.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Sequence

import numpy as np

from .linalg import TOL_NORM, LinearMap, PureState, _index

EXACT_TOL = 1e-8
_GS_EPS = 1e-8


@dataclass(frozen=True)
class CorrectionResult:
    isometry: LinearMap
    achieved_fidelity_sq: float
    exact: bool


def _columns(psi: PureState, ref: Sequence[str]):
    """Matrix with columns c_r (rest-side vectors) and the rest signature."""
    ax = _index(psi.labels, ref)
    rest = [i for i in range(len(psi.dims)) if i not in ax]
    dr = prod(psi.dims[i] for i in ax)
    m = np.transpose(psi.tensor(), ax + rest).reshape(dr, -1)
    return m.T, tuple(psi.dims[i] for i in rest), tuple(psi.labels[i] for i in rest)


def _ref_dims(psi: PureState, ref: Sequence[str]):
    return tuple(psi.dims[i] for i in _index(psi.labels, ref))


def complete_basis(q: np.ndarray, dim: int, order: Sequence[int] | None = None) -> np.ndarray:
    """Orthonormal basis of the complement of span(q), by Gram-Schmidt over canonical vectors.

    ``order`` permutes the canonical vectors tried; the default is 0..dim-1.
    """
    q = np.asarray(q, dtype=complex).reshape(dim, -1)
    k = q.shape[1]
    basis = np.zeros((dim, dim), dtype=complex)
    basis[:, :k] = q
    n_found = k
    for idx in (range(dim) if order is None else order):
        if n_found == dim:
            break
        b = basis[:, :n_found]
        v = -b @ np.conj(b[idx])
        v[idx] += 1.0
        v -= b @ (b.conj().T @ v)  # second pass for stability
        n = np.linalg.norm(v)
        if n > _GS_EPS:
            basis[:, n_found] = v / n
            n_found += 1
    return basis[:, k:n_found]


def extend_isometry(src: np.ndarray, dst: np.ndarray, dom_dim: int, cod_dim: int,
                    order: Sequence[int] | None = None) -> np.ndarray:
    """Isometry sending orthonormal columns ``src`` to orthonormal columns ``dst``.

    The complement of span(src) goes to the leading part of the complement of
    span(dst), both completed deterministically.
    """
    if cod_dim < dom_dim:
        raise ValueError(f"no isometry from dimension {dom_dim} into {cod_dim}")
    src_c = complete_basis(src, dom_dim, order)
    cod_order = None if order is None else list(order) + [i for i in range(cod_dim) if i not in order]
    dst_c = complete_basis(dst, cod_dim, cod_order)
    k = src_c.shape[1]
    return dst @ src.conj().T + dst_c[:, :k] @ src_c.conj().T


def _check_pair(post: PureState, target: PureState, ref: Sequence[str]):
    if _ref_dims(post, ref) != _ref_dims(target, ref):
        raise ValueError("post and target disagree on the reference dimensions")


def overlap_sq(post: PureState, target: PureState, v: LinearMap) -> float:
    from .linalg import apply_map

    amps, dims, labels = apply_map(post.amplitudes, post.dims, post.labels, v)
    out = PureState(amps, dims, labels).permute(target.labels)
    return float(abs(np.vdot(target.amplitudes, out.amplitudes)) ** 2)


def solve_exact_correction(post: PureState, target: PureState, ref: Sequence[str] = ("R",),
                           order: Sequence[int] | None = None,
                           tol: float = EXACT_TOL) -> CorrectionResult | None:
    """Isometry V on the non-reference factors with (I (x) V)|post> = |target>, if one exists.

    Exists iff the two reference reductions agree; None is returned when their
    trace distance exceeds ``tol``.
    """
    ref = tuple(ref)
    _check_pair(post, target, ref)
    c, dom_dims, dom_labels = _columns(post, ref)
    t, cod_dims, cod_labels = _columns(target, ref)
    # reference reductions, transposed: c^dag c and t^dag t
    gram_c, gram_t = c.conj().T @ c, t.conj().T @ t
    dist = 0.5 * np.abs(np.linalg.eigvalsh(gram_c - gram_t)).sum()
    if dist > tol:
        return None
    dom, cod = c.shape[0], t.shape[0]
    if cod < dom:
        raise ValueError(f"target side ({cod}) is smaller than the post side ({dom})")
    u, s, wh = np.linalg.svd(c, full_matrices=False)
    r = int(np.sum(s > _GS_EPS))
    src = u[:, :r]
    # V maps c w_i / s_i -> t w_i / s_i
    dst = t @ wh.conj().T[:, :r] / s[:r]
    dst, _ = _orthonormalize(dst)
    m = extend_isometry(src, dst, dom, cod, order)
    v = LinearMap(m, dom_dims, cod_dims, dom_labels, cod_labels)
    fid = overlap_sq(post, target, v)
    return CorrectionResult(v, fid, fid >= 1 - 1e-9)


def _orthonormalize(a: np.ndarray):
    # polar factor keeps the column correspondence while removing rounding drift
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    return u @ vh, s


def recovery_fidelity_sq(post: PureState, target: PureState, ref: Sequence[str] = ("R",)) -> float:
    """Value of the optimal recovery problem without building the decoder."""
    ref = tuple(ref)
    _check_pair(post, target, ref)
    c = _columns(post, ref)[0]
    t = _columns(target, ref)[0]
    if t.shape[0] < c.shape[0]:
        raise ValueError(f"target side ({t.shape[0]}) is smaller than the post side ({c.shape[0]})")
    s = np.linalg.svd(c @ t.conj().T, compute_uv=False)
    return float(min(np.sum(s) ** 2, 1.0))


def optimal_recovery_fidelity(post: PureState, target: PureState, ref: Sequence[str] = ("R",),
                              order: Sequence[int] | None = None) -> CorrectionResult:
    """Best isometric decoder: max_V |<target|(I (x) V)|post>|^2.

    The optimum is the squared trace norm of sum_r c_r t_r^dag, attained by
    the polar factor of that cross operator.
    """
    ref = tuple(ref)
    _check_pair(post, target, ref)
    c, dom_dims, dom_labels = _columns(post, ref)
    t, cod_dims, cod_labels = _columns(target, ref)
    dom, cod = c.shape[0], t.shape[0]
    if cod < dom:
        raise ValueError(f"target side ({cod}) is smaller than the post side ({dom})")
    cross = c @ t.conj().T          # dom x cod
    u, s, wh = np.linalg.svd(cross, full_matrices=False)
    r = int(np.sum(s > _GS_EPS * max(1.0, s[0] if s.size else 0.0)))
    m = extend_isometry(u[:, :r], wh.conj().T[:, :r], dom, cod, order)
    v = LinearMap(m, dom_dims, cod_dims, dom_labels, cod_labels)
    fid = float(min(np.sum(s) ** 2, 1.0))
    return CorrectionResult(v, fid, fid >= 1 - 1e-9)
