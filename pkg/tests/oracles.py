"""Independent reference computations used by the tests.

Nothing here calls into the package's solvers.
"""

import numpy as np
from scipy.optimize import minimize


def su2(theta, phi, chi):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c * np.exp(1j * phi), -s * np.exp(-1j * chi)],
                     [s * np.exp(1j * chi), c * np.exp(-1j * phi)]])


def brute_force_recovery_2x2(post: np.ndarray, target: np.ndarray, grid: int = 24) -> float:
    """max_U |<target|(I (x) U)|post>|^2 over 2x2 unitaries, amplitudes ordered (R, B).

    A global phase does not change the objective, so SU(2) suffices. Coarse
    grid over Euler angles, then Nelder-Mead from the best few grid points.
    """
    p = post.reshape(2, 2)
    t = target.reshape(2, 2)

    def value(angles):
        u = su2(*angles)
        return abs(np.sum(t.conj() * (p @ u.T))) ** 2

    th = np.linspace(0, np.pi / 2, grid)
    ph = np.linspace(0, 2 * np.pi, grid, endpoint=False)
    T, P, C = np.meshgrid(th, ph, ph, indexing="ij")
    c, s = np.cos(T), np.sin(T)
    u00, u01 = c * np.exp(1j * P), -s * np.exp(-1j * C)
    u10, u11 = s * np.exp(1j * C), c * np.exp(-1j * P)
    # (p @ u.T)[r, b] = sum_k p[r, k] u[b, k]
    ov = (t[:, 0].conj() @ p[:, 0]) * u00 + (t[:, 0].conj() @ p[:, 1]) * u01 \
        + (t[:, 1].conj() @ p[:, 0]) * u10 + (t[:, 1].conj() @ p[:, 1]) * u11
    vals = np.abs(ov) ** 2
    best = vals.max()
    for flat in np.argsort(vals, axis=None)[-5:]:
        i, j, k = np.unravel_index(flat, vals.shape)
        res = minimize(lambda a: -value(a), [th[i], ph[j], ph[k]], method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
        best = max(best, -res.fun)
    return float(best)


def random_isometry(rng, rows, cols):
    g = rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))
