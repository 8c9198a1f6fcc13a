"""One-sided (Hestenes) Jacobi SVD for the small dense matrices used here."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import NumericalError

MAX_SWEEPS = 60


class SVD(NamedTuple):
    """Right-complete singular system: ``a @ vt.T == u * s``.

    ``s`` has one entry per column of ``a`` (descending, zero-padded when
    ``a`` is wide), ``vt`` is square orthogonal, and columns of ``u`` that
    belong to a zero singular value are left as zeros.
    """

    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray


def canonical_sign(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Flip ``v`` so its first non-negligible component is positive."""
    nz = np.flatnonzero(np.abs(v) > tol)
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def svd_small(a, tol: float = 1e-15, max_sweeps: int = MAX_SWEEPS) -> SVD:
    a = np.array(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("svd_small expects a matrix")
    if not np.all(np.isfinite(a)):
        raise NumericalError("matrix has non-finite entries")
    m, n = a.shape
    # Work on a unit-scale copy so squared column norms neither overflow nor underflow.
    amax = float(np.abs(a).max()) if a.size else 0.0
    u = a / amax if amax > 0 else a.copy()
    v = np.eye(n)
    # Columns this small are rounding noise of a rank-deficient input.
    negligible = (np.finfo(float).eps * np.linalg.norm(u)) ** 2

    for _ in range(max_sweeps):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                alpha = u[:, i] @ u[:, i]
                beta = u[:, j] @ u[:, j]
                gamma = u[:, i] @ u[:, j]
                if gamma == 0.0 or min(alpha, beta) <= negligible or abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.hypot(1.0, zeta))
                c = 1.0 / np.hypot(1.0, t)
                s = c * t
                ui, uj = u[:, i].copy(), u[:, j].copy()
                u[:, i], u[:, j] = c * ui - s * uj, s * ui + c * uj
                vi, vj = v[:, i].copy(), v[:, j].copy()
                v[:, i], v[:, j] = c * vi - s * vj, s * vi + c * vj
        if not rotated:
            break
    else:
        raise NumericalError(f"Jacobi SVD did not converge in {max_sweeps} sweeps")

    sigma = np.linalg.norm(u, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma, u, v = sigma[order], u[:, order], v[:, order]
    scale = sigma.max() if sigma.size else 0.0
    for k in range(n):
        if sigma[k] <= 1e-14 * scale:
            sigma[k] = 0.0
            u[:, k] = 0.0
        else:
            u[:, k] /= sigma[k]
        nz = np.flatnonzero(np.abs(v[:, k]) > 1e-12)
        if nz.size and v[nz[0], k] < 0:
            v[:, k] = -v[:, k]
            u[:, k] = -u[:, k]
    return SVD(u, sigma * amax if amax > 0 else sigma, v.T)


def singular_values(a) -> np.ndarray:
    return svd_small(a).s
