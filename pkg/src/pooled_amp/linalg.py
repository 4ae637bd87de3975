"""Small symmetric-matrix helpers used by the SE recursions and denoisers."""
import numpy as np

from .errors import SolverError

PINV_CUTOFF = 1e-10
PSD_TOL = 1e-10


def sym(M):
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def pinv(M, cutoff=PINV_CUTOFF):
    """Pseudoinverse with a relative singular-value cutoff."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return np.linalg.pinv(M, rcond=cutoff)


def pinv_sym(M, cutoff=PINV_CUTOFF, scale=None):
    """Symmetric pseudoinverse; eigenvalues below ``cutoff * scale`` are dropped.

    ``scale`` defaults to the largest eigenvalue magnitude of ``M``.
    """
    M = sym(np.atleast_2d(M))
    w, V = np.linalg.eigh(M)
    if scale is None:
        scale = np.max(np.abs(w)) if w.size else 0.0
    keep = np.abs(w) > cutoff * max(scale, np.finfo(float).tiny)
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    return (V * inv) @ V.T


def clip_psd(M, tol=PSD_TOL, name="matrix"):
    """Symmetrise and clip tiny negative eigenvalues; larger violations raise."""
    M = sym(np.atleast_2d(M))
    w, V = np.linalg.eigh(M)
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    if w.size and w.min() < -tol * scale:
        raise SolverError(f"{name} is not positive semidefinite (min eigenvalue {w.min():.3e})")
    w = np.clip(w, 0.0, None)
    return (V * w) @ V.T


def sqrtm_psd(M, tol=1e-12):
    """Symmetric square root with eigenvalues clipped at 0."""
    M = sym(np.atleast_2d(M))
    w, V = np.linalg.eigh(M)
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    w = np.where(w > tol * max(scale, 1e-300), w, 0.0)
    return (V * np.sqrt(w)) @ V.T


def sup_norm(M) -> float:
    return float(np.max(np.abs(np.asarray(M, dtype=float)))) if np.size(M) else 0.0


def complement_basis(L: int) -> np.ndarray:
    """Orthonormal basis (``L x (L-1)``) of the complement of the all-ones vector."""
    Q, _ = np.linalg.qr(np.hstack([np.ones((L, 1)), np.eye(L)[:, :L - 1]]))
    return Q[:, 1:]


def floored_inverse(M, floor: float, drop_ones: bool = True) -> np.ndarray:
    """Inverse on the complement of the all-ones direction with eigenvalues
    floored at ``floor``.

    The all-ones direction is a structural null for one-hot signals and is
    projected out exactly.  Other directions whose variance collapses are
    fully revealed; flooring keeps them informative instead of dropping them.
    """
    M = sym(np.atleast_2d(M))
    L = M.shape[0]
    if not drop_ones or L == 1:
        w, V = np.linalg.eigh(M)
        return (V / np.maximum(w, floor)) @ V.T
    U = complement_basis(L)
    w, V = np.linalg.eigh(U.T @ M @ U)
    W = U @ V
    return (W / np.maximum(w, floor)) @ W.T
