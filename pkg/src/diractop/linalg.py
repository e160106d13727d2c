"""Dense Hermitian eigensolver contract and frame-overlap utilities."""
from __future__ import annotations

import numpy as np

__all__ = ["hermitian_eig", "orthonormalize", "frame_overlap_det"]

_HERM_TOL = 1e-12


def hermitian_eig(a: np.ndarray):
    """Eigendecomposition of a Hermitian matrix.

    Returns (eigenvalues ascending, eigenvectors as columns).  The input is
    symmetrized before factorization; genuinely non-Hermitian inputs are
    rejected.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.conj().T)) > 1e-10 * scale:
        raise ValueError("matrix is not Hermitian")
    a = 0.5 * (a + a.conj().T)
    w, v = np.linalg.eigh(a)
    return w, v


def orthonormalize(frame: np.ndarray) -> np.ndarray:
    """Orthonormalize the columns of a frame (thin QR)."""
    frame = np.asarray(frame, dtype=complex)
    if frame.ndim == 1:
        frame = frame[:, None]
    q, r = np.linalg.qr(frame)
    # fix the QR sign/phase ambiguity so the result is deterministic
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases[None, :]


def frame_overlap_det(f: np.ndarray, g: np.ndarray) -> complex:
    """Determinant of the k x k matrix of pairwise inner products <f_i, g_j>.

    Realizes the pairing of determinant lines carried by eigenframes; a rank
    mismatch signals a violated cover assumption upstream.
    """
    f = np.asarray(f, dtype=complex)
    g = np.asarray(g, dtype=complex)
    if f.ndim == 1:
        f = f[:, None]
    if g.ndim == 1:
        g = g[:, None]
    if f.shape != g.shape:
        raise ValueError(f"frame shape mismatch: {f.shape} vs {g.shape}")
    if f.shape[1] == 0:
        return 1.0 + 0.0j
    return complex(np.linalg.det(f.conj().T @ g))
