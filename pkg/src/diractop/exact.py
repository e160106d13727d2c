"""Closed-form spectral oracles for the half-line Dirac operators.

Every numerical result elsewhere in the package is validated against the
formulas implemented here.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .algebra import PAULI, Quaternion, quat_mul

__all__ = [
    "BRANCH_TOL",
    "EigenfunctionData",
    "ExactSpectrum",
    "u1_spectrum",
    "sp1_spectrum",
    "fermi_surface_exact",
    "fermi_arc_ray_3d",
    "phase_fix",
]

# Tolerance for unit-norm inputs and for the closed branch conditions
# Im(omega) = 0 and |q_r| = 1; on the boundary the empty-spectrum branch wins.
BRANCH_TOL = 1e-9


def phase_fix(vec: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Rotate a vector's global phase so its first nonzero entry is real > 0."""
    vec = np.asarray(vec, dtype=complex)
    for x in vec.ravel():
        if abs(x) > tol:
            return vec * (abs(x) / x)
    return vec


@dataclass(frozen=True)
class EigenfunctionData:
    """Boundary data of a midgap bound state psi(z) = w exp(-decay_rate z)."""

    boundary_spinor: np.ndarray  # w, L2-normalized: |w|^2/(2 a) = 1
    decay_rate: float
    u_minus: Optional[np.ndarray] = None  # 2-spinor with (qvec.sigma) u = -|qvec| u


@dataclass(frozen=True)
class ExactSpectrum:
    essential_bands: tuple[tuple[float, float], ...]
    discrete: tuple[tuple[float, int], ...]
    eigenfunction_data: Optional[EigenfunctionData] = None

    @property
    def essential_edge(self) -> float:
        return float(self.essential_bands[1][0])


def u1_spectrum(rho: float, omega: complex) -> ExactSpectrum:
    """Spectrum of the 2-component half-line operator with mass rho and
    boundary spinor (1, omega).

    Essential bands (-inf,-rho] u [rho,inf); a single midgap eigenvalue
    rho*Re(omega) exists iff Im(omega) < 0.
    """
    if rho <= 0:
        raise ValueError("rho must be positive (massless case unsupported)")
    omega = complex(omega)
    if abs(abs(omega) - 1.0) > BRANCH_TOL:
        raise ValueError("omega must lie on the unit circle")
    bands = ((-np.inf, -rho), (rho, np.inf))
    if omega.imag >= -BRANCH_TOL:
        return ExactSpectrum(essential_bands=bands, discrete=())
    lam = rho * omega.real
    a = -rho * omega.imag  # decay rate, positive on this branch
    w = np.array([1.0, omega]) / np.sqrt(2.0)
    w = phase_fix(w) * np.sqrt(2.0 * a)
    return ExactSpectrum(
        essential_bands=bands,
        discrete=((lam, 1),),
        eigenfunction_data=EigenfunctionData(boundary_spinor=w, decay_rate=a),
    )


def sp1_spectrum(q: Quaternion) -> ExactSpectrum:
    """Spectrum of the 4-component quaternionic half-line operator with unit
    boundary quaternion q.

    Essential bands (-inf,-1] u [1,inf); eigenvalue q_r (multiplicity 1) iff
    |q_r| < 1, with eigenfunction (u-, q u-) exp(-|qvec| z) where u- is the
    negative spinor of qvec.sigma.
    """
    if abs(q.norm - 1.0) > BRANCH_TOL:
        raise ValueError(f"q must be a unit quaternion, got |q| = {q.norm}")
    bands = ((-np.inf, -1.0), (1.0, np.inf))
    if abs(q.r) >= 1.0 - BRANCH_TOL:
        return ExactSpectrum(essential_bands=bands, discrete=())
    qvec = q.vec
    qnorm = float(np.linalg.norm(qvec))
    h = np.tensordot(qvec, PAULI, axes=1)
    w2, v2 = np.linalg.eigh(h)  # eigenvalues -|qvec|, +|qvec|
    u_minus = phase_fix(v2[:, 0])
    w = np.concatenate([u_minus, q.matrix() @ u_minus])
    w = phase_fix(w) * np.sqrt(2.0 * qnorm) / np.linalg.norm(w)
    return ExactSpectrum(
        essential_bands=bands,
        discrete=((float(q.r), 1),),
        eigenfunction_data=EigenfunctionData(
            boundary_spinor=w, decay_rate=qnorm, u_minus=u_minus
        ),
    )


def fermi_surface_exact(
    gamma: Quaternion, mu: float, q: Quaternion, tol: float = BRANCH_TOL
) -> bool:
    """Exact membership test for the edge-state Fermi surface at level mu:
    Re(conj(q) * gamma) = mu together with |q| > |mu|."""
    if abs(gamma.norm - 1.0) > BRANCH_TOL:
        raise ValueError("gamma must be a unit quaternion")
    if not -1.0 < mu < 1.0:
        raise ValueError("mu must lie in (-1, 1)")
    re_part = quat_mul(q.conj(), gamma).r
    return abs(re_part - mu) <= tol and q.norm > abs(mu) + tol


def fermi_arc_ray_3d(
    omega0: complex, rho: float, omega: complex, tol: float = BRANCH_TOL
) -> bool:
    """Zero-mode test for the 3D surface problem: the 2-component operator
    with boundary parameter conj(omega)*omega0 has a zero eigenvalue exactly
    on the ray Arg(omega * conj(omega0)) = pi/2."""
    spec = u1_spectrum(rho, complex(omega).conjugate() * complex(omega0))
    return any(abs(lam) <= tol for lam, _ in spec.discrete)
