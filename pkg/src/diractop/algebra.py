"""Quaternion arithmetic, Pauli/Dirac matrices and the quaternionic structure.

Conventions: a quaternion q = q_r + i q.v . sigma is stored by its real part
``r`` and the three Pauli coefficients ``v`` of its imaginary part, so the
2x2 complex realization is ``r * I + 1j * (v . sigma)``.  Quaternion
conjugation maps to the Hermitian adjoint of that matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PAULI",
    "Quaternion",
    "AntiUnitary",
    "DiracSet",
    "CliffordReport",
    "quat_mul",
    "momentum_to_quaternion",
    "quaternion_to_momentum",
    "dirac_set",
    "clifford_check",
    "theta_c2",
]

# Pauli matrices sigma_1, sigma_2, sigma_3.
PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
PAULI.setflags(write=False)

_I2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class Quaternion:
    """Quaternion q = r + i (v . sigma), immutable."""

    r: float
    v: tuple[float, float, float]

    @property
    def vec(self) -> np.ndarray:
        return np.array(self.v, dtype=float)

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.r * self.r + self.vec @ self.vec))

    def conj(self) -> "Quaternion":
        return Quaternion(self.r, (-self.v[0], -self.v[1], -self.v[2]))

    def matrix(self) -> np.ndarray:
        """2x2 complex realization r*I + 1j*(v . sigma)."""
        return self.r * _I2 + 1j * np.tensordot(self.vec, PAULI, axes=1)

    def unit(self) -> "Quaternion":
        n = self.norm
        if n == 0.0:
            raise ZeroDivisionError("cannot normalize the zero quaternion")
        return Quaternion(self.r / n, tuple(self.vec / n))

    def __mul__(self, other: "Quaternion") -> "Quaternion":
        return quat_mul(self, other)

    @staticmethod
    def from_matrix(m: np.ndarray, tol: float = 1e-10) -> "Quaternion":
        """Invert the 2x2 realization.  Rejects matrices outside R + i(R^3 . sigma)."""
        m = np.asarray(m, dtype=complex)
        r = m.trace().real / 2.0
        # coefficient of 1j*sigma_k is tr(m sigma_k)/2 imaginary part free
        coeffs = np.array([np.trace(m @ s) / 2.0 for s in PAULI])
        v = coeffs.imag
        rec = r * _I2 + 1j * np.tensordot(v, PAULI, axes=1)
        if np.max(np.abs(rec - m)) > tol * max(1.0, np.max(np.abs(m))):
            raise ValueError("matrix is not the realization of a quaternion")
        return Quaternion(float(r), tuple(float(x) for x in v))

    @staticmethod
    def one() -> "Quaternion":
        return Quaternion(1.0, (0.0, 0.0, 0.0))

    @staticmethod
    def from_vec(r: float, v) -> "Quaternion":
        v = np.asarray(v, dtype=float)
        return Quaternion(float(r), (float(v[0]), float(v[1]), float(v[2])))


def quat_mul(a: Quaternion, b: Quaternion) -> Quaternion:
    """Quaternion product; agrees with the product of the 2x2 realizations."""
    av, bv = a.vec, b.vec
    r = a.r * b.r - float(av @ bv)
    v = a.r * bv + b.r * av - np.cross(av, bv)
    return Quaternion.from_vec(r, v)


def momentum_to_quaternion(p_par) -> Quaternion:
    """Package a boundary-parallel momentum 4-vector as a quaternion.

    The realization is ((p1+ip2, -p3+ip4), (p3+ip4, p1-ip2)); the real part
    is p1 and |q| = |p_par|.
    """
    p = np.asarray(p_par, dtype=float)
    if p.shape != (4,):
        raise ValueError("p_par must be a real 4-vector")
    return Quaternion(float(p[0]), (float(p[3]), -float(p[2]), float(p[1])))


def quaternion_to_momentum(q: Quaternion) -> np.ndarray:
    """Inverse of momentum_to_quaternion."""
    return np.array([q.r, q.v[2], -q.v[1], q.v[0]], dtype=float)


@dataclass(frozen=True)
class AntiUnitary:
    """Antiunitary map v -> u @ conj(v).  Never materialized as a matrix."""

    u: np.ndarray

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.u @ np.conj(vec)

    def square_matrix(self) -> np.ndarray:
        """The (linear) square of the map: u @ conj(u)."""
        return self.u @ np.conj(self.u)

    def conjugate_operator(self, m: np.ndarray) -> np.ndarray:
        """Theta m Theta^{-1} = u conj(m) u^dagger for unitary u."""
        return self.u @ np.conj(m) @ self.u.conj().T


def theta_c2() -> AntiUnitary:
    """Standard quaternionic structure on C^2: (-i sigma_2) . conjugation."""
    return AntiUnitary(-1j * PAULI[1])


@dataclass(frozen=True)
class DiracSet:
    """Five 4x4 Hermitian generators of the rank-5 Clifford algebra plus the
    quaternionic structure Theta commuting with all of them."""

    gammas: tuple[np.ndarray, ...]
    theta: AntiUnitary


def dirac_set() -> DiracSet:
    s1, s2, s3 = PAULI
    gammas = (
        np.kron(s1, _I2),
        np.kron(s2, s3),
        -np.kron(s2, s2),
        np.kron(s2, s1),
        np.kron(s3, _I2),
    )
    for g in gammas:
        g.setflags(write=False)
    theta = AntiUnitary(np.kron(_I2, -1j * PAULI[1]))
    return DiracSet(gammas=gammas, theta=theta)


@dataclass(frozen=True)
class CliffordReport:
    anticommutators_ok: tuple[tuple[int, int, bool], ...]
    chirality_ok: bool
    theta_squares_to_minus_one: bool
    theta_commutes: tuple[bool, ...]

    @property
    def ok(self) -> bool:
        return (
            all(flag for _, _, flag in self.anticommutators_ok)
            and self.chirality_ok
            and self.theta_squares_to_minus_one
            and all(self.theta_commutes)
        )


def clifford_check(d: DiracSet, tol: float = 1e-12) -> CliffordReport:
    """Verify anticommutators, the chirality product and Theta-commutation."""
    gs = d.gammas
    n = gs[0].shape[0]
    eye = np.eye(n)
    pairs = []
    for i in range(len(gs)):
        for j in range(i, len(gs)):
            anti = gs[i] @ gs[j] + gs[j] @ gs[i]
            target = 2.0 * eye if i == j else np.zeros_like(eye)
            pairs.append((i + 1, j + 1, bool(np.max(np.abs(anti - target)) <= tol)))
    prod = eye.astype(complex)
    for g in gs:
        prod = prod @ g
    chirality_ok = bool(np.max(np.abs(prod + eye)) <= tol)
    theta_sq_ok = bool(np.max(np.abs(d.theta.square_matrix() + eye)) <= tol)
    # Theta g = g Theta  <=>  u conj(g) = g u
    commutes = tuple(
        bool(np.max(np.abs(d.theta.u @ np.conj(g) - g @ d.theta.u)) <= tol) for g in gs
    )
    return CliffordReport(
        anticommutators_ok=tuple(pairs),
        chirality_ok=chirality_ok,
        theta_squares_to_minus_one=theta_sq_ok,
        theta_commutes=commutes,
    )
