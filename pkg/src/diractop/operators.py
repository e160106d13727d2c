"""Half-line Dirac operators: specs, finite-difference discretization with a
Wilson term, and midgap spectra via the matrix method.

The generic operator acts on C^(2n) spinors over z >= 0 (n = 1 or 2):

    H = [[-i d/dz * I_n,  M       ],        psi(0) = (u, B u),
         [M^dagger,       i d/dz * I_n]]    u in C^n,

plus an optional decaying Hermitian matrix potential.  M is the (constant)
mass block, B a unitary boundary map.  The scalar 2-component case has
M = rho > 0 and B = omega on the unit circle; the quaternionic 4-component
case has M the 2x2 realization of a mass quaternion and B in U(2).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .algebra import Quaternion

__all__ = [
    "DELTA_EDGE",
    "BoundaryCondition",
    "PotentialTerm",
    "HalfLineOperatorSpec",
    "GridSpec",
    "MidgapState",
    "SpectrumResult",
    "u1_operator",
    "quaternion_operator",
    "boundary_form_operator",
    "assemble_matrix",
    "assemble_sparse",
    "solve_spectrum_matrix",
    "normalize_gap",
]

# relative buffer separating midgap states from the discretized continuum
DELTA_EDGE = 0.02

_UNITARY_TOL = 1e-10


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BoundaryCondition:
    """Unitary boundary map B: psi_lower(0) = B psi_upper(0)."""

    b: np.ndarray

    def __post_init__(self):
        b = _as_readonly(np.atleast_2d(self.b))
        if b.shape[0] != b.shape[1]:
            raise ValueError("boundary map must be square")
        if np.max(np.abs(b.conj().T @ b - np.eye(b.shape[0]))) > _UNITARY_TOL:
            raise ValueError("boundary map must be unitary")
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.b.shape[0]

    @staticmethod
    def u1(omega: complex) -> "BoundaryCondition":
        return BoundaryCondition(np.array([[omega]], dtype=complex))

    @staticmethod
    def u2(gamma: np.ndarray) -> "BoundaryCondition":
        return BoundaryCondition(np.asarray(gamma, dtype=complex))

    @staticmethod
    def sp1(q: Quaternion) -> "BoundaryCondition":
        if abs(q.norm - 1.0) > 1e-9:
            raise ValueError("Sp(1) boundary condition needs a unit quaternion")
        return BoundaryCondition(q.matrix())


@dataclass(frozen=True)
class PotentialTerm:
    """One potential term c * exp(-alpha z) * m with Hermitian m, alpha > 0."""

    c: float
    alpha: float
    m: np.ndarray

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("potential decay rate alpha must be positive")
        m = _as_readonly(self.m)
        if np.max(np.abs(m - m.conj().T)) > 1e-10 * max(1.0, np.max(np.abs(m))):
            raise ValueError("potential matrix must be Hermitian")
        object.__setattr__(self, "m", m)


@dataclass(frozen=True)
class HalfLineOperatorSpec:
    mass: np.ndarray
    bc: BoundaryCondition
    potential: tuple[PotentialTerm, ...] = ()

    def __post_init__(self):
        m = _as_readonly(np.atleast_2d(self.mass))
        object.__setattr__(self, "mass", m)
        if m.shape[0] != m.shape[1]:
            raise ValueError("mass block must be square")
        if self.bc.n != m.shape[0]:
            raise ValueError("boundary condition size does not match mass block")
        for term in self.potential:
            if term.m.shape != (2 * m.shape[0],) * 2:
                raise ValueError("potential matrix size does not match spinor size")

    @property
    def n(self) -> int:
        return self.mass.shape[0]

    @property
    def essential_edge(self) -> float:
        s = np.linalg.svd(self.mass, compute_uv=False)
        return float(s[-1])

    @property
    def is_gapless(self) -> bool:
        return self.essential_edge <= 1e-12

    def mass_block(self) -> np.ndarray:
        n = self.n
        blk = np.zeros((2 * n, 2 * n), dtype=complex)
        blk[:n, n:] = self.mass
        blk[n:, :n] = self.mass.conj().T
        return blk

    def chirality(self) -> np.ndarray:
        n = self.n
        return np.diag(np.concatenate([np.ones(n), -np.ones(n)])).astype(complex)

    def mass_direction(self) -> np.ndarray:
        """Unitary polar factor of the mass block (for the Wilson term)."""
        w, s, vh = np.linalg.svd(self.mass)
        u_hat = w @ vh
        n = self.n
        blk = np.zeros((2 * n, 2 * n), dtype=complex)
        blk[:n, n:] = u_hat
        blk[n:, :n] = u_hat.conj().T
        return blk

    def potential_at(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        n2 = 2 * self.n
        out = np.zeros(z.shape + (n2, n2), dtype=complex)
        for term in self.potential:
            out += (term.c * np.exp(-term.alpha * z))[..., None, None] * term.m
        return out


def u1_operator(rho: float, omega: complex, potential=()) -> HalfLineOperatorSpec:
    """2-component operator with mass rho > 0 and boundary spinor (1, omega)."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    if abs(abs(complex(omega)) - 1.0) > _UNITARY_TOL:
        raise ValueError("omega must lie on the unit circle")
    return HalfLineOperatorSpec(
        mass=np.array([[rho]], dtype=complex),
        bc=BoundaryCondition.u1(omega),
        potential=tuple(potential),
    )


def quaternion_operator(q: Quaternion, potential=()) -> HalfLineOperatorSpec:
    """Quaternionic operator with boundary quaternion q, realized in the
    fixed-domain conjugated form: mass block matrix(q), boundary map 1."""
    return HalfLineOperatorSpec(
        mass=q.matrix(),
        bc=BoundaryCondition.u2(np.eye(2)),
        potential=tuple(potential),
    )


def boundary_form_operator(q: Quaternion, gamma, potential=()) -> HalfLineOperatorSpec:
    """Variable-boundary-condition fiber: mass block matrix(conj(q)),
    boundary map gamma (U(2); quaternions accepted for the Sp(1) sub-case)."""
    if isinstance(gamma, Quaternion):
        gamma = gamma.matrix()
    return HalfLineOperatorSpec(
        mass=q.conj().matrix(),
        bc=BoundaryCondition.u2(gamma),
        potential=tuple(potential),
    )


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on [0, L): N nodes z_j = j L / N; z = L is Dirichlet."""

    L: float
    N: int
    wilson_r: float = 0.5

    def __post_init__(self):
        if self.L <= 0 or self.N < 8:
            raise ValueError("need L > 0 and N >= 8")
        if not 0 < self.wilson_r <= 1:
            raise ValueError("wilson_r must lie in (0, 1]")

    @property
    def h(self) -> float:
        return self.L / self.N

    def nodes(self) -> np.ndarray:
        return self.h * np.arange(self.N)


@lru_cache(maxsize=16)
def _stencils(n_nodes: int):
    """First-difference (antisymmetric) and second-difference stencils.

    The second difference carries free (Neumann-style) end coefficients -1;
    a hard-wall -2 there acts as an O(1/h) boundary mass that overrides the
    physical boundary condition instead of converging to it.
    """
    ones = np.ones(n_nodes - 1)
    a1 = sp.diags([ones, -ones], [1, -1], format="csr")
    diag = -2.0 * np.ones(n_nodes)
    diag[0] = diag[-1] = -1.0
    a2 = sp.diags([ones, diag, ones], [1, 0, -1], format="csr")
    return a1, a2


def _compression_isometry(n: int, n_nodes: int, b: np.ndarray) -> sp.csr_matrix:
    """Isometric inclusion of the boundary-constrained subspace.

    Node 0 keeps only span{(u, B u)}; all other nodes are untouched.
    """
    m = 2 * n
    dim_full = m * n_nodes
    dim_c = dim_full - n
    p = sp.lil_matrix((dim_full, dim_c), dtype=complex)
    t0 = np.vstack([np.eye(n), b]) / np.sqrt(2.0)
    p[:m, :n] = t0
    p[m:, n:] = sp.eye(dim_full - m, dtype=complex)
    return p.tocsr()


def assemble_sparse(spec: HalfLineOperatorSpec, grid: GridSpec) -> sp.csr_matrix:
    """Compressed Hermitian discretization as a sparse banded matrix."""
    n = spec.n
    h = grid.h
    a1, a2 = _stencils(grid.N)
    j_mat = spec.chirality()
    deriv = sp.kron(a1, (-1j / (2.0 * h)) * j_mat, format="csr")
    wilson = sp.kron(a2, (-grid.wilson_r / (2.0 * h)) * spec.mass_direction(), format="csr")
    mass = sp.kron(sp.eye(grid.N), spec.mass_block(), format="csr")
    ham = deriv + wilson + mass
    for term in spec.potential:
        weights = term.c * np.exp(-term.alpha * grid.nodes())
        ham = ham + sp.kron(sp.diags(weights), term.m, format="csr")
    p = _compression_isometry(n, grid.N, spec.bc.b)
    ham_c = (p.conj().T @ ham @ p).tocsr()
    ham_c = 0.5 * (ham_c + ham_c.conj().T)
    return ham_c.tocsr()


def assemble_matrix(
    spec: HalfLineOperatorSpec, grid: GridSpec, max_dense_dim: int = 8192
) -> np.ndarray:
    """Dense Hermitian matrix of the compressed discretization.

    Intended for modest N; family drivers use the sparse/banded path.
    """
    dim = 2 * spec.n * grid.N - spec.n
    if dim > max_dense_dim:
        raise ValueError(
            f"dense assembly at dimension {dim} exceeds {max_dense_dim}; "
            "use assemble_sparse/solve_spectrum_matrix"
        )
    return assemble_sparse(spec, grid).toarray()


def _to_banded_upper(ham: sp.csr_matrix) -> np.ndarray:
    coo = ham.tocoo()
    bw = int(np.max(np.abs(coo.row - coo.col))) if coo.nnz else 0
    dim = ham.shape[0]
    ab = np.zeros((bw + 1, dim), dtype=complex)
    for off in range(bw + 1):
        d = ham.diagonal(off)
        ab[bw - off, off : off + len(d)] = d
    return ab


@dataclass(frozen=True)
class MidgapState:
    eigenvalue: float
    eigenfunction: Optional[np.ndarray]  # (N, 2n) grid samples, L2-normalized
    edge_contaminated: bool = False


@dataclass(frozen=True)
class SpectrumResult:
    essential_edge: float
    midgap: tuple[MidgapState, ...]
    all_eigenvalues: Optional[np.ndarray] = None

    def midgap_values(self) -> np.ndarray:
        return np.array([s.eigenvalue for s in self.midgap])


def _normalize_eigenfunction(psi: np.ndarray, h: float) -> np.ndarray:
    norm = np.sqrt(np.sum(np.abs(psi) ** 2) * h)
    psi = psi / norm
    flat = psi.ravel()
    idx = np.argmax(np.abs(flat) > 1e-8)
    return psi * (abs(flat[idx]) / flat[idx])


def solve_spectrum_matrix(
    spec: HalfLineOperatorSpec,
    grid: GridSpec,
    *,
    full: bool = True,
    want_vectors: bool = True,
    k_midgap: int = 8,
    delta_edge: float = DELTA_EDGE,
) -> SpectrumResult:
    """Spectrum of the discretized operator.

    Midgap eigenpairs come from shift-inverted Lanczos around the gap
    center; the full (discretized) spectrum, when requested, from the
    banded LAPACK solver.
    """
    edge = spec.essential_edge
    if edge <= 1e-12:
        raise ValueError("gapless operator: essential edge is zero")
    ham = assemble_sparse(spec, grid)
    dim = ham.shape[0]

    all_eigs = None
    if full:
        all_eigs = sla.eigvals_banded(_to_banded_upper(ham), lower=False)

    k = min(k_midgap, dim - 2)
    v0 = np.full(dim, 1.0 / np.sqrt(dim))
    sigma = 0.0
    try:
        vals, vecs = spla.eigsh(ham.tocsc(), k=k, sigma=sigma, which="LM", v0=v0)
    except RuntimeError:
        # shift collided with an eigenvalue; nudge it
        sigma = 1e-3 * edge
        vals, vecs = spla.eigsh(ham.tocsc(), k=k, sigma=sigma, which="LM", v0=v0)
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]

    cutoff = edge * (1.0 - delta_edge)
    states = []
    p = _compression_isometry(spec.n, grid.N, spec.bc.b)
    for lam, x in zip(vals, vecs.T):
        if abs(lam) >= cutoff:
            continue
        decay = np.sqrt(max(edge**2 - lam**2, 0.0))
        contaminated = bool(np.exp(-decay * grid.L) > 1e-6)
        psi = None
        if want_vectors:
            psi = (p @ x).reshape(grid.N, 2 * spec.n)
            psi = _normalize_eigenfunction(psi, grid.h)
        states.append(MidgapState(float(lam), psi, contaminated))
    states.sort(key=lambda s: s.eigenvalue)
    return SpectrumResult(
        essential_edge=edge, midgap=tuple(states), all_eigenvalues=all_eigs
    )


def normalize_gap(spec: HalfLineOperatorSpec) -> tuple[HalfLineOperatorSpec, float]:
    """Rescale the operator by 1/essential_edge so the common gap is (-1, 1).

    Realized through the unitary dilation z -> z * edge, which divides the
    mass, the potential amplitudes, and the potential decay rates by the
    edge while leaving the boundary condition fixed.  Returns (scaled spec,
    scale) with scale = 1/edge.
    """
    edge = spec.essential_edge
    if edge <= 1e-12:
        raise ValueError("cannot gap-normalize a gapless operator")
    scaled = HalfLineOperatorSpec(
        mass=spec.mass / edge,
        bc=spec.bc,
        potential=tuple(
            PotentialTerm(t.c / edge, t.alpha / edge, t.m) for t in spec.potential
        ),
    )
    return scaled, 1.0 / edge
