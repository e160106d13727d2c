"""Topological invariants of half-line operator families.

Spectral flow over loops, Berry-flux Chern numbers of midgap eigenframes on
2-sphere grids, the clutching-construction invariant on 3-sphere families
(a midgap eigenvalue band sweeping across the gap trivializes the spectral
data on two caps; the invariant is the Chern number of the spectral-window
eigenbundle over the equatorial 2-sphere where the caps are glued),
gap-filling statistics, and determinant-line cocycle consistency checks.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .algebra import Quaternion
from .linalg import frame_overlap_det
from .operators import GridSpec, HalfLineOperatorSpec, solve_spectrum_matrix

__all__ = [
    "RefineNeededError",
    "CoverConditionError",
    "SpectralWindow",
    "ParamLoop",
    "Sphere2Grid",
    "sphere2_grid",
    "Sphere3Grid",
    "sphere3_grid",
    "hopf_nodes",
    "ChernResult",
    "spectral_flow",
    "berry_flux_chern",
    "dd_invariant",
    "gap_fill_report",
    "cocycle_consistency",
    "TopologyReport",
    "matrix_midgap",
    "evans_midgap",
]

_LEVEL_HIT_TOL = 1e-9
_LEVEL_SHIFT = 1e-6
_INT_TOL = 1e-3


class RefineNeededError(RuntimeError):
    """Sampling too coarse to certify the result (flux at +-pi, large jumps)."""


class CoverConditionError(RuntimeError):
    """A node violates the spectral-window count assumption."""

    def __init__(self, message: str, node=None, eigenvalues=()):
        super().__init__(message)
        self.node = node
        self.eigenvalues = tuple(eigenvalues)


@dataclass(frozen=True)
class SpectralWindow:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("window requires a < b")

    def count(self, eigenvalues) -> int:
        e = np.asarray(eigenvalues, dtype=float)
        return int(np.sum((e > self.a) & (e < self.b)))

    def check_clear(self, eigenvalues, tol: float = _LEVEL_HIT_TOL):
        e = np.asarray(eigenvalues, dtype=float)
        if e.size and (np.min(np.abs(e - self.a)) < tol or np.min(np.abs(e - self.b)) < tol):
            raise ValueError("window endpoint hits an eigenvalue")


@dataclass(frozen=True)
class ParamLoop:
    """Closed loop of operators indexed by unit complex samples omega_0..omega_{M-1}."""

    omegas: tuple  # complex unit samples; closure omega_M = omega_0 implied
    generator: Callable[[complex], HalfLineOperatorSpec]

    def __post_init__(self):
        om = np.asarray(self.omegas, dtype=complex)
        if om.size < 3:
            raise ValueError("a loop needs at least 3 samples")
        if np.max(np.abs(np.abs(om) - 1.0)) > 1e-12:
            raise ValueError("loop samples must lie on the unit circle")

    def __len__(self):
        return len(self.omegas)

    def spec(self, i: int) -> HalfLineOperatorSpec:
        return self.generator(self.omegas[i % len(self.omegas)])


# ---------------------------------------------------------------------------
# sphere grids

@dataclass(frozen=True)
class Sphere2Grid:
    """Structured latitude x longitude grid on S^2, poles as degenerate rows.

    Orientation: latitude angle theta runs 0..pi (row 0 at v=(0,0,1)),
    longitude counterclockwise; plaquettes are traversed
    (i,j) -> (i+1,j) -> (i+1,j+1) -> (i,j+1).
    """

    n_lat: int
    n_lon: int

    def __post_init__(self):
        if self.n_lat < 3 or self.n_lon < 3:
            raise ValueError("grid too small")

    @property
    def thetas(self) -> np.ndarray:
        return np.linspace(0.0, np.pi, self.n_lat)

    @property
    def phis(self) -> np.ndarray:
        return np.linspace(0.0, 2 * np.pi, self.n_lon, endpoint=False)

    def vectors(self) -> np.ndarray:
        """Unit vectors, shape (n_lat, n_lon, 3)."""
        th = self.thetas[:, None]
        ph = self.phis[None, :]
        return np.stack(
            [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th) * np.ones_like(ph)],
            axis=-1,
        )

    def refine(self) -> "Sphere2Grid":
        return Sphere2Grid(2 * self.n_lat - 1, 2 * self.n_lon)


def sphere2_grid(n_lat: int, n_lon: int) -> Sphere2Grid:
    return Sphere2Grid(n_lat, n_lon)


def hopf_nodes(n_eta: int, n_xi1: int, n_xi2: int) -> np.ndarray:
    """Torus-coordinate covering of the unit quaternions, shape (..., 4).

    q = (cos(eta) cos(xi1), cos(eta) sin(xi1), sin(eta) cos(xi2), sin(eta) sin(xi2))
    with eta in [0, pi/2].  Unlike a latitude x S^2 product this does not
    collapse the real part onto few distinct values, so spectra collected
    over the nodes sample the gap densely.
    """
    eta = np.linspace(0.0, np.pi / 2, n_eta)
    xi1 = np.linspace(0.0, 2 * np.pi, n_xi1, endpoint=False)
    xi2 = np.linspace(0.0, 2 * np.pi, n_xi2, endpoint=False)
    e, x1, x2 = np.meshgrid(eta, xi1, xi2, indexing="ij")
    return np.stack(
        [np.cos(e) * np.cos(x1), np.cos(e) * np.sin(x1), np.sin(e) * np.cos(x2), np.sin(e) * np.sin(x2)],
        axis=-1,
    )


@dataclass(frozen=True)
class Sphere3Grid:
    """Family of operators over the unit quaternions.

    The structured view is (latitude q_r) x (S^2 of imaginary directions);
    the equatorial slice q_r = 0 carries the clutching computation.  An
    alternative torus enumeration (`hopf_nodes`) with the same three grid
    dimensions is used where dense eigenvalue sampling matters.
    """

    generator: Callable[[Quaternion], HalfLineOperatorSpec]
    sphere2: Sphere2Grid
    n_axis: int  # number of latitude samples in the structured view

    def quaternion(self, q_r: float, direction) -> Quaternion:
        s = np.sqrt(max(1.0 - q_r**2, 0.0))
        d = np.asarray(direction, dtype=float)
        return Quaternion(float(q_r), tuple(s * d))

    def slice_quaternions(self, q_r: float) -> np.ndarray:
        """Object array (n_lat, n_lon) of quaternions on the latitude q_r."""
        vecs = self.sphere2.vectors()
        out = np.empty(vecs.shape[:2], dtype=object)
        for i in range(vecs.shape[0]):
            for j in range(vecs.shape[1]):
                out[i, j] = self.quaternion(q_r, vecs[i, j])
        return out

    def nodes(self) -> np.ndarray:
        """Torus enumeration of shape (n_axis * n_lon * n_lat, 4)."""
        return hopf_nodes(self.n_axis, self.sphere2.n_lon, self.sphere2.n_lat).reshape(-1, 4)

    def refine(self) -> "Sphere3Grid":
        return Sphere3Grid(self.generator, self.sphere2.refine(), 2 * self.n_axis)


def sphere3_grid(
    generator: Callable[[Quaternion], HalfLineOperatorSpec],
    n_lat: int = 24,
    n_lon: int = 48,
    n_axis: int = 24,
) -> Sphere3Grid:
    return Sphere3Grid(generator, Sphere2Grid(n_lat, n_lon), n_axis)


# ---------------------------------------------------------------------------
# per-node midgap solvers

def matrix_midgap(
    spec: HalfLineOperatorSpec,
    n: int = 1500,
    length: float = 40.0,
    want_vectors: bool = False,
):
    """Midgap data from the finite-difference matrix at moderate resolution."""
    res = solve_spectrum_matrix(
        spec, GridSpec(L=length, N=n), full=False, want_vectors=want_vectors
    )
    return res.midgap


def evans_midgap(spec: HalfLineOperatorSpec, resolution: float = 0.02) -> list[float]:
    from .evans import find_midgap_eigenvalues

    return [r.eigenvalue for r in find_midgap_eigenvalues(spec, resolution)]


def _default_eigensolver(spec: HalfLineOperatorSpec) -> list[float]:
    if spec.potential:
        return [s.eigenvalue for s in matrix_midgap(spec)]
    return evans_midgap(spec)


# ---------------------------------------------------------------------------
# spectral flow

def _greedy_pairing(a: Sequence[float], b: Sequence[float]):
    """Nearest-value greedy matching; ties keep sorted order.

    Returns (pairs, unmatched_a, unmatched_b) with index-free values.
    """
    a = sorted(a)
    b = sorted(b)
    free_a = list(range(len(a)))
    free_b = list(range(len(b)))
    pairs = []
    while free_a and free_b:
        best = None
        for i in free_a:
            for j in free_b:
                d = abs(a[i] - b[j])
                key = (d, i, j)
                if best is None or key < best:
                    best = key
        _, i, j = best
        pairs.append((a[i], b[j]))
        free_a.remove(i)
        free_b.remove(j)
    return pairs, [a[i] for i in free_a], [b[j] for j in free_b]


def _crossing(x: float, y: float, level: float) -> int:
    if x <= level < y:
        return 1
    if y <= level < x:
        return -1
    return 0


def spectral_flow(
    loop: ParamLoop,
    level: float = 0.0,
    *,
    eigensolver: Optional[Callable[[HalfLineOperatorSpec], Sequence[float]]] = None,
) -> int:
    """Net signed count of eigenvalue crossings of `level` around the loop.

    Eigenvalues at consecutive samples are paired by nearest-value greedy
    matching; unmatched eigenvalues connect to the nearer essential-spectrum
    edge.  A level hit within 1e-9 shifts the level by +1e-6 (reported).
    """
    solve = eigensolver or _default_eigensolver
    m = len(loop)
    specs = [loop.spec(i) for i in range(m)]
    eigs = [sorted(solve(s)) for s in specs]
    edges = [s.essential_edge for s in specs]

    flat = np.concatenate([np.asarray(e) for e in eigs if e]) if any(eigs) else np.array([])
    lvl = level
    if flat.size and np.min(np.abs(flat - lvl)) < _LEVEL_HIT_TOL:
        lvl = level + _LEVEL_SHIFT
        warnings.warn(f"level {level} hits an eigenvalue; shifted to {lvl}")
        if flat.size and np.min(np.abs(flat - lvl)) < _LEVEL_HIT_TOL:
            raise ValueError("shifted level still hits an eigenvalue; choose another level")

    total = 0
    for i in range(m):
        a, b = eigs[i], eigs[(i + 1) % m]
        pairs, lost, gained = _greedy_pairing(a, b)
        spacing = np.inf
        for lst in (a, b):
            if len(lst) > 1:
                spacing = min(spacing, float(np.min(np.diff(lst))))
        if pairs and np.isfinite(spacing):
            move = max(abs(x - y) for x, y in pairs)
            if move >= spacing / 2:
                raise RefineNeededError(
                    f"segment {i}->{(i + 1) % m}: eigenvalue move {move:.3g} exceeds half "
                    f"the minimal spacing {spacing:.3g}; refine the loop sampling"
                )
        edge = min(edges[i], edges[(i + 1) % m])
        for x, y in pairs:
            total += _crossing(x, y, lvl)
        for x in lost:
            total += _crossing(x, np.sign(x) * edge if x != 0 else edge, lvl)
        for y in gained:
            total += _crossing(np.sign(y) * edge if y != 0 else edge, y, lvl)
    return total


# ---------------------------------------------------------------------------
# Berry flux on S^2

@dataclass(frozen=True)
class ChernResult:
    value: int
    residual: float  # distance of the flux sum / 2 pi from the integer
    max_abs_flux: float

    def __int__(self):
        return self.value


def _round_integer(x: float, what: str) -> tuple[int, float]:
    k = int(np.rint(x))
    residual = abs(x - k)
    if residual > _INT_TOL:
        raise RefineNeededError(f"{what} = {x:.6f} is not within {_INT_TOL} of an integer")
    return k, residual


def berry_flux_chern(frames: np.ndarray, *, flux_margin: float = 1e-6) -> ChernResult:
    """Chern number of a frame field on a latitude x longitude S^2 grid.

    frames: complex array (n_lat, n_lon, dim, k); longitude wraps; the two
    pole rows must repeat a single frame.  The flux through each plaquette
    is arg of the product of the four determinant overlaps around it and
    must stay inside (-pi, pi); the total over the sphere, divided by 2 pi,
    is rounded to the returned integer.  Multiplying node frames by
    arbitrary phases leaves the result unchanged.
    """
    frames = np.asarray(frames)
    if frames.ndim != 4:
        raise ValueError("expected frames of shape (n_lat, n_lon, dim, k)")
    n_lat, n_lon = frames.shape[:2]

    def link(f, g) -> complex:
        d = frame_overlap_det(f, g)
        if abs(d) < 1e-8:
            raise CoverConditionError(
                "vanishing frame overlap (rank change or window degeneracy across nodes)"
            )
        return d / abs(d)

    total = 0.0
    max_flux = 0.0
    for i in range(n_lat - 1):
        for j in range(n_lon):
            jp = (j + 1) % n_lon
            u = (
                link(frames[i, j], frames[i + 1, j])
                * link(frames[i + 1, j], frames[i + 1, jp])
                * link(frames[i + 1, jp], frames[i, jp])
                * link(frames[i, jp], frames[i, j])
            )
            flux = np.angle(u)
            if np.pi - abs(flux) < flux_margin:
                raise RefineNeededError(
                    f"plaquette ({i},{j}) flux {flux:.6f} at +-pi; refine the grid"
                )
            total += flux
            max_flux = max(max_flux, abs(flux))
    value, residual = _round_integer(total / (2 * np.pi), "Berry flux sum / 2 pi")
    return ChernResult(value, residual, max_flux)


# ---------------------------------------------------------------------------
# clutching invariant on S^3

def _band_latitudes(epsilon: float) -> tuple[float, ...]:
    eps_band = epsilon / 2.0
    return (0.0, eps_band / 2, -eps_band / 2, eps_band, -eps_band)


def _cap_latitudes(epsilon: float) -> tuple[float, ...]:
    lats = [x for x in (0.3, 0.5, 0.75, 0.95, 1.0) if x > epsilon + 0.05]
    return tuple(lats + [-x for x in lats])


def dd_invariant(
    grid: Sphere3Grid,
    epsilon: float,
    *,
    n_matrix: int = 1500,
    length: float = 40.0,
    probe_stride: tuple[int, int] = (4, 6),
    solver_cache: Optional[dict] = None,
) -> int:
    """Clutching invariant of the family over the unit quaternions.

    Checks the cover condition — exactly one eigenvalue in (-eps, eps) for
    every node on the band |q_r| <= eps/2 and none in [-eps, eps] on the
    caps — then returns the Chern number of the window eigenbundle over the
    equatorial slice.  A constant window count of zero on the band gives 0.
    """
    if not 0 < epsilon < 0.25:
        raise ValueError("epsilon must lie in (0, 0.25) for the band/cap split")
    window = SpectralWindow(-epsilon, epsilon)
    cache = solver_cache if solver_cache is not None else {}

    def solve(q: Quaternion, want_vectors: bool):
        key = (round(q.r, 14), tuple(round(v, 14) for v in q.v), want_vectors)
        if key not in cache:
            cache[key] = matrix_midgap(
                grid.generator(q), n=n_matrix, length=length, want_vectors=want_vectors
            )
        return cache[key]

    # cover condition on a probe subsample of each latitude
    vecs = grid.sphere2.vectors()
    si, sj = probe_stride
    probe_dirs = [
        vecs[i, j]
        for i in range(0, vecs.shape[0], si)
        for j in range(0, vecs.shape[1], sj)
    ]
    band_count = None
    for q_r in _band_latitudes(epsilon):
        for d in probe_dirs:
            q = grid.quaternion(q_r, d)
            eigs = [s.eigenvalue for s in solve(q, False)]
            c = window.count(eigs)
            if band_count is None:
                band_count = c
            if c != band_count:
                raise CoverConditionError(
                    f"band node q={q} has {c} window eigenvalue(s), expected {band_count}",
                    node=q,
                    eigenvalues=eigs,
                )
    for q_r in _cap_latitudes(epsilon):
        for d in probe_dirs:
            q = grid.quaternion(q_r, d)
            eigs = [s.eigenvalue for s in solve(q, False)]
            inside = [e for e in eigs if -epsilon <= e <= epsilon]
            if inside:
                raise CoverConditionError(
                    f"cap node q={q} has window eigenvalue(s) {inside}",
                    node=q,
                    eigenvalues=eigs,
                )
    if band_count == 0:
        return 0
    if band_count != 1:
        raise CoverConditionError(
            f"band carries {band_count} window eigenvalues; expected 0 or 1"
        )

    # window eigenframes over the equatorial 2-sphere
    qs = grid.slice_quaternions(0.0)
    n_lat, n_lon = qs.shape
    frames = None
    for i in range(n_lat):
        on_pole = i in (0, n_lat - 1)
        for j in range(n_lon):
            if on_pole and j > 0:
                frames[i, j] = frames[i, 0]
                continue
            states = solve(qs[i, j], True)
            sel = [s for s in states if window.a < s.eigenvalue < window.b]
            if len(sel) != 1:
                raise CoverConditionError(
                    f"equatorial node q={qs[i, j]} has {len(sel)} window eigenvalue(s)",
                    node=qs[i, j],
                    eigenvalues=[s.eigenvalue for s in states],
                )
            v = sel[0].eigenfunction.reshape(-1, 1)
            if frames is None:
                frames = np.empty((n_lat, n_lon, v.shape[0], 1), dtype=complex)
            frames[i, j] = v / np.linalg.norm(v)
    return berry_flux_chern(frames).value


# ---------------------------------------------------------------------------
# gap filling

def gap_fill_report(
    grid,
    delta: float,
    resolution: float,
    *,
    eigensolver: Optional[Callable[[HalfLineOperatorSpec], Sequence[float]]] = None,
    eigenvalues: Optional[Sequence[float]] = None,
) -> tuple[float, float]:
    """Coverage of the gap interval (-1+delta, 1-delta) by collected midgap
    eigenvalues, each covering +-resolution.  Returns (coverage fraction,
    longest uncovered subinterval length)."""
    if eigenvalues is None:
        solve = eigensolver or _default_eigensolver
        vals = []
        for p in grid.nodes():
            q = Quaternion(float(p[0]), (float(p[1]), float(p[2]), float(p[3])))
            spec = grid.generator(q)
            if spec.is_gapless:
                continue
            vals.extend(solve(spec))
        eigenvalues = vals
    lo, hi = -1.0 + delta, 1.0 - delta
    if hi <= lo:
        raise ValueError("delta too large")
    e = np.sort(np.asarray(list(eigenvalues), dtype=float))
    intervals = [(v - resolution, v + resolution) for v in e if v + resolution > lo and v - resolution < hi]
    covered = 0.0
    max_gap = 0.0
    cursor = lo
    for a, b in intervals:
        a, b = max(a, lo), min(b, hi)
        if a > cursor:
            max_gap = max(max_gap, a - cursor)
            cursor = a
        if b > cursor:
            covered += b - cursor
            cursor = b
    if cursor < hi:
        max_gap = max(max_gap, hi - cursor)
    return covered / (hi - lo), max_gap


# ---------------------------------------------------------------------------
# cocycle consistency

@dataclass(frozen=True)
class CocycleReport:
    nodes_checked: int
    additivity_ok: bool
    max_overlap_modulus_error: float


def cocycle_consistency(
    specs: Sequence[HalfLineOperatorSpec],
    levels: tuple[float, float, float],
    *,
    n_matrix: int = 800,
    length: float = 40.0,
) -> CocycleReport:
    """Determinant-line consistency over triple spectral windows.

    For levels lam < mu < nu and every node: the window counts satisfy
    count(lam, nu) = count(lam, mu) + count(mu, nu), and the determinant
    overlap of the (lam, nu) frame with the concatenated frames has
    modulus 1 within 1e-6.
    """
    lam, mu, nu = levels
    if not lam < mu < nu:
        raise ValueError("levels must be strictly increasing")
    w_ln = SpectralWindow(lam, nu)
    w_lm = SpectralWindow(lam, mu)
    w_mn = SpectralWindow(mu, nu)
    max_err = 0.0
    for spec in specs:
        states = matrix_midgap(spec, n=n_matrix, length=length, want_vectors=True)
        eigs = [s.eigenvalue for s in states]
        for level in levels:
            if eigs and min(abs(e - level) for e in eigs) < _LEVEL_HIT_TOL:
                raise ValueError(f"level {level} hits an eigenvalue at a node")
        if w_ln.count(eigs) != w_lm.count(eigs) + w_mn.count(eigs):
            return CocycleReport(len(specs), False, np.inf)
        f_ln = [s for s in states if w_ln.a < s.eigenvalue < w_ln.b]
        f_cat = [s for s in states if w_lm.a < s.eigenvalue < w_lm.b] + [
            s for s in states if w_mn.a < s.eigenvalue < w_mn.b
        ]
        if not f_ln:
            continue
        a = np.stack([s.eigenfunction.ravel() for s in f_ln], axis=1)
        b = np.stack([s.eigenfunction.ravel() for s in f_cat], axis=1)
        a, _ = np.linalg.qr(a)
        b, _ = np.linalg.qr(b)
        d = frame_overlap_det(a, b)
        max_err = max(max_err, abs(abs(d) - 1.0))
    return CocycleReport(len(specs), True, max_err)


@dataclass(frozen=True)
class TopologyReport:
    flow: Optional[int] = None
    chern: Optional[ChernResult] = None
    dd: Optional[int] = None
    gapfill: Optional[tuple[float, float]] = None
