"""Boundary-side objects over the circle.

Builds the boundary Dirac operator on a periodic collocation grid, gauge maps
into U(n) with analytically discretized commutators, the splitting induced by
a Hermitian invertible endomorphism, and winding numbers.

The central discretization rule: flow paths always use the multiplication
operator -i g^-1 g' (the continuum commutator) rather than the commutator of
truncated matrices.  Truncated-matrix paths have exactly unitarily equivalent
endpoints, so their total finite-dimensional flow is forced to 0 by spurious
spectral-edge crossings.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .flow import conjugation_path, spectral_flow
from .linalg import SelfAdjointOp, hermitian_part


@dataclass(frozen=True)
class CircleGrid:
    n_theta: int

    def __post_init__(self):
        if self.n_theta < 1 or self.n_theta % 2 == 0:
            raise ValueError(f"n_theta must be odd and positive, got {self.n_theta}")

    @property
    def nodes(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_theta) / self.n_theta


def fourier_diff_matrix(n: int) -> np.ndarray:
    """Periodic spectral differentiation matrix on n (odd) equispaced nodes.

    Exactly antisymmetric; eigenvalues are i*m for integer m in
    [-(n-1)/2, (n-1)/2].
    """
    if n % 2 == 0:
        raise ValueError("spectral differentiation matrix requires odd n")
    D = np.zeros((n, n))
    h = 2.0 * np.pi / n
    for j in range(n):
        for k in range(n):
            if j != k:
                D[j, k] = 0.5 * (-1) ** (j - k) / np.sin(0.5 * (j - k) * h)
    return D


@dataclass(frozen=True)
class CircleOperator:
    """A Hermitian operator over the circle grid, tagged by provenance.

    frames, when present, are the per-node isometries (n_theta, n, r) mapping
    the reduced fiber of a split operator back into the parent fiber.
    """

    grid: CircleGrid
    fiber_dim: int
    op: SelfAdjointOp
    kind: str
    orientation: int = 1
    frames: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.op.dim


def build_boundary_dirac(
    grid: CircleGrid, fiber_dim: int, orientation: int = 1
) -> CircleOperator:
    """The boundary Dirac operator -i d/dtheta tensored with the fiber identity.

    orientation=-1 builds the operator for an oppositely oriented boundary
    circle (i.e. +i d/dtheta).
    """
    if orientation not in (+1, -1):
        raise ValueError("orientation must be +1 or -1")
    d1 = fourier_diff_matrix(grid.n_theta)
    mat = orientation * np.kron(-1j * d1, np.eye(fiber_dim))
    return CircleOperator(
        grid=grid,
        fiber_dim=fiber_dim,
        op=SelfAdjointOp(mat, herm_tol=1e-12),
        kind="full_boundary",
        orientation=orientation,
    )


@dataclass(frozen=True)
class GaugeMap:
    """Grid-sampled smooth map into U(n), with per-node derivative values."""

    grid: CircleGrid
    fiber_dim: int
    values: np.ndarray
    derivative_values: np.ndarray | None = None
    unit_tol: float = 1e-10

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        n, f = self.grid.n_theta, self.fiber_dim
        if v.shape != (n, f, f):
            raise ValueError(f"values must have shape {(n, f, f)}, got {v.shape}")
        object.__setattr__(self, "values", v)
        eye = np.eye(f)
        for j in range(n):
            defect = np.abs(v[j] @ v[j].conj().T - eye).max()
            if defect > self.unit_tol:
                raise ValueError(f"gauge value at node {j} is not unitary: {defect:.3e}")
        if self.derivative_values is not None:
            d = np.asarray(self.derivative_values, dtype=complex)
            if d.shape != (n, f, f):
                raise ValueError(f"derivative_values must have shape {(n, f, f)}")
            object.__setattr__(self, "derivative_values", d)

    def derivatives(self) -> np.ndarray:
        """Analytic derivative values if supplied, else spectral differentiation."""
        if self.derivative_values is not None:
            return self.derivative_values
        d1 = fourier_diff_matrix(self.grid.n_theta)
        return np.einsum("jk,kab->jab", d1, self.values)

    @classmethod
    def from_fourier_terms(
        cls, grid: CircleGrid, fiber_dim: int, terms
    ) -> "GaugeMap":
        """g(theta) = sum_k coeff_k e^{i k theta}; rejected if not unitary per node."""
        theta = grid.nodes
        vals = np.zeros((grid.n_theta, fiber_dim, fiber_dim), dtype=complex)
        derivs = np.zeros_like(vals)
        for k, coeff in terms:
            c = np.asarray(coeff, dtype=complex)
            if c.shape != (fiber_dim, fiber_dim):
                raise ValueError(f"coefficient for k={k} must be {fiber_dim}x{fiber_dim}")
            phase = np.exp(1j * k * theta)
            vals += phase[:, None, None] * c
            derivs += (1j * k) * phase[:, None, None] * c
        return cls(grid=grid, fiber_dim=fiber_dim, values=vals, derivative_values=derivs)

    @classmethod
    def exp_winding(cls, grid: CircleGrid, k: int) -> "GaugeMap":
        """Scalar gauge e^{i k theta}."""
        return cls.from_fourier_terms(grid, 1, [(k, np.eye(1))])

    @classmethod
    def diagonal(cls, *gauges: "GaugeMap") -> "GaugeMap":
        """Block-diagonal combination of gauges over the same grid."""
        grid = gauges[0].grid
        if any(g.grid != grid for g in gauges):
            raise ValueError("all gauges must share a grid")
        n = sum(g.fiber_dim for g in gauges)
        vals = np.zeros((grid.n_theta, n, n), dtype=complex)
        derivs = np.zeros_like(vals)
        off = 0
        for g in gauges:
            f = g.fiber_dim
            vals[:, off : off + f, off : off + f] = g.values
            derivs[:, off : off + f, off : off + f] = g.derivatives()
            off += f
        return cls(grid=grid, fiber_dim=n, values=vals, derivative_values=derivs)


def load_gauge_json(grid: CircleGrid, source) -> GaugeMap:
    """Load a gauge map from the JSON schema
    {"fiber_dim": n, "terms": [{"k": int, "coeff": [[[re, im], ...], ...]}]}.
    """
    if isinstance(source, (str, bytes)):
        doc = json.loads(source)
    else:
        doc = source
    n = int(doc["fiber_dim"])
    terms = []
    for t in doc["terms"]:
        raw = np.asarray(t["coeff"], dtype=float)
        if raw.shape != (n, n, 2):
            raise ValueError(
                f"coefficient for k={t['k']} must be an {n}x{n} array of [re, im] pairs"
            )
        terms.append((int(t["k"]), raw[..., 0] + 1j * raw[..., 1]))
    return GaugeMap.from_fourier_terms(grid, n, terms)


def analytic_gauge_commutator(
    Dtheta: CircleOperator, g: GaugeMap, herm_tol: float = 1e-8
) -> SelfAdjointOp:
    """The multiplication operator discretizing g^-1 [D, g] = -i g^-1 g'.

    Block diagonal over the grid nodes; carries the orientation sign of the
    underlying operator.
    """
    if g.grid != Dtheta.grid or g.fiber_dim != Dtheta.fiber_dim:
        raise ValueError("gauge map does not match the operator's grid/fiber")
    derivs = g.derivatives()
    n, f = g.grid.n_theta, g.fiber_dim
    blocks = np.zeros((n, f, f), dtype=complex)
    for j in range(n):
        blk = Dtheta.orientation * (-1j) * g.values[j].conj().T @ derivs[j]
        defect = np.abs(blk - blk.conj().T).max()
        if defect > herm_tol * (1.0 + np.abs(blk).max()):
            raise ValueError(
                f"commutator block at node {j} is not Hermitian (defect {defect:.3e}); "
                "check the supplied derivative values"
            )
        blocks[j] = hermitian_part(blk)
    full = np.zeros((n * f, n * f), dtype=complex)
    for j in range(n):
        full[j * f : (j + 1) * f, j * f : (j + 1) * f] = blocks[j]
    return SelfAdjointOp(full, herm_tol=1e-12)


@dataclass(frozen=True)
class BoundarySplitting:
    """Spectral splitting of the boundary fiber by a Hermitian invertible F."""

    F_values: np.ndarray
    Pplus: np.ndarray
    Pminus: np.ndarray
    frames_plus: np.ndarray
    frames_minus: np.ndarray
    rank_plus: int
    rank_minus: int


def boundary_splitting_from_F(F_values: np.ndarray) -> BoundarySplitting:
    """Per-node spectral projections of F; ranks must be constant over the circle."""
    F_values = np.asarray(F_values, dtype=complex)
    n_nodes, f, f2 = F_values.shape
    if f != f2:
        raise ValueError("F values must be square per node")
    Pp = np.zeros_like(F_values)
    Pm = np.zeros_like(F_values)
    frames_p = []
    frames_m = []
    ranks_p = set()
    for j in range(n_nodes):
        Fj = F_values[j]
        if np.abs(Fj - Fj.conj().T).max() > 1e-10 * (1 + np.abs(Fj).max()):
            raise ValueError(f"F at node {j} is not Hermitian")
        vals, vecs = np.linalg.eigh(Fj)
        if np.abs(vals).min() < 1e-10:
            raise ValueError(f"F at node {j} is not invertible (min |eig| too small)")
        pos = vals > 0
        vp = vecs[:, pos]
        vm = vecs[:, ~pos]
        Pp[j] = vp @ vp.conj().T
        Pm[j] = vm @ vm.conj().T
        frames_p.append(vp)
        frames_m.append(vm)
        ranks_p.add(int(pos.sum()))
    if len(ranks_p) != 1:
        raise ValueError(f"rank of the positive eigenbundle is not constant: {ranks_p}")
    rp = ranks_p.pop()
    return BoundarySplitting(
        F_values=F_values,
        Pplus=Pp,
        Pminus=Pm,
        frames_plus=np.stack(frames_p),
        frames_minus=np.stack(frames_m),
        rank_plus=rp,
        rank_minus=f - rp,
    )


def _blockdiag_nodes(blocks: np.ndarray) -> np.ndarray:
    n, a, b = blocks.shape
    out = np.zeros((n * a, n * b), dtype=complex)
    for j in range(n):
        out[j * a : (j + 1) * a, j * b : (j + 1) * b] = blocks[j]
    return out


def split_by_F(
    Dtheta: CircleOperator,
    split: BoundarySplitting,
    product_flag: bool = False,
) -> tuple[CircleOperator, CircleOperator]:
    """Compressions P D P restricted to the ranges of the spectral projections.

    With product_flag set the projections must commute with the operator to
    1e-8 in norm (the product-case standing assumption).
    """
    n, f = Dtheta.grid.n_theta, Dtheta.fiber_dim
    if split.F_values.shape != (n, f, f):
        raise ValueError("splitting does not match the operator's grid/fiber")
    out = []
    for frames, proj, rank, tag in (
        (split.frames_plus, split.Pplus, split.rank_plus, "split_plus"),
        (split.frames_minus, split.Pminus, split.rank_minus, "split_minus"),
    ):
        Q = _blockdiag_nodes(frames)
        if product_flag:
            P = _blockdiag_nodes(proj)
            comm = np.abs(Dtheta.op.entries @ P - P @ Dtheta.op.entries).max()
            if comm > 1e-8:
                raise ValueError(
                    f"projection does not commute with the operator: {comm:.3e}"
                )
        mat = Q.conj().T @ Dtheta.op.entries @ Q
        out.append(
            CircleOperator(
                grid=Dtheta.grid,
                fiber_dim=rank,
                op=SelfAdjointOp(hermitian_part(mat), herm_tol=1e-11),
                kind=tag,
                orientation=Dtheta.orientation,
                frames=frames,
            )
        )
    return out[0], out[1]


def winding_number(g: GaugeMap, residual_tol: float = 0.1) -> int:
    """Degree (1/2 pi i) contour integral of tr(g^-1 dg), rounded to an integer."""
    derivs = g.derivatives()
    dtheta = 2.0 * np.pi / g.grid.n_theta
    total = 0.0 + 0.0j
    for j in range(g.grid.n_theta):
        total += np.trace(g.values[j].conj().T @ derivs[j]) * dtheta
    raw = (total / (2.0j * np.pi)).real
    nearest = int(round(raw))
    if abs(raw - nearest) > residual_tol:
        raise ValueError(
            f"winding integral {raw} is too far from an integer "
            f"(residual {abs(raw - nearest):.3f}); gauge under-resolved"
        )
    return nearest


def restrict_gauge(g: GaugeMap, frames: np.ndarray, commute_tol: float = 1e-8) -> GaugeMap:
    """Restrict a gauge map to the subbundle spanned by per-node frames.

    The gauge must block-commute with the corresponding projection so the
    restriction is again unitary.
    """
    n, f, r = frames.shape
    if g.grid.n_theta != n or g.fiber_dim != f:
        raise ValueError("frames do not match the gauge map")
    derivs = g.derivatives()
    vals = np.einsum("jap,jab,jbq->jpq", frames.conj(), g.values, frames)
    dervals = np.einsum("jap,jab,jbq->jpq", frames.conj(), derivs, frames)
    for j in range(n):
        P = frames[j] @ frames[j].conj().T
        defect = np.abs(P @ g.values[j] - g.values[j] @ P).max()
        if defect > commute_tol:
            raise ValueError(
                f"gauge does not commute with the splitting at node {j}: {defect:.3e}"
            )
    return GaugeMap(
        grid=g.grid, fiber_dim=r, values=vals, derivative_values=dervals
    )


def boundary_sf(
    Bpm: CircleOperator,
    g: GaugeMap,
    init_samples: int = 17,
) -> int:
    """Spectral flow of the boundary operator along its gauge conjugation path."""
    if Bpm.fiber_dim == 0 or Bpm.dim == 0:
        return 0
    if Bpm.frames is not None and g.fiber_dim != Bpm.fiber_dim:
        g = restrict_gauge(g, Bpm.frames)
    V = analytic_gauge_commutator(Bpm, g)
    result = spectral_flow(conjugation_path(Bpm.op, V), init_samples=init_samples)
    return result.value
