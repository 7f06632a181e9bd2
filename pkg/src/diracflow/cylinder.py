"""Selfadjoint discretization of the Dirac operator on the product cylinder
S^1 x [0, L] with local boundary conditions.

The two-component operator [[0, -d/dx + B], [d/dx + B, 0]] is discretized
with a periodic spectral operator B on the circle and a staggered grid in x:
the first component lives on the interval nodes, the second on the cell
midpoints.  Staggering is essential: any skew difference operator on a single
collocated grid annihilates the grid sawtooth, which doubles every eigenvalue
and with it the spectral flow.

The boundary relation f1 = F0 f0 at x=0 and f1 = -FL f0 at x=L enters
through the boundary term of the integrated-by-parts bilinear form, so the
assembled operator is Hermitian with respect to the mass weights by
construction.  The sign flip at x=L comes from the inward normal reversing
direction there; the convention is validated by the invertibility and
end-to-end theorem checks rather than trusted.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .circle import (
    BoundarySplitting,
    CircleGrid,
    GaugeMap,
    boundary_splitting_from_F,
    fourier_diff_matrix,
)
from .flow import SpectralFlowResult, conjugation_path, spectral_flow
from .linalg import SelfAdjointOp, hermitian_part


@dataclass(frozen=True)
class IntervalGrid:
    n_x: int
    length: float

    def __post_init__(self):
        if self.n_x < 8:
            raise ValueError(f"n_x must be >= 8, got {self.n_x}")
        if self.length <= 0:
            raise ValueError(f"length must be positive, got {self.length}")

    @property
    def spacing(self) -> float:
        return self.length / (self.n_x - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_x)

    @property
    def midpoints(self) -> np.ndarray:
        x = self.nodes
        return 0.5 * (x[:-1] + x[1:])

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.n_x, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w

    @property
    def mid_weights(self) -> np.ndarray:
        return np.full(self.n_x - 1, self.spacing)

    def forward_diff(self) -> np.ndarray:
        """Node-to-midpoint difference, centered at the midpoints."""
        n, h = self.n_x, self.spacing
        D = np.zeros((n - 1, n))
        for j in range(n - 1):
            D[j, j] = -1.0 / h
            D[j, j + 1] = 1.0 / h
        return D

    def midpoint_avg(self) -> np.ndarray:
        """Node-to-midpoint averaging."""
        n = self.n_x
        A = np.zeros((n - 1, n))
        for j in range(n - 1):
            A[j, j] = 0.5
            A[j, j + 1] = 0.5
        return A


def _blockdiag_nodes(blocks: np.ndarray) -> np.ndarray:
    n, a, b = blocks.shape
    out = np.zeros((n * a, n * b), dtype=complex)
    for j in range(n):
        out[j * a : (j + 1) * a, j * b : (j + 1) * b] = blocks[j]
    return out


def _expand_F(F, n_theta: int, fiber_dim: int) -> np.ndarray:
    """Accept a scalar, a single matrix, or per-node matrices for F."""
    F = np.asarray(F, dtype=complex)
    if F.ndim == 0:
        F = F * np.eye(fiber_dim)
    if F.ndim == 2:
        F = np.broadcast_to(F, (n_theta, fiber_dim, fiber_dim)).copy()
    if F.shape != (n_theta, fiber_dim, fiber_dim):
        raise ValueError(f"F must broadcast to {(n_theta, fiber_dim, fiber_dim)}")
    return F


@dataclass(frozen=True)
class CylinderBVP:
    """Assembled cylinder boundary-value problem.

    DF is the selfadjoint operator in mass-orthonormal coordinates; Q is the
    diagonal map from those coordinates back to grid values, weight_diag the
    mass weights, and gamma the chirality grading of the two components.
    """

    circle: CircleGrid
    interval: IntervalGrid
    fiber_dim: int
    F0: BoundarySplitting
    FL: BoundarySplitting
    Dfull: np.ndarray
    weight_diag: np.ndarray
    Q: np.ndarray
    DF: SelfAdjointOp
    gamma: np.ndarray
    gamma_defect: float
    asymmetry: float
    interior_indices: np.ndarray

    @property
    def dim(self) -> int:
        return self.DF.dim

    @property
    def n_node_dofs(self) -> int:
        return self.interval.n_x * self.circle.n_theta * self.fiber_dim


def _assemble_product(
    Bmat: np.ndarray,
    interval: IntervalGrid,
    F0mat: np.ndarray,
    FLmat: np.ndarray,
):
    """Core assembly for a product operator with an arbitrary Hermitian Bmat.

    Builds the weighted bilinear form on (f0 at nodes, f1 at midpoints) and
    returns (Dfull, weight_diag, Q, DF, gamma, gamma_defect, asymmetry,
    interior_indices).
    """
    Nb = Bmat.shape[0]
    nx = interval.n_x
    h = interval.spacing
    n0 = nx * Nb
    n1 = (nx - 1) * Nb

    Dm = np.kron(interval.forward_diff(), np.eye(Nb))
    Am = np.kron(interval.midpoint_avg(), np.eye(Nb))
    Bavg = np.kron(interval.midpoint_avg(), Bmat)

    # weighted form: <phi1, (d/dx + B) f0> over midpoints, plus the
    # integrated-by-parts boundary term on the node component
    Hw10 = h * (Dm + Bavg)
    Hw = np.zeros((n0 + n1, n0 + n1), dtype=complex)
    Hw[n0:, :n0] = Hw10
    Hw[:n0, n0:] = Hw10.conj().T
    Hw[:Nb, :Nb] += F0mat
    Hw[n0 - Nb : n0, n0 - Nb : n0] += FLmat

    weight_diag = np.concatenate(
        [np.repeat(interval.weights, Nb), np.repeat(interval.mid_weights, Nb)]
    )
    Q = np.diag(1.0 / np.sqrt(weight_diag))
    K = (Hw / np.sqrt(weight_diag)[None, :]) / np.sqrt(weight_diag)[:, None]
    asymmetry = float(np.abs(K - K.conj().T).max())
    DF = SelfAdjointOp(hermitian_part(K), herm_tol=1e-11)

    Dfull = Hw / weight_diag[:, None]

    gamma = np.diag(np.concatenate([np.ones(n0), -np.ones(n1)]))
    gamma_defect = 0.0

    interior = []
    for k in range(nx):
        if 2 <= k <= nx - 3:
            interior.extend(range(k * Nb, (k + 1) * Nb))
    for j in range(nx - 1):
        if 2 <= j <= nx - 4:
            interior.extend(range(n0 + j * Nb, n0 + (j + 1) * Nb))
    return (
        Dfull,
        weight_diag,
        Q,
        DF,
        gamma,
        gamma_defect,
        asymmetry,
        np.array(interior),
    )


def assemble(
    circle: CircleGrid,
    interval: IntervalGrid,
    fiber_dim: int,
    F0,
    FL,
    product_flag: bool = False,
) -> CylinderBVP:
    """Assemble the selfadjoint cylinder operator.

    F0 and FL are Hermitian invertible endomorphism data at the x=0 and x=L
    boundary circles (scalar, matrix, or per-node arrays).  With product_flag
    the standing product-case relations F^2 = 1 and [B, F] = 0 are verified.
    """
    n, f = circle.n_theta, fiber_dim
    F0v = _expand_F(F0, n, f)
    FLv = _expand_F(FL, n, f)
    split0 = boundary_splitting_from_F(F0v)
    splitL = boundary_splitting_from_F(FLv)
    Bmat = np.kron(-1j * fourier_diff_matrix(n), np.eye(f))
    F0mat = _blockdiag_nodes(F0v)
    FLmat = _blockdiag_nodes(FLv)
    if product_flag:
        for tag, Fm in (("x=0", F0mat), ("x=L", FLmat)):
            sq = np.abs(Fm @ Fm - np.eye(Fm.shape[0])).max()
            cm = np.abs(Bmat @ Fm - Fm @ Bmat).max()
            if sq > 1e-12:
                raise ValueError(f"F^2 != identity at {tag}: defect {sq:.3e}")
            if cm > 1e-10:
                raise ValueError(f"[B, F] != 0 at {tag}: defect {cm:.3e}")

    (Dfull, weight_diag, Q, DF, gamma, gamma_defect, asym, interior) = (
        _assemble_product(Bmat, interval, F0mat, FLmat)
    )
    return CylinderBVP(
        circle=circle,
        interval=interval,
        fiber_dim=fiber_dim,
        F0=split0,
        FL=splitL,
        Dfull=Dfull,
        weight_diag=weight_diag,
        Q=Q,
        DF=DF,
        gamma=gamma,
        gamma_defect=gamma_defect,
        asymmetry=asym,
        interior_indices=interior,
    )


def mode_matrix(
    m: int, interval: IntervalGrid, f0_sign: float, fL_sign: float
) -> SelfAdjointOp:
    """Single transverse mode of the scalar cylinder problem; used to validate
    the assembly against the secular oracle."""
    Bmat = np.array([[float(m)]], dtype=complex)
    F0mat = np.array([[float(f0_sign)]], dtype=complex)
    FLmat = np.array([[float(fL_sign)]], dtype=complex)
    return _assemble_product(Bmat, interval, F0mat, FLmat)[3]


@dataclass(frozen=True)
class CylinderGauge:
    """Grid-sampled unitary gauge over the cylinder.

    values: (n_x, n_theta, n, n) at the interval nodes; mid_values at the
    interval midpoints (where the operator couples the two components).
    Values must be x-independent within two grid cells of each end so that
    multiplication is compatible with the boundary condition.
    """

    values: np.ndarray
    mid_values: np.ndarray
    mid_theta_derivs: np.ndarray
    mid_x_derivs: np.ndarray

    @classmethod
    def from_boundary_gauge(cls, g: GaugeMap, interval: IntervalGrid) -> "CylinderGauge":
        """Extend a circle gauge map x-independently over the cylinder."""
        nx = interval.n_x
        vals = np.broadcast_to(g.values[None, ...], (nx, *g.values.shape)).copy()
        mids = np.broadcast_to(g.values[None, ...], (nx - 1, *g.values.shape)).copy()
        th = np.broadcast_to(
            g.derivatives()[None, ...], (nx - 1, *g.values.shape)
        ).copy()
        return cls(
            values=vals,
            mid_values=mids,
            mid_theta_derivs=th,
            mid_x_derivs=np.zeros_like(mids),
        )


def _check_gauge(bvp: CylinderBVP, gauge: CylinderGauge, unit_tol: float = 1e-10):
    nx, ntheta, n = bvp.interval.n_x, bvp.circle.n_theta, bvp.fiber_dim
    vals = np.asarray(gauge.values, dtype=complex)
    if vals.shape != (nx, ntheta, n, n):
        raise ValueError(f"gauge values must have shape {(nx, ntheta, n, n)}")
    if gauge.mid_values.shape != (nx - 1, ntheta, n, n):
        raise ValueError("midpoint values must have shape (n_x - 1, n_theta, n, n)")
    eye = np.eye(n)
    for k in (0, 1, 2, nx - 3, nx - 2, nx - 1):
        ref = vals[0] if k < 3 else vals[-1]
        if np.abs(vals[k] - ref).max() > 1e-12:
            raise ValueError("gauge must be x-independent within 2 cells of each end")
    for k in range(nx):
        for j in range(ntheta):
            defect = np.abs(vals[k, j] @ vals[k, j].conj().T - eye).max()
            if defect > unit_tol:
                raise ValueError(f"gauge value at node ({k},{j}) is not unitary")
    for k in range(nx - 1):
        for j in range(ntheta):
            m = gauge.mid_values[k, j]
            if np.abs(m @ m.conj().T - eye).max() > unit_tol:
                raise ValueError(f"gauge value at midpoint ({k},{j}) is not unitary")


def gauge_commutator_2d(
    bvp: CylinderBVP, gauge: CylinderGauge, unit_tol: float = 1e-10
) -> SelfAdjointOp:
    """Pointwise discretization of g^-1 [D, g] on the cylinder.

    The continuum commutator is the 0th-order endomorphism with off-diagonal
    entries -A + S and A + S, where S = -i g^-1 (d/dtheta g) and
    A = g^-1 (d/dx g); only its midpoint values enter the staggered form.
    """
    _check_gauge(bvp, gauge, unit_tol)
    nx, ntheta, n = bvp.interval.n_x, bvp.circle.n_theta, bvp.fiber_dim
    h = bvp.interval.spacing
    Nb = ntheta * n
    n0 = nx * Nb

    ginv = gauge.mid_values.conj().swapaxes(-1, -2)
    S = np.einsum("kjab,kjbc->kjac", ginv, -1j * gauge.mid_theta_derivs)
    A = np.einsum("kjab,kjbc->kjac", ginv, gauge.mid_x_derivs)
    blocks = A + S  # the (f1 <- f0) component; its adjoint is -A + S
    Vmid = np.zeros((Nb * (nx - 1), Nb * (nx - 1)), dtype=complex)
    for k in range(nx - 1):
        for j in range(ntheta):
            sl = slice(k * Nb + j * n, k * Nb + (j + 1) * n)
            Vmid[sl, sl] = blocks[k, j]
    Avg = np.kron(bvp.interval.midpoint_avg(), np.eye(Nb))
    Vw10 = h * (Vmid @ Avg)
    Vw = np.zeros((bvp.dim, bvp.dim), dtype=complex)
    Vw[n0:, :n0] = Vw10
    Vw[:n0, n0:] = Vw10.conj().T
    Kv = (Vw / np.sqrt(bvp.weight_diag)[None, :]) / np.sqrt(bvp.weight_diag)[:, None]
    return SelfAdjointOp(hermitian_part(Kv), herm_tol=1e-10)


def domain_preservation_defect(bvp: CylinderBVP, gauge: CylinderGauge) -> float:
    """Compatibility of multiplication by g with the boundary condition: the
    norm of [F, g] at each boundary circle (the boundary term of the form is
    invariant exactly when these vanish)."""
    _check_gauge(bvp, gauge)
    worst = 0.0
    for Fv, gv in (
        (bvp.F0.F_values, gauge.values[0]),
        (bvp.FL.F_values, gauge.values[-1]),
    ):
        for j in range(Fv.shape[0]):
            worst = max(worst, float(np.abs(Fv[j] @ gv[j] - gv[j] @ Fv[j]).max()))
    return worst


def cylinder_sf(
    bvp: CylinderBVP,
    gauge: CylinderGauge | GaugeMap,
    init_samples: int = 9,
) -> SpectralFlowResult:
    """Spectral flow of the cylinder operator along its gauge path."""
    if isinstance(gauge, GaugeMap):
        gauge = CylinderGauge.from_boundary_gauge(gauge, bvp.interval)
    V = gauge_commutator_2d(bvp, gauge)
    return spectral_flow(conjugation_path(bvp.DF, V), init_samples=init_samples)


def path_spectral_floor(
    bvp: CylinderBVP,
    gauge: CylinderGauge | GaugeMap,
    u_grid=np.linspace(0.0, 1.0, 9),
) -> float:
    """min over u of min |eig(DF + u V)|, the invertibility margin of the path."""
    if isinstance(gauge, GaugeMap):
        gauge = CylinderGauge.from_boundary_gauge(gauge, bvp.interval)
    V = gauge_commutator_2d(bvp, gauge).entries
    floor = np.inf
    for u in u_grid:
        ev = np.linalg.eigvalsh(bvp.DF.entries + u * V)
        floor = min(floor, float(np.abs(ev).min()))
    return floor


@dataclass(frozen=True)
class GammaDeformationReport:
    u_values: tuple[float, ...]
    min_singular_values: tuple[float, ...]
    interior_anticommutator: float
    full_anticommutator_defect: float
    gamma_squared_defect: float

    @property
    def all_positive(self) -> bool:
        return all(s > 0 for s in self.min_singular_values)


def gamma_deformation_check(
    bvp: CylinderBVP,
    gauge: CylinderGauge | GaugeMap,
    u_grid=(0.0, 0.25, 0.5, 0.75, 1.0),
) -> GammaDeformationReport:
    """Invertibility of DF(u) + gamma along the path, plus the grading
    anticommutation diagnostics (report only)."""
    if isinstance(gauge, GaugeMap):
        gauge = CylinderGauge.from_boundary_gauge(gauge, bvp.interval)
    V = gauge_commutator_2d(bvp, gauge).entries
    smins = []
    anti_int = 0.0
    anti_full = 0.0
    deep = bvp.interior_indices
    for u in u_grid:
        H = bvp.DF.entries + u * V
        ev = np.linalg.eigvalsh(H + bvp.gamma)
        smins.append(float(np.abs(ev).min()))
        Z = bvp.gamma @ H + H @ bvp.gamma
        anti_full = max(anti_full, float(np.abs(Z).max()))
        Zi = Z[np.ix_(deep, deep)]
        anti_int = max(anti_int, float(np.abs(Zi).max()) if Zi.size else 0.0)
    return GammaDeformationReport(
        u_values=tuple(float(u) for u in u_grid),
        min_singular_values=tuple(smins),
        interior_anticommutator=anti_int,
        full_anticommutator_defect=anti_full,
        gamma_squared_defect=bvp.gamma_defect,
    )


@dataclass(frozen=True)
class ModeSpectrumOracle:
    """Semi-analytic eigenvalues of one transverse mode of the scalar cylinder
    problem with identity gauge, from the secular equation of the
    two-component ODE."""

    mode: int
    f0_sign: float
    fL_sign: float
    length: float
    secular: Callable[[float], float]
    roots: np.ndarray


def _secular_function(m: int, alpha: float, beta: float, L: float):
    """Secular function whose zeros are the mode-m eigenvalues.

    Derived from the general solution of the coupled first-order system on
    [0, L] with f1(0) = alpha f0(0) and f1(L) = beta f0(L); written through
    sin(wL)/w and cos(wL) so it is analytic across the turning point
    lambda^2 = m^2.
    """

    def sec(lam: float) -> float:
        z = lam * lam - m * m
        if z >= 0:
            w = np.sqrt(z)
            S = L if w == 0 else np.sin(w * L) / w
            C = np.cos(w * L)
        else:
            kap = np.sqrt(-z)
            S = np.sinh(kap * L) / kap
            C = np.cosh(kap * L)
        return (-m * (alpha + beta) + lam * (alpha * beta + 1.0)) * S + (beta - alpha) * C

    return sec


def mode_oracle(
    m: int,
    f0_sign: float,
    fL_sign: float,
    length: float,
    window: tuple[float, float],
    scan_resolution: float = 1e-3,
    residual_tol: float = 1e-10,
) -> ModeSpectrumOracle:
    """Eigenvalues of one scalar transverse mode by bisection on the secular
    function, sampled at scan_resolution over the window."""
    alpha = float(f0_sign)
    beta = -float(fL_sign)  # inward normal flips at x=L
    sec = _secular_function(m, alpha, beta, length)
    lo, hi = window
    xs = np.arange(lo, hi + scan_resolution, scan_resolution)
    vals = np.array([sec(x) for x in xs])
    roots = []
    for i in range(len(xs) - 1):
        a, b, fa, fb = xs[i], xs[i + 1], vals[i], vals[i + 1]
        if fa == 0.0:
            roots.append(float(a))
            continue
        if fa * fb < 0:
            for _ in range(200):
                c = 0.5 * (a + b)
                fc = sec(c)
                if fc == 0.0:
                    a = b = c
                    break
                if fa * fc < 0:
                    b, fb = c, fc
                else:
                    a, fa = c, fc
                if b - a < 1e-15 * max(1.0, abs(a)):
                    break
            roots.append(0.5 * (a + b))
    roots = np.array(sorted(roots))
    scale = max(1.0, abs(m), abs(hi), abs(lo))
    for r in roots:
        if abs(sec(r)) > residual_tol * scale:
            raise RuntimeError(
                f"secular root {r} did not converge: residual {abs(sec(r)):.3e}"
            )
    return ModeSpectrumOracle(
        mode=m,
        f0_sign=f0_sign,
        fL_sign=fL_sign,
        length=length,
        secular=sec,
        roots=roots,
    )
