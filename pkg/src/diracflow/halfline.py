"""Analytic half-cylinder toolkit: method-of-images heat kernels, the
rotation unitary that decouples the boundary condition, the mixed
Dirichlet/Neumann domain, and the boundary trace factorization carrying the
one-half factor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import erf

from .circle import (
    BoundarySplitting,
    CircleOperator,
    GaugeMap,
    analytic_gauge_commutator,
    restrict_gauge,
    split_by_F,
)
from .getzler import _NodeCache, flow_integral


@dataclass(frozen=True)
class ImageHeatKernel:
    """Half-line heat kernel built by reflecting the free Gaussian.

    sign=-1 subtracts the image (Dirichlet at 0), sign=+1 adds it (Neumann).
    """

    eps: float
    sign: int

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.sign not in (+1, -1):
            raise ValueError("sign must be +1 or -1")

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        pref = 1.0 / np.sqrt(4.0 * np.pi * self.eps)
        return pref * (
            np.exp(-((x - y) ** 2) / (4.0 * self.eps))
            + self.sign * np.exp(-((x + y) ** 2) / (4.0 * self.eps))
        )


def image_kernel_diagonal_difference(eps: float, x) -> np.ndarray:
    """Diagonal of (k^- - k^+): -(pi eps)^{-1/2} exp(-x^2/eps)."""
    x = np.asarray(x, dtype=float)
    return -np.exp(-(x**2) / eps) / np.sqrt(np.pi * eps)


def plateau_reference(eps: float, a: float) -> float:
    """Exact integral of |k^- - k^+| on [0, a]: the value the cutoff trace
    approaches once the plateau end a is a few sqrt(eps) wide."""
    return 0.5 * float(erf(a / np.sqrt(eps)))


def _smoothstep(s: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for s<=0, 1 for s>=1."""
    s = np.clip(s, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.maximum(1.0 - s, 1e-300)), 0.0)
    out = np.where(s <= 0, 0.0, np.where(s >= 1, 1.0, a / (a + b)))
    return out


def smooth_bump(x, plateau_end: float, support_end: float, sharpness: int = 8):
    """C-infinity cutoff: 1 on [0, plateau_end], 0 beyond support_end.

    The sharpness power keeps the function flat to very high order at the
    plateau end, so the cutoff error on a Gaussian tail stays near the pure
    truncation level.
    """
    x = np.asarray(x, dtype=float)
    s = (x - plateau_end) / (support_end - plateau_end)
    return 1.0 - _smoothstep(np.clip(s, 0.0, 1.0) ** sharpness)


@dataclass(frozen=True)
class CutoffPair:
    """Cutoffs lam, mu with lam identically 1 on a neighborhood of supp(mu)."""

    plateau_end: float
    support_end: float
    sharpness: int = 8

    def __post_init__(self):
        if not 0 < self.plateau_end < self.support_end:
            raise ValueError("need 0 < plateau_end < support_end")

    def mu(self, x):
        return smooth_bump(x, self.plateau_end, self.support_end, self.sharpness)

    def lam(self, x):
        ext = self.support_end + (self.support_end - self.plateau_end)
        return smooth_bump(x, self.support_end, ext, self.sharpness)

    def product_defect(self, n_samples: int = 2001) -> float:
        ext = self.support_end + (self.support_end - self.plateau_end)
        xs = np.linspace(0.0, ext, n_samples)
        return float(np.abs(self.lam(xs) * self.mu(xs) - self.mu(xs)).max())


def half_trace_integral(eps: float, cutoffs: CutoffPair) -> float:
    """Trace of lam (k^- - k^+) mu on the half line, magnitude convention.

    Equals 1/2 up to an error beyond all orders in eps once the cutoff
    plateau is a few sqrt(eps) wide.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    a, b = cutoffs.plateau_end, cutoffs.support_end

    def integrand(x):
        return cutoffs.lam(x) * np.abs(image_kernel_diagonal_difference(eps, x)) * cutoffs.mu(x)

    # peak at 0 of width sqrt(eps); split the range so quad resolves both the
    # peak and the cutoff shoulder
    pts = sorted({min(np.sqrt(eps), a), a})
    val, err = integrate.quad(
        integrand, 0.0, b, points=pts, epsabs=1e-14, epsrel=1e-13, limit=400
    )
    if err > 1e-12:
        raise RuntimeError(f"quadrature error {err:.2e} exceeds 1e-12")
    return float(val)


# --- formal block algebra for the rotation-unitary identities ---------------


class FormalOp:
    """Finite sum C_k * d^k of matrix coefficients times powers of a formal
    skew generator d (the normal derivative), with [d, C] = 0 assumed as in
    the product case."""

    def __init__(self, coeffs: dict[int, np.ndarray]):
        self.coeffs = {k: np.asarray(c, dtype=complex) for k, c in coeffs.items() if np.abs(c).max() > 0 or k == 0}

    @classmethod
    def const(cls, mat) -> "FormalOp":
        return cls({0: np.asarray(mat, dtype=complex)})

    @classmethod
    def generator(cls, dim: int) -> "FormalOp":
        return cls({1: np.eye(dim)})

    def __add__(self, other: "FormalOp") -> "FormalOp":
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, 0) + c
        return FormalOp(out)

    def __sub__(self, other: "FormalOp") -> "FormalOp":
        return self + (other * (-1.0))

    def __mul__(self, scalar) -> "FormalOp":
        return FormalOp({k: c * scalar for k, c in self.coeffs.items()})

    def __matmul__(self, other: "FormalOp") -> "FormalOp":
        out: dict[int, np.ndarray] = {}
        for k1, c1 in self.coeffs.items():
            for k2, c2 in other.coeffs.items():
                out[k1 + k2] = out.get(k1 + k2, 0) + c1 @ c2
        return FormalOp(out)

    def adjoint(self) -> "FormalOp":
        # the generator is formally skew: (C d^k)^* = (-1)^k d^k C^*
        return FormalOp(
            {k: ((-1.0) ** k) * c.conj().T for k, c in self.coeffs.items()}
        )

    def norm(self) -> float:
        if not self.coeffs:
            return 0.0
        return max(float(np.abs(c).max()) for c in self.coeffs.values())


def _block_matmul(A, B):
    n = len(A)
    m = len(B[0])
    inner = len(B)
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            acc = None
            for k in range(inner):
                term = A[i][k] @ B[k][j]
                acc = term if acc is None else acc + term
            row.append(acc)
        out.append(row)
    return out


def _block_sub_norm(A, B) -> float:
    return max(
        (A[i][j] - B[i][j]).norm() for i in range(len(A)) for j in range(len(A[0]))
    )


@dataclass(frozen=True)
class HalfCylModel:
    """Product-case boundary data: operator B and splitting endomorphism F
    with F^2 = 1 and [B, F] = 0."""

    boundary: CircleOperator
    splitting: BoundarySplitting

    def __post_init__(self):
        Fmat = self.F_matrix()
        Bmat = self.boundary.op.entries
        sq = np.abs(Fmat @ Fmat - np.eye(Fmat.shape[0])).max()
        if sq > 1e-12:
            raise ValueError(f"F^2 != identity: defect {sq:.3e}")
        cm = np.abs(Bmat @ Fmat - Fmat @ Bmat).max()
        if cm > 1e-10:
            raise ValueError(f"[B, F] != 0: defect {cm:.3e}")

    def F_matrix(self) -> np.ndarray:
        Fv = self.splitting.F_values
        n, f, _ = Fv.shape
        out = np.zeros((n * f, n * f), dtype=complex)
        for j in range(n):
            out[j * f : (j + 1) * f, j * f : (j + 1) * f] = Fv[j]
        return out


@dataclass(frozen=True)
class UIdentityReport:
    unitarity_residual: float
    conjugation_residual: float
    square_commutation_residual: float

    def max_residual(self) -> float:
        return max(
            self.unitarity_residual,
            self.conjugation_residual,
            self.square_commutation_residual,
        )


def verify_U_identities(B: np.ndarray, F: np.ndarray) -> UIdentityReport:
    """Block-algebra check of the rotation unitary that exchanges the local
    boundary condition for the mixed Dirichlet/Neumann one.

    B and F are finite matrices with F^2 = 1 and [B, F] = 0; the normal
    derivative is handled as a formal skew generator, so the residuals
    measure the algebraic identities only, free of discretization error.
    """
    B = np.asarray(B, dtype=complex)
    F = np.asarray(F, dtype=complex)
    dim = B.shape[0]
    I = FormalOp.const(np.eye(dim))
    Z = FormalOp.const(np.zeros((dim, dim)))
    Bf = FormalOp.const(B)
    Ff = FormalOp.const(F)
    d = FormalOp.generator(dim)
    s = 1.0 / np.sqrt(2.0)

    U = [[Ff * s, I * (-s)], [I * s, Ff * s]]
    Uinv = [[Ff * s, I * s], [I * (-s), Ff * s]]
    Ustar = [[row[i].adjoint() for row in U] for i in range(2)]
    D = [[Z, (d * (-1.0)) + Bf], [d + Bf, Z]]

    ident = [[I, Z], [Z, I]]
    unit_res = _block_sub_norm(_block_matmul(U, Ustar), ident)

    UDUi = _block_matmul(_block_matmul(U, D), Uinv)
    FB = FormalOp.const(F @ B)
    target = [[FB * (-1.0), d * (-1.0)], [d, FB]]
    conj_res = _block_sub_norm(UDUi, target)

    D2 = _block_matmul(D, D)
    UD2Ui = _block_matmul(_block_matmul(U, D2), Uinv)
    sq_res = _block_sub_norm(UD2Ui, D2)

    return UIdentityReport(
        unitarity_residual=unit_res,
        conjugation_residual=conj_res,
        square_commutation_residual=sq_res,
    )


# --- mixed-domain heat kernel verification ----------------------------------


@dataclass(frozen=True)
class MixedDomainCheck:
    beta: float
    sign: int
    max_deviation: float
    truncation_bound: float


def _truncated_interval_kernel(
    eps: float, X: float, sign: int, xs: np.ndarray, tail: float = 1e-18
) -> np.ndarray:
    """Heat kernel on [0, X] by exact eigen-expansion: Dirichlet (sign=-1) or
    Neumann (sign=+1) at 0, Dirichlet at X.  Independent of the image
    construction."""
    K = np.zeros((xs.size, xs.size))
    k = 0
    while True:
        if sign < 0:
            lam = (k + 1) * np.pi / X
            phi = np.sin(lam * xs)
        else:
            lam = (k + 0.5) * np.pi / X
            phi = np.cos(lam * xs)
        w = np.exp(-eps * lam * lam)
        if w < tail and k > 4:
            break
        K += (2.0 / X) * w * np.outer(phi, phi)
        k += 1
        if k > 100000:
            raise RuntimeError("eigen-expansion failed to truncate")
    return K


def verify_mixed_domain(
    eps: float,
    betas,
    X: float | None = None,
    n_grid: int = 61,
    tol: float = 1e-6,
) -> list[MixedDomainCheck]:
    """Compare the image-kernel prediction exp(-eps beta^2) k_-/+ against a
    truncated-interval eigen-expansion reference, per boundary eigenvalue."""
    if X is None:
        X = 10.0 * np.sqrt(eps)
    trunc = np.exp(-(X**2) / (4.0 * eps)) / np.sqrt(4.0 * np.pi * eps)
    if trunc > 0.1 * tol:
        raise ValueError(
            f"truncation domain too short: boundary residual {trunc:.2e} at X={X}"
        )
    xs = np.linspace(0.0, X / 2.0, n_grid)
    out = []
    refs = {s: _truncated_interval_kernel(eps, X, s, xs) for s in (-1, +1)}
    for beta in betas:
        scale = np.exp(-eps * beta * beta)
        for sign in (-1, +1):
            kern = ImageHeatKernel(eps, sign)
            pred = scale * kern(xs[:, None], xs[None, :])
            dev = float(np.abs(pred - scale * refs[sign]).max())
            out.append(
                MixedDomainCheck(
                    beta=float(beta),
                    sign=sign,
                    max_deviation=dev,
                    truncation_bound=float(trunc),
                )
            )
    return out


def image_kernel_semigroup_defect(
    eps: float, delta: float, sign: int, points
) -> float:
    """max |int_0^inf k_eps(x,z) k_delta(z,y) dz - k_{eps+delta}(x,y)| over
    the given (x, y) pairs."""
    k1 = ImageHeatKernel(eps, sign)
    k2 = ImageHeatKernel(delta, sign)
    k12 = ImageHeatKernel(eps + delta, sign)
    worst = 0.0
    for x, y in points:
        val, _ = integrate.quad(
            lambda z: k1(x, z) * k2(z, y), 0.0, np.inf, epsabs=1e-12, limit=400
        )
        worst = max(worst, abs(val - k12(x, y)))
    return worst


# --- trace factorization ----------------------------------------------------


@dataclass(frozen=True)
class FactorizedBoundaryTerm:
    eps: float
    flow_factor: float
    half_factor: float
    value: float
    plus_term: float
    minus_term: float

    @property
    def split_value(self) -> float:
        return 0.5 * (self.plus_term - self.minus_term)


def factorized_boundary_term(
    model: HalfCylModel,
    g: GaugeMap,
    eps: float,
    tol: float = 1e-8,
) -> FactorizedBoundaryTerm:
    """The boundary trace product: the heat-flow integral weighted by F times
    the half-line trace of the image-kernel difference.

    Also evaluates the same quantity through the splitting into the positive
    and negative eigenbundles, which must agree whenever [B, F] = 0.
    """
    B = model.boundary
    V = analytic_gauge_commutator(B, g)
    Fmat = model.F_matrix()
    cache = _NodeCache(B.op, V.entries, Fmat @ V.entries)
    flow_factor, _, _, _ = flow_integral(cache, eps, tol=tol)

    a = 4.0 * np.sqrt(eps)
    half = half_trace_integral(eps, CutoffPair(a, 2.0 * a))

    terms = {}
    Bp, Bm = split_by_F(B, model.splitting, product_flag=True)
    for tag, Bside in (("plus", Bp), ("minus", Bm)):
        if Bside.fiber_dim == 0:
            terms[tag] = 0.0
            continue
        gs = restrict_gauge(g, Bside.frames)
        Vs = analytic_gauge_commutator(Bside, gs)
        c = _NodeCache(Bside.op, Vs.entries, Vs.entries)
        terms[tag], _, _, _ = flow_integral(c, eps, tol=tol)

    return FactorizedBoundaryTerm(
        eps=eps,
        flow_factor=flow_factor,
        half_factor=half,
        value=flow_factor * half,
        plus_term=terms["plus"],
        minus_term=terms["minus"],
    )
