"""Dense complex-Hermitian linear algebra kernels shared by all other modules.

Everything here is a pure function of immutable inputs; matrices are dense
numpy arrays and all reductions use a fixed summation order so repeated runs
are bit-identical.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DimensionMismatchError(ValueError):
    pass


class EigendecompositionError(RuntimeError):
    """Eigensolver failed to converge; carries the residual achieved (if any)."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


def _as_matrix(a) -> np.ndarray:
    m = np.asarray(getattr(a, "entries", a), dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class SelfAdjointOp:
    """Finite Hermitian matrix standing in for a selfadjoint Fredholm operator."""

    entries: np.ndarray
    herm_tol: float = 1e-12

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"entries must be a square matrix, got shape {m.shape}")
        object.__setattr__(self, "entries", m)
        scale = 1.0 + (np.abs(m).max() if m.size else 0.0)
        defect = np.abs(m - m.conj().T).max() if m.size else 0.0
        if defect > self.herm_tol * scale:
            raise ValueError(
                f"matrix is not Hermitian: defect {defect:.3e} exceeds "
                f"{self.herm_tol:.1e} * {scale:.3e}"
            )

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class UnitaryOp:
    entries: np.ndarray
    unit_tol: float = 1e-12

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise ValueError(f"entries must be a square matrix, got shape {m.shape}")
        object.__setattr__(self, "entries", m)
        defect = np.abs(m @ m.conj().T - np.eye(m.shape[0])).max()
        if defect > self.unit_tol:
            raise ValueError(f"matrix is not unitary: defect {defect:.3e}")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class Spectrum:
    """Full orthonormal eigendecomposition, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual: float


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    """Make the first nonzero component of each eigenvector real positive."""
    out = vecs.copy()
    for i in range(out.shape[1]):
        col = out[:, i]
        nz = np.flatnonzero(np.abs(col) > 1e-12 * max(1.0, np.abs(col).max()))
        if nz.size:
            pivot = col[nz[0]]
            out[:, i] = col * (np.conj(pivot) / abs(pivot))
    return out


def eigh(H: SelfAdjointOp) -> Spectrum:
    """Deterministic full eigendecomposition of a Hermitian matrix.

    Eigenvalues ascending; each eigenvector's first nonzero component is made
    real positive so identical inputs give identical outputs.
    """
    m = H.entries
    try:
        vals, vecs = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise EigendecompositionError(f"eigensolver did not converge: {exc}") from exc
    vecs = _fix_phases(vecs)
    residual = float(np.abs(m @ vecs - vecs * vals).max(initial=0.0))
    bound = 1e-10 * (1.0 + np.abs(m).max(initial=0.0) * m.shape[0])
    if residual > bound:
        raise EigendecompositionError(
            f"eigendecomposition residual {residual:.3e} exceeds bound {bound:.3e}",
            residual=residual,
        )
    return Spectrum(eigenvalues=vals, eigenvectors=vecs, residual=residual)


def eigvalsh(H: SelfAdjointOp) -> np.ndarray:
    """Ascending eigenvalues only (cheaper than eigh when vectors are unused)."""
    try:
        return np.linalg.eigvalsh(H.entries)
    except np.linalg.LinAlgError as exc:
        raise EigendecompositionError(f"eigensolver did not converge: {exc}") from exc


def heat_weighted_trace(A, H: SelfAdjointOp, eps: float) -> complex:
    """Sum_i <v_i, A v_i> exp(-eps * lambda_i^2) over the eigenpairs of H.

    Summation runs in ascending-eigenvalue order for determinism.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    a = _as_matrix(A)
    if a.shape != H.entries.shape:
        raise DimensionMismatchError(
            f"dimension mismatch: A is {a.shape}, H is {H.entries.shape}"
        )
    spec = eigh(H)
    diag = np.einsum("ji,jk,ki->i", spec.eigenvectors.conj(), a, spec.eigenvectors)
    weights = np.exp(-eps * spec.eigenvalues**2)
    total = 0.0 + 0.0j
    for d, w in zip(diag, weights):
        total += d * w
    return total


def commutator(D: SelfAdjointOp, g: UnitaryOp) -> np.ndarray:
    """Dg - gD, exactly as computed in floating point."""
    if D.dim != g.dim:
        raise DimensionMismatchError(f"dimension mismatch: {D.dim} vs {g.dim}")
    return D.entries @ g.entries - g.entries @ D.entries


def conjugate(D: SelfAdjointOp, g: UnitaryOp, return_asymmetry: bool = False):
    """g^-1 D g, re-symmetrized by averaging with its adjoint.

    The asymmetry norm of the raw product is the round-off diagnostic; pass
    return_asymmetry=True to get it alongside the operator.
    """
    if D.dim != g.dim:
        raise DimensionMismatchError(f"dimension mismatch: {D.dim} vs {g.dim}")
    raw = g.entries.conj().T @ D.entries @ g.entries
    asym = float(np.abs(raw - raw.conj().T).max())
    sym = 0.5 * (raw + raw.conj().T)
    out = SelfAdjointOp(sym, herm_tol=max(D.herm_tol, 1e-12))
    if return_asymmetry:
        return out, asym
    return out


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)
