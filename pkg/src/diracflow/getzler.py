"""Heat-trace spectral flow estimates.

The estimator evaluates sqrt(eps/pi) * int_0^1 Tr(V exp(-eps (D+uV)^2)) du by
Gauss-Legendre quadrature with node doubling.  For a finite truncation the
value approximates the integer flow only inside an eps window; the sweep
utility locates that plateau.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .linalg import SelfAdjointOp, eigh

PLATEAU_SPREAD = 0.05


@dataclass(frozen=True)
class GetzlerEstimate:
    eps: float
    value: float
    quadrature_nodes: int
    quadrature_error_estimate: float
    converged: bool = True
    sweep: tuple[tuple[float, float], ...] | None = None
    plateau: tuple[float, float, float] | None = None

    @property
    def plateau_value(self) -> float | None:
        if self.plateau is None or self.sweep is None:
            return None
        lo, hi, _ = self.plateau
        vals = [v for e, v in self.sweep if lo <= e <= hi]
        return float(np.mean(vals))

    @property
    def sf_estimate(self) -> int | None:
        pv = self.plateau_value
        return None if pv is None else int(round(pv))

    def sweep_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["eps", "value"])
        for e, v in self.sweep or ():
            w.writerow([repr(e), repr(v)])
        return buf.getvalue()


class _NodeCache:
    """Per-quadrature-node spectra of D + uV, reused across an eps sweep."""

    def __init__(self, D: SelfAdjointOp, V: np.ndarray, weight: np.ndarray):
        self.D = D
        self.V = V
        self.weight = weight
        self._store: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def node_data(self, u: float) -> tuple[np.ndarray, np.ndarray]:
        if u not in self._store:
            spec = eigh(SelfAdjointOp(self.D.entries + u * self.V, herm_tol=1e-10))
            diag = np.einsum(
                "ji,jk,ki->i", spec.eigenvectors.conj(), self.weight, spec.eigenvectors
            )
            self._store[u] = (spec.eigenvalues, diag)
        return self._store[u]

    def integrand(self, u: float, eps: float) -> float:
        lams, diag = self.node_data(u)
        total = 0.0 + 0.0j
        for d, lam in zip(diag, lams):
            total += d * np.exp(-eps * lam * lam)
        return float(total.real)


def _check_hermitian(V: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    defect = np.abs(V - V.conj().T).max(initial=0.0)
    if defect > tol * (1.0 + np.abs(V).max(initial=0.0)):
        raise ValueError(f"perturbation is not Hermitian: defect {defect:.3e}")
    return 0.5 * (V + V.conj().T)


def flow_integral(
    cache: _NodeCache,
    eps: float,
    tol: float = 1e-8,
    start_nodes: int = 8,
    max_nodes: int = 512,
) -> tuple[float, int, float, bool]:
    """Nested Gauss-Legendre value of sqrt(eps/pi) * int_0^1 Tr(W e^{-eps(D+uV)^2}) du.

    Returns (value, nodes, error_estimate, converged); the error estimate is
    the difference between the last two refinement levels.
    """
    prefactor = np.sqrt(eps / np.pi)
    prev = None
    n = start_nodes
    while True:
        x, w = np.polynomial.legendre.leggauss(n)
        u_nodes = 0.5 * (x + 1.0)
        val = prefactor * 0.5 * sum(
            wi * cache.integrand(float(ui), eps) for ui, wi in zip(u_nodes, w)
        )
        if prev is not None:
            err = abs(val - prev)
            if err < tol:
                return val, n, err, True
            if n >= max_nodes:
                return val, n, err, False
        prev = val
        n *= 2


def getzler_estimate(
    D: SelfAdjointOp,
    V,
    eps: float,
    tol: float = 1e-8,
    cache: _NodeCache | None = None,
) -> GetzlerEstimate:
    """Heat-trace flow estimate at a single eps.

    V is the (Hermitian) supplied discretization of g^-1 [D, g].
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if cache is None:
        v = _check_hermitian(np.asarray(getattr(V, "entries", V), dtype=complex))
        cache = _NodeCache(D, v, v)
    value, nodes, err, converged = flow_integral(cache, eps, tol=tol)
    return GetzlerEstimate(
        eps=eps,
        value=value,
        quadrature_nodes=nodes,
        quadrature_error_estimate=err,
        converged=converged,
    )


def eps_sweep(
    D: SelfAdjointOp,
    V,
    eps_grid,
    tol: float = 1e-8,
) -> GetzlerEstimate:
    """Evaluate the estimate over an ascending eps grid and locate the plateau.

    The plateau is the widest contiguous sub-grid whose values have spread
    below PLATEAU_SPREAD; its mean, rounded, is the flow estimate.  When no
    window of at least two points qualifies the result carries plateau=None
    and the caller must refine the discretization.
    """
    eps_grid = [float(e) for e in eps_grid]
    if any(b <= a for a, b in zip(eps_grid, eps_grid[1:])):
        raise ValueError("eps_grid must be strictly ascending")
    v = _check_hermitian(np.asarray(getattr(V, "entries", V), dtype=complex))
    cache = _NodeCache(D, v, v)
    estimates = [getzler_estimate(D, v, e, tol=tol, cache=cache) for e in eps_grid]
    sweep = tuple((e.eps, e.value) for e in estimates)
    values = np.array([e.value for e in estimates])

    best: tuple[int, int] | None = None
    for i in range(len(values)):
        for j in range(i + 1, len(values)):
            window = values[i : j + 1]
            if window.max() - window.min() < PLATEAU_SPREAD:
                if best is None or (j - i) > (best[1] - best[0]):
                    best = (i, j)
    plateau = None
    if best is not None:
        i, j = best
        window = values[i : j + 1]
        plateau = (eps_grid[i], eps_grid[j], float(window.max() - window.min()))

    mid = estimates[len(estimates) // 2]
    return GetzlerEstimate(
        eps=mid.eps,
        value=mid.value,
        quadrature_nodes=max(e.quadrature_nodes for e in estimates),
        quadrature_error_estimate=max(e.quadrature_error_estimate for e in estimates),
        converged=all(e.converged for e in estimates),
        sweep=sweep,
        plateau=plateau,
    )


def shifted_estimate(
    D: SelfAdjointOp,
    V,
    eps: float,
    shift: float,
    tol: float = 1e-8,
) -> GetzlerEstimate:
    """Estimate for the shifted path (D - shift) + uV.

    Used when D has an eigenvalue at 0: the flow is shift-independent away
    from the spectrum, so a small off-spectrum shift removes the degeneracy.
    """
    radius = float(np.abs(np.linalg.eigvalsh(D.entries)).max(initial=0.0))
    if radius > 0 and abs(shift) >= radius:
        raise ValueError(
            f"|shift|={abs(shift)} must stay below the spectral radius {radius}"
        )
    shifted = SelfAdjointOp(D.entries - shift * np.eye(D.dim), herm_tol=D.herm_tol)
    return getzler_estimate(shifted, V, eps, tol=tol)
