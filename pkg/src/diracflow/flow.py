"""Spectral flow of a continuous path of Hermitian matrices.

The flow is computed by the subdivision definition: on each parameter segment
an admissible gap level eps is chosen so that +/-eps stays away from the
spectrum across the segment, and the contribution is the change in the number
of eigenvalues inside [0, eps).  Segments where no admissible gap exists are
bisected adaptively.

Endpoint convention: eigenvalues within ZERO_TOL of 0 at a sample count as
exactly 0 and belong to the half-open interval [0, eps).
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .linalg import SelfAdjointOp, eigvalsh

ZERO_TOL = 1e-12
# eigenvalues closer than this are treated as one degenerate cluster when
# judging whether sorted-order branch pairing is trustworthy
DEGENERACY_TOL = 1e-9


class PinnedZeroError(RuntimeError):
    """Refinement exhausted without an admissible gap level on some interval."""

    def __init__(self, interval: tuple[float, float]):
        super().__init__(
            f"no admissible gap level found on [{interval[0]}, {interval[1]}] "
            "after maximal refinement; an eigenvalue appears pinned near 0 "
            "(consider a shifted estimate)"
        )
        self.interval = interval


@dataclass(frozen=True)
class OperatorPath:
    dim: int
    sample: Callable[[float], SelfAdjointOp]
    lipschitz_hint: float | None = None


@dataclass(frozen=True)
class Crossing:
    t: float
    branch: int
    direction: int
    slope: float


@dataclass(frozen=True)
class FlowSegment:
    t_start: float
    t_end: float
    eps_gap: float
    contribution: int


@dataclass(frozen=True)
class SpectralFlowResult:
    value: int
    segments: tuple[FlowSegment, ...]
    crossings: tuple[Crossing, ...]
    refinement_depth: int

    def crossings_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["t_cross", "branch_index", "direction", "slope"])
        for c in self.crossings:
            w.writerow([repr(c.t), c.branch, c.direction, repr(c.slope)])
        return buf.getvalue()


def _count_below(eigs: np.ndarray, eps: float) -> int:
    """Number of eigenvalues in [0, eps), with the zero tolerance applied."""
    return int(np.count_nonzero((eigs > -ZERO_TOL) & (eigs < eps)))


def _distinct_min_gap(eigs: np.ndarray) -> float:
    diffs = np.diff(eigs)
    diffs = diffs[diffs > DEGENERACY_TOL]
    return float(diffs.min()) if diffs.size else np.inf


def _merge_abs_intervals(lo: np.ndarray, hi: np.ndarray) -> list[tuple[float, float]]:
    """Map swept intervals through |.| and merge overlaps; result sorted."""
    mapped = []
    for a, b in zip(lo, hi):
        if b < 0:
            mapped.append((-b, -a))
        elif a > 0:
            mapped.append((a, b))
        else:
            mapped.append((0.0, max(-a, b)))
    mapped.sort()
    merged: list[list[float]] = []
    for a, b in mapped:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return [(a, b) for a, b in merged]


def _choose_eps(
    eigs_a: np.ndarray,
    eigs_b: np.ndarray,
    seg_lipschitz: float | None,
) -> float | None:
    """Admissible gap level for one segment, or None if the segment must split.

    A level eps is admissible when +/-eps keeps a clearance of at least eps/10
    from every (padded) interval swept by a sorted eigenvalue branch.
    """
    movement = float(np.abs(eigs_b - eigs_a).max())
    if seg_lipschitz is not None:
        # sorted eigenvalue branches are Lipschitz at the operator-norm rate,
        # so the tent bound on the excursion between the two samples is
        # rigorous without trusting any branch pairing
        pad = 0.5 * np.maximum(seg_lipschitz - np.abs(eigs_b - eigs_a), 0.0) + 1e-14
    else:
        # without a rate bound, sorted-order pairing is only trusted when
        # branches move much less than the spacing between distinct
        # eigenvalues; only the spacing near 0 matters, since mispairing far
        # from the candidate levels cannot corrupt the zero counting
        window = 4.0 * movement + 10.0 * ZERO_TOL
        near_a = eigs_a[np.abs(eigs_a) <= window]
        near_b = eigs_b[np.abs(eigs_b) <= window]
        min_gap = min(_distinct_min_gap(near_a), _distinct_min_gap(near_b))
        if np.isfinite(min_gap) and movement > 0.5 * min_gap:
            return None
        pad = np.full_like(eigs_a, movement + 1e-14)
    lo = np.minimum(eigs_a, eigs_b) - pad
    hi = np.maximum(eigs_a, eigs_b) + pad
    covered = _merge_abs_intervals(lo, hi)

    gaps: list[tuple[float, float]] = []
    prev = 0.0
    for a, b in covered:
        if a > prev:
            gaps.append((prev, a))
        prev = max(prev, b)
    gaps.append((prev, np.inf))

    for g0, g1 in gaps:
        if np.isinf(g1):
            eps = max(2.0 * g0, g0 + 1.0, 1e-12)
            if eps - g0 >= eps / 10.0:
                return eps
            continue
        eps = 0.5 * (g0 + g1)
        if eps < 1e-12:
            continue
        if min(eps - g0, g1 - eps) >= eps / 10.0:
            return eps
    return None


def spectral_flow(
    path: OperatorPath,
    init_samples: int = 17,
    max_depth: int = 20,
) -> SpectralFlowResult:
    """Spectral flow of path.sample over [0, 1] by adaptive crossing counting."""
    if path.dim < 1:
        raise ValueError("path dimension must be >= 1")
    if init_samples < 2:
        raise ValueError("init_samples must be >= 2")

    cache: dict[float, np.ndarray] = {}

    def eigs(t: float) -> np.ndarray:
        if t not in cache:
            cache[t] = eigvalsh(path.sample(t))
        return cache[t]

    segments: list[FlowSegment] = []
    crossings: list[Crossing] = []
    max_seen_depth = 0

    def process(a: float, b: float, depth: int) -> int:
        nonlocal max_seen_depth
        max_seen_depth = max(max_seen_depth, depth)
        ea, eb = eigs(a), eigs(b)
        seg_lip = path.lipschitz_hint * (b - a) if path.lipschitz_hint is not None else None
        eps = _choose_eps(ea, eb, seg_lip)
        if eps is None:
            if depth >= max_depth:
                raise PinnedZeroError((a, b))
            mid = 0.5 * (a + b)
            return process(a, mid, depth + 1) + process(mid, b, depth + 1)
        contribution = _count_below(eb, eps) - _count_below(ea, eps)
        segments.append(FlowSegment(a, b, eps, contribution))
        for i in range(path.dim):
            za, zb = ea[i], eb[i]
            ca = za > -ZERO_TOL
            cb = zb > -ZERO_TOL
            if ca == cb:
                continue
            slope = (zb - za) / (b - a)
            if abs(slope) > 0:
                t_cross = float(np.clip(a - za / slope, a, b))
            else:
                t_cross = b
            crossings.append(Crossing(t_cross, i, +1 if cb else -1, float(slope)))
        return contribution

    total = 0
    ts = np.linspace(0.0, 1.0, init_samples)
    for a, b in zip(ts[:-1], ts[1:]):
        total += process(float(a), float(b), 0)

    crossings.sort(key=lambda c: (c.t, c.branch))
    return SpectralFlowResult(
        value=total,
        segments=tuple(segments),
        crossings=tuple(crossings),
        refinement_depth=max_seen_depth,
    )


def conjugation_path(D: SelfAdjointOp, V, herm_tol: float = 1e-8) -> OperatorPath:
    """Affine path t -> D + t V, with V a Hermitian perturbation.

    V is typically the separately supplied discretization of g^-1 [D, g].
    """
    v = np.asarray(getattr(V, "entries", V), dtype=complex)
    if v.shape != D.entries.shape:
        raise ValueError(f"dimension mismatch: D is {D.entries.shape}, V is {v.shape}")
    defect = np.abs(v - v.conj().T).max(initial=0.0)
    scale = 1.0 + np.abs(v).max(initial=0.0)
    if defect > herm_tol * scale:
        raise ValueError(f"perturbation is not Hermitian: defect {defect:.3e}")
    v = 0.5 * (v + v.conj().T)
    norm_v = float(np.linalg.norm(v, 2)) if v.size else 0.0

    def sample(t: float) -> SelfAdjointOp:
        return SelfAdjointOp(D.entries + t * v, herm_tol=1e-10)

    return OperatorPath(dim=D.dim, sample=sample, lipschitz_hint=norm_v)


def resolvent_distance(T1: SelfAdjointOp, T2: SelfAdjointOp) -> float:
    """Operator norm of (T1 + i)^-1 - (T2 + i)^-1."""
    if T1.dim != T2.dim:
        raise ValueError(f"dimension mismatch: {T1.dim} vs {T2.dim}")
    eye = np.eye(T1.dim)
    r1 = np.linalg.inv(T1.entries + 1j * eye)
    r2 = np.linalg.inv(T2.entries + 1j * eye)
    return float(np.linalg.norm(r1 - r2, 2))


@dataclass(frozen=True)
class HomotopyReport:
    flow_values: tuple[int, ...]
    all_equal: bool
    loop_value: int
    max_neighbor_resolvent_distance: float


def homotopy_check(
    family: Callable[[float, float], SelfAdjointOp],
    dim: int,
    s_grid: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0),
    init_samples: int = 17,
    max_depth: int = 20,
) -> HomotopyReport:
    """Check spectral-flow invariance of a two-parameter family (s, t).

    Computes the flow of the t-path at every s-grid line (all values must
    coincide for a genuine homotopy) and the flow around the boundary loop of
    the parameter square, which must vanish.
    """
    s_grid = list(s_grid)

    def t_path(s: float) -> OperatorPath:
        return OperatorPath(dim=dim, sample=lambda t: family(s, t))

    values = []
    max_dist = 0.0
    prev_ops: list[SelfAdjointOp] | None = None
    t_probe = np.linspace(0.0, 1.0, init_samples)
    for s in s_grid:
        ops = [family(s, float(t)) for t in t_probe]
        if prev_ops is not None:
            for o1, o2 in zip(prev_ops, ops):
                max_dist = max(max_dist, resolvent_distance(o1, o2))
        prev_ops = ops
        values.append(
            spectral_flow(t_path(s), init_samples=init_samples, max_depth=max_depth).value
        )

    edges = [
        lambda u: family(0.0, u),
        lambda u: family(u, 1.0),
        lambda u: family(1.0, 1.0 - u),
        lambda u: family(1.0 - u, 0.0),
    ]
    loop = 0
    for edge in edges:
        p = OperatorPath(dim=dim, sample=edge)
        loop += spectral_flow(p, init_samples=init_samples, max_depth=max_depth).value

    return HomotopyReport(
        flow_values=tuple(values),
        all_equal=len(set(values)) == 1,
        loop_value=loop,
        max_neighbor_resolvent_distance=max_dist,
    )
