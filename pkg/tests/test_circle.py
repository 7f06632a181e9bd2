import json

import numpy as np
import pytest

from diracflow.circle import (
    CircleGrid,
    GaugeMap,
    analytic_gauge_commutator,
    boundary_sf,
    boundary_splitting_from_F,
    build_boundary_dirac,
    fourier_diff_matrix,
    load_gauge_json,
    restrict_gauge,
    split_by_F,
    winding_number,
)
from diracflow.linalg import eigvalsh


def test_grid_requires_odd():
    with pytest.raises(ValueError):
        CircleGrid(32)
    assert CircleGrid(33).nodes.shape == (33,)


def test_diff_matrix_exact_on_trig():
    n = 17
    D = fourier_diff_matrix(n)
    theta = CircleGrid(n).nodes
    for k in range(-(n // 2), n // 2 + 1):
        f = np.exp(1j * k * theta)
        assert np.abs(D @ f - 1j * k * f).max() < 1e-10 * max(1, abs(k))


def test_diff_matrix_antisymmetric_integer_spectrum():
    D = fourier_diff_matrix(33)
    assert np.abs(D + D.T).max() == 0.0
    ev = np.sort(eigvalsh(build_boundary_dirac(CircleGrid(33), 1).op))
    assert np.allclose(ev, np.arange(-16, 17), atol=1e-8)


def test_boundary_dirac_orientation():
    grid = CircleGrid(9)
    B = build_boundary_dirac(grid, 1, orientation=-1)
    assert np.allclose(B.op.entries, -build_boundary_dirac(grid, 1).op.entries)
    with pytest.raises(ValueError):
        build_boundary_dirac(grid, 1, orientation=2)


def test_gauge_map_unitarity_enforced():
    grid = CircleGrid(9)
    vals = np.full((9, 1, 1), 2.0, dtype=complex)
    with pytest.raises(ValueError):
        GaugeMap(grid=grid, fiber_dim=1, values=vals)


def test_gauge_derivatives_analytic_vs_spectral():
    grid = CircleGrid(17)
    g = GaugeMap.exp_winding(grid, 2)
    spectral = GaugeMap(grid=grid, fiber_dim=1, values=g.values)
    assert np.abs(g.derivatives() - spectral.derivatives()).max() < 1e-10


def test_winding_numbers():
    grid = CircleGrid(33)
    for k in (-3, 0, 2):
        assert winding_number(GaugeMap.exp_winding(grid, k)) == k
    g = GaugeMap.diagonal(
        GaugeMap.exp_winding(grid, 2), GaugeMap.exp_winding(grid, -3)
    )
    assert winding_number(g) == -1


def test_load_gauge_json_roundtrip():
    grid = CircleGrid(17)
    doc = {
        "fiber_dim": 1,
        "terms": [{"k": 2, "coeff": [[[1.0, 0.0]]]}],
    }
    g = load_gauge_json(grid, json.dumps(doc))
    assert winding_number(g) == 2
    bad = {"fiber_dim": 1, "terms": [{"k": 1, "coeff": [[[1.0]]]}]}
    with pytest.raises(ValueError):
        load_gauge_json(grid, bad)


def test_analytic_commutator_scalar_gauge():
    grid = CircleGrid(17)
    B = build_boundary_dirac(grid, 1)
    V = analytic_gauge_commutator(B, GaugeMap.exp_winding(grid, 3))
    assert np.abs(V.entries - 3.0 * np.eye(17)).max() < 1e-12


def test_sf_equals_winding():
    for n in (33, 65):
        grid = CircleGrid(n)
        B = build_boundary_dirac(grid, 1)
        for k in (-2, 0, 3):
            assert boundary_sf(B, GaugeMap.exp_winding(grid, k)) == k


def test_splitting_rank_and_errors():
    F = np.broadcast_to(np.diag([1.0, -1.0]).astype(complex), (9, 2, 2)).copy()
    split = boundary_splitting_from_F(F)
    assert split.rank_plus == 1 and split.rank_minus == 1
    assert np.abs(split.Pplus + split.Pminus - np.eye(2)).max() < 1e-12
    with pytest.raises(ValueError):
        boundary_splitting_from_F(np.zeros((9, 2, 2), dtype=complex))
    varying = F.copy()
    varying[0] = -np.eye(2)
    with pytest.raises(ValueError):
        boundary_splitting_from_F(varying)


def test_split_by_F_and_restricted_flows():
    grid = CircleGrid(33)
    B = build_boundary_dirac(grid, 2)
    F = np.broadcast_to(np.diag([1.0, -1.0]).astype(complex), (33, 2, 2)).copy()
    split = boundary_splitting_from_F(F)
    Bp, Bm = split_by_F(B, split, product_flag=True)
    assert Bp.dim == Bm.dim == 33
    g = GaugeMap.diagonal(GaugeMap.exp_winding(grid, 2), GaugeMap.exp_winding(grid, -1))
    assert boundary_sf(Bp, g) == 2
    assert boundary_sf(Bm, g) == -1
    assert boundary_sf(B, g) == 1


def test_empty_negative_bundle_flow_is_zero():
    grid = CircleGrid(17)
    B = build_boundary_dirac(grid, 1)
    split = boundary_splitting_from_F(np.ones((17, 1, 1), dtype=complex))
    Bp, Bm = split_by_F(B, split, product_flag=True)
    assert Bm.dim == 0
    assert boundary_sf(Bm, GaugeMap.exp_winding(grid, 2)) == 0
    assert boundary_sf(Bp, GaugeMap.exp_winding(grid, 2)) == 2


def test_restrict_gauge_requires_commutation():
    grid = CircleGrid(9)
    F = np.broadcast_to(np.diag([1.0, -1.0]).astype(complex), (9, 2, 2)).copy()
    split = boundary_splitting_from_F(F)
    swap = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    g = GaugeMap.from_fourier_terms(grid, 2, [(0, swap)])
    with pytest.raises(ValueError):
        restrict_gauge(g, split.frames_plus)


def test_orientation_reverses_flow():
    grid = CircleGrid(33)
    Brev = build_boundary_dirac(grid, 1, orientation=-1)
    assert boundary_sf(Brev, GaugeMap.exp_winding(grid, 2)) == -2
