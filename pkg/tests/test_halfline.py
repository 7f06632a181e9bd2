import numpy as np
import pytest

from diracflow.circle import (
    CircleGrid,
    GaugeMap,
    boundary_splitting_from_F,
    build_boundary_dirac,
)
from diracflow.halfline import (
    CutoffPair,
    HalfCylModel,
    ImageHeatKernel,
    factorized_boundary_term,
    half_trace_integral,
    image_kernel_diagonal_difference,
    image_kernel_semigroup_defect,
    plateau_reference,
    smooth_bump,
    verify_mixed_domain,
    verify_U_identities,
)


def test_image_kernel_values():
    k = ImageHeatKernel(0.1, -1)
    x, y = 0.3, 0.7
    pref = 1.0 / np.sqrt(0.4 * np.pi)
    expected = pref * (np.exp(-(x - y) ** 2 / 0.4) - np.exp(-(x + y) ** 2 / 0.4))
    assert k(x, y) == pytest.approx(expected, rel=1e-14)
    assert k(0.0, y) == pytest.approx(0.0, abs=1e-15)  # Dirichlet at the wall
    kn = ImageHeatKernel(0.1, +1)
    h = 1e-6
    assert kn(h, y) == pytest.approx(kn(-h, y), rel=1e-12)  # even across the wall
    with pytest.raises(ValueError):
        ImageHeatKernel(-1.0, 1)
    with pytest.raises(ValueError):
        ImageHeatKernel(1.0, 2)


def test_diagonal_difference_formula():
    xs = np.linspace(0.0, 2.0, 11)
    eps = 0.05
    km = ImageHeatKernel(eps, -1)
    kp = ImageHeatKernel(eps, +1)
    direct = km(xs, xs) - kp(xs, xs)
    assert np.abs(direct - image_kernel_diagonal_difference(eps, xs)).max() < 1e-14


def test_cutoff_pair_structure():
    cut = CutoffPair(0.5, 1.0)
    xs = np.linspace(0.0, 2.0, 401)
    mu, lam = cut.mu(xs), cut.lam(xs)
    assert np.all(mu[xs <= 0.5] == 1.0)
    assert np.all(mu[xs >= 1.0] == 0.0)
    assert np.all((0.0 <= mu) & (mu <= 1.0))
    assert np.all(lam[xs <= 1.0] == 1.0)
    assert cut.product_defect() == 0.0
    with pytest.raises(ValueError):
        CutoffPair(1.0, 0.5)


def test_bump_is_smooth_and_monotone():
    xs = np.linspace(0.5, 1.0, 2001)
    vals = smooth_bump(xs, 0.5, 1.0)
    assert np.all(np.diff(vals) <= 1e-12)


def test_half_trace_half_factor():
    cut = CutoffPair(0.5, 1.0)
    for eps in (0.01, 0.02, 0.04):
        val = half_trace_integral(eps, cut)
        assert abs(val - 0.5) <= 1e-10, eps
        assert abs(val - 0.5) <= np.exp(-0.25 / (2.0 * eps))


def test_plateau_reference():
    assert plateau_reference(0.01, 0.5) == pytest.approx(0.5, abs=1e-12)
    assert plateau_reference(1.0, 0.5) < 0.5


def test_mixed_domain_agreement():
    checks = verify_mixed_domain(0.02, betas=[0.0, 1.0, 2.0])
    assert len(checks) == 6
    assert max(c.max_deviation for c in checks) < 1e-6
    with pytest.raises(ValueError):
        verify_mixed_domain(0.02, betas=[0.0], X=0.3)


def test_semigroup_property():
    pts = [(0.1, 0.2), (0.5, 0.5), (1.0, 0.3)]
    for sign in (-1, +1):
        assert image_kernel_semigroup_defect(0.02, 0.03, sign, pts) <= 1e-8


def test_U_identities():
    rng = np.random.default_rng(6)
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    B = 0.5 * (a + a.conj().T)
    F = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)
    B = 0.5 * (B + F @ B @ F)  # enforce [B, F] = 0
    rep = verify_U_identities(B, F)
    assert rep.max_residual() <= 1e-12


def test_halfcyl_model_invariants():
    grid = CircleGrid(9)
    B = build_boundary_dirac(grid, 2)
    F = np.broadcast_to(np.diag([1.0, -1.0]).astype(complex), (9, 2, 2)).copy()
    model = HalfCylModel(boundary=B, splitting=boundary_splitting_from_F(F))
    Fmat = model.F_matrix()
    assert np.abs(Fmat @ Fmat - np.eye(18)).max() <= 1e-12
    bad = np.broadcast_to((2.0 * np.eye(2)).astype(complex), (9, 2, 2)).copy()
    with pytest.raises(ValueError):
        HalfCylModel(boundary=B, splitting=boundary_splitting_from_F(bad))


def test_factorized_boundary_term_consistency():
    grid = CircleGrid(33)
    B = build_boundary_dirac(grid, 2)
    F = np.broadcast_to(np.diag([1.0, -1.0]).astype(complex), (33, 2, 2)).copy()
    model = HalfCylModel(boundary=B, splitting=boundary_splitting_from_F(F))
    g = GaugeMap.diagonal(GaugeMap.exp_winding(grid, 1), GaugeMap.exp_winding(grid, -1))
    term = factorized_boundary_term(model, g, eps=2.0)
    # the two evaluations of the same trace must agree, and at this scale both
    # sit on the integer plateau 0.5*(1 - (-1)) = 1
    assert term.value == pytest.approx(term.split_value, abs=1e-6)
    assert term.value == pytest.approx(1.0, abs=0.05)
    assert term.half_factor == pytest.approx(0.5, abs=1e-9)
    assert term.plus_term == pytest.approx(1.0, abs=0.05)
    assert term.minus_term == pytest.approx(-1.0, abs=0.05)
