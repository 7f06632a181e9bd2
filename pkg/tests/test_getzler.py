import numpy as np
import pytest
import scipy.integrate
import scipy.linalg
from scipy.special import erf

from diracflow.getzler import eps_sweep, getzler_estimate, shifted_estimate
from diracflow.linalg import SelfAdjointOp


def test_commuting_case_matches_erf_telescope():
    # D and V diagonal: the flow integral telescopes to a sum of erf increments
    d = np.array([-1.3, -0.2, 0.4, 2.0])
    v = np.array([1.0, 1.0, -0.5, 0.3])
    D = SelfAdjointOp(np.diag(d).astype(complex))
    eps = 2.0
    oracle = 0.5 * sum(
        erf(np.sqrt(eps) * (di + vi)) - erf(np.sqrt(eps) * di) for di, vi in zip(d, v)
    )
    est = getzler_estimate(D, np.diag(v).astype(complex), eps, tol=1e-12)
    assert est.converged
    assert est.value == pytest.approx(oracle, abs=1e-10)


def test_general_case_matches_expm_quadrature():
    rng = np.random.default_rng(17)
    a = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    b = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    D = SelfAdjointOp(0.5 * (a + a.conj().T))
    V = 0.5 * (b + b.conj().T)
    eps = 1.5

    def integrand(u):
        H = D.entries + u * V
        return np.trace(V @ scipy.linalg.expm(-eps * H @ H)).real

    direct, quad_err = scipy.integrate.quad(integrand, 0.0, 1.0, epsabs=1e-11)
    oracle = np.sqrt(eps / np.pi) * direct
    est = getzler_estimate(D, V, eps, tol=1e-10)
    assert est.value == pytest.approx(oracle, abs=1e-6)


def test_eps_sweep_plateau_on_circle():
    from diracflow.circle import (
        CircleGrid,
        GaugeMap,
        analytic_gauge_commutator,
        build_boundary_dirac,
        boundary_sf,
    )

    grid = CircleGrid(33)
    g = GaugeMap.exp_winding(grid, 1)
    B = build_boundary_dirac(grid, 1)
    V = analytic_gauge_commutator(B, g)
    est = eps_sweep(B.op, V, [1.0, 4.0, 9.0, 16.0, 25.0])
    assert est.plateau is not None
    assert est.sf_estimate == boundary_sf(B, g) == 1
    assert abs(est.plateau_value - 1.0) < 0.05
    csv_text = est.sweep_csv()
    assert csv_text.splitlines()[0] == "eps,value"
    assert len(csv_text.splitlines()) == 6


def test_shifted_estimate_removes_degeneracy():
    D = SelfAdjointOp(np.diag([0.0, -1.0, 1.0]).astype(complex))
    V = np.eye(3)
    est = shifted_estimate(D, V, eps=4.0, shift=0.25)
    assert est.converged
    with pytest.raises(ValueError):
        shifted_estimate(D, V, eps=4.0, shift=5.0)


def test_eps_grid_must_ascend():
    D = SelfAdjointOp(np.diag([1.0, -1.0]).astype(complex))
    with pytest.raises(ValueError):
        eps_sweep(D, np.eye(2), [1.0, 1.0, 2.0])


def test_eps_must_be_positive():
    D = SelfAdjointOp(np.diag([1.0, -1.0]).astype(complex))
    with pytest.raises(ValueError):
        getzler_estimate(D, np.eye(2), 0.0)
