import numpy as np
import pytest

from diracflow.flow import (
    OperatorPath,
    PinnedZeroError,
    conjugation_path,
    homotopy_check,
    resolvent_distance,
    spectral_flow,
)
from diracflow.linalg import SelfAdjointOp


def diag_path(fn, dim=1):
    def sample(t):
        return SelfAdjointOp(np.atleast_2d(np.diag(np.atleast_1d(fn(t)))).astype(complex))

    return OperatorPath(dim=dim, sample=sample)


def brute_force_flow(sample, dim, n_grid=4001, zero_tol=1e-12):
    """Fine-grid branch-tracking oracle: signed count of sorted eigenvalue
    branches crossing 0, with endpoint zeros counted as nonnegative."""
    ts = np.linspace(0.0, 1.0, n_grid)
    prev = None
    total = 0
    for t in ts:
        eigs = np.linalg.eigvalsh(sample(t).entries)
        nonneg = eigs > -zero_tol
        if prev is not None:
            total += int(nonneg.sum()) - int(prev.sum())
        prev = nonneg
    return total


def test_endpoint_convention_triple():
    assert spectral_flow(diag_path(lambda t: t - 0.5)).value == 1
    assert spectral_flow(diag_path(lambda t: t)).value == 0
    assert spectral_flow(diag_path(lambda t: t - 1.0)).value == 1


def test_integer_shift_spectrum():
    M = 10
    path = diag_path(lambda t: np.arange(-M, M + 1) + t, dim=2 * M + 1)
    assert spectral_flow(path).value == 1


def test_constant_path_is_zero():
    path = diag_path(lambda t: np.array([-1.0, 0.0, 2.0]), dim=3)
    assert spectral_flow(path).value == 0


def test_downward_crossing():
    assert spectral_flow(diag_path(lambda t: 0.5 - t)).value == -1


def test_path_additivity():
    fn = lambda t: np.array([t - 0.3, 0.8 - t])
    full = spectral_flow(diag_path(fn, dim=2)).value
    first = spectral_flow(diag_path(lambda t: fn(0.5 * t), dim=2)).value
    second = spectral_flow(diag_path(lambda t: fn(0.5 + 0.5 * t), dim=2)).value
    assert full == first + second == 0


def test_unitary_conjugation_invariance():
    rng = np.random.default_rng(21)
    m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    U, _ = np.linalg.qr(m)
    base = lambda t: np.diag(np.array([t - 0.4, -t, 1.0, t - 1.0])).astype(complex)
    p1 = OperatorPath(dim=4, sample=lambda t: SelfAdjointOp(base(t)))
    p2 = OperatorPath(
        dim=4, sample=lambda t: SelfAdjointOp(U @ base(t) @ U.conj().T, herm_tol=1e-10)
    )
    assert spectral_flow(p1).value == spectral_flow(p2).value


def test_random_affine_paths_match_brute_force():
    for seed in range(10):
        rng = np.random.default_rng(1000 + seed)
        a = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        b = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        D = SelfAdjointOp(0.5 * (a + a.conj().T))
        V = 2.0 * 0.5 * (b + b.conj().T)
        path = conjugation_path(D, V)
        expected = brute_force_flow(path.sample, 8)
        assert spectral_flow(path).value == expected, f"seed {seed}"


def test_pinned_zero_error():
    # nearly-degenerate pair moving fast relative to its spacing, no rate
    # hint: refinement cannot certify an admissible level at depth 0
    def sample(t):
        return SelfAdjointOp(np.diag([0.1 + 0.1 * t, 0.1 + 0.1 * t + 1e-8]).astype(complex))

    path = OperatorPath(dim=2, sample=sample)
    with pytest.raises(PinnedZeroError):
        spectral_flow(path, init_samples=2, max_depth=0)


def test_crossings_report():
    res = spectral_flow(diag_path(lambda t: t - 0.5))
    assert res.value == 1
    assert len(res.crossings) == 1
    c = res.crossings[0]
    assert c.direction == 1
    assert c.t == pytest.approx(0.5, abs=0.1)
    assert c.slope == pytest.approx(1.0, abs=1e-6)
    csv_text = res.crossings_csv()
    assert csv_text.splitlines()[0] == "t_cross,branch_index,direction,slope"


def test_conjugation_path_rejects_nonhermitian():
    D = SelfAdjointOp(np.eye(2))
    with pytest.raises(ValueError):
        conjugation_path(D, np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_conjugation_path_lipschitz_hint():
    D = SelfAdjointOp(np.zeros((2, 2)))
    V = np.diag([3.0, -1.0]).astype(complex)
    path = conjugation_path(D, V)
    assert path.lipschitz_hint == pytest.approx(3.0)


def test_resolvent_distance_zero_for_equal():
    H = SelfAdjointOp(np.diag([1.0, -2.0]).astype(complex))
    assert resolvent_distance(H, H) == 0.0


def test_homotopy_check():
    def family(s, t):
        return SelfAdjointOp(np.diag([t - 0.5 + 0.05 * s, 1.0]).astype(complex))

    rep = homotopy_check(family, dim=2)
    assert rep.all_equal
    assert rep.flow_values == (1, 1, 1, 1, 1)
    assert rep.loop_value == 0
    assert rep.max_neighbor_resolvent_distance < 0.2
