import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsfkit.errors import UnobservableError, ValidationError
from dsfkit.matrixnum import match_spectra
from dsfkit.realization import Constant, PartitionedRealization, sample_grid
from dsfkit.structure import (
    check_viability,
    dsf_from_viable,
    place_pair_poles,
    sparsity_of,
    target_matrix,
    unobservable_modes,
    viable_pair,
)

from systems import random_base, stable_targets


def scalar_base():
    # 2 states, 1 output, plant (lam + 1) / ((lam - 1)(lam + 2)) style
    return PartitionedRealization([[1.0]], [[1.0]], [[2.0]], [[-1.0]], [[1.0]], [[0.5]])


def test_viable_pair_k_zero_blocks():
    base = scalar_base()
    vp = viable_pair(base)
    np.testing.assert_array_equal(vp.W.A, base.A22)
    np.testing.assert_array_equal(vp.W.B, base.A21)
    np.testing.assert_array_equal(vp.W.D, base.A11)
    np.testing.assert_array_equal(vp.V.B, base.B2)
    np.testing.assert_array_equal(vp.V.D, base.B1)


def test_viable_pair_full_order_output():
    base = PartitionedRealization([[0.0, 1.0], [-2.0, -3.0]], np.zeros((2, 0)), np.zeros((0, 2)),
                                  np.zeros((0, 0)), [[0.0], [1.0]], np.zeros((0, 1)))
    vp = viable_pair(base)
    assert vp.W.n == 0
    np.testing.assert_array_equal(vp.W.evaluate(1.0).real, base.A11)


def test_viable_pair_rejects_wrong_k_shape():
    with pytest.raises(ValidationError, match="K must be 1x1"):
        viable_pair(scalar_base(), np.ones((2, 2)))


@pytest.mark.parametrize("domain", ["continuous", "discrete"])
@pytest.mark.parametrize("seed", range(4))
def test_viable_identity_random_k(seed, domain):
    rng = np.random.default_rng(seed)
    base = random_base(rng, 7, 3, 2, domain)
    vp = viable_pair(base, rng.standard_normal((4, 3)))
    for lam in sample_grid([vp.plant, vp.W, vp.V], rng, 20):
        assert vp.identity_error(lam) < 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000))
def test_viable_identity_property(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, 4))
    n = int(rng.integers(p, 8))
    base = random_base(rng, n, p, 2)
    vp = viable_pair(base, 2 * rng.standard_normal((n - p, p)))
    report = check_viability(vp, rng)
    assert report.passed, report


def test_dsf_identity_and_zero_diagonal():
    rng = np.random.default_rng(11)
    base = random_base(rng, 6, 3, 2)
    vp = viable_pair(base, rng.standard_normal((3, 3)))
    dsf = dsf_from_viable(vp)
    for lam in sample_grid([vp.plant, vp.W, vp.V], rng, 20):
        L = vp.plant.evaluate(lam)
        assert np.linalg.norm(dsf.transfer(lam) - L) < 1e-8 * np.linalg.norm(L)
        Q = dsf.Q.evaluate(lam)
        assert np.max(np.abs(np.diag(Q))) <= 1e-10 * max(1.0, np.abs(Q).max())


def test_dsf_diagonal_w_gives_zero_q():
    base = PartitionedRealization(np.diag([1.0, 2.0]), np.zeros((2, 0)), np.zeros((0, 2)),
                                  np.zeros((0, 0)), np.eye(2), np.zeros((0, 2)))
    dsf = dsf_from_viable(viable_pair(base))
    np.testing.assert_array_equal(dsf.Q.evaluate(3.0), np.zeros((2, 2)))
    np.testing.assert_allclose(dsf.P.evaluate(3.0), np.diag([1 / 2, 1 / 1]))


def test_target_matrix_spectrum():
    targets = [-1.0, -2 + 1j, -2 - 1j]
    G = target_matrix(targets)
    assert G.dtype == float
    assert match_spectra(np.linalg.eigvals(G), targets) < 1e-12


def test_target_matrix_rejects_unpaired_complex():
    with pytest.raises(ValidationError, match="conjugation"):
        target_matrix([-1 + 1j, -2.0])


def test_placement_scalar():
    base = PartitionedRealization([[0.0]], [[1.0]], [[0.0]], [[2.0]], [[1.0]], [[0.0]])
    K = place_pair_poles(base, [-3.0])
    assert K[0, 0] == pytest.approx(-5.0)


def test_placement_unobservable():
    base = PartitionedRealization(np.eye(1), [[0.0, 1.0]], np.zeros((2, 1)),
                                  np.diag([-4.0, 1.0]), [[1.0]], np.zeros((2, 1)))
    with pytest.raises(UnobservableError) as info:
        place_pair_poles(base, [-1.0, -2.0])
    assert info.value.modes == [pytest.approx(-4.0)]
    assert unobservable_modes(base.A22, base.A12) == [pytest.approx(-4.0)]


def test_placement_wrong_count():
    with pytest.raises(ValidationError, match="need 1 target"):
        place_pair_poles(scalar_base(), [-1.0, -2.0])


@pytest.mark.parametrize("domain", ["continuous", "discrete"])
@pytest.mark.parametrize("seed", range(10))
def test_placement_random(seed, domain):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, 4))
    r = int(rng.integers(1, 7))
    base = random_base(rng, p + r, p, 2, domain)
    targets = stable_targets(rng, r, domain)
    K = place_pair_poles(base, targets, rng)
    assert match_spectra(np.linalg.eigvals(base.A22 + K @ base.A12), targets) < 1e-6


def test_placement_repeated_targets():
    rng = np.random.default_rng(4)
    base = random_base(rng, 5, 1, 1)
    K = place_pair_poles(base, [-1.0] * 4, rng)
    eigs = np.linalg.eigvals(base.A22 + K @ base.A12)
    assert abs(eigs.mean() + 1.0) < 1e-6
    assert np.max(np.abs(eigs + 1.0)) < 1e-2


def test_sparsity_constant():
    pat = sparsity_of(Constant(np.array([[1.0, 0.0], [1e-12, 2.0]])))
    assert pat.nonzeros() == {(0, 0), (1, 1)}
    assert len(pat.samples) == 20


def test_sparsity_needs_samples():
    with pytest.raises(ValidationError, match="at least 10"):
        sparsity_of(Constant(np.eye(2)), nsamples=5)


def test_viability_degree_bound():
    rng = np.random.default_rng(8)
    base = random_base(rng, 6, 2, 1)
    report = check_viability(viable_pair(base, rng.standard_normal((4, 2))), rng)
    assert report.passed and report.degree <= report.bound == 4
