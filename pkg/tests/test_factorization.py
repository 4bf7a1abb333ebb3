import numpy as np
import pytest

from dsfkit.errors import UnstableError, ValidationError
from dsfkit.factorization import (
    CoprimeFactors,
    LeftFactor,
    default_left_factor,
    factors_from_dict,
    factors_to_dict,
    injection_gain,
    output_injection_factors,
    stable_coprime_from_viable,
)
from dsfkit.matrixnum import match_spectra, relative_error
from dsfkit.netbuild import compose, line_spec, ring_spec
from dsfkit.realization import LambdaIdentity, StateSpace, sample_grid, to_output_canonical
from dsfkit.structure import sparsity_of, viable_pair
from dsfkit.verify import left_coprime_certificate

from systems import random_base, stable_pair_K, stable_targets


def stable_pair(seed, n=6, p=2, m=2, domain="continuous"):
    rng = np.random.default_rng(seed)
    base = random_base(rng, n, p, m, domain)
    return rng, viable_pair(base, stable_pair_K(rng, base))


def random_left_factor(rng, p, domain):
    Ax = np.diag(stable_targets(rng, p, domain)).real if p == 1 else None
    if Ax is None:
        S = rng.standard_normal((p, p)) + 2 * np.eye(p)
        vals = [-rng.uniform(0.5, 2) if domain == "continuous" else rng.uniform(-0.6, 0.6)
                for _ in range(p)]
        Ax = S @ np.diag(vals) @ np.linalg.inv(S)
    T4 = rng.standard_normal((p, p)) + 2 * np.eye(p)
    T5 = rng.standard_normal((p, p)) + 2 * np.eye(p)
    return LeftFactor(Ax, T4, T5, domain)


def test_left_factor_validation():
    with pytest.raises(UnstableError):
        LeftFactor([[1.0]], [[1.0]], [[1.0]])
    with pytest.raises(UnstableError):
        LeftFactor([[1.2]], [[1.0]], [[1.0]], "discrete")
    with pytest.raises(ValidationError, match="T4"):
        LeftFactor([[-1.0]], [[0.0]], [[1.0]])
    assert default_left_factor(2, "discrete").Ax[0, 0] == pytest.approx(0.2)


@pytest.mark.parametrize("domain", ["continuous", "discrete"])
@pytest.mark.parametrize("seed", range(5))
def test_factor_spectrum_and_identity(seed, domain):
    rng, vp = stable_pair(seed, domain=domain)
    left = random_left_factor(rng, vp.p, domain)
    cf = stable_coprime_from_viable(vp, left)
    assert cf.is_stable()
    expected = np.concatenate([np.linalg.eigvals(left.Ax), np.linalg.eigvals(vp.pole_matrix)])
    assert match_spectra(cf.poles, expected) < 1e-8
    for lam in sample_grid([vp.plant, cf.joint], rng, 20):
        assert relative_error(vp.plant.evaluate(lam), cf.transfer(lam)) < 1e-8


def test_factor_is_left_factor_times_pair():
    rng, vp = stable_pair(3)
    left = LeftFactor(np.diag([-1.0, -2.0]), np.eye(2), np.eye(2))
    cf = stable_coprime_from_viable(vp, left)
    for lam in sample_grid([vp.W, vp.V, cf.joint], rng, 10):
        # the left factor is (lam I - Ax)^{-1} for T4 = T5 = I
        X = np.linalg.inv(lam * np.eye(2) - left.Ax)
        ref = X @ np.hstack([lam * np.eye(2) - vp.W.evaluate(lam), vp.V.evaluate(lam)])
        np.testing.assert_allclose(cf.joint.evaluate(lam), ref, atol=1e-10 * np.abs(ref).max())


@pytest.mark.parametrize("spec", [ring_spec, line_spec])
def test_diagonal_left_factor_preserves_masks(spec):
    sys_ = compose(spec())
    base, _ = to_output_canonical(sys_)
    vp = viable_pair(base)
    cf = stable_coprime_from_viable(vp, LeftFactor(np.diag([-1.0, -2.0, -3.0]), np.eye(3), np.eye(3)))
    rng = np.random.default_rng(0)
    mw = sparsity_of(LambdaIdentity(3) - vp.W, rng=rng).mask
    mv = sparsity_of(vp.V, rng=rng).mask
    mm = sparsity_of(cf.M, rng=rng).mask
    mn = sparsity_of(cf.N, rng=rng).mask
    np.testing.assert_array_equal(mm, mw)
    np.testing.assert_array_equal(mn, mv)


def test_unstable_pair_rejected():
    from dsfkit.realization import PartitionedRealization

    base = PartitionedRealization([[0.0]], [[1.0]], [[0.0]], [[1.0]], [[1.0]], [[0.0]])
    with pytest.raises(UnstableError) as info:
        stable_coprime_from_viable(viable_pair(base), default_left_factor(1))
    assert info.value.eigenvalues == [pytest.approx(1.0)]


def test_left_factor_size_mismatch():
    _, vp = stable_pair(1)
    with pytest.raises(ValidationError, match="outputs"):
        stable_coprime_from_viable(vp, default_left_factor(3))


@pytest.mark.parametrize("domain", ["continuous", "discrete"])
@pytest.mark.parametrize("seed", range(5))
def test_output_injection_matches(seed, domain):
    rng, vp = stable_pair(seed + 20, domain=domain)
    left = random_left_factor(rng, vp.p, domain)
    cf = stable_coprime_from_viable(vp, left)
    F = injection_gain(vp.base, vp.K, left.Ax, left.T4)
    injected = output_injection_factors(vp.plant, -F, np.linalg.inv(left.T5 @ left.T4))
    for lam in sample_grid([cf.joint, injected.joint], rng, 20):
        assert relative_error(cf.joint.evaluate(lam), injected.joint.evaluate(lam)) < 1e-8


def test_output_injection_requires_stability():
    sys_ = StateSpace([[1.0]], [[1.0]], [[1.0]], [[0.0]])
    with pytest.raises(UnstableError):
        output_injection_factors(sys_, [[0.0]])
    cf = output_injection_factors(sys_, [[3.0]])
    assert cf.poles[0] == pytest.approx(-2.0)


def test_output_injection_warns_on_uncontrollable():
    sys_ = StateSpace(np.diag([-1.0, -2.0]), [[1.0], [0.0]], [[1.0, 1.0]], [[0.0]])
    with pytest.warns(UserWarning, match="not controllable"):
        cf = output_injection_factors(sys_, [[0.0], [0.0]])
    assert cf.notes


def test_factors_are_coprime():
    rng, vp = stable_pair(7)
    cf = stable_coprime_from_viable(vp, default_left_factor(vp.p))
    assert left_coprime_certificate(cf.M, cf.N, rng).passed


def test_factor_dict_roundtrip():
    _, vp = stable_pair(2)
    cf = stable_coprime_from_viable(vp, default_left_factor(vp.p))
    back, name = factors_from_dict(factors_to_dict(cf, "f"))
    assert name == "f" and back.m_cols == cf.m_cols
    np.testing.assert_array_equal(back.joint.A, cf.joint.A)
    with pytest.raises(ValidationError, match="kind"):
        factors_from_dict({**factors_to_dict(cf), "kind": "other"})


def test_m_must_be_square():
    with pytest.raises(ValidationError):
        CoprimeFactors(StateSpace(np.zeros((0, 0)), np.zeros((0, 3)), np.zeros((2, 0)),
                                  np.zeros((2, 3))), 1)
